"""Result aggregation and static SVG charts.

Consumes episode-record CSVs (and optionally training-curve CSVs), emits a
per-scenario summary table, a grouped bar chart of success rate and average
time-steps, and a training-curve chart when curves are present. All output
is a pure function of the input files: fixed canvas, fixed palette, fixed
float formatting, inputs processed in sorted order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from . import harness, sim

RECORDS_HEADER = "episode_id,scenario_id,seed,success,steps,terminal,cumulative_reward"
CURVE_HEADER = "step,mean_episode_reward,success_rate_window"

_TERMINALS = {"success", "collision", "timeout"}


class ReportError(ValueError):
    pass


@dataclass
class ReportSummary:
    table: dict[int, harness.SummaryStats]
    orderings: list[str]
    chart_path: str
    curve_chart_path: str | None = None


# ----------------------------------------------------------------- csv input


def classify_csv(path: str) -> str:
    """'records', 'curve', or error for an unrecognized header."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
    if header == RECORDS_HEADER:
        return "records"
    if header == CURVE_HEADER:
        return "curve"
    raise ReportError(f"{path}:1: unrecognized header {header!r}")


def read_records_csv(path: str) -> list[harness.EpisodeRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != RECORDS_HEADER:
        raise ReportError(f"{path}:1: expected header {RECORDS_HEADER!r}")
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ReportError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        try:
            episode_id, scenario_id = int(parts[0]), int(parts[1])
            seed = int(parts[2])
            success = int(parts[3])
            steps = int(parts[4])
            terminal = parts[5].strip()
            cumulative = float(parts[6])
            if success not in (0, 1):
                raise ValueError("success must be 0 or 1")
            if terminal not in _TERMINALS:
                raise ValueError(f"unknown terminal {terminal!r}")
            if steps < 0:
                raise ValueError("steps must be nonnegative")
        except ValueError as exc:
            raise ReportError(f"{path}:{lineno}: {exc}") from None
        records.append(
            harness.EpisodeRecord(
                episode_id=episode_id,
                scenario_id=scenario_id,
                seed=seed,
                success=bool(success),
                steps=steps,
                terminal=sim.TerminalReason(terminal),
                cumulative_reward=cumulative,
            )
        )
    return records


def read_curve_csv(path: str) -> list[tuple[int, float, float]]:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != CURVE_HEADER:
        raise ReportError(f"{path}:1: expected header {CURVE_HEADER!r}")
    curve = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ReportError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            curve.append((int(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ReportError(f"{path}:{lineno}: {exc}") from None
    return curve


# ----------------------------------------------------------------- summary


def summarize_by_scenario(
    records: list[harness.EpisodeRecord],
) -> dict[int, harness.SummaryStats]:
    by_id: dict[int, list[harness.EpisodeRecord]] = {}
    for r in records:
        by_id.setdefault(r.scenario_id, []).append(r)
    return {sid: harness.summarize(rows) for sid, rows in sorted(by_id.items())}


def comparison_orderings(table: dict[int, harness.SummaryStats]) -> list[str]:
    """Human-readable cross-scenario comparisons, where computable."""
    out = []
    def rate(i):
        return table[i].success_rate_percent
    def steps(i):
        return table[i].avg_steps
    if 1 in table and 3 in table:
        out.append(
            f"zero-shot A->B: success {rate(3):.2f}% vs scratch-A {rate(1):.2f}% "
            f"(delta {rate(3) - rate(1):+.2f} points), avg steps {steps(3):.1f} vs {steps(1):.1f}"
        )
    if 2 in table and 4 in table:
        out.append(
            f"zero-shot B->A: success {rate(4):.2f}% vs scratch-B {rate(2):.2f}% "
            f"(delta {rate(4) - rate(2):+.2f} points)"
        )
    if 3 in table and 5 in table:
        out.append(
            f"finetuned on B: success {rate(5):.2f}% vs zero-shot {rate(3):.2f}% "
            f"(delta {rate(5) - rate(3):+.2f} points), avg steps {steps(5):.1f} vs {steps(3):.1f}"
        )
    if 2 in table and 5 in table:
        out.append(
            f"finetuned vs scratch-B: success {rate(5):.2f}% vs {rate(2):.2f}% "
            f"(delta {rate(5) - rate(2):+.2f} points)"
        )
    return out


# ----------------------------------------------------------------- svg


def _svg_open(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


BAR_SUCCESS_COLOR = "#4878a8"
BAR_STEPS_COLOR = "#d08a3e"
CURVE_PALETTE = ["#4878a8", "#d08a3e", "#5a9e6f", "#b65c5c", "#8470a8", "#708090"]


def render_bar_chart(table: dict[int, harness.SummaryStats]) -> str:
    """Grouped bars per scenario: success rate (left axis, %) and average
    time-steps (right axis)."""
    width, height = 860, 400
    left, right, top, bottom = 70, 70, 56, 64
    plot_w = width - left - right
    plot_h = height - top - bottom
    sids = sorted(table)
    max_steps = max((table[s].avg_steps for s in sids), default=1.0)
    steps_cap = max(1.0, max_steps * 1.15)

    parts = _svg_open(width, height)
    parts.append(
        f'<text x="{width // 2}" y="28" text-anchor="middle" font-size="18">'
        "Success rate and average time-steps by scenario</text>"
    )
    # axes
    x0, y0 = left, top + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{top}" x2="{x0}" y2="{y0}" stroke="black"/>'
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>'
        f'<line x1="{x0 + plot_w}" y1="{top}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y0 - frac * plot_h
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="12">'
            f"{_fmt(frac * 100)}</text>"
        )
        parts.append(
            f'<text x="{x0 + plot_w + 8}" y="{_fmt(y + 4)}" text-anchor="start" '
            f'font-size="12">{_fmt(frac * steps_cap)}</text>'
        )
        if frac > 0:
            parts.append(
                f'<line x1="{x0}" y1="{_fmt(y)}" x2="{x0 + plot_w}" y2="{_fmt(y)}" '
                'stroke="#dddddd"/>'
            )
    parts.append(
        f'<text x="22" y="{top + plot_h // 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 22 {top + plot_h // 2})">success rate (%)</text>'
    )
    parts.append(
        f'<text x="{width - 18}" y="{top + plot_h // 2}" font-size="13" '
        f'text-anchor="middle" transform="rotate(90 {width - 18} {top + plot_h // 2})">'
        "avg time-steps</text>"
    )
    group_w = plot_w / max(len(sids), 1)
    bar_w = min(34.0, group_w / 3)
    for i, sid in enumerate(sids):
        cx = x0 + (i + 0.5) * group_w
        s = table[sid]
        h_rate = plot_h * s.success_rate_percent / 100.0
        h_steps = plot_h * s.avg_steps / steps_cap
        parts.append(
            f'<rect x="{_fmt(cx - bar_w - 2)}" y="{_fmt(y0 - h_rate)}" '
            f'width="{_fmt(bar_w)}" height="{_fmt(h_rate)}" fill="{BAR_SUCCESS_COLOR}"/>'
        )
        parts.append(
            f'<rect x="{_fmt(cx + 2)}" y="{_fmt(y0 - h_steps)}" '
            f'width="{_fmt(bar_w)}" height="{_fmt(h_steps)}" fill="{BAR_STEPS_COLOR}"/>'
        )
        parts.append(
            f'<text x="{_fmt(cx - bar_w / 2 - 2)}" y="{_fmt(y0 - h_rate - 6)}" '
            f'text-anchor="middle" font-size="11">{_fmt(s.success_rate_percent)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(cx + bar_w / 2 + 2)}" y="{_fmt(y0 - h_steps - 6)}" '
            f'text-anchor="middle" font-size="11">{_fmt(s.avg_steps)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(cx)}" y="{y0 + 22}" text-anchor="middle" font-size="13">'
            f"scenario {sid}</text>"
        )
    # legend
    lx = left + 6
    parts.append(
        f'<rect x="{lx}" y="{top - 18}" width="12" height="12" fill="{BAR_SUCCESS_COLOR}"/>'
        f'<text x="{lx + 18}" y="{top - 8}" font-size="12">success rate</text>'
        f'<rect x="{lx + 120}" y="{top - 18}" width="12" height="12" fill="{BAR_STEPS_COLOR}"/>'
        f'<text x="{lx + 138}" y="{top - 8}" font-size="12">avg time-steps</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_curve_chart(curves: dict[str, list[tuple[int, float, float]]]) -> str:
    """Two stacked panels over agent steps: rolling success window and mean
    episode reward, one polyline per input curve."""
    width, height = 860, 520
    left, right = 70, 30
    panel_h, top1, top2 = 180, 60, 300
    plot_w = width - left - right
    names = sorted(curves)
    max_step = max((pt[0] for name in names for pt in curves[name]), default=1)
    rewards = [pt[1] for name in names for pt in curves[name]]
    r_lo, r_hi = (min(rewards), max(rewards)) if rewards else (0.0, 1.0)
    if r_hi - r_lo < 1e-9:
        r_hi = r_lo + 1.0
    pad = 0.05 * (r_hi - r_lo)
    r_lo, r_hi = r_lo - pad, r_hi + pad

    def x_of(step):
        return left + plot_w * step / max_step

    parts = _svg_open(width, height)
    parts.append(
        f'<text x="{width // 2}" y="28" text-anchor="middle" font-size="18">'
        "Training curves</text>"
    )
    for top, label in ((top1, "success window (%)"), (top2, "mean episode reward")):
        y0 = top + panel_h
        parts.append(
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{y0}" stroke="black"/>'
            f'<line x1="{left}" y1="{y0}" x2="{left + plot_w}" y2="{y0}" stroke="black"/>'
        )
        parts.append(
            f'<text x="22" y="{top + panel_h // 2}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 22 {top + panel_h // 2})">{label}</text>'
        )
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xt = left + frac * plot_w
            parts.append(
                f'<text x="{_fmt(xt)}" y="{y0 + 18}" text-anchor="middle" font-size="11">'
                f"{int(round(frac * max_step))}</text>"
            )
    # success panel y labels 0..100
    for frac in (0.0, 0.5, 1.0):
        y = top1 + panel_h - frac * panel_h
        parts.append(
            f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">'
            f"{_fmt(frac * 100)}</text>"
        )
    for frac in (0.0, 0.5, 1.0):
        y = top2 + panel_h - frac * panel_h
        val = r_lo + frac * (r_hi - r_lo)
        parts.append(
            f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">'
            f"{_fmt(val)}</text>"
        )
    for idx, name in enumerate(names):
        color = CURVE_PALETTE[idx % len(CURVE_PALETTE)]
        pts = curves[name]
        win = " ".join(
            f"{_fmt(x_of(s))},{_fmt(top1 + panel_h - panel_h * w / 100.0)}"
            for s, _, w in pts
        )
        rew = " ".join(
            f"{_fmt(x_of(s))},{_fmt(top2 + panel_h - panel_h * (r - r_lo) / (r_hi - r_lo))}"
            for s, r, _ in pts
        )
        if win:
            parts.append(f'<polyline points="{win}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        if rew:
            parts.append(f'<polyline points="{rew}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = 42 + 16 * idx
        parts.append(
            f'<line x1="{width - 220}" y1="{ly - 4}" x2="{width - 196}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="3"/>'
            f'<text x="{width - 190}" y="{ly}" font-size="12">{name}</text>'
        )
    parts.append(f'<text x="{width // 2}" y="{height - 8}" text-anchor="middle" font-size="12">agent steps</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ----------------------------------------------------------------- driver


def generate_report(input_paths: list[str], out_dir: str) -> ReportSummary:
    """Aggregate the inputs and write summary.csv plus chart SVGs."""
    if not input_paths:
        raise ReportError("no input files")
    records: list[harness.EpisodeRecord] = []
    curves: dict[str, list[tuple[int, float, float]]] = {}
    for path in sorted(input_paths):
        kind = classify_csv(path)
        if kind == "records":
            records.extend(read_records_csv(path))
        else:
            stem = os.path.splitext(os.path.basename(path))[0]
            name = stem
            n = 2
            while name in curves:
                name = f"{stem}-{n}"
                n += 1
            curves[name] = read_curve_csv(path)
    if not records:
        raise ReportError("no episode records among the inputs")
    table = summarize_by_scenario(records)

    os.makedirs(out_dir, exist_ok=True)
    lines = ["scenario_id,success_rate_percent,avg_steps,episodes"]
    for sid, s in table.items():
        lines.append(
            f"{sid},{repr(float(s.success_rate_percent))},"
            f"{repr(float(s.avg_steps))},{s.episodes}"
        )
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")

    chart_path = os.path.join(out_dir, "results.svg")
    with open(chart_path, "w", encoding="utf-8") as f:
        f.write(render_bar_chart(table))
    curve_chart_path = None
    if curves:
        curve_chart_path = os.path.join(out_dir, "curves.svg")
        with open(curve_chart_path, "w", encoding="utf-8") as f:
            f.write(render_curve_chart(curves))
    return ReportSummary(
        table=table,
        orderings=comparison_orderings(table),
        chart_path=chart_path,
        curve_chart_path=curve_chart_path,
    )
