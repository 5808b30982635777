"""Command-line entry point.

Subcommands: train, eval, finetune, scenario, report. Every config key is
also a long flag (`--sac.batch_size 128`), applied on top of any config
file. Exit codes: 0 success, 2 usage error, 1 runtime error. All file
output stays inside --out.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from . import config as cfgmod
from . import harness, report, sac


def _dest(key: str) -> str:
    return "cfg__" + key.replace(".", "__")


def _add_common(p: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        p.add_argument("--config", default=None, metavar="PATH",
                       help="config file of key = value lines")
        for key in cfgmod.DEFAULTS:
            p.add_argument(f"--{key}", dest=_dest(key), default=None,
                           metavar="VALUE", help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="DIR")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pegx",
        description="Peg-in-hole policy transfer lab: train, evaluate, "
                    "fine-tune, and report.",
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("train", help="train a policy from scratch")
    p.add_argument("--embodiment", required=True, choices=("A", "B"))
    p.add_argument("--steps", type=int, default=None,
                   help="agent steps (default: the embodiment's budget)")
    _add_common(p)
    p.set_defaults(func=_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the start grid")
    p.add_argument("--ckpt", required=True, metavar="PATH")
    p.add_argument("--embodiment", required=True, choices=("A", "B"))
    p.add_argument("--episodes", type=int, default=None,
                   help="grid size (default: config eval episodes)")
    _add_common(p)
    p.set_defaults(func=_eval)

    p = sub.add_parser("finetune", help="resume training on a new embodiment")
    p.add_argument("--ckpt", required=True, metavar="PATH")
    p.add_argument("--embodiment", required=True, choices=("A", "B"))
    p.add_argument("--steps", type=int, default=None,
                   help="agent steps (default: config finetune budget)")
    _add_common(p)
    p.set_defaults(func=_finetune)

    p = sub.add_parser("scenario", help="run one transfer scenario end to end")
    p.add_argument("--id", type=int, required=True, choices=sorted(harness.SCENARIOS))
    _add_common(p)
    p.set_defaults(func=_scenario)

    p = sub.add_parser("report", help="aggregate result CSVs into charts")
    p.add_argument("--in", dest="inputs", required=True, nargs="+", metavar="GLOB")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=_report)

    return parser


def _settings(args) -> harness.RunSettings:
    overrides = {}
    for key in cfgmod.DEFAULTS:
        value = getattr(args, _dest(key), None)
        if value is not None:
            overrides[key] = value
    cfg = cfgmod.load_config(getattr(args, "config", None), overrides)
    return cfgmod.settings_from_config(cfg)


def _train(args) -> int:
    settings = _settings(args)
    steps = args.steps
    if steps is None:
        steps = settings.train_steps_a if args.embodiment == "A" else settings.train_steps_b
    os.makedirs(args.out, exist_ok=True)
    seed_rng = np.random.default_rng(args.seed)
    init_seed = int(seed_rng.integers(0, 2**63))
    loop_seed = int(seed_rng.integers(0, 2**63))
    agent = sac.make_agent(
        9, 9, seed=init_seed, hp=settings.hp,
        actor_hidden=settings.actor_hidden, critic_hidden=settings.critic_hidden,
    )
    agent, curve = sac.train(
        settings.env_factory(args.embodiment, settings.noise_train),
        agent, steps, loop_seed,
        bounds=settings.bounds, weights=settings.weights,
        curve_every=settings.curve_every,
    )
    ckpt = harness.checkpoint_from_agent(agent, args.embodiment, steps, args.seed)
    ckpt_path = os.path.join(args.out, f"checkpoint_{args.embodiment}.json")
    harness.save_checkpoint(ckpt, ckpt_path)
    harness.write_curve_csv(curve, os.path.join(args.out, "curve.csv"))
    print(f"trained embodiment {args.embodiment} for {steps} steps -> {ckpt_path}")
    return 0


def _eval(args) -> int:
    settings = _settings(args)
    ckpt = harness.load_checkpoint(args.ckpt)
    episodes = args.episodes if args.episodes is not None else settings.eval_episodes
    os.makedirs(args.out, exist_ok=True)
    grid = harness.build_eval_grid(settings.geometry, episodes, args.seed)
    records = harness.evaluate(
        ckpt, settings.embodiment(args.embodiment), grid, settings, scenario_id=0
    )
    summary = harness.summarize(records)
    harness.write_records_csv(records, os.path.join(args.out, "records.csv"))
    harness.write_summary_csv(summary, 0, os.path.join(args.out, "summary.csv"))
    print(
        f"evaluated {summary.episodes} episodes on {args.embodiment}: "
        f"success {summary.success_rate_percent:.2f}%, avg steps {summary.avg_steps:.1f}"
    )
    return 0


def _finetune(args) -> int:
    settings = _settings(args)
    ckpt = harness.load_checkpoint(args.ckpt)
    steps = args.steps if args.steps is not None else settings.finetune_steps
    os.makedirs(args.out, exist_ok=True)
    target = settings.embodiment(args.embodiment)
    tuned, curve = harness.finetune(ckpt, target, steps, args.seed, settings)
    out_path = os.path.join(args.out, f"checkpoint_{args.embodiment}_finetuned.json")
    harness.save_checkpoint(tuned, out_path)
    harness.write_curve_csv(curve, os.path.join(args.out, "curve.csv"))
    print(f"finetuned on {args.embodiment} for {steps} steps -> {out_path}")
    return 0


def _scenario(args) -> int:
    settings = _settings(args)
    os.makedirs(args.out, exist_ok=True)
    summary, records, curve = harness.run_scenario(
        args.id, settings, args.seed, ckpt_dir=args.out
    )
    harness.write_records_csv(records, os.path.join(args.out, "records.csv"))
    harness.write_summary_csv(summary, args.id, os.path.join(args.out, "summary.csv"))
    if curve:
        harness.write_curve_csv(curve, os.path.join(args.out, "curve.csv"))
    print(
        f"scenario {args.id}: success {summary.success_rate_percent:.2f}% "
        f"over {summary.episodes} episodes, avg steps {summary.avg_steps:.1f}"
    )
    return 0


def _report(args) -> int:
    paths: list[str] = []
    for pattern in args.inputs:
        matched = glob.glob(pattern, recursive=True)
        paths.extend(matched if matched else ([pattern] if os.path.exists(pattern) else []))
    paths = sorted(set(paths))
    if not paths:
        print("pegx report: no input files matched", file=sys.stderr)
        return 2
    summary = report.generate_report(paths, args.out)
    for sid, s in summary.table.items():
        print(
            f"scenario {sid}: success {s.success_rate_percent:.2f}% "
            f"avg steps {s.avg_steps:.1f} ({s.episodes} episodes)"
        )
    for line in summary.orderings:
        print(line)
    print(f"charts -> {summary.chart_path}"
          + (f", {summary.curve_chart_path}" if summary.curve_chart_path else ""))
    return 0


def parse_and_dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return int(code)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (cfgmod.ConfigError, harness.CheckpointError, report.ReportError,
            ValueError, OSError) as exc:
        print(f"pegx: error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))
