"""Transfer experiment harness.

Five scenarios compare a policy across the two embodiments: train-on-self
for each platform, zero-shot evaluation of each platform's policy on the
other, and fine-tuning the first platform's policy on the second.
Evaluation always runs the same fixed grid of start positions with the
deterministic policy, and everything (training, grids, episode noise) is
derived from one base seed.

Checkpoints are canonical JSON: sorted keys, floats printed with 17
significant digits so values round-trip exactly and a save-load-save cycle
is byte-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from . import nn
from . import sac
from . import sim

Array = np.ndarray

CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Base for checkpoint load failures."""


class CheckpointCorruptError(CheckpointError):
    """File is not parseable as a checkpoint document."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format_version is not supported."""


class CheckpointShapeError(CheckpointError):
    """Declared architecture and stored weights disagree, or the
    architecture does not match what the caller expects."""


class DependencyError(FileNotFoundError):
    """A scenario needs a checkpoint that has not been produced yet."""


# ----------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    train_embodiment: str  # "A", "B", or "pretrained"
    eval_embodiment: str
    mode: str  # scratch | zero_shot | finetune


SCENARIOS = {
    1: ScenarioSpec(1, "A", "A", "scratch"),
    2: ScenarioSpec(2, "B", "B", "scratch"),
    3: ScenarioSpec(3, "pretrained", "B", "zero_shot"),
    4: ScenarioSpec(4, "pretrained", "A", "zero_shot"),
    5: ScenarioSpec(5, "pretrained", "B", "finetune"),
}

# which stored checkpoint each dependent scenario starts from
PREREQUISITE = {3: "checkpoint_A.json", 4: "checkpoint_B.json", 5: "checkpoint_A.json"}


# ----------------------------------------------------------------- metrics


@dataclass
class EpisodeRecord:
    episode_id: int
    scenario_id: int
    seed: int
    success: bool
    steps: int
    terminal: sim.TerminalReason
    cumulative_reward: float


@dataclass
class SummaryStats:
    success_rate_percent: float
    avg_steps: float
    episodes: int


def success_rate(records: list[EpisodeRecord]) -> float:
    """Percentage of episodes that ended in task completion."""
    if not records:
        raise ValueError("no episode records")
    return 100.0 * sum(1 for r in records if r.success) / len(records)


def avg_timesteps(records: list[EpisodeRecord]) -> float:
    """Mean episode length over all episodes, failures included."""
    if not records:
        raise ValueError("no episode records")
    return sum(r.steps for r in records) / len(records)


def summarize(records: list[EpisodeRecord]) -> SummaryStats:
    return SummaryStats(
        success_rate_percent=success_rate(records),
        avg_steps=avg_timesteps(records),
        episodes=len(records),
    )


# ----------------------------------------------------------------- eval grid


@dataclass
class EvalGrid:
    starts: Array  # (n, 3)
    seeds: list[int]


def build_eval_grid(
    geometry: sim.PegHoleGeometry, num_episodes: int = 100, base_seed: int = 0
) -> EvalGrid:
    """Fixed start grid over the start patch with per-episode noise seeds.

    A square grid (row-major) spans the patch; any grid point whose lateral
    offset falls inside the hole mouth is projected radially outward to the
    patch's minimum lateral radius so the episode count stays exact.
    """
    if num_episodes <= 0:
        raise ValueError("num_episodes must be positive")
    side = math.ceil(math.sqrt(num_episodes))
    axis = np.linspace(-sim.START_PATCH_HALFWIDTH, sim.START_PATCH_HALFWIDTH, side)
    starts = []
    for x in axis:
        for y in axis:
            r = math.hypot(x, y)
            if r < sim.START_MIN_LATERAL:
                if r == 0.0:
                    x, y = sim.START_MIN_LATERAL, 0.0
                else:
                    scale = sim.START_MIN_LATERAL / r
                    x, y = x * scale, y * scale
            starts.append(
                geometry.hole_center + np.array([x, y, sim.START_HEIGHT])
            )
            if len(starts) == num_episodes:
                break
        if len(starts) == num_episodes:
            break
    seed_rng = np.random.default_rng(base_seed)
    seeds = [int(s) for s in seed_rng.integers(0, 2**63, size=num_episodes)]
    return EvalGrid(starts=np.array(starts), seeds=seeds)


# ----------------------------------------------------------------- checkpoints


@dataclass
class PolicyCheckpoint:
    obs_dim: int
    action_dim: int
    actor_hidden: list[int]
    critic_hidden: list[int]
    embodiment_id: str
    train_steps: int
    base_seed: int
    actor: nn.MlpParams
    critic1: nn.MlpParams
    critic2: nn.MlpParams
    target1: nn.MlpParams
    target2: nn.MlpParams
    log_entropy_temp: float
    optimizer: dict | None = None
    format_version: int = CHECKPOINT_FORMAT_VERSION


def _adam_to_lists(state: nn.AdamState) -> dict:
    return {
        "step": state.step,
        "m_w": [a.tolist() for a in state.m_w],
        "v_w": [a.tolist() for a in state.v_w],
        "m_b": [a.tolist() for a in state.m_b],
        "v_b": [a.tolist() for a in state.v_b],
    }


def _adam_from_lists(data: dict, params: nn.MlpParams) -> nn.AdamState:
    state = nn.adam_init(params)
    try:
        state.step = int(data["step"])
        for dest, key in ((state.m_w, "m_w"), (state.v_w, "v_w"), (state.m_b, "m_b"), (state.v_b, "v_b")):
            src = data[key]
            if len(src) != len(dest):
                raise ValueError("optimizer layer count mismatch")
            for i, block in enumerate(src):
                arr = np.asarray(block, dtype=float)
                if arr.shape != dest[i].shape:
                    raise ValueError("optimizer moment shape mismatch")
                dest[i] = arr
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointShapeError(f"bad optimizer state: {exc}") from exc
    return state


def checkpoint_from_agent(
    agent: sac.SacAgent, embodiment_id: str, train_steps: int, base_seed: int
) -> PolicyCheckpoint:
    return PolicyCheckpoint(
        obs_dim=agent.obs_dim,
        action_dim=agent.action_dim,
        actor_hidden=list(agent.actor_hidden),
        critic_hidden=list(agent.critic_hidden),
        embodiment_id=embodiment_id,
        train_steps=train_steps,
        base_seed=base_seed,
        actor=agent.actor,
        critic1=agent.critic1,
        critic2=agent.critic2,
        target1=agent.target1,
        target2=agent.target2,
        log_entropy_temp=float(agent.log_temp),
        optimizer={
            "actor": _adam_to_lists(agent.actor_opt),
            "critic1": _adam_to_lists(agent.critic1_opt),
            "critic2": _adam_to_lists(agent.critic2_opt),
            "temp": {"m": agent.temp_m, "v": agent.temp_v, "step": agent.temp_step},
        },
    )


def agent_from_checkpoint(
    ckpt: PolicyCheckpoint, hp: sac.SacHyperparams | None = None
) -> sac.SacAgent:
    """Rebuild a live agent; optimizer state is restored when present."""
    agent = sac.make_agent(
        ckpt.obs_dim,
        ckpt.action_dim,
        seed=0,
        hp=hp,
        actor_hidden=ckpt.actor_hidden,
        critic_hidden=ckpt.critic_hidden,
    )
    for dst, src in (
        (agent.actor, ckpt.actor),
        (agent.critic1, ckpt.critic1),
        (agent.critic2, ckpt.critic2),
        (agent.target1, ckpt.target1),
        (agent.target2, ckpt.target2),
    ):
        dst.weights = [w.copy() for w in src.weights]
        dst.biases = [b.copy() for b in src.biases]
    agent.log_temp = float(ckpt.log_entropy_temp)
    if ckpt.optimizer is not None:
        agent.actor_opt = _adam_from_lists(ckpt.optimizer["actor"], agent.actor)
        agent.critic1_opt = _adam_from_lists(ckpt.optimizer["critic1"], agent.critic1)
        agent.critic2_opt = _adam_from_lists(ckpt.optimizer["critic2"], agent.critic2)
        t = ckpt.optimizer["temp"]
        agent.temp_m, agent.temp_v, agent.temp_step = float(t["m"]), float(t["v"]), int(t["step"])
    else:
        agent.actor_opt = nn.adam_init(agent.actor)
        agent.critic1_opt = nn.adam_init(agent.critic1)
        agent.critic2_opt = nn.adam_init(agent.critic2)
    return agent


def _format_scalar(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError("checkpoints must not contain NaN or Inf")
        return format(float(x), ".17g")
    if isinstance(x, str):
        return json.dumps(x)
    if x is None:
        return "null"
    raise TypeError(f"cannot serialize {type(x)}")


def _emit(obj, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    else:
        out.append(_format_scalar(obj))


def _canonical_json(doc: dict) -> str:
    out: list[str] = []
    _emit(doc, out)
    return "".join(out) + "\n"


def save_checkpoint(ckpt: PolicyCheckpoint, path: str) -> None:
    doc = {
        "format_version": ckpt.format_version,
        "obs_dim": ckpt.obs_dim,
        "action_dim": ckpt.action_dim,
        "actor_hidden": list(ckpt.actor_hidden),
        "critic_hidden": list(ckpt.critic_hidden),
        "embodiment": ckpt.embodiment_id,
        "train_steps": ckpt.train_steps,
        "base_seed": ckpt.base_seed,
        "actor": nn.to_nested_lists(ckpt.actor),
        "critic1": nn.to_nested_lists(ckpt.critic1),
        "critic2": nn.to_nested_lists(ckpt.critic2),
        "target1": nn.to_nested_lists(ckpt.target1),
        "target2": nn.to_nested_lists(ckpt.target2),
        "log_entropy_temp": ckpt.log_entropy_temp,
        "optimizer": ckpt.optimizer,
    }
    text = _canonical_json(doc)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def load_checkpoint(path: str) -> PolicyCheckpoint:
    """Parse and validate a checkpoint file.

    Raises CheckpointCorruptError for unparseable or incomplete documents,
    CheckpointVersionError for unknown format versions, and
    CheckpointShapeError when declared architecture and stored arrays
    disagree.
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointCorruptError(f"{path}: not a valid checkpoint document") from exc
    if not isinstance(data, dict):
        raise CheckpointCorruptError(f"{path}: checkpoint root must be a mapping")
    required = [
        "format_version", "obs_dim", "action_dim", "actor_hidden", "critic_hidden",
        "embodiment", "train_steps", "base_seed", "actor", "critic1", "critic2",
        "target1", "target2", "log_entropy_temp",
    ]
    missing = [k for k in required if k not in data]
    if missing:
        raise CheckpointCorruptError(f"{path}: missing fields {missing}")
    if data["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {data['format_version']} unsupported"
        )
    try:
        obs_dim = int(data["obs_dim"])
        action_dim = int(data["action_dim"])
        actor_hidden = [int(h) for h in data["actor_hidden"]]
        critic_hidden = [int(h) for h in data["critic_hidden"]]
        if obs_dim <= 0 or action_dim <= 0 or not actor_hidden or not critic_hidden:
            raise ValueError
    except (TypeError, ValueError):
        raise CheckpointCorruptError(f"{path}: malformed architecture block") from None
    actor_sizes = [obs_dim, *actor_hidden, 2 * action_dim]
    critic_sizes = [obs_dim + action_dim, *critic_hidden, 1]
    nets = {}
    for name, sizes in (
        ("actor", actor_sizes),
        ("critic1", critic_sizes),
        ("critic2", critic_sizes),
        ("target1", critic_sizes),
        ("target2", critic_sizes),
    ):
        try:
            nets[name] = nn.from_nested_lists(data[name], sizes)
        except ValueError as exc:
            raise CheckpointShapeError(f"{path}: {name}: {exc}") from exc
    return PolicyCheckpoint(
        obs_dim=obs_dim,
        action_dim=action_dim,
        actor_hidden=actor_hidden,
        critic_hidden=critic_hidden,
        embodiment_id=str(data["embodiment"]),
        train_steps=int(data["train_steps"]),
        base_seed=int(data["base_seed"]),
        actor=nets["actor"],
        critic1=nets["critic1"],
        critic2=nets["critic2"],
        target1=nets["target1"],
        target2=nets["target2"],
        log_entropy_temp=float(data["log_entropy_temp"]),
        optimizer=data.get("optimizer"),
    )


def validate_architecture(
    ckpt: PolicyCheckpoint,
    obs_dim: int,
    action_dim: int,
    actor_hidden: list[int],
    critic_hidden: list[int],
) -> None:
    want = (obs_dim, action_dim, list(actor_hidden), list(critic_hidden))
    got = (ckpt.obs_dim, ckpt.action_dim, list(ckpt.actor_hidden), list(ckpt.critic_hidden))
    if want != got:
        raise CheckpointShapeError(
            f"checkpoint architecture {got} does not match configured {want}"
        )


# ----------------------------------------------------------------- rollouts


@dataclass
class RunSettings:
    """Typed bundle of everything a scenario run needs."""

    geometry: sim.PegHoleGeometry = field(default_factory=sim.default_geometry)
    embodiment_a: sim.EmbodimentSpec = field(default_factory=lambda: sim.embodiment_spec("A"))
    embodiment_b: sim.EmbodimentSpec = field(default_factory=lambda: sim.embodiment_spec("B"))
    weights: sim.RewardWeights = field(default_factory=sim.RewardWeights)
    bounds: sac.ActionBounds = field(default_factory=sac.ActionBounds)
    hp: sac.SacHyperparams = field(default_factory=sac.SacHyperparams)
    actor_hidden: list[int] = field(default_factory=lambda: [64, 64])
    critic_hidden: list[int] = field(default_factory=lambda: [300, 400])
    max_agent_steps: int = sim.DEFAULT_MAX_AGENT_STEPS
    effective_mass: float = sim.EFFECTIVE_MASS
    noise_train: bool = True
    noise_eval: bool = True
    train_steps_a: int = 150_000
    train_steps_b: int = 400_000
    finetune_steps: int = 30_000
    finetune_warmup_steps: int = 500
    finetune_reset_critics: bool = False
    eval_episodes: int = 100
    curve_every: int = 1000

    def embodiment(self, which: str) -> sim.EmbodimentSpec:
        if which == "A":
            return self.embodiment_a
        if which == "B":
            return self.embodiment_b
        raise ValueError(f"unknown embodiment {which!r}")

    def env_factory(self, which: str, noise: bool):
        return lambda: sim.PegInHoleEnv(
            geometry=self.geometry,
            embodiment=self.embodiment(which),
            max_agent_steps=self.max_agent_steps,
            noise=noise,
            m_eff=self.effective_mass,
        )


def evaluate(
    ckpt: PolicyCheckpoint,
    embodiment: sim.EmbodimentSpec,
    grid: EvalGrid,
    settings: RunSettings,
    scenario_id: int = 0,
) -> list[EpisodeRecord]:
    """Deterministic-policy rollouts, one episode per grid start."""
    validate_architecture(
        ckpt, 9, 9, settings.actor_hidden, settings.critic_hidden
    )
    agent = agent_from_checkpoint(ckpt, settings.hp)
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    hole = settings.geometry.hole_center
    records = []
    for i, (start, ep_seed) in enumerate(zip(grid.starts, grid.seeds)):
        env = sim.PegInHoleEnv(
            geometry=settings.geometry,
            embodiment=embodiment,
            max_agent_steps=settings.max_agent_steps,
            noise=settings.noise_eval,
            m_eff=settings.effective_mass,
        )
        obs = env.reset(start, ep_seed)
        estimate = env.hole_estimate
        ctl_state = ctl.reset_controller()
        cumulative = 0.0
        steps = 0
        reason = sim.TerminalReason.RUNNING
        while reason is sim.TerminalReason.RUNNING:
            raw = sac.deterministic_action(agent, obs.vector())
            phys = sac.map_action(raw, settings.bounds, estimate)
            provider, get_state = sac.make_provider(phys, sel, ctl_state, hole)
            obs, reason = env.agent_step(provider)
            ctl_state = get_state()
            cumulative += sim.compute_reward(obs, reason, settings.weights)
            steps += 1
        records.append(
            EpisodeRecord(
                episode_id=i,
                scenario_id=scenario_id,
                seed=ep_seed,
                success=reason is sim.TerminalReason.SUCCESS,
                steps=steps,
                terminal=reason,
                cumulative_reward=cumulative,
            )
        )
    return records


def finetune(
    ckpt: PolicyCheckpoint,
    target: sim.EmbodimentSpec,
    steps: int,
    seed: int,
    settings: RunSettings,
) -> tuple[PolicyCheckpoint, list[tuple[int, float, float]]]:
    """Resume training on the target embodiment from a stored policy.

    All network weights and optimizer moments warm-start from the
    checkpoint; the replay buffer starts empty and a short fresh warmup of
    uniform random actions reseeds it before gradient updates resume.
    With settings.finetune_reset_critics the critics (and their targets and
    optimizer moments) restart from a fresh initialization instead, keeping
    only the actor warm.
    """
    if steps <= 0:
        raise ValueError("finetune steps must be positive")
    validate_architecture(ckpt, 9, 9, settings.actor_hidden, settings.critic_hidden)
    if ckpt.optimizer is None:
        raise CheckpointError("checkpoint lacks optimizer state needed to resume training")
    hp = sac.SacHyperparams(
        **{
            **settings.hp.__dict__,
            "warmup_steps": settings.finetune_warmup_steps,
        }
    )
    agent = agent_from_checkpoint(ckpt, hp)
    if settings.finetune_reset_critics:
        # keyed stream, disjoint from the seed streams train() derives
        rng = np.random.default_rng([seed, 0x5EED])
        critic_sizes = [ckpt.obs_dim + ckpt.action_dim, *ckpt.critic_hidden, 1]
        agent.critic1 = nn.init_params(critic_sizes, rng)
        agent.critic2 = nn.init_params(critic_sizes, rng)
        agent.target1 = nn.MlpParams(
            [w.copy() for w in agent.critic1.weights],
            [b.copy() for b in agent.critic1.biases],
        )
        agent.target2 = nn.MlpParams(
            [w.copy() for w in agent.critic2.weights],
            [b.copy() for b in agent.critic2.biases],
        )
        agent.critic1_opt = nn.adam_init(agent.critic1)
        agent.critic2_opt = nn.adam_init(agent.critic2)
    agent, curve = sac.train(
        settings.env_factory(target.id, settings.noise_train),
        agent,
        steps,
        seed,
        bounds=settings.bounds,
        weights=settings.weights,
        curve_every=settings.curve_every,
    )
    out = checkpoint_from_agent(
        agent, target.id, ckpt.train_steps + steps, base_seed=seed
    )
    return out, curve


def run_scenario(
    scenario_id: int,
    settings: RunSettings,
    base_seed: int,
    ckpt_dir: str,
) -> tuple[SummaryStats, list[EpisodeRecord], list[tuple[int, float, float]]]:
    """Execute one Table-style scenario and save any produced checkpoint.

    Scratch scenarios train then evaluate on the same embodiment; zero-shot
    scenarios evaluate an existing checkpoint from the other embodiment;
    the finetune scenario adapts the first platform's checkpoint to the
    second. Prerequisite checkpoints are looked up in ckpt_dir and their
    absence is a DependencyError naming the missing file.
    """
    if scenario_id not in SCENARIOS:
        raise ValueError(f"scenario id must be 1..5, got {scenario_id}")
    spec = SCENARIOS[scenario_id]
    seed_rng = np.random.default_rng(base_seed)
    init_seed = int(seed_rng.integers(0, 2**63))
    loop_seed = int(seed_rng.integers(0, 2**63))
    grid_seed = int(seed_rng.integers(0, 2**63))

    grid = build_eval_grid(settings.geometry, settings.eval_episodes, grid_seed)
    eval_emb = settings.embodiment(spec.eval_embodiment)
    curve: list[tuple[int, float, float]] = []

    if spec.mode == "scratch":
        steps = settings.train_steps_a if spec.train_embodiment == "A" else settings.train_steps_b
        agent = sac.make_agent(
            9, 9, seed=init_seed, hp=settings.hp,
            actor_hidden=settings.actor_hidden, critic_hidden=settings.critic_hidden,
        )
        agent, curve = sac.train(
            settings.env_factory(spec.train_embodiment, settings.noise_train),
            agent, steps, loop_seed,
            bounds=settings.bounds, weights=settings.weights,
            curve_every=settings.curve_every,
        )
        ckpt = checkpoint_from_agent(agent, spec.train_embodiment, steps, base_seed)
        save_checkpoint(ckpt, os.path.join(ckpt_dir, f"checkpoint_{spec.train_embodiment}.json"))
    elif spec.mode == "zero_shot":
        path = os.path.join(ckpt_dir, PREREQUISITE[scenario_id])
        if not os.path.exists(path):
            raise DependencyError(f"scenario {scenario_id} needs missing checkpoint {path}")
        ckpt = load_checkpoint(path)
    else:  # finetune
        path = os.path.join(ckpt_dir, PREREQUISITE[scenario_id])
        if not os.path.exists(path):
            raise DependencyError(f"scenario {scenario_id} needs missing checkpoint {path}")
        base = load_checkpoint(path)
        ckpt, curve = finetune(base, eval_emb, settings.finetune_steps, loop_seed, settings)
        save_checkpoint(ckpt, os.path.join(ckpt_dir, "checkpoint_B_finetuned.json"))

    records = evaluate(ckpt, eval_emb, grid, settings, scenario_id=scenario_id)
    return summarize(records), records, curve


# ----------------------------------------------------------------- CSV output


def write_records_csv(records: list[EpisodeRecord], path: str) -> None:
    lines = ["episode_id,scenario_id,seed,success,steps,terminal,cumulative_reward"]
    for r in records:
        lines.append(
            f"{r.episode_id},{r.scenario_id},{r.seed},{int(r.success)},{r.steps},"
            f"{r.terminal.value},{repr(float(r.cumulative_reward))}"
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def write_summary_csv(summary: SummaryStats, scenario_id: int, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("scenario_id,success_rate_percent,avg_steps,episodes\n")
        f.write(
            f"{scenario_id},{repr(float(summary.success_rate_percent))},"
            f"{repr(float(summary.avg_steps))},{summary.episodes}\n"
        )


def write_curve_csv(curve: list[tuple[int, float, float]], path: str) -> None:
    lines = ["step,mean_episode_reward,success_rate_window"]
    for step, mean_r, rate in curve:
        lines.append(f"{step},{repr(float(mean_r))},{repr(float(rate))}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
