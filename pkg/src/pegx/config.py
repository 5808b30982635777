"""Flat key-value configuration.

One file format everywhere: `key = value` lines, `#` comments. Every key
is predeclared in DEFAULTS with a typed default; unknown keys and values
of the wrong shape are rejected with the offending line. The same dotted
keys double as CLI override flags, and the PEGX_CONFIG environment
variable may name a config file that applies below any explicit one.

Precedence, lowest to highest: built-in defaults, PEGX_CONFIG file,
--config file, individual CLI flags.
"""

from __future__ import annotations

import os

import numpy as np

from . import harness, sac, sim


class ConfigError(ValueError):
    pass


# value shapes: float, int, bool, str, vec3 (3 floats), ints (1+ integers)
DEFAULTS: dict[str, object] = {
    "geom.hole_center": (0.0, 0.0, 0.0),
    "geom.hole_radius": 0.006,
    "geom.peg_radius": 0.005,
    "geom.surface_z": 0.02,
    "geom.insert_depth": 0.02,
    "geom.contact_stiffness": 5000.0,
    "geom.contact_damping": 50.0,
    "geom.collision_force_limit": 50.0,
    "sim.effective_mass": 2.0,
    "sim.max_agent_steps": 15,
    "sim.noise_train": True,
    "sim.noise_eval": True,
    "sim.workspace_lo": (-0.15, -0.15, -0.05),
    "sim.workspace_hi": (0.15, 0.15, 0.25),
    "emb_a.tau": 0.05,
    "emb_a.zeta": 1.0,
    "emb_a.v_max": 0.5,
    "emb_a.pos_noise": 0.0005,
    "emb_a.force_noise": 0.2,
    "emb_b.tau": 0.09,
    "emb_b.zeta": 1.0,
    "emb_b.v_max": 0.3,
    "emb_b.pos_noise": 0.001,
    "emb_b.force_noise": 0.4,
    "reward.alpha1": -1.0,
    "reward.alpha2": -0.1,
    "reward.success": 100.0,
    "reward.collision": -5.0,
    "reward.timeout": -5.0,
    "action.x_hat_halfwidth": 0.02,
    "action.kp_x_hi": 0.4,
    "action.kp_f_hi": 4e-4,
    "sac.gamma": 0.99,
    "sac.polyak_tau": 0.005,
    "sac.lr_actor": 3e-4,
    "sac.lr_critic": 3e-4,
    "sac.lr_temp": 3e-4,
    "sac.batch_size": 256,
    "sac.buffer_capacity": 200_000,
    "sac.warmup_steps": 1000,
    "sac.entropy_target": -9.0,
    "sac.updates_per_env_step": 1,
    "sac.actor_hidden": (64, 64),
    "sac.critic_hidden": (300, 400),
    "sac.curve_every": 1000,
    "scenario.train_steps_a": 150_000,
    "scenario.train_steps_b": 400_000,
    "scenario.finetune_steps": 30_000,
    "scenario.finetune_warmup_steps": 500,
    "scenario.eval_episodes": 100,
    "finetune.reset_critics": False,
}


def _coerce(key: str, text: str, where: str) -> object:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = [p.strip() for p in text.split(",") if p.strip()]
            if isinstance(default[0], float):
                if len(parts) != len(default):
                    raise ValueError(f"expected {len(default)} comma-separated numbers")
                return tuple(float(p) for p in parts)
            vals = tuple(int(p) for p in parts)
            if not vals:
                raise ValueError("expected at least one integer")
            return vals
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse `key = value` lines into typed values. Unknown keys error."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip(), f"{source}:{lineno}")
    return out


def load_config(
    path: str | None = None, overrides: dict[str, str] | None = None
) -> dict[str, object]:
    """Resolve the full typed config from all precedence layers."""
    cfg = dict(DEFAULTS)
    env_path = os.environ.get("PEGX_CONFIG")
    for p in (env_path, path):
        if p:
            with open(p, "r", encoding="utf-8") as f:
                cfg.update(parse_config_text(f.read(), source=p))
    for key, text in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, text, "<flag>")
    return cfg


def _embodiment(cfg: dict, which: str) -> sim.EmbodimentSpec:
    p = f"emb_{which.lower()}"
    return sim.EmbodimentSpec(
        id=which,
        tau=cfg[f"{p}.tau"],
        zeta=cfg[f"{p}.zeta"],
        v_max=cfg[f"{p}.v_max"],
        workspace_lo=np.array(cfg["sim.workspace_lo"]),
        workspace_hi=np.array(cfg["sim.workspace_hi"]),
        pos_noise_sigma=cfg[f"{p}.pos_noise"],
        force_noise_sigma=cfg[f"{p}.force_noise"],
    )


def settings_from_config(cfg: dict[str, object]) -> harness.RunSettings:
    geometry = sim.PegHoleGeometry(
        hole_center=np.array(cfg["geom.hole_center"]),
        hole_radius=cfg["geom.hole_radius"],
        peg_radius=cfg["geom.peg_radius"],
        surface_z=cfg["geom.surface_z"],
        insert_depth=cfg["geom.insert_depth"],
        contact_stiffness=cfg["geom.contact_stiffness"],
        contact_damping=cfg["geom.contact_damping"],
        collision_force_limit=cfg["geom.collision_force_limit"],
    )
    weights = sim.RewardWeights(
        alpha1=cfg["reward.alpha1"],
        alpha2=cfg["reward.alpha2"],
        r_success=cfg["reward.success"],
        r_collision=cfg["reward.collision"],
        r_timeout=cfg["reward.timeout"],
    )
    bounds = sac.ActionBounds(
        x_hat_halfwidth=cfg["action.x_hat_halfwidth"],
        kp_x_hi=cfg["action.kp_x_hi"],
        kp_f_hi=cfg["action.kp_f_hi"],
    )
    hp = sac.SacHyperparams(
        gamma=cfg["sac.gamma"],
        polyak_tau=cfg["sac.polyak_tau"],
        lr_actor=cfg["sac.lr_actor"],
        lr_critic=cfg["sac.lr_critic"],
        lr_temp=cfg["sac.lr_temp"],
        batch_size=cfg["sac.batch_size"],
        buffer_capacity=cfg["sac.buffer_capacity"],
        warmup_steps=cfg["sac.warmup_steps"],
        entropy_target=cfg["sac.entropy_target"],
        updates_per_env_step=cfg["sac.updates_per_env_step"],
    )
    return harness.RunSettings(
        geometry=geometry,
        embodiment_a=_embodiment(cfg, "A"),
        embodiment_b=_embodiment(cfg, "B"),
        weights=weights,
        bounds=bounds,
        hp=hp,
        actor_hidden=list(cfg["sac.actor_hidden"]),
        critic_hidden=list(cfg["sac.critic_hidden"]),
        max_agent_steps=cfg["sim.max_agent_steps"],
        effective_mass=cfg["sim.effective_mass"],
        noise_train=cfg["sim.noise_train"],
        noise_eval=cfg["sim.noise_eval"],
        train_steps_a=cfg["scenario.train_steps_a"],
        train_steps_b=cfg["scenario.train_steps_b"],
        finetune_steps=cfg["scenario.finetune_steps"],
        finetune_warmup_steps=cfg["scenario.finetune_warmup_steps"],
        finetune_reset_critics=cfg["finetune.reset_critics"],
        eval_episodes=cfg["scenario.eval_episodes"],
        curve_every=cfg["sac.curve_every"],
    )
