"""Hybrid motion-force control law.

Per axis i the corrective command is

    u_i = s_i * (kp_x_i * e_x_i + kd_x_i * e_v_i)
        + (1 - s_i) * (kp_f_i * e_F_i + ki_f_i * I_i)

where s_i in [0,1] selects motion control (1) or force control (0), and I_i
is the clamped running integral of the force error. The final servo command
is x_c = x_hat_a + u on top of the policy's target position x_hat_a.

The derivative and integral gains are tied to the proportional ones:
kd_x = 0.5 * kp_x and ki_f = 0.001 * kp_f, so a policy only ever chooses
kp_x and kp_f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

# integral clamp, newton-seconds; keeps the force PI term bounded while the
# peg is out of contact
INTEGRAL_LIMIT = 10.0


def _vec3(v) -> Array:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass
class SelectionMatrix:
    """Diagonal of the axis-selection matrix; s_i=1 motion, s_i=0 force."""

    s: Array

    def __post_init__(self):
        self.s = _vec3(self.s)
        if np.any(self.s < 0.0) or np.any(self.s > 1.0):
            raise ValueError("selection entries must lie in [0, 1]")

    @classmethod
    def motion_xy_force_z(cls) -> "SelectionMatrix":
        return cls(np.array([1.0, 1.0, 0.0]))


@dataclass
class ControllerGains:
    kp_x: Array
    kd_x: Array
    kp_f: Array
    ki_f: Array


@dataclass
class ControllerState:
    force_integral: Array = field(default_factory=lambda: np.zeros(3))


@dataclass
class ControlErrors:
    """Errors feeding the control law: target minus measured."""

    pos_err: Array
    vel_err: Array
    force_err: Array


def derive_gains(kp_x, kp_f) -> ControllerGains:
    """Expand the two policy-chosen proportional gains into the full set."""
    kp_x = _vec3(kp_x)
    kp_f = _vec3(kp_f)
    if np.any(kp_x < 0.0) or np.any(kp_f < 0.0):
        raise ValueError("proportional gains must be non-negative")
    return ControllerGains(
        kp_x=kp_x, kd_x=0.5 * kp_x, kp_f=kp_f, ki_f=0.001 * kp_f
    )


def hybrid_command(
    errors: ControlErrors,
    gains: ControllerGains,
    sel: SelectionMatrix,
    ctl: ControllerState,
    dt: float,
    integral_limit: float = INTEGRAL_LIMIT,
) -> tuple[Array, ControllerState]:
    """One evaluation of the control law; returns (u, new controller state).

    The force integral only accumulates on axes with s_i < 1 and is clamped
    to +-integral_limit before use.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = sel.s
    accumulate = s < 1.0
    integral = np.where(
        accumulate,
        np.clip(ctl.force_integral + errors.force_err * dt, -integral_limit, integral_limit),
        ctl.force_integral,
    )
    motion = gains.kp_x * errors.pos_err + gains.kd_x * errors.vel_err
    force = gains.kp_f * errors.force_err + gains.ki_f * integral
    u = s * motion + (1.0 - s) * force
    return u, ControllerState(force_integral=integral)


def compose_command(x_hat_a, u) -> Array:
    """Servo setpoint: the policy's target plus the controller correction."""
    return _vec3(x_hat_a) + _vec3(u)


def reset_controller() -> ControllerState:
    return ControllerState()
