"""Step responses of the two embodiments and the gain stability ceiling.

First part: command a 20 mm lateral step in free space and print how each
embodiment's servo converges. The faster arm settles in a fraction of the
slower arm's time, which is the entire cross-embodiment gap the transfer
experiments measure.

Second part: close the hybrid position loop around the servo at several
proportional gains and report the residual oscillation. The discrete
60 Hz loop tolerates small gains but breaks into a limit cycle once
dt * (2*zeta/tau + kd_x/tau^2) crosses 2, which is why the action bounds
cap kp_x right at the faster embodiment's edge.
"""

import numpy as np

from pegx import controller as ctl, sim


def step_response(which: str):
    geo = sim.default_geometry()
    emb = sim.embodiment_spec(which)
    state, _ = sim.reset(geo, emb, start_pos=(0.0, 0.0, 0.03), seed=0, noise=False)
    target = np.array([0.02, 0.0, 0.03])
    print(f"embodiment {which} (tau={emb.tau}s): step to x=+20 mm")
    for sub in range(1, 121):
        state = sim.servo_substep(state, target, geo, emb)
        if sub % 6 == 0:
            err = (target[0] - state.pos[0]) * 1000
            print(f"  t={sub/60.0:5.2f}s  x={state.pos[0]*1000:6.2f} mm  err={err:6.2f} mm")
        if abs(target[0] - state.pos[0]) < 1e-5:
            print(f"  settled within 0.01 mm after {sub} substeps ({sub/60.0:.2f} s)")
            break
    print()


def closed_loop_residual(which: str, kp_x: float, substeps: int = 600) -> float:
    """Drive the position loop at gain kp_x; return late-phase error amplitude."""
    geo = sim.default_geometry()
    emb = sim.embodiment_spec(which)
    state, _ = sim.reset(geo, emb, start_pos=(0.01, 0.0, 0.03), seed=0, noise=False)
    x_hat = np.array([0.0, 0.0, 0.03])
    gains = ctl.derive_gains([kp_x] * 3, [0.0] * 3)
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    cstate = ctl.reset_controller()
    tail = []
    for sub in range(substeps):
        errors = ctl.ControlErrors(
            pos_err=x_hat - state.pos, vel_err=-state.vel, force_err=state.contact_force
        )
        u, cstate = ctl.hybrid_command(errors, gains, sel, cstate, sim.SUBSTEP_DT)
        state = sim.servo_substep(state, ctl.compose_command(x_hat, u), geo, emb)
        if sub >= substeps - 120:
            tail.append(abs(state.pos[0] - x_hat[0]))
    return max(tail)


def main():
    step_response("A")
    step_response("B")
    print("closed position loop, 10 mm offset, residual |error| over the last 2 s:")
    for which in ("A", "B"):
        emb = sim.embodiment_spec(which)
        ceiling = emb.tau**2 * (2.0 / sim.SUBSTEP_DT - 2.0 * emb.zeta / emb.tau) * 2.0
        print(f"  embodiment {which}: theoretical kp_x ceiling ~{ceiling:.2f}")
        for kp in (0.1, 0.3, 0.5, 1.0, 2.0):
            resid = closed_loop_residual(which, kp)
            verdict = "stable" if resid < 1e-4 else "LIMIT CYCLE"
            print(f"    kp_x={kp:4.1f}  residual {resid*1000:8.3f} mm  {verdict}")


if __name__ == "__main__":
    main()
