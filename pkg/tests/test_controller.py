import numpy as np
import pytest

from pegx import controller as ctl


def rand_errors(rng):
    return ctl.ControlErrors(
        pos_err=rng.normal(size=3),
        vel_err=rng.normal(size=3),
        force_err=5.0 * rng.normal(size=3),
    )


def rand_gains(rng):
    return ctl.derive_gains(rng.uniform(0, 8, size=3), rng.uniform(0, 0.02, size=3))


def test_derived_gain_ratios_exact():
    rng = np.random.default_rng(0)
    for _ in range(50):
        kp_x = rng.uniform(0, 10, size=3)
        kp_f = rng.uniform(0, 1, size=3)
        g = ctl.derive_gains(kp_x, kp_f)
        assert np.array_equal(g.kd_x, 0.5 * kp_x)
        assert np.array_equal(g.ki_f, 0.001 * kp_f)


def test_derive_gains_rejects_negative():
    with pytest.raises(ValueError):
        ctl.derive_gains([-1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        ctl.derive_gains([1.0, 0.0, 0.0], [0.0, -0.1, 0.0])


def test_selection_entries_validated():
    with pytest.raises(ValueError):
        ctl.SelectionMatrix(np.array([1.0, 1.0, 1.5]))
    with pytest.raises(ValueError):
        ctl.SelectionMatrix(np.array([-0.1, 0.0, 0.0]))
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    assert np.array_equal(sel.s, [1.0, 1.0, 0.0])


def test_motion_axes_ignore_force_exactly():
    # on s_i = 1 axes the command must not move at all when force inputs change
    rng = np.random.default_rng(1)
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    for _ in range(100):
        e = rand_errors(rng)
        g = rand_gains(rng)
        state = ctl.ControllerState(force_integral=rng.uniform(-10, 10, size=3))
        u1, _ = ctl.hybrid_command(e, g, sel, state, dt=1 / 60)
        e2 = ctl.ControlErrors(e.pos_err, e.vel_err, 50.0 * rng.normal(size=3))
        u2, _ = ctl.hybrid_command(e2, g, sel, state, dt=1 / 60)
        assert u1[0] == u2[0] and u1[1] == u2[1]


def test_force_axes_ignore_motion_exactly():
    rng = np.random.default_rng(2)
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    for _ in range(100):
        e = rand_errors(rng)
        g = rand_gains(rng)
        state = ctl.ControllerState(force_integral=rng.uniform(-10, 10, size=3))
        u1, s1 = ctl.hybrid_command(e, g, sel, state, dt=1 / 60)
        e2 = ctl.ControlErrors(rng.normal(size=3), rng.normal(size=3), e.force_err)
        u2, s2 = ctl.hybrid_command(e2, g, sel, state, dt=1 / 60)
        assert u1[2] == u2[2]
        assert np.array_equal(s1.force_integral, s2.force_integral)


def test_motion_term_linear_in_errors():
    rng = np.random.default_rng(3)
    sel = ctl.SelectionMatrix(np.array([1.0, 1.0, 1.0]))
    state = ctl.ControllerState()
    for _ in range(20):
        e = rand_errors(rng)
        g = rand_gains(rng)
        a = rng.uniform(-3, 3)
        u1, _ = ctl.hybrid_command(e, g, sel, state, dt=1 / 60)
        scaled = ctl.ControlErrors(a * e.pos_err, a * e.vel_err, e.force_err)
        u2, _ = ctl.hybrid_command(scaled, g, sel, state, dt=1 / 60)
        assert np.allclose(u2, a * u1, rtol=1e-12, atol=1e-12)


def test_worked_example_pure_motion_axis():
    g = ctl.derive_gains([2.0, 2.0, 2.0], [0.0, 0.0, 0.0])
    sel = ctl.SelectionMatrix(np.array([1.0, 1.0, 1.0]))
    e = ctl.ControlErrors(np.array([0.1, 0.0, 0.0]), np.zeros(3), np.zeros(3))
    u, _ = ctl.hybrid_command(e, g, sel, ctl.reset_controller(), dt=1 / 60)
    assert np.allclose(u, [0.2, 0.0, 0.0], atol=1e-15)


def test_zero_errors_zero_command():
    g = rand_gains(np.random.default_rng(4))
    e = ctl.ControlErrors(np.zeros(3), np.zeros(3), np.zeros(3))
    state = ctl.ControllerState(force_integral=np.array([0.0, 0.0, 0.0]))
    u, new = ctl.hybrid_command(e, g, ctl.SelectionMatrix.motion_xy_force_z(), state, dt=1 / 60)
    assert np.array_equal(u, np.zeros(3))
    assert np.array_equal(new.force_integral, np.zeros(3))


def test_integral_accumulation_matches_discrete_oracle():
    # constant 1 N force error on the z force axis for 60 substeps
    dt = 1 / 60
    g = ctl.derive_gains([0.0, 0.0, 0.0], [0.01, 0.01, 0.01])
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    state = ctl.reset_controller()
    e = ctl.ControlErrors(np.zeros(3), np.zeros(3), np.array([0.0, 0.0, 1.0]))
    got = []
    for _ in range(60):
        u, state = ctl.hybrid_command(e, g, sel, state, dt=dt)
        got.append(u[2])
    # independent reference: I_k = clamp(k*dt), u_z = kp_f*1 + ki_f*I_k
    ref_integral = 0.0
    for k, u_z in enumerate(got):
        ref_integral = min(max(ref_integral + 1.0 * dt, -10.0), 10.0)
        assert u_z == pytest.approx(0.01 * 1.0 + 0.001 * 0.01 * ref_integral, abs=1e-15)
    assert state.force_integral[2] == pytest.approx(1.0, abs=1e-12)


def test_integral_clamp_never_exceeded():
    rng = np.random.default_rng(5)
    sel = ctl.SelectionMatrix(np.array([0.0, 0.5, 1.0]))
    g = rand_gains(rng)
    state = ctl.reset_controller()
    for _ in range(500):
        e = ctl.ControlErrors(np.zeros(3), np.zeros(3), rng.uniform(-400, 400, size=3))
        _, state = ctl.hybrid_command(e, g, sel, state, dt=1 / 60)
        assert np.all(np.abs(state.force_integral) <= 10.0)
    # the frozen pure-motion axis never accumulates at all
    assert state.force_integral[2] == 0.0


def test_integral_frozen_on_pure_motion_axes():
    sel = ctl.SelectionMatrix(np.array([1.0, 1.0, 0.0]))
    g = ctl.derive_gains([1.0, 1.0, 1.0], [0.1, 0.1, 0.1])
    state = ctl.ControllerState(force_integral=np.array([3.0, -2.0, 0.5]))
    e = ctl.ControlErrors(np.zeros(3), np.zeros(3), np.array([7.0, 7.0, 7.0]))
    _, new = ctl.hybrid_command(e, g, sel, state, dt=1 / 60)
    assert new.force_integral[0] == 3.0
    assert new.force_integral[1] == -2.0
    assert new.force_integral[2] == pytest.approx(0.5 + 7.0 / 60, abs=1e-15)


def test_compose_command_is_plain_vector_addition():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a, b, c = rng.normal(size=(3, 3))
        assert np.array_equal(ctl.compose_command(a, b), a + b)
        assert np.array_equal(ctl.compose_command(a, b), ctl.compose_command(b, a))
        lhs = ctl.compose_command(ctl.compose_command(a, b), c)
        rhs = ctl.compose_command(a, ctl.compose_command(b, c))
        assert np.allclose(lhs, rhs, atol=1e-15)


def test_reset_controller_zeroes_integral():
    state = ctl.reset_controller()
    assert np.array_equal(state.force_integral, np.zeros(3))
