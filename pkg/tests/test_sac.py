import math

import numpy as np
import pytest

from pegx import nn, sac, sim


def tiny_agent(seed=0, obs_dim=3, action_dim=2, **hp_kw):
    hp = sac.SacHyperparams(batch_size=hp_kw.pop("batch_size", 16), buffer_capacity=1000, **hp_kw)
    return sac.make_agent(
        obs_dim, action_dim, seed=seed, hp=hp, actor_hidden=(8, 8), critic_hidden=(8, 8)
    )


# ------------------------------------------------------------- distribution


def test_log_prob_at_center_matches_gaussian():
    mean = np.zeros((1, 1))
    log_std = np.zeros((1, 1))
    xi = np.zeros((1, 1))
    logp = sac.squashed_log_prob(mean, log_std, xi)
    assert logp[0] == pytest.approx(math.log(1.0 / math.sqrt(2 * math.pi)), abs=1e-12)


def test_squashed_density_integrates_to_one():
    # change of variables back to the raw-action axis; trapezoid over (-1,1)
    for mu, ls in ((0.0, 0.0), (0.5, -0.7), (-1.2, 0.3)):
        a = np.linspace(-1 + 1e-7, 1 - 1e-7, 400001)
        pre = np.arctanh(a)
        sigma = math.exp(ls)
        xi = (pre - mu) / sigma
        logp = sac.squashed_log_prob(
            np.full((a.size, 1), mu), np.full((a.size, 1), ls), xi[:, None]
        )
        total = np.trapezoid(np.exp(logp), a)
        assert abs(total - 1.0) < 1e-3, (mu, ls)


def test_log_prob_stable_for_extreme_preactivations():
    mean = np.array([[30.0, -25.0]])
    log_std = np.array([[0.0, 0.0]])
    xi = np.zeros((1, 2))
    logp = sac.squashed_log_prob(mean, log_std, xi)
    assert np.all(np.isfinite(logp))


def test_sampled_actions_stay_inside_unit_box():
    agent = tiny_agent()
    rng = np.random.default_rng(0)
    for _ in range(200):
        raw, logp = sac.sample_action(agent, rng.normal(size=3), rng)
        assert np.all(np.abs(raw) < 1.0)
        assert np.isfinite(logp)


def test_deterministic_action_is_tanh_of_mean():
    agent = tiny_agent(seed=3)
    obs = np.array([0.2, -0.4, 1.0])
    scaled = obs * agent.obs_scale
    y, _ = nn.forward(agent.actor, scaled[None, :])
    want = np.tanh(y[0, : agent.action_dim])
    got = sac.deterministic_action(agent, obs)
    assert np.array_equal(got, want)
    assert np.array_equal(got, sac.deterministic_action(agent, obs))


def test_sample_action_deterministic_per_rng_state():
    agent = tiny_agent(seed=5)
    obs = np.array([0.1, 0.2, 0.3])
    a1, l1 = sac.sample_action(agent, obs, np.random.default_rng(99))
    a2, l2 = sac.sample_action(agent, obs, np.random.default_rng(99))
    assert np.array_equal(a1, a2) and l1 == l2


def test_zero_noise_limit_equals_deterministic():
    agent = tiny_agent(seed=7)
    obs = np.array([0.3, 0.0, -0.2])
    scaled = (obs * agent.obs_scale)[None, :]
    mean, log_std, _, _ = sac._actor_heads(agent, scaled)
    raw = np.tanh(mean + np.exp(log_std) * 0.0)
    assert np.allclose(raw[0], sac.deterministic_action(agent, obs), atol=0)


# ------------------------------------------------------------- action map


def test_map_action_midpoints_and_endpoints():
    b = sac.ActionBounds()
    hole = np.array([0.0, 0.0, 0.0])
    mid = sac.map_action(np.zeros(9), b, hole)
    assert np.allclose(mid.x_hat_a, hole, atol=0)
    assert np.allclose(mid.kp_x, [b.kp_x_hi / 2] * 3, atol=1e-15)
    assert np.allclose(mid.kp_f, [b.kp_f_hi / 2] * 3, atol=1e-18)
    hi = sac.map_action(np.ones(9), b, hole)
    assert np.allclose(hi.x_hat_a, hole + b.x_hat_halfwidth, atol=0)
    assert np.allclose(hi.kp_x, [b.kp_x_hi] * 3, atol=0)
    assert np.allclose(hi.kp_f, [b.kp_f_hi] * 3, atol=0)
    lo = sac.map_action(-np.ones(9), b, hole)
    assert np.allclose(lo.x_hat_a, hole - b.x_hat_halfwidth, atol=0)
    assert np.allclose(lo.kp_x, np.zeros(3), atol=0)
    assert np.allclose(lo.kp_f, np.zeros(3), atol=0)


def test_map_action_zero_gain_propagates_to_derived():
    raw = np.zeros(9)
    raw[3] = -1.0
    phys = sac.map_action(raw, sac.ActionBounds(), np.zeros(3))
    assert phys.kp_x[0] == 0.0
    assert phys.gains.kd_x[0] == 0.0


def test_map_action_bounds_respected_for_random_raws():
    b = sac.ActionBounds()
    rng = np.random.default_rng(11)
    hole = np.array([0.01, -0.02, 0.0])
    for _ in range(300):
        phys = sac.map_action(rng.uniform(-1, 1, 9), b, hole)
        assert np.all(np.abs(phys.x_hat_a - hole) <= b.x_hat_halfwidth)
        assert np.all((phys.kp_x >= 0) & (phys.kp_x <= b.kp_x_hi))
        assert np.all((phys.kp_f >= 0) & (phys.kp_f <= b.kp_f_hi))


def test_map_action_rejects_out_of_range():
    with pytest.raises(ValueError):
        sac.map_action(np.full(9, 1.2), sac.ActionBounds(), np.zeros(3))
    with pytest.raises(ValueError):
        sac.map_action(np.zeros(4), sac.ActionBounds(), np.zeros(3))


# ------------------------------------------------------------- replay


def test_replay_fifo_eviction_and_order():
    buf = sac.ReplayBuffer(10, 1, 1)
    for k in range(13):
        buf.push([float(k)], [0.0], 0.0, [0.0], 0.0)
    assert len(buf) == 10
    kept = sorted(buf.obs[:, 0].tolist())
    assert kept == [float(k) for k in range(3, 13)]


def test_replay_sampling_deterministic():
    buf = sac.ReplayBuffer(50, 2, 1)
    rng = np.random.default_rng(0)
    for k in range(50):
        buf.push(rng.normal(size=2), [0.5], float(k), rng.normal(size=2), 0.0)
    b1 = buf.sample(np.random.default_rng(7), 16)
    b2 = buf.sample(np.random.default_rng(7), 16)
    for key in b1:
        assert np.array_equal(b1[key], b2[key])


def test_replay_rejects_unbounded_actions():
    buf = sac.ReplayBuffer(4, 1, 1)
    with pytest.raises(ValueError):
        buf.push([0.0], [1.5], 0.0, [0.0], 0.0)


def test_replay_sample_requires_enough_data():
    buf = sac.ReplayBuffer(8, 1, 1)
    buf.push([0.0], [0.0], 0.0, [0.0], 0.0)
    with pytest.raises(ValueError):
        buf.sample(np.random.default_rng(0), 4)


# ------------------------------------------------------------- critic target


def fill_buffer(agent, n=64, seed=0):
    rng = np.random.default_rng(seed)
    buf = sac.ReplayBuffer(agent.hp.buffer_capacity, agent.obs_dim, agent.action_dim)
    for _ in range(n):
        buf.push(
            rng.normal(size=agent.obs_dim),
            rng.uniform(-1, 1, agent.action_dim),
            rng.normal(),
            rng.normal(size=agent.obs_dim),
            float(rng.integers(0, 2)),
        )
    return buf


def test_critic_target_terminal_cuts_bootstrap():
    agent = tiny_agent(seed=1)
    batch = {
        "obs": np.zeros((4, 3)),
        "action": np.zeros((4, 2)),
        "reward": np.array([1.0, -2.0, 0.5, 3.0]),
        "next_obs": np.random.default_rng(0).normal(size=(4, 3)),
        "done": np.ones(4),
    }
    y = sac.critic_target(agent, batch, np.random.default_rng(0))
    assert np.array_equal(y, batch["reward"])


def test_critic_target_zero_discount_returns_reward():
    agent = tiny_agent(seed=1, gamma=1e-12)
    batch = {
        "obs": np.zeros((3, 3)),
        "action": np.zeros((3, 2)),
        "reward": np.array([2.0, 0.0, -1.0]),
        "next_obs": np.random.default_rng(1).normal(size=(3, 3)),
        "done": np.zeros(3),
    }
    y = sac.critic_target(agent, batch, np.random.default_rng(0))
    assert np.allclose(y, batch["reward"], atol=1e-9)


def test_critic_target_uses_min_of_target_twins():
    agent = tiny_agent(seed=2, gamma=0.5)
    # constant-output target critics: zero weights, fixed final bias
    for net, c in ((agent.target1, 3.0), (agent.target2, 5.0)):
        for w in net.weights:
            w[:] = 0.0
        for bias in net.biases:
            bias[:] = 0.0
        net.biases[-1][:] = c
    agent.log_temp = -60.0  # temperature effectively zero
    batch = {
        "obs": np.zeros((2, 3)),
        "action": np.zeros((2, 2)),
        "reward": np.zeros(2),
        "next_obs": np.random.default_rng(2).normal(size=(2, 3)),
        "done": np.zeros(2),
    }
    y = sac.critic_target(agent, batch, np.random.default_rng(0))
    assert np.allclose(y, 0.5 * 3.0, atol=1e-9)


def test_critic_target_matches_independent_reimplementation():
    # duplicate-path oracle: same formula, written out against raw weights
    agent = tiny_agent(seed=9)
    buf = fill_buffer(agent, n=40, seed=3)
    batch = buf.sample(np.random.default_rng(21), 16)
    got = sac.critic_target(agent, batch, np.random.default_rng(55))

    def manual_forward(params, x):
        h = x
        for i, (w, bias) in enumerate(zip(params.weights, params.biases)):
            h = h @ w.T + bias
            if i < len(params.weights) - 1:
                h = np.where(h > 0, h, 0.0)
        return h

    rng = np.random.default_rng(55)
    scaled = batch["next_obs"] * agent.obs_scale
    out = manual_forward(agent.actor, scaled)
    mean, log_std = out[:, :2], np.clip(out[:, 2:], -20.0, 2.0)
    xi = rng.standard_normal((16, 2))
    pre = mean + np.exp(log_std) * xi
    a2 = np.tanh(pre)
    logp = np.sum(
        -0.5 * xi**2 - 0.5 * np.log(2 * np.pi) - log_std - np.log1p(-(a2**2)),
        axis=1,
    )
    q1 = manual_forward(agent.target1, np.concatenate([scaled, a2], axis=1))[:, 0]
    q2 = manual_forward(agent.target2, np.concatenate([scaled, a2], axis=1))[:, 0]
    temp = np.exp(agent.log_temp)
    want = batch["reward"] + agent.hp.gamma * (1 - batch["done"]) * (
        np.minimum(q1, q2) - temp * logp
    )
    assert np.max(np.abs(got - want)) < 1e-10


# ------------------------------------------------------------- actor update


def test_actor_gradients_match_finite_differences():
    agent = tiny_agent(seed=13)
    rng = np.random.default_rng(4)
    scaled_obs = rng.normal(size=(6, 3))
    xi = rng.standard_normal((6, 2))
    loss0, grads, _ = sac.actor_loss_and_grads(agent, scaled_obs, xi)

    def loss_of_params():
        return sac.actor_loss_and_grads(agent, scaled_obs, xi)[0]

    h = 1e-6
    worst = 0.0
    arrays = list(zip(agent.actor.weights, grads.weights)) + list(
        zip(agent.actor.biases, grads.biases)
    )
    for theta, g in arrays:
        flat, gflat = theta.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lp = loss_of_params()
            flat[k] = orig - h
            lm = loss_of_params()
            flat[k] = orig
            fd = (lp - lm) / (2 * h)
            err = abs(gflat[k] - fd) / max(abs(gflat[k]) + abs(fd), 1e-6)
            worst = max(worst, err)
    assert worst < 1e-4


def test_update_step_requires_full_batch():
    agent = tiny_agent(seed=1)
    buf = sac.ReplayBuffer(100, 3, 2)
    for _ in range(agent.hp.batch_size - 1):
        buf.push(np.zeros(3), np.zeros(2), 0.0, np.zeros(3), 0.0)
    before = [w.copy() for w in agent.actor.weights]
    assert sac.update_step(agent, buf, np.random.default_rng(0)) is None
    for w0, w1 in zip(before, agent.actor.weights):
        assert np.array_equal(w0, w1)


def test_update_step_polyak_blend_verified_elementwise():
    agent = tiny_agent(seed=4)
    buf = fill_buffer(agent, n=64, seed=5)
    old_t1 = [w.copy() for w in agent.target1.weights]
    losses = sac.update_step(agent, buf, np.random.default_rng(6))
    assert set(losses) == {"critic", "actor", "temp"}
    tau = agent.hp.polyak_tau
    for t_new, t_old, online in zip(agent.target1.weights, old_t1, agent.critic1.weights):
        assert np.allclose(t_new, (1 - tau) * t_old + tau * online, atol=1e-14)


def test_update_step_deterministic_for_same_rng():
    def run(seed):
        agent = tiny_agent(seed=8)
        buf = fill_buffer(agent, n=64, seed=2)
        for k in range(5):
            sac.update_step(agent, buf, np.random.default_rng(seed))
        return agent

    a1, a2 = run(3), run(3)
    for w1, w2 in zip(a1.actor.weights, a2.actor.weights):
        assert np.array_equal(w1, w2)
    assert a1.log_temp == a2.log_temp


def test_temperature_stays_finite_and_positive():
    agent = tiny_agent(seed=10)
    buf = fill_buffer(agent, n=80, seed=6)
    rng = np.random.default_rng(0)
    for _ in range(30):
        sac.update_step(agent, buf, rng)
    assert np.isfinite(agent.log_temp)
    assert np.exp(agent.log_temp) > 0.0


def test_polyak_contraction_converges_geometrically():
    agent = tiny_agent(seed=12)
    rng = np.random.default_rng(0)
    for w in agent.critic1.weights:
        w += rng.normal(size=w.shape)
    gaps = []
    for _ in range(3):
        for _ in range(200):
            sac.polyak_update(agent.target1, agent.critic1, 0.01)
        gap = max(
            np.max(np.abs(t - o))
            for t, o in zip(agent.target1.weights, agent.critic1.weights)
        )
        gaps.append(gap)
    assert gaps[1] < 0.2 * gaps[0] and gaps[2] < 0.2 * gaps[1]


# ------------------------------------------------------------- provider/train


def test_provider_builds_hybrid_command():
    from pegx import controller as ctl

    phys = sac.map_action(np.zeros(9), sac.ActionBounds(), np.zeros(3))
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    provider, get_state = sac.make_provider(phys, sel, ctl.reset_controller(), np.zeros(3))
    obs = sim.Observation(
        pos_err=np.array([0.01, 0.0, 0.05]),
        vel=np.array([0.0, 0.1, 0.0]),
        force=np.array([0.0, 0.0, 2.0]),
    )
    x_c = provider(obs)
    # midpoint action takes half of each gain ceiling
    kp_x = sac.ActionBounds().kp_x_hi / 2
    kp_f = sac.ActionBounds().kp_f_hi / 2
    # motion axes: kp_x on (x_hat - measured), kd_x = 0.5 kp_x on -vel
    assert x_c[0] == pytest.approx(kp_x * (0.0 - 0.01), abs=1e-12)
    assert x_c[1] == pytest.approx(0.5 * kp_x * (-0.1), abs=1e-12)
    # force axis: kp_f on the sensed reaction + tiny integral term
    integ = get_state().force_integral[2]
    assert integ == pytest.approx(2.0 / 60.0, abs=1e-15)
    assert x_c[2] == pytest.approx(kp_f * 2.0 + 0.001 * kp_f * integ, abs=1e-12)


def test_train_rejects_nonpositive_budget():
    agent = tiny_agent()
    with pytest.raises(ValueError):
        sac.train(lambda: sim.PegInHoleEnv(), agent, 0, seed=0)


def small_peg_agent(seed):
    hp = sac.SacHyperparams(batch_size=32, buffer_capacity=5000, warmup_steps=60)
    return sac.make_agent(9, 9, seed=seed, hp=hp, actor_hidden=(16, 16), critic_hidden=(24, 24))


def test_train_deterministic_end_to_end():
    def run():
        agent = small_peg_agent(seed=0)
        return sac.train(lambda: sim.PegInHoleEnv(), agent, 300, seed=17, curve_every=100)

    (a1, c1), (a2, c2) = run(), run()
    assert c1 == c2
    assert len(c1) == 3
    for w1, w2 in zip(a1.actor.weights, a2.actor.weights):
        assert np.array_equal(w1, w2)
    for w1, w2 in zip(a1.critic1.weights, a2.critic1.weights):
        assert np.array_equal(w1, w2)


def test_train_different_seeds_diverge():
    a1, _ = sac.train(lambda: sim.PegInHoleEnv(), small_peg_agent(0), 200, seed=1)
    a2, _ = sac.train(lambda: sim.PegInHoleEnv(), small_peg_agent(0), 200, seed=2)
    assert any(
        not np.array_equal(w1, w2) for w1, w2 in zip(a1.actor.weights, a2.actor.weights)
    )
