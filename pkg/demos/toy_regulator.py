"""Sanity-check the learning stack on a one-dimensional regulator.

The task: state x in [-2, 2], action a in [-1, 1], dynamics
x' = clip(x + 0.2*a), reward -x'^2, 25-step episodes from random starts
in [-1, 1]. The optimal policy drives x to zero as fast as the action
budget allows; its mean episode return has a closed-form-free but easily
simulated value around -0.27. A few thousand steps of the same agent code
used for the insertion task should land within a few percent of that.
"""

import numpy as np

from pegx import sac

HORIZON = 25
STEPS = 30_000


def optimal_return() -> float:
    xs = np.linspace(-1, 1, 2001)
    total = 0.0
    for x0 in xs:
        x, ret = float(x0), 0.0
        for _ in range(HORIZON):
            a = max(-1.0, min(1.0, -x / 0.2))
            x = max(-2.0, min(2.0, x + 0.2 * a))
            ret += -x * x
        total += ret
    return total / len(xs)


def main():
    opt = optimal_return()
    print(f"optimal mean episode return ~ {opt:.4f}")

    hp = sac.SacHyperparams(batch_size=128, buffer_capacity=50_000,
                            warmup_steps=500, entropy_target=-1.0)
    agent = sac.make_agent(1, 1, seed=0, hp=hp,
                           actor_hidden=(32, 32), critic_hidden=(64, 64))
    buffer = sac.ReplayBuffer(hp.buffer_capacity, 1, 1)
    ss = np.random.SeedSequence(0)
    rng_action, rng_update, rng_episode = (np.random.default_rng(c) for c in ss.spawn(3))

    returns = []
    x = float(rng_episode.uniform(-1, 1))
    t_in_ep, ep_ret = 0, 0.0
    for step in range(1, STEPS + 1):
        obs = np.array([x])
        if step <= hp.warmup_steps:
            a = float(rng_action.uniform(-1, 1))
        else:
            raw, _ = sac.sample_action(agent, obs, rng_action)
            a = float(raw[0])
        x_next = max(-2.0, min(2.0, x + 0.2 * a))
        r = -x_next * x_next
        ep_ret += r
        t_in_ep += 1
        buffer.push(obs, np.array([a]), r, np.array([x_next]), 0.0)
        x = x_next
        if t_in_ep == HORIZON:
            returns.append(ep_ret)
            x = float(rng_episode.uniform(-1, 1))
            t_in_ep, ep_ret = 0, 0.0
        if step > hp.warmup_steps:
            sac.update_step(agent, buffer, rng_update)
        if step % 5000 == 0:
            recent = float(np.mean(returns[-50:]))
            print(f"step {step:6d}  mean return (last 50 episodes) {recent:8.4f}")

    final = float(np.mean(returns[-100:]))
    print(f"final stochastic mean return {final:.4f} (includes exploration noise)")

    # score the learned policy itself: deterministic rollouts, fixed starts
    total = 0.0
    starts = np.linspace(-1, 1, 201)
    for x0 in starts:
        x, ret = float(x0), 0.0
        for _ in range(HORIZON):
            a = float(sac.deterministic_action(agent, np.array([x]))[0])
            x = max(-2.0, min(2.0, x + 0.2 * a))
            ret += -x * x
        total += ret
    det = total / len(starts)
    print(f"deterministic policy return {det:.4f}  (optimum {opt:.4f}, "
          f"gap {100 * (det - opt) / abs(opt):+.1f}%)")


if __name__ == "__main__":
    main()
