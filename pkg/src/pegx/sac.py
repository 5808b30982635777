"""Soft actor-critic on the numpy network substrate.

The actor is a squashed Gaussian: a trunk MLP emits per-dimension means and
log-stddevs, actions are tanh(mean + std * noise) so every raw action lands
in (-1, 1)^d, and log-probabilities carry the tanh change-of-variables
correction. Two independent critics (plus polyak-averaged target copies)
score (observation, raw action) pairs; the entropy temperature is tuned
automatically toward a target entropy.

Raw actions are mapped affinely to the physical action: a target position
near the hole plus the proportional motion and force gains of the hybrid
controller. Training steps the environment at 20 Hz while the controller
closes its loop at 60 Hz inside each agent step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from . import nn
from . import sim

Array = np.ndarray

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

# fixed feature scaling so positions (~5 cm), velocities (~0.5 m/s) and
# forces (~10 N) enter the networks at comparable magnitude
OBS_SCALE = np.array([20.0, 20.0, 20.0, 2.0, 2.0, 2.0, 0.1, 0.1, 0.1])


@dataclass
class SacHyperparams:
    gamma: float = 0.99
    polyak_tau: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_temp: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 200_000
    warmup_steps: int = 1000
    entropy_target: float = -9.0
    updates_per_env_step: int = 1

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must be in (0,1)")
        if not (0.0 < self.polyak_tau < 1.0):
            raise ValueError("polyak_tau must be in (0,1)")
        if min(self.lr_actor, self.lr_critic, self.lr_temp) <= 0.0:
            raise ValueError("learning rates must be positive")
        if self.batch_size <= 0 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 0 < batch_size <= buffer_capacity")
        if self.warmup_steps < 0 or self.updates_per_env_step <= 0:
            raise ValueError("bad warmup or update ratio")


@dataclass
class ActionBounds:
    """Codomain of the physical action [x_hat_a, kp_x, kp_f].

    Gain ceilings sit at the discrete servo's stability envelope for the
    faster embodiment (60 Hz substeps, tau = 0.05 s): position feedback
    beyond ~0.4 or force feedback beyond ~4e-4 m/N drives the closed loop
    into limit cycles against the 5000 N/m contact. The target box is
    sized so that a worst-case lateral command pressed against the bore
    wall stays under the 50 N collision threshold: wall force scales with
    m_eff/tau^2 * (1 + kp_x) * halfwidth, about 22 N at 0.02 m for the
    stiff embodiment but past the limit by 0.04 m.
    """

    x_hat_halfwidth: float = 0.02  # m, box around the hole estimate
    kp_x_lo: float = 0.0
    kp_x_hi: float = 0.4
    kp_f_lo: float = 0.0
    kp_f_hi: float = 4e-4  # m/N

    def __post_init__(self):
        if self.x_hat_halfwidth <= 0:
            raise ValueError("x_hat_halfwidth must be positive")
        if self.kp_x_lo >= self.kp_x_hi or self.kp_f_lo >= self.kp_f_hi:
            raise ValueError("gain ranges must have lo < hi")


@dataclass
class PhysicalAction:
    x_hat_a: Array
    kp_x: Array
    kp_f: Array
    gains: ctl.ControllerGains


class ReplayBuffer:
    """Fixed-capacity FIFO ring over transitions, sampled uniformly."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros((capacity, action_dim))
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.insert_count = 0

    def __len__(self) -> int:
        return min(self.insert_count, self.capacity)

    def push(self, obs, action, reward: float, next_obs, done_mask: float) -> None:
        action = np.asarray(action, dtype=float)
        if np.any(np.abs(action) > 1.0):
            raise ValueError("raw actions must lie in [-1, 1]")
        i = self.insert_count % self.capacity
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = done_mask
        self.insert_count += 1

    def sample(self, rng: np.random.Generator, batch_size: int) -> dict:
        size = len(self)
        if batch_size > size:
            raise ValueError("not enough transitions to sample")
        idx = rng.integers(0, size, size=batch_size)
        return {
            "obs": self.obs[idx],
            "action": self.action[idx],
            "reward": self.reward[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
        }


@dataclass
class SacAgent:
    obs_dim: int
    action_dim: int
    actor_hidden: list[int]
    critic_hidden: list[int]
    actor: nn.MlpParams
    critic1: nn.MlpParams
    critic2: nn.MlpParams
    target1: nn.MlpParams
    target2: nn.MlpParams
    actor_opt: nn.AdamState
    critic1_opt: nn.AdamState
    critic2_opt: nn.AdamState
    log_temp: float
    temp_m: float
    temp_v: float
    temp_step: int
    hp: SacHyperparams
    obs_scale: Array = field(default_factory=lambda: OBS_SCALE.copy())


def _copy_params(p: nn.MlpParams) -> nn.MlpParams:
    return nn.MlpParams(
        weights=[w.copy() for w in p.weights], biases=[b.copy() for b in p.biases]
    )


def make_agent(
    obs_dim: int,
    action_dim: int,
    seed: int,
    hp: SacHyperparams | None = None,
    actor_hidden=(64, 64),
    critic_hidden=(300, 400),
    obs_scale=None,
) -> SacAgent:
    """Fresh agent; initialization order is actor, critic1, critic2."""
    hp = hp or SacHyperparams()
    rng = np.random.default_rng(seed)
    actor_hidden = list(actor_hidden)
    critic_hidden = list(critic_hidden)
    actor = nn.init_params([obs_dim, *actor_hidden, 2 * action_dim], rng)
    critic_sizes = [obs_dim + action_dim, *critic_hidden, 1]
    critic1 = nn.init_params(critic_sizes, rng)
    critic2 = nn.init_params(critic_sizes, rng)
    if obs_scale is None:
        obs_scale = OBS_SCALE.copy() if obs_dim == 9 else np.ones(obs_dim)
    return SacAgent(
        obs_dim=obs_dim,
        action_dim=action_dim,
        actor_hidden=actor_hidden,
        critic_hidden=critic_hidden,
        actor=actor,
        critic1=critic1,
        critic2=critic2,
        target1=_copy_params(critic1),
        target2=_copy_params(critic2),
        actor_opt=nn.adam_init(actor),
        critic1_opt=nn.adam_init(critic1),
        critic2_opt=nn.adam_init(critic2),
        log_temp=0.0,
        temp_m=0.0,
        temp_v=0.0,
        temp_step=0,
        hp=hp,
        obs_scale=np.asarray(obs_scale, dtype=float),
    )


def _actor_heads(agent: SacAgent, scaled_obs: Array):
    y, cache = nn.forward(agent.actor, scaled_obs)
    d = agent.action_dim
    mean = y[:, :d]
    raw_log_std = y[:, d:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    return mean, log_std, raw_log_std, cache


def squashed_log_prob(mean: Array, log_std: Array, xi: Array) -> Array:
    """log pi of a = tanh(mean + exp(log_std) * xi), summed over dims.

    Uses log(1 - tanh(x)^2) = 2*(log 2 - x - softplus(-2x)) which stays
    finite for large |x|.
    """
    pre = mean + np.exp(log_std) * xi
    gauss = -0.5 * xi**2 - 0.5 * np.log(2.0 * np.pi) - log_std
    correction = 2.0 * (np.log(2.0) - pre - np.logaddexp(0.0, -2.0 * pre))
    return np.sum(gauss - correction, axis=1)


def sample_action(agent: SacAgent, obs, rng: np.random.Generator) -> tuple[Array, float]:
    """Stochastic action for one observation, with its log-probability."""
    scaled = (np.asarray(obs, dtype=float) * agent.obs_scale)[None, :]
    mean, log_std, _, _ = _actor_heads(agent, scaled)
    xi = rng.standard_normal(agent.action_dim)[None, :]
    raw = np.tanh(mean + np.exp(log_std) * xi)
    logp = squashed_log_prob(mean, log_std, xi)
    return raw[0], float(logp[0])


def deterministic_action(agent: SacAgent, obs) -> Array:
    scaled = (np.asarray(obs, dtype=float) * agent.obs_scale)[None, :]
    mean, _, _, _ = _actor_heads(agent, scaled)
    return np.tanh(mean[0])


def map_action(raw, bounds: ActionBounds, hole_estimate) -> PhysicalAction:
    """Affine map from raw [-1,1]^9 to target position and controller gains."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (9,):
        raise ValueError(f"raw action must have 9 dims, got {raw.shape}")
    if np.any(np.abs(raw) > 1.0):
        raise ValueError("raw action components must lie in [-1, 1]")
    hole_estimate = np.asarray(hole_estimate, dtype=float)
    x_hat = hole_estimate + bounds.x_hat_halfwidth * raw[0:3]
    half = 0.5 * (raw + 1.0)
    kp_x = bounds.kp_x_lo + half[3:6] * (bounds.kp_x_hi - bounds.kp_x_lo)
    kp_f = bounds.kp_f_lo + half[6:9] * (bounds.kp_f_hi - bounds.kp_f_lo)
    return PhysicalAction(x_hat_a=x_hat, kp_x=kp_x, kp_f=kp_f, gains=ctl.derive_gains(kp_x, kp_f))


def critic_target(agent: SacAgent, batch: dict, rng: np.random.Generator) -> Array:
    """Bootstrapped regression target for both critics.

    Draws one fresh action per next-observation (a standard-normal matrix of
    shape (batch, action_dim), the only rng consumption), scores it with the
    target critics, and discounts with the entropy bonus. done_mask = 1 cuts
    the bootstrap.
    """
    next_scaled = batch["next_obs"] * agent.obs_scale
    mean, log_std, _, _ = _actor_heads(agent, next_scaled)
    xi = rng.standard_normal((next_scaled.shape[0], agent.action_dim))
    next_a = np.tanh(mean + np.exp(log_std) * xi)
    logp = squashed_log_prob(mean, log_std, xi)
    inp = np.concatenate([next_scaled, next_a], axis=1)
    q1, _ = nn.forward(agent.target1, inp)
    q2, _ = nn.forward(agent.target2, inp)
    qmin = np.minimum(q1[:, 0], q2[:, 0])
    temp = float(np.exp(agent.log_temp))
    return batch["reward"] + agent.hp.gamma * (1.0 - batch["done"]) * (qmin - temp * logp)


def polyak_update(target: nn.MlpParams, online: nn.MlpParams, tau: float) -> None:
    for t, o in zip(target.weights, online.weights):
        t *= 1.0 - tau
        t += tau * o
    for t, o in zip(target.biases, online.biases):
        t *= 1.0 - tau
        t += tau * o


def actor_loss_and_grads(
    agent: SacAgent, scaled_obs: Array, xi: Array
) -> tuple[float, nn.GradientBuffer, Array]:
    """Entropy-regularized actor loss and its exact trunk gradients.

    Loss = mean(temp * log pi(a|s) - min(Q1, Q2)(s, a)) with a = tanh(mean
    + sigma * xi) for the given fixed noise, critics held frozen. ties in
    the twin minimum route through critic 1. Returns (loss, gradients,
    per-sample log pi).

    Gradient derivation, per sample and action dim i, with p = pre-squash
    value and a = tanh(p): d log pi / d p_i = 2 a_i, so
      dL/d mean_i    = temp * 2 a_i / B + (dL/d a_i)(1 - a_i^2)
      dL/d log_std_i = temp * (-1 + 2 a_i sigma_i xi_i) / B
                       + (dL/d a_i)(1 - a_i^2) sigma_i xi_i
    where the log-std path is zeroed wherever the raw head output sits
    outside the clamp interval.
    """
    b = scaled_obs.shape[0]
    mean, log_std, raw_log_std, actor_cache = _actor_heads(agent, scaled_obs)
    sigma = np.exp(log_std)
    pre = mean + sigma * xi
    a = np.tanh(pre)
    logp = squashed_log_prob(mean, log_std, xi)
    temp = float(np.exp(agent.log_temp))

    actor_in = np.concatenate([scaled_obs, a], axis=1)
    q1, cache1 = nn.forward(agent.critic1, actor_in)
    q2, cache2 = nn.forward(agent.critic2, actor_in)
    use1 = (q1[:, 0] <= q2[:, 0]).astype(float)[:, None]
    qmin = np.where(use1 > 0, q1, q2)
    loss = float(np.mean(temp * logp - qmin[:, 0]))

    # dL/da through whichever critic realizes the min, action columns only
    g1 = nn.input_gradient(agent.critic1, cache1, -use1 / b)
    g2 = nn.input_gradient(agent.critic2, cache2, -(1.0 - use1) / b)
    dq_da = (g1 + g2)[:, agent.obs_dim :]

    one_m_a2 = 1.0 - a**2
    d_mean = (temp / b) * (2.0 * a) + dq_da * one_m_a2
    clamp_mask = (raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)
    d_log_std = (temp / b) * (-1.0 + 2.0 * a * sigma * xi) + dq_da * one_m_a2 * sigma * xi
    d_log_std = d_log_std * clamp_mask
    trunk_grad = np.concatenate([d_mean, d_log_std], axis=1)
    grads, _ = nn.backward(agent.actor, actor_cache, trunk_grad)
    return loss, grads, logp


def update_step(agent: SacAgent, buffer: ReplayBuffer, rng: np.random.Generator):
    """One SAC update: critics, actor, temperature, target networks.

    Returns the loss dictionary, or None when the buffer cannot fill a
    batch yet. rng consumption order: batch indices, target-action noise,
    actor-action noise.
    """
    hp = agent.hp
    if len(buffer) < hp.batch_size:
        return None
    batch = buffer.sample(rng, hp.batch_size)
    y = critic_target(agent, batch, rng)

    b = hp.batch_size
    scaled_obs = batch["obs"] * agent.obs_scale
    critic_in = np.concatenate([scaled_obs, batch["action"]], axis=1)
    critic_losses = []
    for net, opt in ((agent.critic1, agent.critic1_opt), (agent.critic2, agent.critic2_opt)):
        q, cache = nn.forward(net, critic_in)
        err = q[:, 0] - y
        critic_losses.append(float(np.mean(err**2)))
        grads, _ = nn.backward(net, cache, (2.0 / b) * err[:, None])
        nn.optimizer_step(net, grads, opt, lr=hp.lr_critic)

    # actor: reparameterized sample through the freshly updated critics
    xi = rng.standard_normal((b, agent.action_dim))
    actor_loss, agrads, logp = actor_loss_and_grads(agent, scaled_obs, xi)
    nn.optimizer_step(agent.actor, agrads, agent.actor_opt, lr=hp.lr_actor)

    # temperature: push entropy toward the target
    temp_err = float(np.mean(logp + hp.entropy_target))
    temp_loss = -agent.log_temp * temp_err
    g = -temp_err
    agent.temp_step += 1
    agent.temp_m = 0.9 * agent.temp_m + 0.1 * g
    agent.temp_v = 0.999 * agent.temp_v + 0.001 * g * g
    mhat = agent.temp_m / (1.0 - 0.9**agent.temp_step)
    vhat = agent.temp_v / (1.0 - 0.999**agent.temp_step)
    agent.log_temp -= hp.lr_temp * mhat / (np.sqrt(vhat) + 1e-8)

    polyak_update(agent.target1, agent.critic1, hp.polyak_tau)
    polyak_update(agent.target2, agent.critic2, hp.polyak_tau)
    return {
        "critic": 0.5 * (critic_losses[0] + critic_losses[1]),
        "actor": actor_loss,
        "temp": temp_loss,
    }


def make_provider(
    phys: PhysicalAction,
    sel: ctl.SelectionMatrix,
    state: ctl.ControllerState,
    hole_center,
):
    """Close the 60 Hz hybrid-control loop around one held physical action.

    Builds the control errors from each internal observation using the
    wrist-sensor convention: the measured force is what the robot applies
    to the environment, so the force error equals the sensed reaction on
    the peg. Returns (provider, get_state): the provider feeds agent_step,
    get_state exposes the integral state to carry across agent steps.
    """
    hole_center = np.asarray(hole_center, dtype=float)
    box = {"state": state}

    def provider(internal_obs: sim.Observation):
        measured_pos = hole_center + internal_obs.pos_err
        errors = ctl.ControlErrors(
            pos_err=phys.x_hat_a - measured_pos,
            vel_err=-internal_obs.vel,
            force_err=internal_obs.force,
        )
        u, box["state"] = ctl.hybrid_command(errors, phys.gains, sel, box["state"], sim.SUBSTEP_DT)
        return ctl.compose_command(phys.x_hat_a, u)

    return provider, lambda: box["state"]


def train(
    env_factory,
    agent: SacAgent,
    total_steps: int,
    seed: int,
    bounds: ActionBounds | None = None,
    weights: sim.RewardWeights | None = None,
    curve_every: int = 1000,
) -> tuple[SacAgent, list[tuple[int, float, float]]]:
    """Off-policy training loop on the peg-in-hole environment.

    Episodic: each episode starts from a random point on the start patch,
    runs the hybrid controller inside every agent step, stores transitions,
    and performs hp.updates_per_env_step gradient updates per environment
    step once warmup has passed. Returns the trained agent and the curve
    rows (step, mean episode reward over the last 20 episodes, success
    percentage over the last 50 episodes). Fully deterministic per seed.
    """
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    bounds = bounds or ActionBounds()
    weights = weights or sim.RewardWeights()
    env: sim.PegInHoleEnv = env_factory()
    sel = ctl.SelectionMatrix.motion_xy_force_z()
    hp = agent.hp

    ss = np.random.SeedSequence(seed)
    s_action, s_update, s_start, s_episode = ss.spawn(4)
    rng_action = np.random.default_rng(s_action)
    rng_update = np.random.default_rng(s_update)
    rng_start = np.random.default_rng(s_start)
    rng_episode = np.random.default_rng(s_episode)

    buffer = ReplayBuffer(hp.buffer_capacity, agent.obs_dim, agent.action_dim)
    curve: list[tuple[int, float, float]] = []
    episode_rewards: list[float] = []
    episode_successes: list[bool] = []

    obs = None
    ctl_state = ctl.reset_controller()
    episode_return = 0.0

    def begin_episode():
        nonlocal obs, ctl_state, episode_return
        start = sim.sample_start(rng_start, env.geometry)
        ep_seed = int(rng_episode.integers(0, 2**63))
        obs = env.reset(start, ep_seed)
        ctl_state = ctl.reset_controller()
        episode_return = 0.0

    begin_episode()
    for step in range(1, total_steps + 1):
        obs_vec = obs.vector()
        if step <= hp.warmup_steps:
            raw = rng_action.uniform(-1.0, 1.0, size=agent.action_dim)
        else:
            raw, _ = sample_action(agent, obs_vec, rng_action)
        # action box centers on the episode's calibrated estimate, not the
        # true hole; the provider only rebuilds absolute measured positions
        phys = map_action(raw, bounds, env.hole_estimate)
        provider, get_ctl = make_provider(phys, sel, ctl_state, env.geometry.hole_center)
        next_obs, reason = env.agent_step(provider)
        ctl_state = get_ctl()
        reward = sim.compute_reward(next_obs, reason, weights)
        done_mask = 1.0 if reason in (sim.TerminalReason.SUCCESS, sim.TerminalReason.COLLISION) else 0.0
        buffer.push(obs_vec, raw, reward, next_obs.vector(), done_mask)
        episode_return += reward
        obs = next_obs

        if reason is not sim.TerminalReason.RUNNING:
            episode_rewards.append(episode_return)
            episode_successes.append(reason is sim.TerminalReason.SUCCESS)
            begin_episode()

        if step > hp.warmup_steps:
            for _ in range(hp.updates_per_env_step):
                update_step(agent, buffer, rng_update)

        if step % curve_every == 0:
            recent = episode_rewards[-20:]
            window = episode_successes[-50:]
            mean_r = float(np.mean(recent)) if recent else 0.0
            rate = 100.0 * sum(window) / len(window) if window else 0.0
            curve.append((step, mean_r, rate))

    return agent, curve
