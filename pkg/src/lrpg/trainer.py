"""Low-rank actor-critic training loop.

One episode is: roll out the Gaussian policy, compute discounted
returns-to-go ``G`` and advantages ``A = G - V``, then update the mean (and
optionally the standard deviation) factors by gradient ascent on
``sum_t A_t log pi(a_t | s_t)`` and the critic factors by gradient descent on
``0.5 * sum_t (G_t - V_t)**2``. Every gradient is evaluated at the pre-update
parameters.

:func:`rollout`, :func:`returns_to_go` and :func:`advantages` are shared with
the neural-network baseline in :mod:`lrpg.mlp`; only the function
approximator differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .envs import Env
from .factored import FactoredMatrix, FactorGradient, step_ascent
from .grid import GridSpec
from .policy import FactoredSigma, FixedSigma, PolicyParams, dlogp_dmu, dlogp_dsigma

ACTOR_CRITIC = "actor_critic"
REINFORCE = "reinforce"


@dataclass
class Hyper:
    gamma: float = 0.99
    alpha_mu: float = 1e-3
    alpha_sigma: float = 1e-4
    alpha_omega: float = 1e-3
    episodes: int = 1000
    horizon: int = 200
    mode: str = ACTOR_CRITIC

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        for name in ("alpha_mu", "alpha_sigma", "alpha_omega"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.episodes < 1 or self.horizon < 1:
            raise ValueError("episodes and horizon must be >= 1")
        if self.mode not in (ACTOR_CRITIC, REINFORCE):
            raise ValueError(f"mode must be {ACTOR_CRITIC!r} or {REINFORCE!r}, got {self.mode!r}")


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    indices: list = field(default_factory=list)  # (i, j) per step; empty for non-tabular actors
    actions: list = field(default_factory=list)  # unclipped samples
    rewards: list = field(default_factory=list)

    def __len__(self):
        return len(self.actions)

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.indices) != len(self.actions):
            raise ValueError("trajectory has no matrix indices for every step")
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1, 2)
        return idx[:, 0], idx[:, 1]

    @property
    def episode_return(self) -> float:
        return math.fsum(self.rewards)


class TabularActor:
    """Adapts :class:`PolicyParams` + :class:`GridSpec` to the rollout interface.

    The mean and sigma tables are materialised once per episode; parameters
    never change inside an episode.
    """

    def __init__(self, policy: PolicyParams, spec: GridSpec):
        if policy.x_mu.shape != (spec.rows, spec.cols):
            raise ValueError(
                f"policy matrix {policy.x_mu.shape} does not match grid {spec.rows}x{spec.cols}")
        self.policy = policy
        self.spec = spec

    def begin_episode(self):
        self._mu = self.policy.mean_table().tolist()
        self._sigma = self.policy.sigma_table().tolist()

    def __call__(self, state):
        i, j = self.spec.encode(state)
        return (i, j), self._mu[i][j], self._sigma[i][j]


def rollout(env: Env, policy, spec: Optional[GridSpec], T: int,
            rng: np.random.Generator) -> Trajectory:
    """Sample one episode of at most ``T`` steps.

    ``policy`` is either :class:`PolicyParams` (then ``spec`` is required) or
    an actor object with ``begin_episode()`` and ``__call__(state) -> (key,
    mu, sigma)``. The generator is consumed as: ``env.reset(rng)``, then one
    block ``z = rng.standard_normal(T)``; step ``t`` plays
    ``a_t = mu_t + sigma_t * z[t]`` clipped to the action bounds.
    """
    if isinstance(policy, PolicyParams):
        if spec is None:
            raise ValueError("a GridSpec is required for a tabular policy")
        actor = TabularActor(policy, spec)
    else:
        actor = policy
    actor.begin_episode()

    traj = Trajectory()
    state = env.reset(rng)
    z = rng.standard_normal(T).tolist()
    lo, hi = env.action_low, env.action_high
    for t in range(T):
        key, mu, sigma = actor(state)
        a = mu + sigma * z[t]
        res = env.step(lo if a < lo else hi if a > hi else a)
        traj.states.append(state)
        if key is not None:
            traj.indices.append(key)
        traj.actions.append(a)
        traj.rewards.append(res.reward)
        if res.done:
            break
        state = res.next_state
    return traj


def returns_to_go(rewards, gamma: float) -> np.ndarray:
    """``G_t = r_t + gamma * G_{t+1}`` computed backwards."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty reward sequence")
    G = np.empty_like(r)
    acc = 0.0
    for t in range(r.size - 1, -1, -1):
        acc = r[t] + gamma * acc
        G[t] = acc
    return G


def _entries(F: FactoredMatrix, I, J) -> np.ndarray:
    if len(I) and (I.min() < 0 or J.min() < 0 or I.max() >= F.n_rows or J.max() >= F.n_cols):
        raise IndexError(f"index out of range for {F.n_rows}x{F.n_cols} matrix")
    return np.einsum("tk,kt->t", F.left[I], F.right[:, J])


def critic_values(x_omega: FactoredMatrix, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.intp).reshape(-1, 2)
    return _entries(x_omega, idx[:, 0], idx[:, 1])


def advantages(G, V, mode: str = ACTOR_CRITIC) -> np.ndarray:
    G = np.asarray(G, dtype=np.float64)
    if mode == REINFORCE:
        return G.copy()
    V = np.asarray(V, dtype=np.float64)
    if G.shape != V.shape:
        raise ValueError(f"returns {G.shape} and values {V.shape} differ in length")
    return G - V


def _accumulate(F: FactoredMatrix, I, J, weights) -> FactorGradient:
    """Per-entry chain rule through ``X[i, j] = L[i] . R[:, j]``.

    Step ``t`` adds ``w_t * R[:, j_t]`` to row ``i_t`` of ``dL`` and
    ``w_t * L[i_t]`` to column ``j_t`` of ``dR``; rows and columns never
    visited stay exactly zero.
    """
    g = F.zero_gradient()
    w = weights[:, None]
    np.add.at(g.d_left, I, w * F.right[:, J].T)
    np.add.at(g.d_right.T, J, w * F.left[I])
    return g


def actor_gradients(traj: Trajectory, policy: PolicyParams, A):
    """Gradients of ``sum_t A_t log pi(a_t | s_t)`` w.r.t. the actor factors.

    Returns ``(grad_mu, grad_sigma)``; ``grad_sigma`` is ``None`` for a fixed
    sigma. Steps where the sigma floor is active contribute nothing to
    ``grad_sigma``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (len(traj),):
        raise ValueError(f"{A.size} advantages for a trajectory of length {len(traj)}")
    I, J = traj.index_arrays()
    a = np.asarray(traj.actions, dtype=np.float64)
    mu = _entries(policy.x_mu, I, J)

    if isinstance(policy.sigma, FixedSigma):
        sigma = np.full_like(mu, policy.sigma.sigma)
        grad_sigma = None
    else:
        raw = _entries(policy.sigma.x_sigma, I, J)
        floored = raw <= policy.sigma.sigma_floor
        sigma = np.where(floored, policy.sigma.sigma_floor, raw)
        w_sigma = np.where(floored, 0.0, A * dlogp_dsigma(a, mu, sigma))
        grad_sigma = _accumulate(policy.sigma.x_sigma, I, J, w_sigma)

    grad_mu = _accumulate(policy.x_mu, I, J, A * dlogp_dmu(a, mu, sigma))
    return grad_mu, grad_sigma


def critic_gradients(traj: Trajectory, x_omega: FactoredMatrix, G) -> FactorGradient:
    """Descent direction for the squared critic loss, ``-grad 0.5 * sum_t (G_t - V_t)**2``."""
    G = np.asarray(G, dtype=np.float64)
    if G.shape != (len(traj),):
        raise ValueError(f"{G.size} returns for a trajectory of length {len(traj)}")
    I, J = traj.index_arrays()
    return _accumulate(x_omega, I, J, G - _entries(x_omega, I, J))


def train_episode(env: Env, policy: PolicyParams, x_omega: FactoredMatrix, spec: GridSpec,
                  hyper: Hyper, rng: np.random.Generator):
    """Run one episode and update ``policy`` and ``x_omega`` in place.

    Returns ``(policy, x_omega, undiscounted episode return)``.
    """
    traj = rollout(env, policy, spec, hyper.horizon, rng)
    G = returns_to_go(traj.rewards, hyper.gamma)
    if hyper.mode == ACTOR_CRITIC:
        V = critic_values(x_omega, traj.indices)
        A = advantages(G, V, ACTOR_CRITIC)
        g_omega = critic_gradients(traj, x_omega, G)
    else:
        A = advantages(G, None, REINFORCE)
        g_omega = None
    g_mu, g_sigma = actor_gradients(traj, policy, A)

    step_ascent(policy.x_mu, g_mu, hyper.alpha_mu)
    if g_sigma is not None:
        step_ascent(policy.sigma.x_sigma, g_sigma, hyper.alpha_sigma)
    if g_omega is not None:
        step_ascent(x_omega, g_omega, hyper.alpha_omega)
    return policy, x_omega, traj.episode_return


def train(env: Env, policy: PolicyParams, x_omega: FactoredMatrix, spec: GridSpec,
          hyper: Hyper, rng: np.random.Generator,
          callback: Optional[Callable[[int, float], None]] = None) -> np.ndarray:
    """``hyper.episodes`` calls of :func:`train_episode`; returns the return series."""
    out = np.empty(hyper.episodes)
    for h in range(hyper.episodes):
        _, _, ret = train_episode(env, policy, x_omega, spec, hyper, rng)
        out[h] = ret
        if callback is not None:
            callback(h, ret)
    return out


def greedy_episode(env: Env, actor, rng: np.random.Generator, T: int) -> tuple[float, list]:
    """Play the mean action of ``actor`` (no exploration); returns (return, visited states)."""
    actor.begin_episode()
    state = env.reset(rng)
    states, total = [state], 0.0
    for _ in range(T):
        _, mu, _ = actor(state)
        res = env.step(mu)
        total += res.reward
        state = res.next_state
        states.append(state)
        if res.done:
            break
    return total, states
