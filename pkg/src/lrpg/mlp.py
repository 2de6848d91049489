"""Fully-connected baseline agent: an MLP mean with fixed sigma and an MLP critic.

Both networks act on the raw continuous state. They are trained with the same
rollout, returns and advantages as the low-rank agent, by plain SGD on the
same surrogate objectives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import Env
from .trainer import ACTOR_CRITIC, Hyper, advantages, returns_to_go, rollout


@dataclass
class Mlp:
    """tanh hidden layers, identity scalar output. ``weights[l]`` is ``fan_out x fan_in``."""

    weights: list
    biases: list

    def __post_init__(self):
        self.weights = [np.array(w, dtype=np.float64, ndmin=2) for w in self.weights]
        self.biases = [np.array(b, dtype=np.float64, ndmin=1) for b in self.biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {l}: weight {w.shape} and bias {b.shape} disagree")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l}: fan-in {w.shape[1]} != previous fan-out "
                                 f"{self.weights[l - 1].shape[0]}")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def new_mlp(layer_sizes, rng: np.random.Generator) -> Mlp:
    """Weights and biases uniform on ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or min(sizes) < 1 or sizes[-1] != 1:
        raise ValueError(f"bad layer sizes {layer_sizes!r}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Mlp(weights, biases)


def mlp_param_count(net: Mlp) -> int:
    sizes = net.layer_sizes
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def _forward_batch(net: Mlp, X: np.ndarray):
    acts = [X]
    h = X
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if l < last:
            h = np.tanh(h)
        acts.append(h)
    return acts


def _as_batch(net: Mlp, states) -> np.ndarray:
    X = np.asarray(states, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != net.weights[0].shape[1]:
        raise ValueError(f"input has {X.shape[1]} features, network expects {net.weights[0].shape[1]}")
    return X


def mlp_forward(net: Mlp, state) -> float:
    x = np.asarray(state, dtype=np.float64)
    if x.shape != (net.weights[0].shape[1],):
        raise ValueError(f"input shape {x.shape} does not match network fan-in {net.weights[0].shape[1]}")
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = w @ x + b
        if l < last:
            x = np.tanh(x)
    return float(x[0])


def mlp_forward_batch(net: Mlp, states) -> np.ndarray:
    return _forward_batch(net, _as_batch(net, states))[-1][:, 0]


def mlp_backward(net: Mlp, states, upstream):
    """Gradient of ``sum_t upstream_t * net(states_t)`` w.r.t. every parameter.

    ``states`` may be a single state with a scalar ``upstream``. Returns
    ``(weight_grads, bias_grads)`` aligned with ``net.weights``/``net.biases``.
    """
    X = _as_batch(net, states)
    g = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if g.shape[0] != X.shape[0]:
        raise ValueError(f"{g.shape[0]} upstream scalars for {X.shape[0]} inputs")
    acts = _forward_batch(net, X)
    delta = g[:, None]
    dW = [None] * len(net.weights)
    db = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        dW[l] = delta.T @ acts[l]
        db[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ net.weights[l]) * (1.0 - acts[l] ** 2)
    return dW, db


def sgd_step(net: Mlp, grads, rate: float) -> Mlp:
    """``param += rate * grad`` in place (ascent for positive ``rate``)."""
    dW, db = grads
    if rate == 0:
        return net
    with np.errstate(over="ignore", invalid="ignore"):
        new_w = [w + rate * d for w, d in zip(net.weights, dW)]
        new_b = [b + rate * d for b, d in zip(net.biases, db)]
    if not all(np.all(np.isfinite(p)) for p in new_w + new_b):
        raise FloatingPointError("update produced non-finite network parameters")
    net.weights, net.biases = new_w, new_b
    return net


class MlpActor:
    """Rollout adapter: mean from the network, constant sigma."""

    def __init__(self, net: Mlp, sigma: float):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.net = net
        self.sigma = float(sigma)

    def begin_episode(self):
        self._w = list(zip(self.net.weights, self.net.biases))

    def __call__(self, state):
        x = np.asarray(state, dtype=np.float64)
        last = len(self._w) - 1
        for l, (w, b) in enumerate(self._w):
            x = w @ x + b
            if l < last:
                x = np.tanh(x)
        return None, float(x[0]), self.sigma


def rvfb_train_episode(env: Env, actor: Mlp, critic: Mlp, hyper: Hyper, sigma: float,
                       rng: np.random.Generator):
    """One episode of REINFORCE with a learned value baseline (networks updated in place).

    Returns ``(actor, critic, undiscounted episode return)``.
    """
    traj = rollout(env, MlpActor(actor, sigma), None, hyper.horizon, rng)
    S = np.asarray(traj.states, dtype=np.float64)
    a = np.asarray(traj.actions, dtype=np.float64)
    G = returns_to_go(traj.rewards, hyper.gamma)

    mu = mlp_forward_batch(actor, S)
    if hyper.mode == ACTOR_CRITIC:
        V = mlp_forward_batch(critic, S)
        A = advantages(G, V, ACTOR_CRITIC)
        g_critic = mlp_backward(critic, S, G - V)
    else:
        A = advantages(G, None, hyper.mode)
        g_critic = None
    g_actor = mlp_backward(actor, S, A * (a - mu) / sigma ** 2)

    sgd_step(actor, g_actor, hyper.alpha_mu)
    if g_critic is not None:
        sgd_step(critic, g_critic, hyper.alpha_omega)
    return actor, critic, traj.episode_return


def rvfb_train(env: Env, actor: Mlp, critic: Mlp, hyper: Hyper, sigma: float,
               rng: np.random.Generator, callback=None) -> np.ndarray:
    out = np.empty(hyper.episodes)
    for h in range(hyper.episodes):
        _, _, ret = rvfb_train_episode(env, actor, critic, hyper, sigma, rng)
        out[h] = ret
        if callback is not None:
            callback(h, ret)
    return out
