"""Finite-difference verification of the analytic actor and critic gradients.

The objectives are re-evaluated here from dense matrices and the Gaussian
log-density, independently of the per-entry accumulation in
:mod:`lrpg.trainer`; their central differences are compared entrywise with
the analytic factor gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factored import FactoredMatrix
from .policy import FactoredSigma, FixedSigma, PolicyParams, dlogp_dmu, dlogp_dsigma, log_prob
from .trainer import Trajectory, actor_gradients, critic_gradients

# Guards 0/0 on entries that are exactly zero on both sides (unvisited rows).
REL_FLOOR = 1e-12


def rel_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """Max over entries of ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def central_difference(f, x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place and restored)."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        h = rel_step * max(1.0, abs(orig))
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * h)
    return g


def surrogate(policy: PolicyParams, traj: Trajectory, A) -> float:
    """``sum_t A_t log N(a_t | mu(s_t), sigma(s_t))`` with frozen advantages."""
    I, J = traj.index_arrays()
    mu = policy.x_mu.dense()[I, J]
    if isinstance(policy.sigma, FixedSigma):
        sigma = np.full_like(mu, policy.sigma.sigma)
    else:
        sigma = np.maximum(policy.sigma.x_sigma.dense()[I, J], policy.sigma.sigma_floor)
    return float(np.sum(np.asarray(A) * log_prob(np.asarray(traj.actions), mu, sigma)))


def critic_loss(x_omega: FactoredMatrix, traj: Trajectory, G) -> float:
    I, J = traj.index_arrays()
    r = np.asarray(G) - x_omega.dense()[I, J]
    return 0.5 * float(r @ r)


@dataclass
class Instance:
    policy: PolicyParams
    x_omega: FactoredMatrix
    traj: Trajectory
    A: np.ndarray
    G: np.ndarray


def _positive_factors(n, m, k, lo, hi, rng):
    """Factors whose product has every entry inside ``[lo, hi]``."""
    L = rng.uniform(0.5, 1.0, size=(n, k))
    R = rng.uniform(0.5, 1.0, size=(k, m))
    X = L @ R
    scale = rng.uniform(lo / X.min(), hi / X.max())
    return FactoredMatrix(L * scale, R)


def random_instance(rng: np.random.Generator, max_side: int = 10, max_rank: int = 3,
                    sigma_range=(0.1, 2.0), max_len: int = 40, factored_sigma: bool = True) -> Instance:
    """Random grid, factors and frozen trajectory with sigma kept away from its floor."""
    n, m = (int(v) for v in rng.integers(1, max_side + 1, size=2))
    k = int(rng.integers(1, max_rank + 1))
    T = int(rng.integers(1, max_len + 1))
    x_mu = FactoredMatrix(rng.normal(size=(n, k)), rng.normal(size=(k, m)))
    if factored_sigma:
        sigma = FactoredSigma(_positive_factors(n, m, k, *sigma_range, rng), sigma_floor=1e-3)
    else:
        sigma = FixedSigma(float(rng.uniform(*sigma_range)))
    policy = PolicyParams(x_mu, sigma)
    x_omega = FactoredMatrix(rng.normal(size=(n, k)), rng.normal(size=(k, m)))
    I = rng.integers(0, n, size=T)
    J = rng.integers(0, m, size=T)
    mu = x_mu.dense()[I, J]
    sig = policy.sigma_table()[I, J]
    actions = mu + sig * rng.normal(size=T)
    traj = Trajectory(states=[None] * T, indices=list(zip(I.tolist(), J.tolist())),
                      actions=actions.tolist(), rewards=rng.normal(size=T).tolist())
    return Instance(policy, x_omega, traj, rng.normal(size=T), rng.normal(scale=3.0, size=T))


GRADIENT_NAMES = ("d_left_mu", "d_right_mu", "d_left_sigma", "d_right_sigma",
                  "d_left_omega", "d_right_omega")


def check_instance(inst: Instance) -> dict:
    """Relative errors of every analytic factor gradient against central differences."""
    policy, traj = inst.policy, inst.traj
    g_mu, g_sigma = actor_gradients(traj, policy, inst.A)
    g_omega = critic_gradients(traj, inst.x_omega, inst.G)

    def J():
        return surrogate(policy, traj, inst.A)

    def negL():
        return -critic_loss(inst.x_omega, traj, inst.G)

    errs = {
        "d_left_mu": rel_error(g_mu.d_left, central_difference(J, policy.x_mu.left)),
        "d_right_mu": rel_error(g_mu.d_right, central_difference(J, policy.x_mu.right)),
        "d_left_omega": rel_error(g_omega.d_left, central_difference(negL, inst.x_omega.left)),
        "d_right_omega": rel_error(g_omega.d_right, central_difference(negL, inst.x_omega.right)),
    }
    if g_sigma is not None:
        xs = policy.sigma.x_sigma
        errs["d_left_sigma"] = rel_error(g_sigma.d_left, central_difference(J, xs.left))
        errs["d_right_sigma"] = rel_error(g_sigma.d_right, central_difference(J, xs.right))
    return errs


def dense_oracle_errors(inst: Instance) -> dict:
    """Max abs deviation of the per-entry gradients from ``S @ R.T`` and ``L.T @ S``.

    ``S`` scatters each step's scalar weight into a dense ``N x M`` matrix.
    """
    policy, traj = inst.policy, inst.traj
    I, J = traj.index_arrays()
    a = np.asarray(traj.actions)
    mu = policy.x_mu.dense()[I, J]
    sigma = policy.sigma_table()[I, J]
    g_mu, g_sigma = actor_gradients(traj, policy, inst.A)
    g_omega = critic_gradients(traj, inst.x_omega, inst.G)

    def score_matrix(shape, w):
        S = np.zeros(shape)
        np.add.at(S, (I, J), w)
        return S

    out = {}
    pairs = [("mu", policy.x_mu, g_mu, inst.A * dlogp_dmu(a, mu, sigma)),
             ("omega", inst.x_omega, g_omega, inst.G - inst.x_omega.dense()[I, J])]
    if g_sigma is not None:
        pairs.append(("sigma", policy.sigma.x_sigma, g_sigma, inst.A * dlogp_dsigma(a, mu, sigma)))
    for name, F, g, w in pairs:
        S = score_matrix(F.shape, w)
        out[f"d_left_{name}"] = float(np.max(np.abs(g.d_left - S @ F.right.T)))
        out[f"d_right_{name}"] = float(np.max(np.abs(g.d_right - F.left.T @ S)))
    return out


def gaussian_score_errors(rng: np.random.Generator, n: int = 1000) -> dict:
    """Relative errors of the closed-form Gaussian scores against central differences.

    Steps are ``1e-5 * max(1, |x|)``; ``sigma`` ranges over ``[0.05, 5]``.
    """
    worst = {"dlogp_dmu": 0.0, "dlogp_dsigma": 0.0}
    for _ in range(n):
        mu = rng.normal(scale=3.0)
        sigma = rng.uniform(0.05, 5.0)
        a = mu + sigma * rng.normal(scale=2.0)
        hm = 1e-5 * max(1.0, abs(mu))
        hs = 1e-5 * max(1.0, abs(sigma))
        fd_mu = (log_prob(a, mu + hm, sigma) - log_prob(a, mu - hm, sigma)) / (2 * hm)
        fd_sigma = (log_prob(a, mu, sigma + hs) - log_prob(a, mu, sigma - hs)) / (2 * hs)
        # both scores subtract nearly equal quantities somewhere (a ~ mu, or
        # |a - mu| ~ sigma); errors are relative to the size of those terms
        worst["dlogp_dmu"] = max(worst["dlogp_dmu"], rel_error(
            dlogp_dmu(a, mu, sigma), fd_mu, floor=(abs(a) + abs(mu)) / sigma ** 2 + 1.0 / sigma))
        terms = (a - mu) ** 2 / sigma ** 3 + 1.0 / sigma
        worst["dlogp_dsigma"] = max(worst["dlogp_dsigma"],
                                    rel_error(dlogp_dsigma(a, mu, sigma), fd_sigma, floor=terms))
    return worst


def run_gradcheck(instances: int = 100, seed: int = 0) -> dict:
    """Worst relative error per gradient over ``instances`` random problems.

    Half the instances use a learned sigma, the other half a fixed one (those
    only contribute to the mean and critic gradients).
    """
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in GRADIENT_NAMES}
    for k in range(instances):
        inst = random_instance(rng, factored_sigma=(k % 2 == 0))
        for name, err in check_instance(inst).items():
            worst[name] = max(worst[name], err)
    worst.update(gaussian_score_errors(rng))
    return worst
