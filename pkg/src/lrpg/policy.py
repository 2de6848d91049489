"""Gaussian action distribution over matrix-indexed states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .factored import FactoredMatrix, entry

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class FixedSigma:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"fixed sigma must be positive, got {self.sigma!r}")


@dataclass
class FactoredSigma:
    x_sigma: FactoredMatrix
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if not self.sigma_floor > 0:
            raise ValueError(f"sigma_floor must be positive, got {self.sigma_floor!r}")


SigmaModel = Union[FixedSigma, FactoredSigma]


@dataclass
class PolicyParams:
    x_mu: FactoredMatrix
    sigma: SigmaModel

    def __post_init__(self):
        if isinstance(self.sigma, FactoredSigma) and self.sigma.x_sigma.shape != self.x_mu.shape:
            raise ValueError(
                f"sigma matrix {self.sigma.x_sigma.shape} does not match mean matrix {self.x_mu.shape}")

    @property
    def factored_sigma(self) -> bool:
        return isinstance(self.sigma, FactoredSigma)

    def copy(self) -> "PolicyParams":
        if isinstance(self.sigma, FactoredSigma):
            sigma = FactoredSigma(self.sigma.x_sigma.copy(), self.sigma.sigma_floor)
        else:
            sigma = FixedSigma(self.sigma.sigma)
        return PolicyParams(self.x_mu.copy(), sigma)

    def mean_table(self) -> np.ndarray:
        return self.x_mu.dense()

    def sigma_table(self) -> np.ndarray:
        """Effective (floored) standard deviation at every cell."""
        if isinstance(self.sigma, FixedSigma):
            return np.full(self.x_mu.shape, float(self.sigma.sigma))
        return np.maximum(self.sigma.x_sigma.dense(), self.sigma.sigma_floor)


def mu_of(p: PolicyParams, i: int, j: int) -> float:
    return entry(p.x_mu, i, j)


def sigma_of(p: PolicyParams, i: int, j: int) -> float:
    if isinstance(p.sigma, FixedSigma):
        if not (0 <= i < p.x_mu.n_rows and 0 <= j < p.x_mu.n_cols):
            raise IndexError(f"index ({i}, {j}) out of range")
        return float(p.sigma.sigma)
    return max(entry(p.sigma.x_sigma, i, j), p.sigma.sigma_floor)


def gaussian_draw(mu: float, sigma: float, rng: np.random.Generator) -> float:
    """``mu + sigma * z`` with ``z = rng.standard_normal()``.

    Every sampler in the package uses this transform, so a given generator
    state always yields the same action for the same ``(mu, sigma)``.
    """
    return mu + sigma * float(rng.standard_normal())


def sample(p: PolicyParams, i: int, j: int, rng: np.random.Generator) -> float:
    return gaussian_draw(mu_of(p, i, j), sigma_of(p, i, j), rng)


def log_prob(a, mu, sigma):
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    z = (np.asarray(a, dtype=np.float64) - mu) / sigma
    out = -np.log(sigma) - HALF_LOG_2PI - 0.5 * z * z
    return float(out) if out.ndim == 0 else out


def dlogp_dmu(a, mu, sigma):
    """Score with respect to the mean, ``(a - mu) / sigma**2``."""
    return (a - mu) / (sigma * sigma)


def dlogp_dsigma(a, mu, sigma):
    """Score with respect to the standard deviation, ``(a - mu)**2 / sigma**3 - 1 / sigma``."""
    d = a - mu
    return d * d / (sigma * sigma * sigma) - 1.0 / sigma
