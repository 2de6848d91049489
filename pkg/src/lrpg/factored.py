"""Rank-K factored matrices ``X = L @ R`` used for the policy mean, the policy
standard deviation and the critic value table.

All arithmetic is float64. A :class:`FactoredMatrix` is mutated in place by
:func:`step_ascent`; callers that need the old iterate should :meth:`copy` it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = "LRPG-CKPT v1"


class CheckpointError(ValueError):
    """Raised when a checkpoint file is malformed or inconsistent."""


@dataclass
class FactoredMatrix:
    left: np.ndarray   # N x K
    right: np.ndarray  # K x M

    def __post_init__(self):
        self.left = np.array(self.left, dtype=np.float64, ndmin=2)
        self.right = np.array(self.right, dtype=np.float64, ndmin=2)
        if self.left.ndim != 2 or self.right.ndim != 2:
            raise ValueError("factors must be 2-d")
        if self.left.shape[1] < 1 or self.left.shape[1] != self.right.shape[0]:
            raise ValueError(
                f"inner dimensions disagree: left {self.left.shape}, right {self.right.shape}")
        if self.left.shape[0] < 1 or self.right.shape[1] < 1:
            raise ValueError("factored matrix needs at least one row and one column")

    @property
    def n_rows(self) -> int:
        return self.left.shape[0]

    @property
    def n_cols(self) -> int:
        return self.right.shape[1]

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    def entry(self, i: int, j: int) -> float:
        return entry(self, i, j)

    def dense(self) -> np.ndarray:
        return dense(self)

    def copy(self) -> "FactoredMatrix":
        return FactoredMatrix(self.left.copy(), self.right.copy())

    def zero_gradient(self) -> "FactorGradient":
        return FactorGradient(np.zeros_like(self.left), np.zeros_like(self.right))


@dataclass
class FactorGradient:
    d_left: np.ndarray
    d_right: np.ndarray

    def __post_init__(self):
        self.d_left = np.asarray(self.d_left, dtype=np.float64)
        self.d_right = np.asarray(self.d_right, dtype=np.float64)


def new_factored(n_rows: int, n_cols: int, rank: int, init_scale: float,
                 rng: np.random.Generator) -> FactoredMatrix:
    """Draw both factors i.i.d. uniform on ``[-init_scale, init_scale]``.

    ``left`` is drawn first, then ``right``, so the result only depends on the
    generator state.
    """
    for name, value in (("n_rows", n_rows), ("n_cols", n_cols), ("rank", rank)):
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")
    if init_scale < 0 or not np.isfinite(init_scale):
        raise ValueError(f"init_scale must be finite and non-negative, got {init_scale!r}")
    left = rng.uniform(-init_scale, init_scale, size=(n_rows, rank))
    right = rng.uniform(-init_scale, init_scale, size=(rank, n_cols))
    return FactoredMatrix(left, right)


def _check_index(F: FactoredMatrix, i: int, j: int) -> None:
    if not (0 <= i < F.n_rows and 0 <= j < F.n_cols):
        raise IndexError(f"index ({i}, {j}) out of range for {F.n_rows}x{F.n_cols} matrix")


def entry(F: FactoredMatrix, i: int, j: int) -> float:
    """``sum_k left[i, k] * right[k, j]``."""
    _check_index(F, i, j)
    return float(F.left[i, :] @ F.right[:, j])


def dense(F: FactoredMatrix) -> np.ndarray:
    return F.left @ F.right


def param_count(F: FactoredMatrix) -> int:
    return F.rank * (F.n_rows + F.n_cols)


def step_ascent(F: FactoredMatrix, g: FactorGradient, rate: float) -> FactoredMatrix:
    """Simultaneous update ``L += rate * dL``, ``R += rate * dR`` (in place).

    Both gradients are expected to have been computed at the current iterate.
    A negative ``rate`` gives a descent step.
    """
    if g.d_left.shape != F.left.shape or g.d_right.shape != F.right.shape:
        raise ValueError(
            f"gradient shapes {g.d_left.shape}/{g.d_right.shape} do not match "
            f"factors {F.left.shape}/{F.right.shape}")
    if rate == 0:
        return F
    with np.errstate(over="ignore", invalid="ignore"):
        new_left = F.left + rate * g.d_left
        new_right = F.right + rate * g.d_right
    if not (np.all(np.isfinite(new_left)) and np.all(np.isfinite(new_right))):
        raise FloatingPointError("update produced non-finite factor entries")
    F.left = new_left
    F.right = new_right
    return F


def save_checkpoint(F: FactoredMatrix, path) -> None:
    lines = [CHECKPOINT_MAGIC, f"{F.n_rows} {F.n_cols} {F.rank}"]
    # repr() of a Python float is the shortest string that round-trips exactly
    lines += [" ".join(repr(float(v)) for v in row) for row in F.left]
    lines += [" ".join(repr(float(v)) for v in row) for row in F.right]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> FactoredMatrix:
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: missing '{CHECKPOINT_MAGIC}' header")
    if len(lines) < 2:
        raise CheckpointError(f"{path}: truncated before dimension line")
    try:
        n, m, k = (int(tok) for tok in lines[1].split())
    except ValueError:
        raise CheckpointError(f"{path}: bad dimension line {lines[1]!r}") from None
    if min(n, m, k) < 1:
        raise CheckpointError(f"{path}: non-positive dimensions {n} {m} {k}")

    body = lines[2:]
    expected_rows = n + k
    values_present = sum(len(line.split()) for line in body)
    if len(body) != expected_rows or values_present != n * k + k * m:
        raise CheckpointError(
            f"{path}: header says {n}x{m} rank {k} ({n * k + k * m} values in "
            f"{expected_rows} lines) but found {values_present} values in {len(body)} lines")

    def parse_rows(rows, width):
        out = []
        for line in rows:
            toks = line.split(" ")
            if len(toks) != width:
                raise CheckpointError(f"{path}: expected {width} values per line, got {line!r}")
            try:
                out.append([float(t) for t in toks])
            except ValueError:
                raise CheckpointError(f"{path}: non-numeric value in {line!r}") from None
        return np.array(out, dtype=np.float64)

    left = parse_rows(body[:n], k)
    right = parse_rows(body[n:], m)
    if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
        raise CheckpointError(f"{path}: non-finite values")
    return FactoredMatrix(left, right)
