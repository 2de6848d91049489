import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrpg.factored import (CheckpointError, FactoredMatrix, FactorGradient, dense, entry,
                           load_checkpoint, new_factored, param_count, save_checkpoint,
                           step_ascent)


def test_zero_scale_gives_zero_factors():
    F = new_factored(1, 1, 1, 0.0, np.random.default_rng(7))
    assert F.left.tolist() == [[0.0]]
    assert F.right.tolist() == [[0.0]]


def test_new_factored_is_deterministic():
    a = new_factored(2, 3, 1, 0.1, np.random.default_rng(42))
    b = new_factored(2, 3, 1, 0.1, np.random.default_rng(42))
    np.testing.assert_array_equal(a.left, b.left)
    np.testing.assert_array_equal(a.right, b.right)
    assert np.all(np.abs(a.left) <= 0.1) and np.all(np.abs(a.right) <= 0.1)


@pytest.mark.parametrize("dims", [(0, 3, 1), (2, 0, 1), (2, 3, 0), (-1, 2, 2)])
def test_new_factored_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        new_factored(*dims, 0.1, np.random.default_rng(0))


@pytest.mark.parametrize("n, m, k, expected", [(20, 20, 4, 160), (8, 8, 1, 16), (1, 1, 1, 2)])
def test_param_count(n, m, k, expected):
    assert param_count(new_factored(n, m, k, 0.1, np.random.default_rng(0))) == expected


def test_entry_examples():
    F = FactoredMatrix(np.eye(2), [[5, 6], [7, 8]])
    assert entry(F, 0, 1) == 6
    assert entry(FactoredMatrix([[2.0]], [[3.0]]), 0, 0) == 6
    assert entry(FactoredMatrix([[1.0, 2.0]], [[3.0], [4.0]]), 0, 0) == 11


@pytest.mark.parametrize("i, j", [(-1, 0), (2, 0), (0, 2), (0, -1)])
def test_entry_out_of_range(i, j):
    F = FactoredMatrix(np.eye(2), np.eye(2))
    with pytest.raises(IndexError):
        entry(F, i, j)


def test_dense_outer_product():
    F = FactoredMatrix([[1.0], [0.0]], [[2.0, 3.0]])
    np.testing.assert_array_equal(dense(F), [[2, 3], [0, 0]])


def test_dense_identity_left_factor():
    R = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(dense(FactoredMatrix(np.eye(2), R)), R)


def test_step_ascent_examples():
    F = FactoredMatrix([[1.0]], [[3.0]])
    step_ascent(F, FactorGradient([[2.0]], [[0.0]]), 0.5)
    assert F.left.tolist() == [[2.0]]
    assert F.right.tolist() == [[3.0]]

    G = FactoredMatrix([[1.0, 2.0]], [[3.0], [4.0]])
    before = G.copy()
    step_ascent(G, G.zero_gradient(), 0.7)
    step_ascent(G, FactorGradient([[9.0, 9.0]], [[9.0], [9.0]]), 0.0)
    np.testing.assert_array_equal(G.left, before.left)
    np.testing.assert_array_equal(G.right, before.right)


def test_step_ascent_is_simultaneous():
    # the right update must use the pre-step gradient even though left changed first
    F = FactoredMatrix([[1.0]], [[1.0]])
    g = FactorGradient([[1.0]], [[2.0]])
    step_ascent(F, g, 1.0)
    assert (F.left[0, 0], F.right[0, 0]) == (2.0, 3.0)


def test_step_ascent_shape_mismatch():
    F = FactoredMatrix(np.ones((2, 1)), np.ones((1, 3)))
    with pytest.raises(ValueError):
        step_ascent(F, FactorGradient(np.ones((2, 2)), np.ones((2, 3))), 0.1)


def test_step_ascent_rejects_overflow():
    F = FactoredMatrix([[1e308]], [[1.0]])
    with pytest.raises(FloatingPointError):
        step_ascent(F, FactorGradient([[1e308]], [[0.0]]), 10.0)


def test_step_ascent_round_trip_exact_on_dyadic_values():
    F = FactoredMatrix([[0.5, -1.25]], [[2.0], [0.75]])
    before = F.copy()
    g = FactorGradient([[0.25, 3.0]], [[-1.5], [0.125]])
    step_ascent(F, g, 0.5)
    step_ascent(F, g, -0.5)
    np.testing.assert_array_equal(F.left, before.left)
    np.testing.assert_array_equal(F.right, before.right)


shapes = st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4))


@settings(max_examples=60, deadline=None)
@given(shapes, st.integers(0, 2**32 - 1))
def test_rank_bounded_and_entry_dense_consistent(shape, seed):
    n, m, k = shape
    F = new_factored(n, m, k, 1.0, np.random.default_rng(seed))
    D = dense(F)
    assert D.shape == (n, m)
    assert np.linalg.matrix_rank(D) <= k
    for i in range(n):
        for j in range(m):
            assert entry(F, i, j) == pytest.approx(D[i, j], rel=1e-15, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(shapes, st.integers(0, 2**32 - 1), st.floats(1e-3, 10.0))
def test_step_round_trip_within_rounding(shape, seed, rate):
    # (x + r g) - r g is exact up to one rounding of each addition
    n, m, k = shape
    rng = np.random.default_rng(seed)
    F = new_factored(n, m, k, 1.0, rng)
    before = F.copy()
    g = FactorGradient(rng.normal(size=(n, k)), rng.normal(size=(k, m)))
    step_ascent(F, g, rate)
    step_ascent(F, g, -rate)
    eps = np.finfo(float).eps
    tol_l = 2 * eps * (np.abs(before.left) + np.abs(rate * g.d_left))
    tol_r = 2 * eps * (np.abs(before.right) + np.abs(rate * g.d_right))
    assert np.all(np.abs(F.left - before.left) <= tol_l)
    assert np.all(np.abs(F.right - before.right) <= tol_r)


def test_full_rank_factorisation_fits_any_target():
    rng = np.random.default_rng(3)
    n, m = 4, 5
    target = rng.normal(size=(n, m))
    F = new_factored(n, m, min(n, m), 0.5, rng)
    for _ in range(20000):
        resid = target - dense(F)
        step_ascent(F, FactorGradient(resid @ F.right.T, F.left.T @ resid), 0.05)
    assert np.max(np.abs(target - dense(F))) < 1e-6


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    F = FactoredMatrix(rng.normal(size=(3, 2)) * 1e-7, rng.normal(size=(2, 4)) * 1e5)
    F.left[0, 0] = 0.1 + 0.2  # awkward binary expansion
    path = tmp_path / "f.ckpt"
    save_checkpoint(F, path)
    text = path.read_text()
    assert text.startswith("LRPG-CKPT v1\n3 4 2\n")
    assert len(text.strip("\n").split("\n")) == 2 + 3 + 2
    G = load_checkpoint(path)
    np.testing.assert_array_equal(G.left, F.left)
    np.testing.assert_array_equal(G.right, F.right)


def test_checkpoint_truncated(tmp_path):
    F = new_factored(3, 3, 2, 0.5, np.random.default_rng(0))
    path = tmp_path / "f.ckpt"
    save_checkpoint(F, path)
    lines = path.read_text().split("\n")
    path.write_text("\n".join(lines[:4]) + "\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_text("LRPG-CKPT v1\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_dimension_mismatch(tmp_path):
    path = tmp_path / "f.ckpt"
    path.write_text("LRPG-CKPT v1\n2 3 1\n0.5\n1.5\n1.0 2.0\n")
    with pytest.raises(CheckpointError, match="2x3 rank 1"):
        load_checkpoint(path)


@pytest.mark.parametrize("text", ["", "NOT-A-CKPT\n1 1 1\n0\n0\n", "LRPG-CKPT v1\n1 x 1\n0\n0\n",
                                  "LRPG-CKPT v1\n1 1 1\nabc\n0\n"])
def test_checkpoint_malformed(tmp_path, text):
    path = tmp_path / "f.ckpt"
    path.write_text(text)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
