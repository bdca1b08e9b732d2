"""PSD matrix operations against hand values and numpy.linalg oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landausim import spd
from landausim.errors import NotPsd, Singular


def random_psd(rng, d, rank=None, scale=1.0):
    cols = rank if rank is not None else d
    g = rng.standard_normal((d, cols)) * scale
    return g @ g.T


# --- hand-computed oracles -------------------------------------------------

def test_cholesky_hand_example():
    a = np.array([[4.0, 2.0], [2.0, 5.0]])
    low = spd.cholesky_psd(a)
    np.testing.assert_allclose(low, [[2.0, 0.0], [1.0, 2.0]], atol=1e-12)


def test_eigenvalues_hand_example():
    # characteristic polynomial of [[2,1],[1,2]]: (2-x)^2 - 1 -> x in {1, 3}
    w, v = spd.eigh_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(w, [1.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T,
                               [[2.0, 1.0], [1.0, 2.0]], atol=1e-12)


def test_sqrt_diagonal():
    np.testing.assert_allclose(
        spd.sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)


def test_sqrt_projector_fixed_point():
    # rank-one projector is its own square root
    p = np.array([[0.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(spd.sym_sqrt(p), p, atol=1e-14)


def test_sqrt_2x2_hand_value():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    r = spd.sym_sqrt(a)
    s3 = np.sqrt(3.0)
    expect = 0.5 * np.array([[s3 + 1.0, s3 - 1.0], [s3 - 1.0, s3 + 1.0]])
    np.testing.assert_allclose(r, expect, atol=1e-12)


def test_symmetrize_upper_triangle_wins():
    a = np.array([[1.0, 5.0], [999.0, 2.0]])
    np.testing.assert_array_equal(spd.symmetrize(a),
                                  [[1.0, 5.0], [5.0, 2.0]])


def test_inv_opnorm():
    assert spd.inv_opnorm(np.diag([2.0, 8.0])) == pytest.approx(0.5)
    with pytest.raises(Singular):
        spd.inv_opnorm(np.array([[1.0, 1.0], [1.0, 1.0]]))


# --- clamping behaviour ----------------------------------------------------

def test_clamp_rounds_tiny_negative_to_zero():
    a = np.diag([1.0, -1e-13])
    out = spd.clamp_psd(a)
    assert out[1, 1] == pytest.approx(0.0, abs=1e-12)
    assert spd.min_eig(out) >= 0.0


def test_clamp_rejects_genuine_negative():
    with pytest.raises(NotPsd):
        spd.clamp_psd(np.diag([1.0, -1e-6]))
    with pytest.raises(NotPsd):
        spd.sym_sqrt(np.diag([1.0, -1e-6]))
    with pytest.raises(NotPsd):
        spd.cholesky_psd(np.diag([1.0, -1e-6]))


def test_clamp_keeps_psd_input_bitwise():
    rng = np.random.default_rng(5)
    a = random_psd(rng, 3)
    np.testing.assert_array_equal(spd.clamp_psd(a), spd.symmetrize(a))


# --- reconstruction and oracle agreement -----------------------------------

@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_eigh_matches_numpy(d):
    rng = np.random.default_rng(d)
    for _ in range(50):
        a = spd.symmetrize(rng.standard_normal((d, d)))
        w, v = spd.eigh_sym(a)
        w_np = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(w, w_np, atol=1e-10 * max(1.0, np.abs(w_np).max()))
        np.testing.assert_allclose(v @ np.diag(w) @ v.T, a,
                                   atol=1e-10 * max(1.0, np.abs(w_np).max()))


@pytest.mark.parametrize("d,rank", [(2, 2), (2, 1), (3, 3), (3, 2), (4, 4)])
def test_sqrt_and_cholesky_reconstruct(d, rank):
    rng = np.random.default_rng(10 * d + rank)
    for _ in range(100):
        a = random_psd(rng, d, rank=rank, scale=10.0 ** rng.uniform(-2, 2))
        norm = max(spd.opnorm(a), 1e-300)
        r = spd.sym_sqrt(a)
        np.testing.assert_allclose(r @ r.T, a, atol=1e-10 * norm)
        np.testing.assert_allclose(r, r.T, atol=1e-10 * norm)
        low = spd.cholesky_psd(a)
        assert np.allclose(low, np.tril(low))
        np.testing.assert_allclose(low @ low.T, a, atol=1e-10 * norm)


def test_quadratic_form_bounded_by_extreme_eigenvalues():
    rng = np.random.default_rng(77)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        a = spd.symmetrize(rng.standard_normal((d, d)))
        lo, hi = spd.min_eig(a), spd.opnorm(a)
        u = rng.standard_normal((1000, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        q = np.einsum("ni,ij,nj->n", u, a, u)
        assert np.all(q >= lo - 1e-10 * max(1.0, hi))
        assert np.all(np.abs(q) <= hi + 1e-10 * max(1.0, hi))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_eigh_2x2_property(entries):
    p, q, s = entries
    a = np.array([[p, q], [q, s]])
    w, v = spd.eigh_sym(a)
    assert w[0] <= w[1]
    np.testing.assert_allclose(v @ v.T, np.eye(2), atol=1e-12)
    scale = max(1.0, np.abs(w).max())
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-10 * scale)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(a)), w,
                               atol=1e-9 * scale)


@pytest.mark.parametrize(
    "entries",
    [
        (0.0, 5e-324, 0.0),      # subnormal off-diagonal: division used to
        (5e-324, 5e-324, 0.0),   # quantise and leave columns unnormalised
        (1e-310, -3e-311, 2e-310),
        (1e300, 1e299, -1e300),  # near-overflow scale
        (0.0, 0.0, 0.0),
    ],
)
def test_eigh_2x2_extreme_scales(entries):
    p, q, s = entries
    a = np.array([[p, q], [q, s]])
    w, v = spd.eigh_sym(a)
    assert w[0] <= w[1]
    np.testing.assert_allclose(v @ v.T, np.eye(2), atol=1e-12)
    scale = max(1.0, float(np.abs(w).max()))
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-10 * scale)
