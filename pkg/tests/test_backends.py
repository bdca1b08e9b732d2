"""Compiled and pure pair-interaction kernels agree with each other and with
the pointwise fields averaged by brute force."""

import numpy as np
import pytest

from landausim._backend import compiled_available, pair_fields
from landausim.kernels import (DELTA_FLOOR, KernelSpec, a_field, b_field,
                               radial_factor)

SPECS = [
    KernelSpec.maxwell(2),
    KernelSpec.pseudo_maxwell(2, lambda_floor=0.4, r0=0.8, r1=3.0),
    KernelSpec.soft(2, gamma=-1.0),
    KernelSpec.soft(2, gamma=-1.7),
    KernelSpec.soft_cutoff(2, gamma=-1.5, eps=0.3),
    KernelSpec.maxwell(3),
    KernelSpec.soft(3, gamma=-0.8),
]

IMPLS = ["pure"] + (["compiled"] if compiled_available() else [])


def cloud(spec, n, seed):
    rng = np.random.default_rng(seed)
    targets = rng.standard_normal((7, spec.dim))
    states = rng.standard_normal((n, spec.dim))
    return targets, states


def brute_force(spec, targets, states, exclude=None):
    """Average the pointwise fields pair by pair.

    Mirrors the batch floor contract: when a soft-family gap falls below the
    floor, the radial factor is evaluated at the floor while the geometric
    part keeps the raw difference.
    """
    m, d = targets.shape
    a = np.zeros((m, d, d))
    b = np.zeros((m, d))
    for i in range(m):
        count = 0
        for j in range(len(states)):
            if exclude is not None and exclude[i] == j:
                continue
            z = targets[i] - states[j]
            if spec.needs_floor and np.linalg.norm(z) < DELTA_FLOOR:
                k = radial_factor(spec, np.array([DELTA_FLOOR**2]))[0]
                a[i] += k * ((z @ z) * np.eye(d) - np.outer(z, z))
                b[i] += -(spec.dim - 1) * k * z
            else:
                a[i] += a_field(spec, z)
                b[i] += b_field(spec, z)
            count += 1
        a[i] /= count
        b[i] /= count
    return a, b


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}-d{s.dim}")
def test_matches_brute_force(spec, impl):
    targets, states = cloud(spec, 40, seed=1)
    a, b, hits = pair_fields(spec, targets, states, impl=impl)
    a_ref, b_ref = brute_force(spec, targets, states)
    np.testing.assert_allclose(a, a_ref, rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(b, b_ref, rtol=1e-11, atol=1e-13)
    assert hits == 0


@pytest.mark.skipif(not compiled_available(), reason="extension not built")
@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}-d{s.dim}")
def test_backends_agree(spec):
    targets, states = cloud(spec, 120, seed=2)
    a_c, b_c, h_c = pair_fields(spec, targets, states, impl="compiled")
    a_p, b_p, h_p = pair_fields(spec, targets, states, impl="pure")
    scale = max(np.abs(a_c).max(), np.abs(b_c).max(), 1.0)
    np.testing.assert_allclose(a_c, a_p, rtol=1e-12, atol=1e-13 * scale)
    np.testing.assert_allclose(b_c, b_p, rtol=1e-12, atol=1e-13 * scale)
    assert h_c == h_p


@pytest.mark.parametrize("impl", IMPLS)
def test_self_exclusion(impl):
    # with targets == states, excluding index i must drop the self pair;
    # check against brute force over the remaining n-1 states
    spec = KernelSpec.soft(2, gamma=-1.0)
    rng = np.random.default_rng(3)
    states = rng.standard_normal((30, 2))
    exclude = np.arange(30)
    a, b, hits = pair_fields(spec, states, states, exclude=exclude, impl=impl)
    a_ref, b_ref = brute_force(spec, states, states, exclude=exclude)
    np.testing.assert_allclose(a, a_ref, rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(b, b_ref, rtol=1e-11, atol=1e-13)
    assert hits == 0  # the floored self pairs are gone entirely


@pytest.mark.parametrize("impl", IMPLS)
def test_floor_hits_counted(impl):
    spec = KernelSpec.soft(2, gamma=-1.0)
    states = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    # target sits exactly on two states -> two floored pairs
    a, b, hits = pair_fields(spec, states[:1], states, impl=impl)
    assert hits == 2
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    a_ref, b_ref = brute_force(spec, states[:1], states)
    np.testing.assert_allclose(a, a_ref, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(b, b_ref, rtol=1e-11, atol=1e-14)
    # a nearly coincident pair floors too, and keeps its (tiny) geometry
    near = states.copy()
    near[2] = [1e-13, 0.0]
    a, b, hits = pair_fields(spec, near[:1], near, impl=impl)
    a_ref, b_ref = brute_force(spec, near[:1], near)
    assert hits == 2
    np.testing.assert_allclose(a, a_ref, rtol=1e-11, atol=1e-20)
    np.testing.assert_allclose(b, b_ref, rtol=1e-11, atol=1e-16)
    # bounded families never floor
    a, b, hits = pair_fields(KernelSpec.maxwell(2), states[:1], states, impl=impl)
    assert hits == 0


@pytest.mark.parametrize("impl", IMPLS)
def test_state_order_irrelevant(impl):
    spec = KernelSpec.pseudo_maxwell(2)
    targets, states = cloud(spec, 64, seed=4)
    a1, b1, _ = pair_fields(spec, targets, states, impl=impl)
    perm = np.random.default_rng(0).permutation(64)
    a2, b2, _ = pair_fields(spec, targets, states[perm], impl=impl)
    np.testing.assert_allclose(a1, a2, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(b1, b2, rtol=1e-12, atol=1e-14)


@pytest.mark.skipif(not compiled_available(), reason="extension not built")
def test_worker_count_bit_stable():
    spec = KernelSpec.soft(2, gamma=-1.2)
    targets, states = cloud(spec, 200, seed=5)
    a1, b1, _ = pair_fields(spec, targets, states, workers=1, impl="compiled")
    a4, b4, _ = pair_fields(spec, targets, states, workers=4, impl="compiled")
    np.testing.assert_array_equal(a1, a4)
    np.testing.assert_array_equal(b1, b4)


def test_pure_chunking_invariant():
    # answers must not depend on where the chunk boundaries fall
    spec = KernelSpec.soft(2, gamma=-1.0)
    rng = np.random.default_rng(6)
    targets = rng.standard_normal((3, 2))
    for n in (255, 256, 257, 513):
        states = rng.standard_normal((n, 2))
        a, b, _ = pair_fields(spec, targets, states, impl="pure")
        a_ref, b_ref = brute_force(spec, targets, states)
        np.testing.assert_allclose(a, a_ref, rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(b, b_ref, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("impl", IMPLS)
def test_input_validation(impl):
    spec = KernelSpec.maxwell(2)
    ok = np.zeros((4, 2))
    with pytest.raises(ValueError):
        pair_fields(spec, ok, np.zeros((4, 3)), impl=impl)
    with pytest.raises(ValueError):
        pair_fields(spec, np.zeros((4, 3)), np.zeros((4, 3)), impl=impl)
    with pytest.raises(ValueError):
        pair_fields(spec, ok, np.zeros((0, 2)), impl=impl)
    with pytest.raises(ValueError):
        pair_fields(spec, ok, ok, exclude=np.array([0, 1, 2, 99]), impl=impl)
    with pytest.raises(ValueError):
        pair_fields(spec, ok, ok, exclude=np.array([0, 1]), impl=impl)
