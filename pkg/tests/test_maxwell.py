"""Closed-form second-moment flow checked against an in-test ODE integrator."""

import numpy as np
import pytest

from landausim.ensemble import (Gaussian1d, InitialLaw, Mixture1d, energy,
                                preset_law, sample_initial, second_moment_matrix)
from landausim.errors import NotCentered
from landausim.maxwell import MomentFlow
from landausim.spd import min_eig


def rk4_moment_flow(m0, t_end, steps=4000):
    """Integrate dM/dt = 2 E I - 2 d M with classic fourth-order steps."""
    d = m0.shape[0]
    e = np.trace(m0)
    eye = np.eye(d)

    def rhs(m):
        return 2.0 * e * eye - 2.0 * d * m

    m = m0.copy()
    h = t_end / steps
    for _ in range(steps):
        k1 = rhs(m)
        k2 = rhs(m + 0.5 * h * k1)
        k3 = rhs(m + 0.5 * h * k2)
        k4 = rhs(m + h * k3)
        m = m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return m


def random_flow(seed, d=2):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, d))
    return MomentFlow.from_matrix(g @ g.T + 0.1 * np.eye(d))


def test_reference_case_hand_values():
    flow = MomentFlow.from_initial_law(preset_law("paper_sec5"))
    assert flow.energy == pytest.approx(1.02)
    np.testing.assert_allclose(flow.m_inf, 0.51 * np.eye(2), atol=1e-15)
    assert flow.equilibrium_variance() == pytest.approx(0.51)
    # e^{-2 d t} = e^{-1} at t = 1/4 in two dimensions
    m = flow.covariance(0.25)
    expect = np.diag([0.51 - 0.5 * np.exp(-1), 0.51 + 0.5 * np.exp(-1)])
    np.testing.assert_allclose(m, expect, atol=1e-15)
    np.testing.assert_allclose(flow.covariance(0.0), np.diag([0.01, 1.01]))
    np.testing.assert_allclose(flow.covariance(50.0), flow.m_inf, atol=1e-12)
    # ellipticity endpoints: 0.01 at t=0 ramping to 0.51
    assert flow.ellipticity_lower_bound(0.0) == pytest.approx(0.01)
    assert flow.ellipticity_lower_bound(50.0) == pytest.approx(0.51)


@pytest.mark.parametrize("seed,d", [(0, 2), (1, 2), (2, 3), (3, 4)])
def test_covariance_matches_rk4(seed, d):
    flow = random_flow(seed, d)
    for t in (0.1, 0.5, 1.3):
        oracle = rk4_moment_flow(np.array(flow.m0), t)
        np.testing.assert_allclose(flow.covariance(t), oracle,
                                   rtol=1e-9, atol=1e-11)


@pytest.mark.parametrize("seed", [4, 5, 6])
def test_trace_is_conserved(seed):
    flow = random_flow(seed)
    for t in np.linspace(0.0, 3.0, 13):
        assert np.trace(flow.covariance(t)) == pytest.approx(flow.energy,
                                                             rel=1e-12)


@pytest.mark.parametrize("seed", [7, 8, 9])
def test_ellipticity_equals_spectral_gap_of_offset(seed):
    # the closed-form lower bound is exactly the smallest eigenvalue of
    # E I - M(t) because M(t) shares the eigenbasis of M(0) at every time
    flow = random_flow(seed)
    eye = np.eye(flow.dim)
    for t in np.linspace(0.0, 2.0, 9):
        direct = min_eig(flow.energy * eye - flow.covariance(t))
        assert flow.ellipticity_lower_bound(t) == pytest.approx(direct,
                                                                abs=1e-12)
        np.testing.assert_allclose(flow.field_offset(t),
                                   flow.energy * eye - flow.covariance(t),
                                   atol=1e-13)


def test_ellipticity_monotone_toward_equilibrium():
    flow = MomentFlow.from_initial_law(preset_law("paper_sec5"))
    ts = np.linspace(0.0, 3.0, 50)
    lam = np.array([flow.ellipticity_lower_bound(t) for t in ts])
    assert np.all(np.diff(lam) > 0)
    assert lam[0] == pytest.approx(0.01)


def test_mckean_coefficients():
    flow = MomentFlow.from_initial_law(preset_law("paper_sec5"))
    x = np.array([1.0, 2.0])
    a, b = flow.mckean_coefficients(0.3, x)
    # diffusion = pointwise kernel matrix at x plus the moment offset
    r2 = 5.0
    kernel_part = np.array([[r2 - 1.0, -2.0], [-2.0, r2 - 4.0]])
    np.testing.assert_allclose(
        a, kernel_part + flow.energy * np.eye(2) - flow.covariance(0.3),
        atol=1e-12)
    np.testing.assert_allclose(b, -1.0 * x)
    # batch form agrees with the loop
    states = np.random.default_rng(0).standard_normal((40, 2))
    ab, bb = flow.mckean_coefficients_batch(0.3, states)
    for i in range(40):
        ai, bi = flow.mckean_coefficients(0.3, states[i])
        np.testing.assert_allclose(ab[i], ai, atol=1e-13)
        np.testing.assert_allclose(bb[i], bi, atol=1e-13)


def test_rejects_noncentered_law():
    law = InitialLaw((Gaussian1d(mean=0.3, std=0.1),
                      Mixture1d(center=1.0, std=0.1)))
    with pytest.raises(NotCentered):
        MomentFlow.from_initial_law(law)


def test_flow_tracks_large_ensemble():
    # the sampled second moment at t=0 sits within Monte Carlo error of M(0)
    law = preset_law("paper_sec5")
    flow = MomentFlow.from_initial_law(law)
    ens = sample_initial(law, 200_000, seed=21)
    m2 = second_moment_matrix(ens.states)
    n = len(ens.states)
    np.testing.assert_allclose(np.diag(m2), np.diag(flow.covariance(0.0)),
                               atol=4 * np.sqrt(2 * 1.01**2 / n))
    assert energy(ens.states) == pytest.approx(flow.energy, abs=4 * 0.12)
