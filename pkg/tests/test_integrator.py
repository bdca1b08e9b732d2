"""Euler scheme for the interacting system and its coupled reference flow."""

import numpy as np
import pytest

from landausim import spd
from landausim.ensemble import (Ensemble, Gaussian1d, InitialLaw, Mixture1d,
                                empirical_a, empirical_b, energy, momentum,
                                preset_law, sample_initial,
                                second_moment_matrix)
from landausim.errors import DomainError, NonFinite
from landausim.integrator import (SimConfig, coupled_particle_vs_reference,
                                  coupled_time_refinement, min_eig_batch,
                                  n_floor_steps, refinement_ladder, simulate,
                                  simulate_mckean_reference, sqrt_psd_batch,
                                  step)
from landausim.kernels import KernelSpec
from landausim.maxwell import MomentFlow
from landausim.noise import NoisePlan

LAW = preset_law("paper_sec5")


def config(**kw):
    base = dict(kernel=KernelSpec.maxwell(2), law=LAW, n=32,
                steps_per_unit=40, horizon=0.5, seed=7)
    base.update(kw)
    return SimConfig(**base)


# --- configuration ----------------------------------------------------------

def test_config_validation():
    with pytest.raises(DomainError):
        config(n=0)
    with pytest.raises(DomainError):
        config(steps_per_unit=0)
    with pytest.raises(DomainError):
        config(horizon=0.0)
    with pytest.raises(DomainError):
        config(sqrt_method="qr")
    with pytest.raises(DomainError):
        config(replicates=0)
    with pytest.raises(DomainError):
        config(noise_refinement=0)
    # horizon must land on the step grid
    with pytest.raises(DomainError):
        config(horizon=0.333)
    cfg = config()
    assert cfg.total_steps == 20
    assert cfg.dt == pytest.approx(0.025)


def test_n_floor_steps():
    # never below 500 per unit time, growing like sqrt(n) for huge ensembles
    assert n_floor_steps(50, 1.0) == 500
    assert n_floor_steps(1600, 1.0) == 500
    assert n_floor_steps(50, 0.5) == 500
    big = n_floor_steps(10_000, 1.0)
    assert big >= 800
    # the floor count always resolves the horizon exactly
    for n, t in ((50, 0.5), (777, 0.25), (4096, 2.0)):
        steps = n_floor_steps(n, t)
        assert abs(steps * t - round(steps * t)) < 1e-9


# --- matrix square roots in batch ------------------------------------------

@pytest.mark.parametrize("method", ["cholesky", "sym_sqrt"])
def test_sqrt_psd_batch_reconstructs(method):
    rng = np.random.default_rng(1)
    g = rng.standard_normal((50, 2, 2))
    mats = np.einsum("nij,nkj->nik", g, g)
    roots = sqrt_psd_batch(mats, method=method)
    np.testing.assert_allclose(np.einsum("nij,nkj->nik", roots, roots), mats,
                               atol=1e-10)
    # agrees with the single-matrix routines
    one = getattr(spd, "cholesky_psd" if method == "cholesky" else "sym_sqrt")
    for k in (0, 17, 49):
        np.testing.assert_allclose(roots[k], one(mats[k]), atol=1e-12)


def test_min_eig_batch_matches_scalar():
    rng = np.random.default_rng(2)
    mats = rng.standard_normal((30, 2, 2))
    mats = mats + np.swapaxes(mats, 1, 2)
    out = min_eig_batch(mats)
    for k in range(30):
        assert out[k] == pytest.approx(spd.min_eig(mats[k]), abs=1e-12)


# --- single steps -----------------------------------------------------------

def test_step_matches_hand_assembled_euler():
    spec = KernelSpec.maxwell(2)
    ens = sample_initial(LAW, 20, seed=3)
    rng = np.random.default_rng(0)
    noise = 0.1 * rng.standard_normal((20, 2))
    dt = 0.01
    out = step(spec, ens, dt, noise)
    expect = np.empty_like(ens.states)
    for i, x in enumerate(ens.states):
        a = empirical_a(spec, x, ens)
        b = empirical_b(spec, x, ens)
        sigma = spd.sym_sqrt(spd.clamp_psd(a))
        # cholesky and the symmetric root differ as factors but both are
        # valid; the integrator default is cholesky
        sigma = spd.cholesky_psd(spd.clamp_psd(a))
        expect[i] = x + dt * b + sigma @ noise[i]
    np.testing.assert_allclose(out.states, expect, rtol=1e-12, atol=1e-14)
    assert out.time == pytest.approx(ens.time + dt)
    assert out.step_index == ens.step_index + 1


def test_single_particle_is_frozen():
    # alone in the ensemble, the only pair is the self pair at z = 0
    traj = simulate(config(n=1, horizon=0.25, steps_per_unit=8))
    for snap in traj.states:
        np.testing.assert_array_equal(snap, traj.states[0])


def test_two_particle_drift_direction():
    # with the noise zeroed, two bounded-kernel particles drift together
    spec = KernelSpec.maxwell(2)
    states = np.array([[1.0, 0.0], [-1.0, 0.0]])
    ens = Ensemble(states=states, time=0.0, step_index=0, seed=0, replicate=0)
    out = ens
    for _ in range(10):
        out = step(spec, out, 0.01, np.zeros((2, 2)))
    gap0 = np.linalg.norm(states[0] - states[1])
    gap1 = np.linalg.norm(out.states[0] - out.states[1])
    assert gap1 < gap0
    # drift pulls along the separation axis only: b(x1) = -(x1 - mean)
    np.testing.assert_allclose(out.states[0, 1], 0.0, atol=1e-14)
    np.testing.assert_allclose(out.states.sum(axis=0), [0.0, 0.0], atol=1e-13)


# --- full trajectories ------------------------------------------------------

def test_simulate_reproducible_and_snapshot_grid():
    cfg = config(snapshot_stride=4)
    t1 = simulate(cfg)
    t2 = simulate(cfg)
    np.testing.assert_array_equal(t1.times, t2.times)
    for s1, s2 in zip(t1.states, t2.states):
        np.testing.assert_array_equal(s1, s2)
    np.testing.assert_allclose(t1.times, np.arange(6) * 4 * cfg.dt)
    assert t1.times[-1] == pytest.approx(cfg.horizon)
    assert t1.steps == cfg.total_steps
    assert len(t1.min_field_eig) == len(t1.times)
    assert t1.floor_hits == 0 and t1.floor_pairs > 0


def test_simulate_agrees_with_manual_stepping():
    cfg = config(n=16, steps_per_unit=8, horizon=0.25, snapshot_stride=1)
    traj = simulate(cfg)
    spec = cfg.kernel
    plan = NoisePlan(seed=cfg.seed, replicate=0,
                     fine_per_unit=cfg.steps_per_unit * cfg.noise_refinement)
    ens = sample_initial(cfg.law, cfg.n, cfg.seed, replicate=0)
    ids = np.arange(cfg.n)
    np.testing.assert_array_equal(traj.states[0], ens.states)
    for k in range(cfg.total_steps):
        db = plan.coarse_increment(k, cfg.steps_per_unit, ids, 2)
        ens = step(spec, ens, cfg.dt, db)
        np.testing.assert_array_equal(traj.states[k + 1], ens.states)


def test_replicates_differ():
    cfg = config()
    a = simulate(cfg, replicate=0)
    b = simulate(cfg, replicate=1)
    assert not np.array_equal(a.states[-1], b.states[-1])


def test_momentum_and_energy_tracking():
    # momentum is a martingale, energy has an O(dt) scheme bias; both must
    # stay within a few standard errors at desk scale
    cfg = config(n=200, steps_per_unit=100, horizon=0.5)
    drift_p = []
    drift_e = []
    for r in range(6):
        traj = simulate(cfg, replicate=r)
        drift_p.append(momentum(traj.states[-1]) - momentum(traj.states[0]))
        drift_e.append(energy(traj.states[-1]) - energy(traj.states[0]))
    drift_p = np.array(drift_p)
    drift_e = np.array(drift_e)
    # per-replicate momentum noise ~ sqrt(2 E T / n); mean over replicates
    scale_p = np.sqrt(2 * 1.02 * 0.5 / 200 / 6)
    assert np.all(np.abs(drift_p.mean(axis=0)) < 4 * scale_p)
    bias_allowance = 3 * cfg.dt * 1.02 * cfg.horizon
    assert abs(drift_e.mean()) < 4 * drift_e.std() / np.sqrt(6) + bias_allowance


def test_field_eigenvalue_monitor_positive():
    traj = simulate(config(n=400, steps_per_unit=40, horizon=0.5))
    eigs = np.asarray(traj.min_field_eig)
    assert eigs.shape == (len(traj.times),)
    assert np.all(eigs > 0)
    # the field gap opens up as the ensemble isotropizes
    assert eigs[-1] > eigs[0]


def test_sqrt_methods_stay_statistically_close():
    cfg_c = config(n=300, horizon=0.5, sqrt_method="cholesky")
    cfg_s = config(n=300, horizon=0.5, sqrt_method="sym_sqrt")
    m_c = second_moment_matrix(simulate(cfg_c).states[-1])
    m_s = second_moment_matrix(simulate(cfg_s).states[-1])
    # same law, different paths: covariances agree to Monte Carlo error
    assert np.abs(m_c - m_s).max() < 4 * np.sqrt(2 * 0.51**2 / 300)


def test_overflow_raises_nonfinite():
    law = InitialLaw((Gaussian1d(mean=0.0, std=1e200),
                      Gaussian1d(mean=0.0, std=1e200)))
    with pytest.raises(NonFinite):
        simulate(config(law=law, n=8, horizon=0.25, steps_per_unit=8))


def test_soft_family_runs_with_exclusion():
    cfg = config(kernel=KernelSpec.soft(2, gamma=-1.0), n=64,
                 self_exclusion=True, horizon=0.25, steps_per_unit=40)
    traj = simulate(cfg)
    assert np.all(np.isfinite(traj.states[-1]))
    # 10 stepping evaluations plus the terminal monitor one, n(n-1) each
    assert traj.floor_pairs == 64 * 63 * 11


# --- reference flow and couplings ------------------------------------------

def test_reference_starts_at_particle_states():
    cfg = config(n=128)
    p = simulate(cfg)
    r = simulate_mckean_reference(cfg)
    np.testing.assert_array_equal(p.states[0], r.states[0])
    assert not np.array_equal(p.states[-1], r.states[-1])


def test_reference_tracks_closed_form_covariance():
    cfg = config(n=3000, steps_per_unit=50, horizon=0.5)
    flow = MomentFlow.from_initial_law(LAW)
    traj = simulate_mckean_reference(cfg)
    m_end = second_moment_matrix(traj.states[-1])
    target = flow.covariance(0.5)
    tol = 4 * np.sqrt(2 * np.diag(target) ** 2 / cfg.n).max() + 3 * cfg.dt
    assert np.abs(m_end - target).max() < tol


def test_coupled_gap_shrinks_with_n():
    small = coupled_particle_vs_reference(config(n=50))
    large = coupled_particle_vs_reference(config(n=800))
    assert large.estimate < small.estimate / 4
    assert small.sup_gap_sq.shape == (50,)
    assert np.all(small.sup_gap_sq >= 0)


def test_refinement_ladder_gaps_shrink():
    cfg = config(n=64, steps_per_unit=80)
    res = refinement_ladder(cfg, [10, 20, 40, 80])
    assert [int(c) for c in res.step_counts] == [10, 20, 40, 80]
    assert len(res.estimates) == 3
    for a, b in zip(res.estimates, res.estimates[1:]):
        assert b < 0.8 * a
    pair = coupled_time_refinement(config(n=64, steps_per_unit=40), r=2)
    assert pair.estimates[0] > 0


def test_refinement_requires_divisible_grids():
    with pytest.raises(DomainError):
        refinement_ladder(config(), [12, 40])
