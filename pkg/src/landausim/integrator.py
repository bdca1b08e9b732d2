"""Euler–Maruyama integration of the interacting-particle system.

One step of the n-particle system reads, for each particle i,

    X_i' = X_i + sigma_i dB_i + b_i dt,
    a_i = a(X_i, mu_n),  b_i = b(X_i, mu_n),  sigma_i = sqrt(a_i),

with every coefficient evaluated against the frozen ensemble at the start of
the step (mu_n optionally excludes particle i itself for soft potentials).
Brownian increments come from the addressable noise plan, so trajectories are
a pure function of (config, seed, replicate) no matter how the work is
scheduled, and runs at different step counts that share a plan share a
Brownian path exactly.

Besides plain simulation this module provides the coupled experiments used
for convergence studies: simulation against the exact-solution reference
driven by the same noise (Maxwell only), and time-refinement ladders where
several step counts ride one fine Brownian grid.
"""

import math
import time as _time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import spd
from ._backend import pair_fields
from .ensemble import Ensemble, FloorCounter, sample_initial
from .errors import DomainError, NonFinite, NotPsd
from .kernels import KernelSpec
from .maxwell import MomentFlow
from .noise import NoisePlan

SQRT_METHODS = ("cholesky", "sym_sqrt")

_TIME_EPS = 1e-9


def _check_integral(value, what):
    nearest = round(value)
    if abs(value - nearest) > _TIME_EPS * max(1.0, abs(value)):
        raise DomainError("%s must be an integer, got %g" % (what, value))
    return int(nearest)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one particle-system run."""

    kernel: KernelSpec
    law: object                     # InitialLaw
    n: int
    steps_per_unit: int             # time step dt = 1 / steps_per_unit
    horizon: float                  # total simulated time T
    seed: int = 2024
    replicates: int = 1
    self_exclusion: bool = False
    sqrt_method: str = "cholesky"
    snapshot_stride: int = 0        # 0 = auto (about 50 snapshots)
    noise_refinement: int = 1       # fine grid = steps_per_unit * this
    workers: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.steps_per_unit < 1:
            raise DomainError("steps_per_unit must be >= 1")
        if not self.horizon > 0.0:
            raise DomainError("horizon must be positive")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.sqrt_method not in SQRT_METHODS:
            raise DomainError(
                "sqrt_method must be one of %s" % (SQRT_METHODS,))
        if self.self_exclusion and self.n < 2:
            raise DomainError("self-exclusion needs n >= 2")
        if self.noise_refinement < 1:
            raise DomainError("noise_refinement must be >= 1")
        if self.law.dim != self.kernel.dim:
            raise DomainError(
                "law dimension %d does not match kernel dimension %d"
                % (self.law.dim, self.kernel.dim))
        if self.snapshot_stride < 0:
            raise DomainError("snapshot_stride must be >= 0")
        _check_integral(self.horizon * self.steps_per_unit, "horizon * steps_per_unit")

    @property
    def total_steps(self):
        return _check_integral(self.horizon * self.steps_per_unit,
                               "horizon * steps_per_unit")

    @property
    def dt(self):
        return 1.0 / self.steps_per_unit

    def resolved_stride(self):
        if self.snapshot_stride:
            return self.snapshot_stride
        return max(1, self.total_steps // 50)


def n_floor_steps(n, horizon):
    """Minimum steps-per-unit-time paired with an n-particle run in the
    particle-rate study: max(500, ceil(8 sqrt(n))), nudged up until the total
    step count over ``horizon`` is integral."""
    base = max(500, int(math.ceil(8.0 * math.sqrt(n))))
    while abs(base * horizon - round(base * horizon)) > _TIME_EPS:
        base += 1
    return base


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of one replicate's run."""

    times: np.ndarray          # (S,)
    step_indices: np.ndarray   # (S,)
    states: np.ndarray         # (S, n, d)
    min_field_eig: np.ndarray  # (S,) min over particles of min eig a_i
    floor_hits: int
    floor_pairs: int
    seed: int
    replicate: int
    wall_seconds: float
    steps: int

    @property
    def final_states(self):
        return self.states[-1]


def sqrt_psd_batch(mats, method="cholesky", tol=spd.TOL_PSD):
    """Matrix square roots of a batch of (near-)PSD matrices, shape (n, d, d).

    ``cholesky`` returns lower-triangular factors, ``sym_sqrt`` symmetric
    roots; either way sigma @ sigma.T reconstructs the PSD projection of the
    input.  d = 2 runs in closed form; other dimensions loop over spd.
    Raises NotPsd if any matrix has an eigenvalue below the roundoff band.
    """
    mats = np.asarray(mats, dtype=float)
    n, d, _ = mats.shape
    if method not in SQRT_METHODS:
        raise DomainError("sqrt_method must be one of %s" % (SQRT_METHODS,))
    if d != 2:
        out = np.empty_like(mats)
        fn = spd.cholesky_psd if method == "cholesky" else spd.sym_sqrt
        for i in range(n):
            out[i] = fn(mats[i], tol)
        return out

    p = mats[:, 0, 0]
    q = 0.5 * (mats[:, 0, 1] + mats[:, 1, 0])
    s = mats[:, 1, 1]
    tr = p + s
    norm = 0.5 * tr + np.hypot(0.5 * (p - s), q)   # largest eigenvalue
    low = 0.5 * tr - np.hypot(0.5 * (p - s), q)
    bad = low < -tol * np.maximum(norm, 1e-300)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotPsd(
            "matrix %d in batch has eigenvalue %.6e below the PSD band"
            % (i, float(low[i]))
        )

    out = np.zeros_like(mats)
    if method == "sym_sqrt":
        det = np.maximum(p * s - q * q, 0.0)
        sdet = np.sqrt(det)
        denom_sq = np.maximum(tr + 2.0 * sdet, 0.0)
        denom = np.sqrt(denom_sq)
        safe = denom > 0.0
        inv = np.where(safe, 1.0 / np.where(safe, denom, 1.0), 0.0)
        out[:, 0, 0] = (p + sdet) * inv
        out[:, 0, 1] = q * inv
        out[:, 1, 0] = q * inv
        out[:, 1, 1] = (s + sdet) * inv
        return out

    pc = np.maximum(p, 0.0)
    l11 = np.sqrt(pc)
    safe = l11 > 0.0
    l21 = np.where(safe, q / np.where(safe, l11, 1.0), 0.0)
    l22 = np.sqrt(np.maximum(s - l21 * l21, 0.0))
    out[:, 0, 0] = l11
    out[:, 1, 0] = l21
    out[:, 1, 1] = l22
    return out


def min_eig_batch(mats):
    """Smallest eigenvalue of each matrix in a (n, d, d) symmetric batch."""
    mats = np.asarray(mats, dtype=float)
    n, d, _ = mats.shape
    if d == 2:
        p = mats[:, 0, 0]
        q = 0.5 * (mats[:, 0, 1] + mats[:, 1, 0])
        s = mats[:, 1, 1]
        return 0.5 * (p + s) - np.hypot(0.5 * (p - s), q)
    return np.array([spd.min_eig(mats[i]) for i in range(n)])


def _advance(states, sigma, drift, increments, dt):
    """One Euler update: X + sigma dB + drift dt (all arrays (n, d[, d]))."""
    moved = np.einsum("nij,nj->ni", sigma, increments)
    return states + moved + dt * drift


def _require_finite(states, step):
    if not np.all(np.isfinite(states)):
        bad = int(np.count_nonzero(~np.isfinite(states).all(axis=1)))
        raise NonFinite(
            "%d particle(s) left the finite floats at step %d" % (bad, step),
            step=step, bad_count=bad,
        )


def step(spec, ens, dt, noise, self_exclusion=False, sqrt_method="cholesky",
         workers=1, counters=None):
    """Advance an Ensemble by one Euler step with the given (n, d) Brownian
    increments.  All coefficients are read from the ensemble as-is; the
    returned ensemble is a new immutable snapshot."""
    states = ens.states
    n, d = states.shape
    exclude = np.arange(n, dtype=np.int64) if self_exclusion else None
    a, b, hits = pair_fields(spec, states, states, exclude=exclude,
                             workers=workers)
    if counters is not None:
        counters.add(hits, n * (n - 1 if self_exclusion else n))
    sigma = sqrt_psd_batch(a, sqrt_method)
    new_states = _advance(states, sigma, b, np.asarray(noise, dtype=float), dt)
    _require_finite(new_states, ens.step_index)
    return replace(ens, states=new_states, time=ens.time + dt,
                   step_index=ens.step_index + 1)


def _snapshot_steps(total, stride):
    steps = list(range(0, total, stride))
    if not steps or steps[-1] != total:
        steps.append(total)
    return np.asarray(steps, dtype=np.int64)


def simulate(config, replicate=0):
    """Run one replicate of the particle system; returns a Trajectory."""
    spec = config.kernel
    n, d = config.n, spec.dim
    per_unit = config.steps_per_unit
    plan = NoisePlan(config.seed, replicate,
                     per_unit * config.noise_refinement)
    ids = np.arange(n)
    x = config.law.sample(plan, n)
    total = config.total_steps
    dt = config.dt
    exclude = ids.astype(np.int64) if config.self_exclusion else None
    pairs_per_step = n * (n - 1 if config.self_exclusion else n)

    snap_steps = _snapshot_steps(total, config.resolved_stride())
    snap_set = {int(s): i for i, s in enumerate(snap_steps)}
    states_out = np.empty((len(snap_steps), n, d))
    mineig_out = np.empty(len(snap_steps))
    floor = FloorCounter()

    t0 = _time.perf_counter()
    if 0 in snap_set:
        states_out[snap_set[0]] = x
    for s in range(total):
        a, b, hits = pair_fields(spec, x, x, exclude=exclude,
                                 workers=config.workers)
        floor.add(hits, pairs_per_step)
        if s in snap_set:
            mineig_out[snap_set[s]] = float(np.min(min_eig_batch(a)))
        sigma = sqrt_psd_batch(a, config.sqrt_method)
        db = plan.coarse_increment(s, per_unit, ids, d)
        x = _advance(x, sigma, b, db, dt)
        _require_finite(x, s)
        if (s + 1) in snap_set:
            states_out[snap_set[s + 1]] = x
    # Fields at the final snapshot are not needed by the stepping loop;
    # evaluate once for the diagnostic column.
    a, _, hits = pair_fields(spec, x, x, exclude=exclude, workers=config.workers)
    floor.add(hits, pairs_per_step)
    mineig_out[-1] = float(np.min(min_eig_batch(a)))
    wall = _time.perf_counter() - t0

    return Trajectory(
        times=snap_steps / float(per_unit),
        step_indices=snap_steps,
        states=states_out,
        min_field_eig=mineig_out,
        floor_hits=floor.hits,
        floor_pairs=floor.pairs,
        seed=config.seed,
        replicate=replicate,
        wall_seconds=wall,
        steps=total,
    )


def _require_maxwell(config, what):
    if config.kernel.family != "maxwell":
        raise DomainError("%s requires the maxwell family" % what)


def simulate_mckean_reference(config, replicate=0, flow=None):
    """Run n independent copies of the exact-solution dynamics (Maxwell,
    centered law) using the same initial draws and Brownian increments as
    ``simulate`` would for this (config, replicate)."""
    _require_maxwell(config, "the exact-solution reference")
    spec = config.kernel
    if flow is None:
        flow = MomentFlow.from_initial_law(config.law)
    n, d = config.n, spec.dim
    per_unit = config.steps_per_unit
    plan = NoisePlan(config.seed, replicate,
                     per_unit * config.noise_refinement)
    ids = np.arange(n)
    x = config.law.sample(plan, n)
    total = config.total_steps
    dt = config.dt

    snap_steps = _snapshot_steps(total, config.resolved_stride())
    snap_set = {int(s): i for i, s in enumerate(snap_steps)}
    states_out = np.empty((len(snap_steps), n, d))
    mineig_out = np.empty(len(snap_steps))

    t0 = _time.perf_counter()
    if 0 in snap_set:
        states_out[snap_set[0]] = x
    for s in range(total):
        t = s / per_unit
        a, b = flow.mckean_coefficients_batch(t, x)
        if s in snap_set:
            mineig_out[snap_set[s]] = float(np.min(min_eig_batch(a)))
        sigma = sqrt_psd_batch(a, config.sqrt_method)
        db = plan.coarse_increment(s, per_unit, ids, d)
        x = _advance(x, sigma, b, db, dt)
        _require_finite(x, s)
        if (s + 1) in snap_set:
            states_out[snap_set[s + 1]] = x
    a, _ = flow.mckean_coefficients_batch(total / per_unit, x)
    mineig_out[-1] = float(np.min(min_eig_batch(a)))
    wall = _time.perf_counter() - t0

    return Trajectory(
        times=snap_steps / float(per_unit),
        step_indices=snap_steps,
        states=states_out,
        min_field_eig=mineig_out,
        floor_hits=0,
        floor_pairs=0,
        seed=config.seed,
        replicate=replicate,
        wall_seconds=wall,
        steps=total,
    )


@dataclass(frozen=True)
class CoupledGap:
    """Result of one replicate of a coupled two-system experiment."""

    sup_gap_sq: np.ndarray   # (n,) per-particle sup over grid of |X - Y|^2
    estimate: float          # mean over particles of sup_gap_sq
    floor_hits: int
    floor_pairs: int


def coupled_particle_vs_reference(config, replicate=0, flow=None):
    """Run the particle system and the exact-solution reference on the same
    (X_0, B) and record per-particle sup-over-grid squared gaps."""
    _require_maxwell(config, "the coupled reference experiment")
    spec = config.kernel
    if flow is None:
        flow = MomentFlow.from_initial_law(config.law)
    n, d = config.n, spec.dim
    per_unit = config.steps_per_unit
    plan = NoisePlan(config.seed, replicate,
                     per_unit * config.noise_refinement)
    ids = np.arange(n)
    x = config.law.sample(plan, n)
    y = x.copy()
    total = config.total_steps
    dt = config.dt
    exclude = ids.astype(np.int64) if config.self_exclusion else None
    pairs_per_step = n * (n - 1 if config.self_exclusion else n)
    floor = FloorCounter()
    sup_sq = np.zeros(n)

    for s in range(total):
        a, b, hits = pair_fields(spec, x, x, exclude=exclude,
                                 workers=config.workers)
        floor.add(hits, pairs_per_step)
        sigma = sqrt_psd_batch(a, config.sqrt_method)
        ar, br = flow.mckean_coefficients_batch(s / per_unit, y)
        sigma_r = sqrt_psd_batch(ar, config.sqrt_method)
        db = plan.coarse_increment(s, per_unit, ids, d)
        x = _advance(x, sigma, b, db, dt)
        y = _advance(y, sigma_r, br, db, dt)
        _require_finite(x, s)
        _require_finite(y, s)
        gap = x - y
        np.maximum(sup_sq, np.sum(gap * gap, axis=1), out=sup_sq)

    return CoupledGap(sup_gap_sq=sup_sq, estimate=float(np.mean(sup_sq)),
                      floor_hits=floor.hits, floor_pairs=floor.pairs)


@dataclass(frozen=True)
class RefinementResult:
    """Gaps between systems run at adjacent step counts on one Brownian path."""

    step_counts: Tuple[int, ...]      # ladder, ascending
    sup_gap_sq: np.ndarray            # (len-1, n) per-pair per-particle gaps
    estimates: np.ndarray             # (len-1,) particle means
    floor_hits: int
    floor_pairs: int


def refinement_ladder(config, step_counts, replicate=0):
    """Run the same particles at several steps-per-unit counts sharing one
    fine Brownian grid; gap j compares ladder levels j and j+1 over the
    coarser level's grid.

    Every level must divide the finest; the finest level is the noise plan's
    fine grid, so refining truly refines one Brownian path.
    """
    counts = [int(c) for c in step_counts]
    if sorted(counts) != counts or len(set(counts)) != len(counts):
        raise DomainError("step counts must be strictly increasing")
    if len(counts) < 2:
        raise DomainError("need at least two ladder levels")
    fine = counts[-1]
    for c in counts:
        if fine % c != 0:
            raise DomainError(
                "level %d does not divide the finest level %d" % (c, fine))
        _check_integral(config.horizon * c, "horizon * steps_per_unit")

    spec = config.kernel
    n, d = config.n, spec.dim
    plan = NoisePlan(config.seed, replicate, fine)
    ids = np.arange(n)
    x0 = config.law.sample(plan, n)
    levels = [x0.copy() for _ in counts]
    strides = [fine // c for c in counts]
    exclude = ids.astype(np.int64) if config.self_exclusion else None
    pairs_per_step = n * (n - 1 if config.self_exclusion else n)
    floor = FloorCounter()
    total_fine = _check_integral(config.horizon * fine, "horizon * fine")
    sup_sq = np.zeros((len(counts) - 1, n))

    for f in range(total_fine):
        for j, (count, stride) in enumerate(zip(counts, strides)):
            if f % stride:
                continue
            xj = levels[j]
            a, b, hits = pair_fields(spec, xj, xj, exclude=exclude,
                                     workers=config.workers)
            floor.add(hits, pairs_per_step)
            sigma = sqrt_psd_batch(a, config.sqrt_method)
            db = plan.coarse_increment(f // stride, count, ids, d)
            levels[j] = _advance(xj, sigma, b, db, 1.0 / count)
            _require_finite(levels[j], f // stride)
        for j in range(len(counts) - 1):
            # Compare on the coarser level's grid points.
            if (f + 1) % strides[j] == 0:
                gap = levels[j] - levels[j + 1]
                np.maximum(sup_sq[j], np.sum(gap * gap, axis=1),
                           out=sup_sq[j])

    return RefinementResult(
        step_counts=tuple(counts),
        sup_gap_sq=sup_sq,
        estimates=sup_sq.mean(axis=1),
        floor_hits=floor.hits,
        floor_pairs=floor.pairs,
    )


def coupled_time_refinement(config, r=2, replicate=0):
    """Run the config's step count N and the refined count r*N on one
    Brownian path; returns the two-level RefinementResult."""
    if r < 2:
        raise DomainError("refinement factor must be >= 2")
    n0 = config.steps_per_unit
    return refinement_ladder(config, [n0, r * n0], replicate=replicate)
