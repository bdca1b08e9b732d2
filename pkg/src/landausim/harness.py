"""Experiment drivers: batch runs, convergence studies, matrix-inequality
checks, and their CSV/JSON outputs.

Every driver writes a ``manifest.json`` recording the package version, the
selected backend, the resolved configuration, floor-event statistics, and
wall-clock cost, next to schema-stable CSV files:

* ``moments.csv``      t, mean_1..mean_d, m2_11..m2_dd (upper triangle),
                       energy, min_field_eig   (replicate average; per-
                       replicate copies sit in moments_r{k}.csv when R > 1)
* ``ellipticity.csv``  t, min_field_eig, oracle_bound (bound is empty for
                       families without a closed-form reference)
* ``hist_t{t}.csv``    bin_left, bin_right, density
* ``rate_n.csv`` / ``rate_N.csv``   abscissa, mse, stderr
"""

import datetime
import json
import sys
import time as _time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import __version__, analysis, spd
from ._backend import BACKEND
from .ensemble import energy as ens_energy
from .ensemble import momentum, second_moment_matrix
from .errors import ConfigError, DegenerateFit, NotCentered
from .integrator import (coupled_particle_vs_reference, n_floor_steps,
                         refinement_ladder, simulate)
from .maxwell import MomentFlow

FLOOR_WARN_FRACTION = 1e-3


# ---------------------------------------------------------------------------
# CSV / manifest plumbing

def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else _fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_manifest(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _moment_header(dim):
    header = ["t"]
    header += ["mean_%d" % (j + 1) for j in range(dim)]
    header += ["m2_%d%d" % (i + 1, j + 1)
               for i in range(dim) for j in range(i, dim)]
    header += ["energy", "min_field_eig"]
    return header


def moment_rows(traj):
    """Per-snapshot moment table for one trajectory, matching
    ``_moment_header``."""
    dim = traj.states.shape[2]
    iu = [(i, j) for i in range(dim) for j in range(i, dim)]
    rows = []
    for idx, t in enumerate(traj.times):
        states = traj.states[idx]
        m2 = second_moment_matrix(states)
        row = [t]
        row += list(momentum(states))
        row += [m2[i, j] for i, j in iu]
        row += [ens_energy(states), traj.min_field_eig[idx]]
        rows.append(row)
    return rows


def _sim_payload(setup, command, extra=None):
    sim = setup.sim
    payload = {
        "command": command,
        "version": __version__,
        "backend": BACKEND,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "kernel": {
            "family": sim.kernel.family,
            "dim": sim.kernel.dim,
            "gamma": sim.kernel.gamma,
            "epsilon": sim.kernel.eps,
            "lambda_floor": sim.kernel.lambda_floor,
            "r0": sim.kernel.r0,
            "r1": sim.kernel.r1,
        },
        "run": {
            "n": sim.n,
            "steps_per_unit": sim.steps_per_unit,
            "horizon": sim.horizon,
            "seed": sim.seed,
            "replicates": sim.replicates,
            "self_exclusion": sim.self_exclusion,
            "exclusion_mode": setup.exclusion_mode,
            "sqrt_method": sim.sqrt_method,
            "snapshot_stride": sim.resolved_stride(),
            "noise_refinement": sim.noise_refinement,
            "workers": sim.workers,
        },
    }
    if extra:
        payload.update(extra)
    return payload


def _floor_stats(hits, pairs):
    fraction = hits / pairs if pairs else 0.0
    return {
        "hits": int(hits),
        "pairs": int(pairs),
        "fraction": fraction,
        "warn": bool(fraction > FLOOR_WARN_FRACTION),
    }


# ---------------------------------------------------------------------------
# simulate / hist drivers

@dataclass
class SimulateOutputs:
    trajectories: list
    files: List[Path]
    manifest: dict
    warnings: List[str]


def _resolve_hist_times(setup, times_grid):
    wanted = setup.hist_times
    if wanted is None:
        wanted = (times_grid[-1],)
    resolved = []
    for t in wanted:
        idx = int(np.argmin(np.abs(times_grid - t)))
        if abs(times_grid[idx] - t) > 1e-9:
            raise ConfigError(
                "hist time %g is not on the snapshot grid (nearest %g)"
                % (t, times_grid[idx]))
        resolved.append(idx)
    return resolved


def _write_hists(setup, traj, files):
    indices = _resolve_hist_times(setup, traj.times)
    lo, hi = setup.hist_range
    for idx in indices:
        t = traj.times[idx]
        hist = analysis.histogram(traj.states[idx][:, setup.hist_coord],
                                  bins=setup.hist_bins, lo=lo, hi=hi)
        rows = list(zip(hist.bin_left, hist.bin_right, hist.density))
        files.append(write_csv(setup.out_dir / ("hist_t%g.csv" % t),
                               ["bin_left", "bin_right", "density"], rows))


def run_simulate(setup, command="simulate", hist_only=False):
    """Simulate all replicates and write the output files."""
    sim = setup.sim
    t0 = _time.perf_counter()
    reps = 1 if hist_only else sim.replicates
    trajs = [simulate(sim, replicate=r) for r in range(reps)]
    wall = _time.perf_counter() - t0

    files = []
    warnings = []
    dim = sim.kernel.dim
    header = _moment_header(dim)

    if not hist_only:
        tables = [np.asarray(moment_rows(traj), dtype=float) for traj in trajs]
        mean_table = np.mean(tables, axis=0)
        files.append(write_csv(setup.out_dir / "moments.csv", header,
                               mean_table.tolist()))
        if len(trajs) > 1:
            for r, table in enumerate(tables):
                files.append(write_csv(setup.out_dir / ("moments_r%d.csv" % r),
                                       header, table.tolist()))

        flow = None
        if sim.kernel.family == "maxwell":
            try:
                flow = MomentFlow.from_initial_law(sim.law)
            except NotCentered:
                flow = None
        ell_rows = []
        for idx, t in enumerate(trajs[0].times):
            bound = flow.ellipticity_lower_bound(t) if flow is not None else None
            ell_rows.append([t, trajs[0].min_field_eig[idx], bound])
        files.append(write_csv(setup.out_dir / "ellipticity.csv",
                               ["t", "min_field_eig", "oracle_bound"],
                               ell_rows))

    _write_hists(setup, trajs[0], files)

    hits = sum(t.floor_hits for t in trajs)
    pairs = sum(t.floor_pairs for t in trajs)
    floor = _floor_stats(hits, pairs)
    if floor["warn"]:
        warnings.append(
            "floored pair fraction %.3e exceeds %.1e" %
            (floor["fraction"], FLOOR_WARN_FRACTION))
    total_steps = sum(t.steps for t in trajs)
    manifest = _sim_payload(setup, command, {
        "floor_events": floor,
        "wall_seconds": wall,
        "wall_seconds_per_step": wall / max(total_steps, 1),
        "files": [p.name for p in files],
        "warnings": warnings,
    })
    files.append(write_manifest(setup.out_dir / "manifest.json", manifest))
    return SimulateOutputs(trajectories=trajs, files=files,
                           manifest=manifest, warnings=warnings)


# ---------------------------------------------------------------------------
# convergence-rate drivers

@dataclass
class RateOutputs:
    series: analysis.RateSeries
    files: List[Path]
    manifest: dict
    warnings: List[str]


def run_rate_particles(setup, command="rate-n"):
    """Squared sup-gap between the particle system and the exact-solution
    reference sharing its noise, swept over particle counts."""
    sim = setup.sim
    if sim.kernel.family != "maxwell":
        raise ConfigError("the particle-rate study needs kernel.family = maxwell")
    if len(setup.rate_n_list) < 4:
        raise ConfigError("rate.n_list needs at least 4 entries")
    if sim.replicates < 2:
        raise ConfigError("rate studies need run.replicates >= 2")
    flow = MomentFlow.from_initial_law(sim.law)

    t0 = _time.perf_counter()
    hits = pairs = 0
    samples = np.empty((sim.replicates, len(setup.rate_n_list)))
    for k, n in enumerate(setup.rate_n_list):
        steps = n_floor_steps(n, sim.horizon)
        cfg = replace(sim, n=n, steps_per_unit=steps, replicates=1)
        for r in range(sim.replicates):
            gap = coupled_particle_vs_reference(cfg, replicate=r, flow=flow)
            samples[r, k] = gap.estimate
            hits += gap.floor_hits
            pairs += gap.floor_pairs
    wall = _time.perf_counter() - t0

    series = analysis.fit_rate(np.asarray(setup.rate_n_list, float), samples,
                               n_boot=setup.bootstrap, seed=sim.seed)
    rows = list(zip(series.abscissa, series.mse, series.stderr))
    files = [write_csv(setup.out_dir / "rate_n.csv",
                       ["abscissa", "mse", "stderr"], rows)]
    warnings = []
    floor = _floor_stats(hits, pairs)
    manifest = _sim_payload(setup, command, {
        "abscissa": [int(v) for v in setup.rate_n_list],
        "steps_per_unit_used": [n_floor_steps(n, sim.horizon)
                                for n in setup.rate_n_list],
        "slope": series.slope,
        "slope_ci": list(series.slope_ci),
        "floor_events": floor,
        "wall_seconds": wall,
        "files": [p.name for p in files],
        "warnings": warnings,
    })
    files.append(write_manifest(setup.out_dir / "manifest.json", manifest))
    return RateOutputs(series=series, files=files, manifest=manifest,
                       warnings=warnings)


def run_rate_steps(setup, command="rate-N", refinement=2):
    """Squared sup-gap between step counts N and refinement*N on one Brownian
    path, swept over N by chaining a shared-ladder run."""
    sim = setup.sim
    if sim.kernel.family not in ("maxwell", "pseudo_maxwell"):
        raise ConfigError(
            "the step-rate study needs a maxwell or pseudo_maxwell kernel")
    counts = sorted(setup.rate_step_list)
    if list(setup.rate_step_list) != counts or len(set(counts)) != len(counts):
        raise ConfigError("rate.N_list must be strictly increasing")
    if len(counts) < 4:
        raise ConfigError("rate.N_list needs at least 4 entries")
    if sim.replicates < 2:
        raise ConfigError("rate studies need run.replicates >= 2")
    ladder = counts + [refinement * counts[-1]]
    fine = ladder[-1]
    for c in ladder:
        if fine % c != 0:
            raise ConfigError(
                "every rate.N_list entry must divide %d (refined top level)"
                % fine)

    t0 = _time.perf_counter()
    hits = pairs = 0
    samples = np.empty((sim.replicates, len(counts)))
    for r in range(sim.replicates):
        result = refinement_ladder(sim, ladder, replicate=r)
        samples[r] = result.estimates
        hits += result.floor_hits
        pairs += result.floor_pairs
    wall = _time.perf_counter() - t0

    series = analysis.fit_rate(np.asarray(counts, float), samples,
                               n_boot=setup.bootstrap, seed=sim.seed)
    rows = list(zip(series.abscissa, series.mse, series.stderr))
    files = [write_csv(setup.out_dir / "rate_N.csv",
                       ["abscissa", "mse", "stderr"], rows)]
    warnings = []
    floor = _floor_stats(hits, pairs)
    manifest = _sim_payload(setup, command, {
        "abscissa": counts,
        "ladder": ladder,
        "slope": series.slope,
        "slope_ci": list(series.slope_ci),
        "floor_events": floor,
        "wall_seconds": wall,
        "files": [p.name for p in files],
        "warnings": warnings,
    })
    files.append(write_manifest(setup.out_dir / "manifest.json", manifest))
    return RateOutputs(series=series, files=files, manifest=manifest,
                       warnings=warnings)


# ---------------------------------------------------------------------------
# matrix-inequality suites

@dataclass
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst_margin: float
    counterexample: Optional[str] = None

    @property
    def passed(self):
        return self.violations == 0


def _random_psd(rng, rank_deficient_ok=True):
    d = int(rng.integers(2, 4))
    scale = 10.0 ** rng.uniform(-2.0, 2.0)
    cols = d
    if rank_deficient_ok and rng.random() < 0.25:
        cols = int(rng.integers(1, d))
    g = rng.standard_normal((d, cols)) * scale
    return g @ g.T


def _pair(rng, need_invertible=False):
    a = _random_psd(rng, rank_deficient_ok=not need_invertible)
    d = a.shape[0]
    if need_invertible:
        a = a + (0.05 * float(np.trace(a)) / d + 1e-6) * np.eye(d)
    if rng.random() < 0.5:
        b = a + _random_psd_like(rng, d)
    else:
        b = _random_psd_like(rng, d)
    return a, b


def _random_psd_like(rng, d):
    scale = 10.0 ** rng.uniform(-2.0, 2.0)
    cols = d if rng.random() < 0.75 else int(rng.integers(1, d))
    g = rng.standard_normal((d, cols)) * scale
    return g @ g.T


def sqrt_difference_suite(trials=10000, seed=0, sqrt_fn=None):
    """Check |sqrt(A) - sqrt(B)| <= sqrt(|A - B|) in spectral norm."""
    sqrt_fn = sqrt_fn or spd.sym_sqrt
    rng = np.random.default_rng(seed)
    violations = 0
    worst = np.inf
    example = None
    for _ in range(trials):
        a, b = _pair(rng)
        lhs = spd.opnorm(sqrt_fn(a) - sqrt_fn(b))
        rhs = np.sqrt(spd.opnorm(a - b))
        scale = max(1.0, spd.opnorm(a), spd.opnorm(b))
        margin = rhs + 1e-8 * scale - lhs
        worst = min(worst, margin)
        if margin < 0.0:
            violations += 1
            if example is None:
                example = ("d=%d |A|=%.3e |B|=%.3e lhs=%.6e rhs=%.6e"
                           % (a.shape[0], spd.opnorm(a), spd.opnorm(b),
                              lhs, rhs))
    return SuiteResult("sqrt_difference", trials, violations, worst, example)


def sqrt_difference_invertible_suite(trials=10000, seed=1, sqrt_fn=None):
    """Check |sqrt(A) - sqrt(B)| <= sqrt(min(|A^-1|, |B^-1|)) |A - B|."""
    sqrt_fn = sqrt_fn or spd.sym_sqrt
    rng = np.random.default_rng(seed)
    violations = 0
    worst = np.inf
    example = None
    for _ in range(trials):
        a, b = _pair(rng, need_invertible=True)
        winv_a = _inv_opnorm_or_inf(a)
        winv_b = _inv_opnorm_or_inf(b)
        c = min(winv_a, winv_b)
        if not np.isfinite(c):
            continue
        lhs = spd.opnorm(sqrt_fn(a) - sqrt_fn(b))
        rhs = np.sqrt(c) * spd.opnorm(a - b)
        scale = max(1.0, spd.opnorm(a), spd.opnorm(b))
        margin = rhs + 1e-8 * scale - lhs
        worst = min(worst, margin)
        if margin < 0.0:
            violations += 1
            if example is None:
                example = ("d=%d lhs=%.6e rhs=%.6e c=%.3e"
                           % (a.shape[0], lhs, rhs, c))
    return SuiteResult("sqrt_difference_invertible", trials, violations,
                       worst, example)


def _inv_opnorm_or_inf(a):
    try:
        return spd.inv_opnorm(a)
    except Exception:
        return np.inf


def coupling_bound_suite(trials=10000, seed=2, w2_fn=None):
    """Check W2(mu_x, mu_y)^2 <= mean_i |x_i - y_i|^2 on random clouds."""
    w2_fn = w2_fn or analysis.wasserstein2_exact
    rng = np.random.default_rng(seed)
    violations = 0
    worst = np.inf
    example = None
    for _ in range(trials):
        n = int(rng.integers(2, 33))
        d = int(rng.integers(1, 4))
        scale = 10.0 ** rng.uniform(-1.0, 1.0)
        x = rng.standard_normal((n, d)) * scale
        y = x + rng.standard_normal((n, d)) * scale * rng.uniform(0.0, 2.0)
        w2 = w2_fn(x, y)
        coupling = float(np.mean(np.sum((x - y) ** 2, axis=1)))
        margin = coupling + 1e-8 * max(1.0, coupling) - w2 * w2
        worst = min(worst, margin)
        if margin < 0.0:
            violations += 1
            if example is None:
                example = ("n=%d d=%d W2^2=%.6e coupling=%.6e"
                           % (n, d, w2 * w2, coupling))
    return SuiteResult("coupling_bound", trials, violations, worst, example)


def reconstruction_suite(trials=10000, seed=3, sqrt_fn=None, chol_fn=None):
    """Check sigma sigma^T recovers the input PSD matrix to 1e-10 relative,
    for both square-root constructions."""
    sqrt_fn = sqrt_fn or spd.sym_sqrt
    chol_fn = chol_fn or spd.cholesky_psd
    rng = np.random.default_rng(seed)
    violations = 0
    worst = np.inf
    example = None
    for _ in range(trials):
        a = _random_psd(rng)
        scale = max(spd.opnorm(a), 1e-300)
        for name, fn in (("sym_sqrt", sqrt_fn), ("cholesky", chol_fn)):
            s = fn(a)
            err = spd.opnorm(s @ s.T - a) / scale
            margin = 1e-10 - err
            worst = min(worst, margin)
            if margin < 0.0:
                violations += 1
                if example is None:
                    example = "%s d=%d rel_err=%.3e" % (name, a.shape[0], err)
    return SuiteResult("sqrt_reconstruction", trials, violations, worst,
                       example)


def run_all_suites(trials=10000, seed=0):
    return [
        sqrt_difference_suite(trials, seed),
        sqrt_difference_invertible_suite(trials, seed + 1),
        coupling_bound_suite(trials, seed + 2),
        reconstruction_suite(trials, seed + 3),
    ]
