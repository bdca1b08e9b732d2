"""Measurement tools: transport distances, histograms, rate fits, and the
ellipticity monitor.

The Wasserstein-2 helpers work on equal-size empirical measures: the 1-d
version sorts (optimal matching on the line), the exact version solves the
assignment problem on the squared-distance cost matrix (capped at n = 512
where the cubic solver is still instant).
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._backend import pair_fields
from .errors import DegenerateFit, DomainError
from .integrator import min_eig_batch

_EXACT_W2_CAP = 512


def wasserstein2_1d(x, y):
    """W2 distance between equal-size 1-d empirical measures (sorted pairing)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size == 0:
        raise DomainError("need two nonempty samples of equal size")
    dx = np.sort(x) - np.sort(y)
    return float(np.sqrt(np.mean(dx * dx)))


def wasserstein2_exact(x, y):
    """Exact W2 between equal-size d-dimensional point clouds, n <= 512.

    Solves the assignment problem on the squared-distance matrix; returns
    sqrt of the optimal mean squared matching distance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape != y.shape:
        raise DomainError("point clouds must share shape, got %s vs %s"
                          % (x.shape, y.shape))
    n = x.shape[0]
    if n == 0:
        raise DomainError("need nonempty clouds")
    if n > _EXACT_W2_CAP:
        raise DomainError("exact W2 capped at n = %d points" % _EXACT_W2_CAP)
    diff = x[:, None, :] - y[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


@dataclass(frozen=True)
class Histogram:
    """Fixed-range histogram normalized by the total sample count, so the
    densities integrate to the in-range fraction (escaping mass shows up as
    missing area rather than being renormalized away)."""

    bin_left: np.ndarray
    bin_right: np.ndarray
    density: np.ndarray
    in_fraction: float

    @property
    def centers(self):
        return 0.5 * (self.bin_left + self.bin_right)

    @property
    def widths(self):
        return self.bin_right - self.bin_left


def histogram(samples, bins=80, lo=-3.0, hi=3.0):
    """Histogram of a 1-d sample on [lo, hi] with equal-width bins."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise DomainError("need a nonempty sample")
    if not (bins >= 1 and hi > lo):
        raise DomainError("need bins >= 1 and hi > lo")
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    widths = np.diff(edges)
    density = counts / (samples.size * widths)
    return Histogram(
        bin_left=edges[:-1],
        bin_right=edges[1:],
        density=density,
        in_fraction=float(counts.sum() / samples.size),
    )


def gaussian_density(x, mean=0.0, variance=1.0):
    """One-dimensional Gaussian probability density."""
    if not variance > 0.0:
        raise DomainError("variance must be positive")
    x = np.asarray(x, dtype=float)
    z = (x - mean)
    return np.exp(-0.5 * z * z / variance) / math.sqrt(2.0 * math.pi * variance)


def l1_distance_to_density(hist, pdf):
    """L1 distance between binned densities and a reference density evaluated
    at bin centers, integrated over the histogram range."""
    ref = pdf(hist.centers) if callable(pdf) else np.asarray(pdf, dtype=float)
    return float(np.sum(np.abs(hist.density - ref) * hist.widths))


@dataclass(frozen=True)
class RateSeries:
    """A convergence-rate measurement: per-abscissa MSE with uncertainty and
    the fitted log-log slope."""

    abscissa: np.ndarray          # (K,) strictly increasing, positive
    mse: np.ndarray               # (K,) replicate means
    stderr: np.ndarray            # (K,) standard errors of the means
    samples: Optional[np.ndarray] # (R, K) per-replicate estimates, if kept
    slope: float
    slope_ci: Tuple[float, float]


def fit_rate(abscissa, samples, n_boot=1000, seed=0):
    """Fit a log-log slope to per-replicate squared-error estimates.

    ``samples`` has shape (R, K): R replicate estimates at each of K >= 4
    abscissa values.  Replicates are resampled jointly across abscissas for
    the bootstrap confidence interval (replicates share noise across levels,
    so rows are the exchangeable unit).
    """
    abscissa = np.asarray(abscissa, dtype=float)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if abscissa.ndim != 1 or abscissa.size < 4:
        raise DegenerateFit("need at least 4 abscissa values")
    if np.any(abscissa <= 0.0) or np.any(np.diff(abscissa) <= 0.0):
        raise DegenerateFit("abscissa must be positive and strictly increasing")
    if samples.shape[1] != abscissa.size:
        raise DegenerateFit("samples must have one column per abscissa value")
    r = samples.shape[0]
    mse = samples.mean(axis=0)
    if np.any(~np.isfinite(mse)) or np.any(mse <= 0.0):
        raise DegenerateFit("mean squared errors must be finite and positive")
    if r > 1:
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(r)
    else:
        stderr = np.zeros_like(mse)

    log_a = np.log(abscissa)
    slope = _ols_slope(log_a, np.log(mse))

    if r > 1 and n_boot > 0:
        rng = np.random.default_rng(seed)
        boot = np.empty(n_boot)
        for b in range(n_boot):
            rows = rng.integers(0, r, size=r)
            m = samples[rows].mean(axis=0)
            m = np.maximum(m, 1e-300)
            boot[b] = _ols_slope(log_a, np.log(m))
        lo, hi = np.percentile(boot, [2.5, 97.5])
    else:
        lo = hi = slope
    return RateSeries(abscissa=abscissa, mse=mse, stderr=stderr,
                      samples=samples if r > 1 else None,
                      slope=float(slope), slope_ci=(float(lo), float(hi)))


def _ols_slope(x, y):
    xm = x - x.mean()
    denom = float(np.dot(xm, xm))
    if denom == 0.0:
        raise DegenerateFit("abscissa values do not spread in log scale")
    return float(np.dot(xm, y - y.mean()) / denom)


def ellipticity_monitor(spec, trajectory, self_exclusion=False, workers=1):
    """Minimum-over-particles field ellipticity at each trajectory snapshot.

    Re-evaluates the empirical diffusion field at every stored snapshot and
    returns the per-snapshot min over particles of its smallest eigenvalue
    (the stored trajectory column holds the same quantity computed inline;
    this recomputation is the independent path used by checks).
    """
    vals = np.empty(len(trajectory.times))
    for i, states in enumerate(trajectory.states):
        n = states.shape[0]
        exclude = np.arange(n, dtype=np.int64) if self_exclusion else None
        a, _, _ = pair_fields(spec, states, states, exclude=exclude,
                              workers=workers)
        vals[i] = float(np.min(min_eig_batch(a)))
    return vals


def monitor_against_bound(times, observed, flow, slack=0.9, t_min=0.05):
    """Compare observed ellipticity against slack * oracle bound for all
    snapshot times >= t_min; returns (ok, margins) where margins are
    observed - slack * bound at the checked snapshots."""
    times = np.asarray(times, dtype=float)
    observed = np.asarray(observed, dtype=float)
    mask = times >= t_min - 1e-12
    bounds = np.array([flow.ellipticity_lower_bound(t) for t in times[mask]])
    margins = observed[mask] - slack * bounds
    return bool(np.all(margins >= 0.0)), margins
