"""Particle ensembles, initial laws, and empirical-measure kernel fields.

An :class:`Ensemble` is an immutable snapshot of n particle velocities in
R^d together with its provenance (seed, replicate, time).  Initial laws are
products of one-dimensional components — a Gaussian or a symmetric two-point
Gaussian mixture per coordinate — sampled through the addressable noise plan
so that draws are reproducible and exchangeable by construction.

``empirical_a`` / ``empirical_b`` evaluate the kernel fields of the uniform
empirical measure of an ensemble at arbitrary points, optionally excluding
one source index per target (the self-exclusion used for soft potentials).
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from ._backend import pair_fields
from .errors import DomainError
from .noise import NoisePlan


@dataclass(frozen=True)
class Gaussian1d:
    """One-dimensional Gaussian component N(mean, std^2)."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.std >= 0.0:
            raise DomainError("std must be nonnegative, got %g" % self.std)

    @property
    def component_mean(self):
        return self.mean

    @property
    def second_moment(self):
        return self.mean ** 2 + self.std ** 2

    def sample(self, normals, uniforms):
        return self.mean + self.std * normals


@dataclass(frozen=True)
class Mixture1d:
    """Symmetric two-point Gaussian mixture (N(-c, s^2) + N(+c, s^2)) / 2."""

    center: float
    std: float

    def __post_init__(self):
        if not self.std >= 0.0:
            raise DomainError("std must be nonnegative, got %g" % self.std)

    @property
    def component_mean(self):
        return 0.0

    @property
    def second_moment(self):
        return self.center ** 2 + self.std ** 2

    def sample(self, normals, uniforms):
        signs = np.where(uniforms < 0.5, -1.0, 1.0)
        return signs * self.center + self.std * normals


Component = Union[Gaussian1d, Mixture1d]


@dataclass(frozen=True)
class InitialLaw:
    """Product law on R^d with one independent component per coordinate."""

    components: Tuple[Component, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise DomainError("initial law needs at least one coordinate")

    @property
    def dim(self):
        return len(self.components)

    def mean(self):
        return np.array([c.component_mean for c in self.components])

    def second_moment_matrix(self):
        """E[x x^T]: diagonal second moments, products of means off-diagonal."""
        mu = self.mean()
        m2 = np.outer(mu, mu)
        for j, c in enumerate(self.components):
            m2[j, j] = c.second_moment
        return m2

    def energy(self):
        """E |x|^2 = trace of the second-moment matrix."""
        return float(sum(c.second_moment for c in self.components))

    def sample(self, plan, n, particle_ids=None):
        """Draw n particles, shape (n, d), addressed by particle id."""
        if particle_ids is None:
            particle_ids = np.arange(n)
        d = self.dim
        normals = plan.initial_normals(particle_ids, d, slot=0)
        uniforms = plan.initial_uniforms(particle_ids, d, slot=1)
        x = np.empty((len(particle_ids), d))
        for j, c in enumerate(self.components):
            x[:, j] = c.sample(normals[:, j], uniforms[:, j])
        return x


#: Named initial laws addressable from config files.
PRESETS = {
    "paper_sec5": InitialLaw(
        components=(Gaussian1d(0.0, 0.1), Mixture1d(1.0, 0.1)),
    ),
}


def preset_law(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(
            "unknown initial-law preset %r (known: %s)"
            % (name, ", ".join(sorted(PRESETS)))
        ) from None


@dataclass(frozen=True)
class Ensemble:
    """Immutable particle snapshot with provenance."""

    states: np.ndarray  # (n, d), float64, read-only
    time: float
    step_index: int
    seed: int
    replicate: int

    def __post_init__(self):
        states = np.ascontiguousarray(self.states, dtype=np.float64)
        if states.ndim != 2:
            raise DomainError("states must be an (n, d) array")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def n(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]


def sample_initial(law, n, seed, replicate=0):
    """Draw the time-zero ensemble for (seed, replicate)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    plan = NoisePlan(seed=seed, replicate=replicate, fine_per_unit=1)
    states = law.sample(plan, n)
    return Ensemble(states=states, time=0.0, step_index=0,
                    seed=seed, replicate=replicate)


def momentum(states):
    """Empirical mean velocity, shape (d,)."""
    return np.mean(states, axis=0)


def energy(states):
    """Empirical mean squared speed (a conserved quantity of the dynamics)."""
    return float(np.mean(np.sum(states * states, axis=1)))


def second_moment_matrix(states):
    """Empirical uncentered second-moment matrix (1/n) X^T X, shape (d, d)."""
    n = states.shape[0]
    return states.T @ states / n


@dataclass
class FloorCounter:
    """Running count of soft-kernel pairs whose |z| hit the floor."""

    hits: int = 0
    pairs: int = 0

    def add(self, hits, pairs):
        self.hits += int(hits)
        self.pairs += int(pairs)

    @property
    def fraction(self):
        return self.hits / self.pairs if self.pairs else 0.0


def _as_states(ens):
    return ens.states if isinstance(ens, Ensemble) else np.asarray(ens, float)


def empirical_a(spec, x, ens, exclude=None, counters=None):
    """Kernel diffusion matrix of the empirical measure at point x.

    ``exclude`` is a source index to leave out (or None to include all).
    ``counters`` is an optional FloorCounter accumulating soft-floor events.
    """
    states = _as_states(ens)
    ex = None if exclude is None else np.array([exclude], dtype=np.int64)
    a, _, hits = pair_fields(spec, x[None, :], states, exclude=ex)
    if counters is not None:
        counters.add(hits, states.shape[0] - (0 if exclude is None else 1))
    return a[0]


def empirical_b(spec, x, ens, exclude=None, counters=None):
    """Kernel drift vector of the empirical measure at point x."""
    states = _as_states(ens)
    ex = None if exclude is None else np.array([exclude], dtype=np.int64)
    _, b, hits = pair_fields(spec, x[None, :], states, exclude=ex)
    if counters is not None:
        counters.add(hits, states.shape[0] - (0 if exclude is None else 1))
    return b[0]
