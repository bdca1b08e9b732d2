"""Deterministic, replayable Gaussian noise from a counter-based generator.

Every random number the simulator consumes is addressed, never streamed: the
value at address (seed, replicate, particle, step, coordinate, stream) is a
pure function of that address.  This is what makes coupled experiments exact —
two systems that should share a Brownian path simply evaluate the same
addresses — and what makes trajectories bit-identical regardless of how the
work is scheduled across workers.

The generator is Philox4x32-10 evaluated vectorized in uint64 numpy ops.  The
64-bit key is derived from (seed, replicate) via splitmix64; the four counter
words are (particle, step-or-slot, coordinate, stream).  Uniforms map the top
53 bits into (0, 1) and become normals through the inverse Gaussian CDF.

Brownian increments live on a fine grid of ``fine_per_unit`` steps per unit
time; an integrator running at any coarser step count that divides it gets
increments that are exactly (bitwise) the sums of the underlying fine ones.
Refining the time step therefore refines the same Brownian path.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)

STREAM_BROWNIAN = 0
STREAM_INITIAL = 1


def splitmix64(x):
    """One splitmix64 output for the 64-bit input ``x`` (a python int)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_key(seed, replicate):
    """Mix (seed, replicate) into the two 32-bit Philox key words."""
    mixed = splitmix64(splitmix64(seed & _MASK64) ^ splitmix64(0xA5A5_0000_0000_0001 ^ (replicate & _MASK64)))
    return np.uint64(mixed & 0xFFFFFFFF), np.uint64(mixed >> 32)


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Philox4x32 block cipher on broadcastable uint64 arrays of 32-bit words.

    Returns the four output words as uint64 arrays (values < 2^32).
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _uniforms(c0, c1, c2, c3, k0, k1):
    """Open-interval (0, 1) uniforms with 53 random bits per value."""
    x0, x1, _, _ = philox4x32(c0, c1, c2, c3, k0, k1)
    top = ((x0 << _SHIFT32) | x1) >> _SHIFT11
    return (top.astype(np.float64) + 0.5) * (2.0 ** -53)


@dataclass(frozen=True)
class NoisePlan:
    """Addressable noise for one (seed, replicate) pair.

    ``fine_per_unit`` fixes the authoritative Brownian grid: M fine steps per
    unit of time, each with an N(0, 1/M) increment per particle-coordinate.
    """

    seed: int
    replicate: int
    fine_per_unit: int

    def __post_init__(self):
        if self.fine_per_unit < 1:
            raise ValueError("fine_per_unit must be >= 1")

    @cached_property
    def _key(self):
        return derive_key(self.seed, self.replicate)

    def _draw(self, particle_ids, row_vals, dim, stream):
        """Uniforms at counter block (ids x row_vals x coords), shape
        (len(row_vals), len(ids), dim)."""
        k0, k1 = self._key
        c0 = np.asarray(particle_ids, dtype=np.uint64)[None, :, None]
        c1 = np.asarray(row_vals, dtype=np.uint64)[:, None, None]
        c2 = np.arange(dim, dtype=np.uint64)[None, None, :]
        c3 = np.uint64(stream)
        return _uniforms(c0, c1, c2, c3, k0, k1)

    def fine_increments(self, fine_lo, fine_hi, particle_ids, dim):
        """Brownian increments of the fine steps [fine_lo, fine_hi), shape
        (fine_hi - fine_lo, n, dim); each row is N(0, 1/fine_per_unit) iid."""
        rows = np.arange(fine_lo, fine_hi, dtype=np.uint64)
        u = self._draw(particle_ids, rows, dim, STREAM_BROWNIAN)
        z = ndtri(u)
        return np.sqrt(1.0 / self.fine_per_unit) * z

    def coarse_increment(self, step, steps_per_unit, particle_ids, dim):
        """Brownian increment of coarse step ``step`` on a grid of
        ``steps_per_unit`` steps per unit time, shape (n, dim).

        The coarse grid must subdivide the fine one; the returned increment
        is exactly the sum of the corresponding fine increments.
        """
        if self.fine_per_unit % steps_per_unit != 0:
            raise ValueError(
                "coarse grid (%d/unit) does not divide the fine grid (%d/unit)"
                % (steps_per_unit, self.fine_per_unit)
            )
        r = self.fine_per_unit // steps_per_unit
        fines = self.fine_increments(step * r, (step + 1) * r, particle_ids, dim)
        return fines.sum(axis=0)

    def initial_normals(self, particle_ids, dim, slot=0):
        """Standard normals for initial-state sampling, shape (n, dim)."""
        u = self._draw(particle_ids, [slot], dim, STREAM_INITIAL)
        return ndtri(u)[0]

    def initial_uniforms(self, particle_ids, dim, slot=1):
        """Uniforms in (0, 1) for initial-state sampling, shape (n, dim)."""
        return self._draw(particle_ids, [slot], dim, STREAM_INITIAL)[0]
