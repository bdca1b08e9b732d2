"""Collision kernel families for the homogeneous Landau equation.

All families share the radial form

    a(z) = K(z) * (|z|^2 I - z z^T),        b(z) = -(d - 1) * K(z) * z,

where ``K`` is a scalar radial factor.  The identity for ``b`` (the row-wise
divergence of ``a``) holds for every radial factor because the derivative term
of K cancels against the projector: only K itself survives.  The families are

* ``maxwell``         K = 1
* ``pseudo_maxwell``  K = kappa(|z|^2), a C^2 ramp from 1 down to lambda_floor
* ``soft``            K = |z|^gamma, gamma in [-3, 0)
* ``soft_cutoff``     K = kappa_eps(|z|)^gamma with |z| regularized below eps

``a(z)`` is the orthogonal projector onto the hyperplane normal to ``z``
scaled by K|z|^2: PSD with a one-dimensional kernel along ``z``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularRelativeVelocity

FAMILIES = ("maxwell", "pseudo_maxwell", "soft", "soft_cutoff")

#: Relative velocities with |z| below this are floored (and counted) by the
#: batched accumulators for the soft family; pointwise evaluation instead
#: returns the exact limit when it exists and raises when it does not.
DELTA_FLOOR = 1e-12

_PSEUDO_LAMBDA = 0.5
_PSEUDO_R0 = 1.0
_PSEUDO_R1 = 4.0


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one collision kernel.

    Use the family constructors (:meth:`maxwell`, :meth:`pseudo_maxwell`,
    :meth:`soft`, :meth:`soft_cutoff`) rather than filling fields by hand.
    """

    dim: int
    family: str
    gamma: float = 0.0
    eps: float = 0.0
    lambda_floor: float = _PSEUDO_LAMBDA
    r0: float = _PSEUDO_R0
    r1: float = _PSEUDO_R1

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError("kernel dimension must be >= 2, got %d" % self.dim)
        if self.family not in FAMILIES:
            raise DomainError(
                "unknown kernel family %r (expected one of %s)"
                % (self.family, ", ".join(FAMILIES))
            )
        if self.family in ("soft", "soft_cutoff"):
            if not (-3.0 <= self.gamma < 0.0):
                raise DomainError(
                    "soft exponent gamma must lie in [-3, 0), got %g" % self.gamma
                )
        if self.family == "soft_cutoff" and not self.eps > 0.0:
            raise DomainError("cutoff scale eps must be positive, got %g" % self.eps)
        if self.family == "pseudo_maxwell":
            if not (0.0 < self.lambda_floor <= 1.0):
                raise DomainError(
                    "lambda_floor must lie in (0, 1], got %g" % self.lambda_floor
                )
            if not (0.0 <= self.r0 < self.r1):
                raise DomainError(
                    "ramp interval needs 0 <= r0 < r1, got [%g, %g]"
                    % (self.r0, self.r1)
                )

    @classmethod
    def maxwell(cls, dim=2):
        return cls(dim=dim, family="maxwell")

    @classmethod
    def pseudo_maxwell(cls, dim=2, lambda_floor=_PSEUDO_LAMBDA,
                       r0=_PSEUDO_R0, r1=_PSEUDO_R1):
        return cls(dim=dim, family="pseudo_maxwell",
                   lambda_floor=lambda_floor, r0=r0, r1=r1)

    @classmethod
    def soft(cls, dim=2, gamma=-1.0):
        return cls(dim=dim, family="soft", gamma=gamma)

    @classmethod
    def soft_cutoff(cls, dim=2, gamma=-1.0, eps=0.1):
        return cls(dim=dim, family="soft_cutoff", gamma=gamma, eps=eps)

    @property
    def needs_floor(self):
        """Whether batched accumulation must floor tiny |z| for this family."""
        return self.family == "soft"


def _smoothstep(t):
    """C^2 quintic smoothstep: 0 -> 1 on [0, 1] with flat first and second
    derivatives at both ends."""
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def cutoff_kappa(eps, r):
    """Regularized radius: kappa_eps(r) = r for r >= eps, constant eps/2 for
    r <= eps/2, joined by a C^2 monotone quintic blend in between.

    Accepts scalars or arrays; raises DomainError for eps <= 0 or r < 0.
    """
    if not eps > 0.0:
        raise DomainError("cutoff scale eps must be positive, got %g" % eps)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise DomainError("radius must be nonnegative")
    half = 0.5 * eps
    t = np.clip((r_arr - half) / half, 0.0, 1.0)
    blend = half * (1.0 + t * t * t * (6.0 + t * (-8.0 + 3.0 * t)))
    out = np.where(r_arr >= eps, r_arr, blend)
    if np.isscalar(r) or np.ndim(r) == 0:
        return float(out)
    return out


def radial_factor(spec, r2, floor=None):
    """Scalar kernel factor K as a function of squared radius ``r2``.

    Vectorized over arrays.  For the ``soft`` family the radius is floored at
    ``floor`` when given; with ``floor=None`` the caller must keep r2 away
    from zero (this is the batched accumulators' entry point, the pointwise
    wrappers handle the origin separately).
    """
    r2 = np.asarray(r2, dtype=float)
    if spec.family == "maxwell":
        return np.ones_like(r2)
    if spec.family == "pseudo_maxwell":
        lam = spec.lambda_floor
        t = np.clip((r2 - spec.r0) / (spec.r1 - spec.r0), 0.0, 1.0)
        return lam + (1.0 - lam) * (1.0 - _smoothstep(t))
    r = np.sqrt(r2)
    if spec.family == "soft":
        if floor is not None:
            r = np.maximum(r, floor)
        kap = r
    else:
        # soft_cutoff: kappa_eps is bounded below by eps/2, no flooring needed
        kap = cutoff_kappa(spec.eps, r)
    if spec.gamma == -1.0:
        return 1.0 / kap
    if spec.gamma == -2.0:
        return 1.0 / (kap * kap)
    return kap ** spec.gamma


def _pointwise_factor(spec, z, r2, vanish_above):
    """Radial factor for a single z, resolving the origin by its limit.

    Returns (K, handled) where handled=True means the caller should return
    zeros (the limit of the full expression is 0).  Raises
    SingularRelativeVelocity when no finite limit exists.
    """
    r = math.sqrt(r2)
    if spec.family == "soft" and r < DELTA_FLOOR:
        if spec.gamma > vanish_above:
            return 0.0, True
        raise SingularRelativeVelocity(
            "soft kernel with gamma=%g has no limit at |z|=%.3e"
            % (spec.gamma, r)
        )
    return float(radial_factor(spec, r2)), False


def a_field(spec, z):
    """Diffusion kernel a(z) = K(z) (|z|^2 I - z z^T) as a (d, d) array.

    For the plain ``soft`` family, |z| < 1e-12 returns the exact limit 0 when
    gamma > -2 and raises SingularRelativeVelocity otherwise.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (spec.dim,):
        raise DomainError(
            "z has shape %s, expected (%d,)" % (z.shape, spec.dim)
        )
    r2 = float(z @ z)
    k, handled = _pointwise_factor(spec, z, r2, vanish_above=-2.0)
    if handled:
        return np.zeros((spec.dim, spec.dim))
    return k * (r2 * np.eye(spec.dim) - np.outer(z, z))


def b_field(spec, z):
    """Drift kernel b(z) = -(d-1) K(z) z as a (d,) array.

    For the plain ``soft`` family, |z| < 1e-12 returns the exact limit 0 when
    gamma > -1 and raises SingularRelativeVelocity otherwise.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (spec.dim,):
        raise DomainError(
            "z has shape %s, expected (%d,)" % (z.shape, spec.dim)
        )
    r2 = float(z @ z)
    k, handled = _pointwise_factor(spec, z, r2, vanish_above=-1.0)
    if handled:
        return np.zeros(spec.dim)
    return -(spec.dim - 1.0) * k * z
