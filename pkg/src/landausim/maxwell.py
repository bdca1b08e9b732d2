"""Closed-form reference quantities for Maxwell molecules (constant radial
factor K = 1) started from a centered law.

For a centered law the kernel fields of the true solution P_t close at the
level of the second-moment matrix M(t) = E[X_t X_t^T]:

    a(x, P_t) = a(x) + energy * I - M(t),       b(x, P_t) = -(d - 1) x,

and M(t) itself solves a linear ODE with the explicit solution

    M(t) = M_inf + (M0 - M_inf) exp(-2 d t),    M_inf = (energy / d) * I.

Everything in this module evaluates those closed forms; no ODE stepping
happens at runtime (tests cross-check against an independent integrator).
"""

from dataclasses import dataclass

import numpy as np

from . import spd
from .errors import DomainError, NotCentered

#: Largest |mean| treated as centered.
CENTERED_TOL = 1e-12


@dataclass(frozen=True)
class MomentFlow:
    """Second-moment trajectory of the Maxwell dynamics from M0 = E[X_0 X_0^T]."""

    m0: np.ndarray  # (d, d) initial second-moment matrix
    dim: int
    energy: float   # trace(M0), conserved

    @classmethod
    def from_matrix(cls, m0):
        m0 = spd.clamp_psd(np.asarray(m0, dtype=float))
        d = m0.shape[0]
        if d < 2:
            raise DomainError("flow needs dimension >= 2")
        m0.setflags(write=False)
        return cls(m0=m0, dim=d, energy=float(np.trace(m0)))

    @classmethod
    def from_initial_law(cls, law):
        """Build the flow from a centered initial law; raises NotCentered
        when |mean| exceeds 1e-12."""
        mu = law.mean()
        if float(np.linalg.norm(mu)) > CENTERED_TOL:
            raise NotCentered(
                "initial law has mean %s; the closed forms require a centered law"
                % (mu,)
            )
        return cls.from_matrix(law.second_moment_matrix())

    @property
    def m_inf(self):
        """Isotropic equilibrium second-moment matrix (energy / d) I."""
        return (self.energy / self.dim) * np.eye(self.dim)

    def covariance(self, t):
        """M(t) in closed form; accepts a scalar time t >= 0."""
        if t < 0.0:
            raise DomainError("time must be nonnegative")
        decay = np.exp(-2.0 * self.dim * t)
        return self.m_inf + (self.m0 - self.m_inf) * decay

    def ellipticity_lower_bound(self, t):
        """Exact lower bound on eigenvalues of a(x, P_t): attained at x = 0.

        lambda(t) = lam0 * exp(-2 d t) + lam1 * (1 - exp(-2 d t)) with
        lam0 = min eig(energy * I - M0) and lam1 = energy * (d - 1) / d.
        """
        if t < 0.0:
            raise DomainError("time must be nonnegative")
        lam0 = self.energy - float(spd.eigh_sym(self.m0)[0][-1])
        lam1 = self.energy * (self.dim - 1.0) / self.dim
        decay = float(np.exp(-2.0 * self.dim * t))
        return lam0 * decay + lam1 * (1.0 - decay)

    def field_offset(self, t):
        """The additive part of the diffusion field: energy * I - M(t)."""
        return self.energy * np.eye(self.dim) - self.covariance(t)

    def mckean_coefficients(self, t, x):
        """Exact-solution coefficients at one point: (a, b) with
        a = a(x) + energy*I - M(t) and b = -(d-1) x."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError("x has shape %s, expected (%d,)" % (x.shape, self.dim))
        r2 = float(x @ x)
        a = r2 * np.eye(self.dim) - np.outer(x, x) + self.field_offset(t)
        b = -(self.dim - 1.0) * x
        return a, b

    def mckean_coefficients_batch(self, t, states):
        """Vectorized coefficients for an (n, d) state array: returns
        a (n, d, d) and b (n, d)."""
        states = np.asarray(states, dtype=float)
        n, d = states.shape
        if d != self.dim:
            raise DomainError("states have dimension %d, expected %d" % (d, self.dim))
        r2 = np.sum(states * states, axis=1)
        a = -states[:, :, None] * states[:, None, :]
        idx = np.arange(d)
        a[:, idx, idx] += r2[:, None]
        a += self.field_offset(t)[None, :, :]
        b = -(d - 1.0) * states
        return a, b

    def equilibrium_variance(self):
        """Per-coordinate variance of the Gaussian equilibrium, energy / d."""
        return self.energy / self.dim
