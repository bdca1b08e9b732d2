"""Symmetric positive semidefinite matrix operations.

Everything here treats its input as symmetric (the upper triangle is
authoritative) and tolerates the small negative eigenvalues that show up when
a PSD matrix is assembled in floating point.  Eigenvalues in the band
``[-tol_psd * opnorm, 0)`` are clamped to zero; anything below that band is a
genuine violation and raises :class:`~landausim.errors.NotPsd`.

The eigensolver is self-contained: a closed form for d <= 2 and cyclic Jacobi
sweeps for d >= 3 (converged to 1e-12 relative off-diagonal mass).  LAPACK is
deliberately not used here so that the square-root path feeding the stochastic
integrator is fully under local control; ``numpy.linalg.eigh`` serves as an
independent oracle in the test suite only.
"""

import math

import numpy as np

from .errors import NotPsd, Singular

TOL_PSD = 1e-12

_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


def symmetrize(a):
    """Return the symmetric part of ``a`` with the upper triangle authoritative.

    The (i, j) entry of the result is a[min(i,j), max(i,j)].
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (a.shape,))
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def _eigh_2x2(a):
    """Closed-form eigendecomposition of a symmetric 2x2 matrix.

    Returns (w, v) with eigenvalues ascending and v's columns the
    corresponding unit eigenvectors.  The branch choice avoids cancellation:
    the eigenvector component that would subtract two nearly equal numbers is
    never formed.
    """
    p, q, s = a[0, 0], a[0, 1], a[1, 1]
    half_diff = 0.5 * (p - s)
    h = math.hypot(half_diff, q)
    mid = 0.5 * (p + s)
    w = np.array([mid - h, mid + h])
    if h == 0.0:
        return w, np.eye(2)
    if q == 0.0:
        v = np.eye(2) if p <= s else np.array([[0.0, 1.0], [1.0, 0.0]])
        return w, v
    # Largest eigenvalue's eigenvector; pick the expression whose second
    # component adds magnitudes instead of cancelling.
    if p >= s:
        v2 = np.array([h + half_diff, q])
    else:
        v2 = np.array([q, h - half_diff])
    v2 /= math.hypot(v2[0], v2[1])
    v = np.empty((2, 2))
    v[:, 1] = v2
    v[0, 0] = -v2[1]
    v[1, 0] = v2[0]
    return w, v


def _eigh_jacobi(a):
    """Cyclic Jacobi eigendecomposition for symmetric matrices, d >= 3."""
    d = a.shape[0]
    m = a.copy()
    v = np.eye(d)
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return np.zeros(d), v
    target = _JACOBI_TOL * scale
    for _ in range(_JACOBI_MAX_SWEEPS):
        # measure the off-diagonal mass directly -- subtracting the diagonal
        # part from the full norm cancels catastrophically near convergence
        strict_upper = m[np.triu_indices(d, k=1)]
        off = math.sqrt(2.0) * np.linalg.norm(strict_upper)
        if off <= target:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = m[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (m[q, q] - m[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                m = rot.T @ m @ rot
                v = v @ rot
                m[p, q] = m[q, p] = 0.0
    w = np.diag(m).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh_sym(a):
    """Eigendecomposition of a symmetric matrix; eigenvalues ascending."""
    a = symmetrize(a)
    d = a.shape[0]
    if d == 1:
        return a[0, 0] * np.ones(1), np.eye(1)
    # Rescale by an exact power of two so the largest entry sits near 1.
    # Subnormal entries break the closed-form eigenvector normalisation
    # (division quantises to the subnormal grid), and huge entries can
    # overflow intermediates; power-of-two scaling fixes both without
    # changing a single bit of the result for ordinary inputs.
    m = float(np.max(np.abs(a)))
    if m == 0.0:
        return np.zeros(d), np.eye(d)
    exp = math.frexp(m)[1] if math.isfinite(m) else 0
    if exp != 0:
        a = np.ldexp(a, -exp)
    w, v = _eigh_2x2(a) if d == 2 else _eigh_jacobi(a)
    if exp != 0:
        w = np.ldexp(w, exp)
    return w, v


def opnorm(a):
    """Spectral norm (largest absolute eigenvalue) of a symmetric matrix."""
    w, _ = eigh_sym(a)
    return float(np.max(np.abs(w))) if w.size else 0.0


def min_eig(a):
    """Smallest eigenvalue of a symmetric matrix."""
    w, _ = eigh_sym(a)
    return float(w[0])


def _validated_eigs(a, tol):
    """Eigendecomposition plus the PSD clamp shared by sqrt / cholesky."""
    w, v = eigh_sym(symmetrize(a))
    norm = float(np.max(np.abs(w))) if w.size else 0.0
    floor = -tol * max(norm, 1.0e-300)
    if w[0] < floor:
        raise NotPsd(
            "matrix has eigenvalue %.6e below the PSD tolerance band "
            "(opnorm %.6e, tol %.1e)" % (w[0], norm, tol)
        )
    return np.maximum(w, 0.0), v


def clamp_psd(a, tol=TOL_PSD):
    """Project a nearly-PSD symmetric matrix onto the PSD cone.

    Eigenvalues in [-tol*opnorm, 0) are clamped to zero; anything lower raises
    NotPsd.  Inputs that are already PSD are returned symmetrized but otherwise
    untouched (no eigenvector round trip).
    """
    a = symmetrize(a)
    w, v = eigh_sym(a)
    norm = float(np.max(np.abs(w))) if w.size else 0.0
    if w[0] >= 0.0:
        return a
    if w[0] < -tol * max(norm, 1.0e-300):
        raise NotPsd(
            "matrix has eigenvalue %.6e below the PSD tolerance band "
            "(opnorm %.6e, tol %.1e)" % (w[0], norm, tol)
        )
    w = np.maximum(w, 0.0)
    return (v * w) @ v.T


def sym_sqrt(a, tol=TOL_PSD):
    """Symmetric PSD square root: the unique PSD R with R @ R = clamp_psd(a)."""
    w, v = _validated_eigs(a, tol)
    return (v * np.sqrt(w)) @ v.T


def cholesky_psd(a, tol=TOL_PSD):
    """Lower-triangular L with L @ L.T == clamp_psd(a).

    Semidefinite input is handled by zero-column continuation: when a pivot
    underflows the PSD tolerance the whole column is zeroed and factorization
    continues, so rank-deficient matrices factor without pivot permutations.
    """
    a = clamp_psd(a, tol)
    d = a.shape[0]
    m = a.copy()
    low = np.zeros((d, d))
    scale = float(np.max(np.diag(a))) if d else 0.0
    pivot_floor = tol * max(scale, 1.0e-300)
    for j in range(d):
        pivot = m[j, j]
        if pivot <= pivot_floor:
            continue
        ljj = math.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < d:
            col = m[j + 1 :, j] / ljj
            low[j + 1 :, j] = col
            m[j + 1 :, j + 1 :] -= np.outer(col, col)
    return low


def inv_opnorm(a, tol=TOL_PSD):
    """Spectral norm of the inverse of a symmetric PSD matrix.

    Raises Singular when the matrix is singular to working precision
    (smallest eigenvalue <= tol * opnorm).
    """
    w, _ = _validated_eigs(a, tol)
    norm = float(w[-1])
    if w[0] <= tol * max(norm, 1.0e-300):
        raise Singular(
            "matrix is singular to working precision (min eig %.6e)" % w[0]
        )
    return 1.0 / float(w[0])
