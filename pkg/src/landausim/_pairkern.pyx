# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled pair-interaction accumulator.

For each target x_i this sums, over all source particles k (optionally
skipping one index), the radial-kernel contributions

    A_i += K(|z|) (|z|^2 I - z z^T),    B_i += K(|z|) z,      z = x_i - X_k.

Sums run in fixed ascending source order with Kahan compensation, so results
are bit-identical for any worker count (each target row is one sequential
reduction; rows are independent).  Normalization (1/m and the -(d-1) drift
factor) is applied by the caller.

Family codes: 0 maxwell, 1 pseudo_maxwell, 2 soft, 3 soft_cutoff.  The soft
family floors |z| at ``delta_floor`` and reports the number of floored pairs
per target.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport pow, sqrt

cnp.import_array()

DEF MAXD = 6
DEF MAXD_UPPER = 21  # MAXD * (MAXD + 1) / 2 entries in an upper triangle


cdef inline double _radial_factor(int family, double r2, double gamma,
                                  double eps, double lam, double r0, double r1,
                                  double delta_floor, long* hits) noexcept nogil:
    cdef double r, t, kap
    if family == 0:
        return 1.0
    if family == 1:
        t = (r2 - r0) / (r1 - r0)
        if t <= 0.0:
            return 1.0
        if t >= 1.0:
            return lam
        return lam + (1.0 - lam) * (1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t)))
    r = sqrt(r2)
    if family == 2:
        if r < delta_floor:
            hits[0] += 1
            r = delta_floor
        kap = r
    else:
        # soft_cutoff: regularized radius, C^2 blend on [eps/2, eps]
        if r >= eps:
            kap = r
        elif r <= 0.5 * eps:
            kap = 0.5 * eps
        else:
            t = (r - 0.5 * eps) / (0.5 * eps)
            kap = 0.5 * eps * (1.0 + t * t * t * (6.0 + t * (-8.0 + 3.0 * t)))
    if gamma == -1.0:
        return 1.0 / kap
    if gamma == -2.0:
        return 1.0 / (kap * kap)
    return pow(kap, gamma)


cdef void _row_d2(double tx0, double tx1, const double[:, ::1] states, long skip,
                  int family, double gamma, double eps, double lam,
                  double r0, double r1, double delta_floor,
                  double* out_a, double* out_b, long* hits) noexcept nogil:
    cdef long n = states.shape[0]
    cdef long k
    cdef double dz0, dz1, r2, kf, term, y, t
    cdef double s11 = 0.0, c11 = 0.0
    cdef double s12 = 0.0, c12 = 0.0
    cdef double s22 = 0.0, c22 = 0.0
    cdef double sb0 = 0.0, cb0 = 0.0
    cdef double sb1 = 0.0, cb1 = 0.0
    for k in range(n):
        if k == skip:
            continue
        dz0 = tx0 - states[k, 0]
        dz1 = tx1 - states[k, 1]
        r2 = dz0 * dz0 + dz1 * dz1
        kf = _radial_factor(family, r2, gamma, eps, lam, r0, r1, delta_floor, hits)
        # a00 contribution K*(r2 - dz0^2) == K*dz1^2 (formed cancellation-free)
        term = kf * (dz1 * dz1)
        y = term - c11; t = s11 + y; c11 = (t - s11) - y; s11 = t
        term = -kf * (dz0 * dz1)
        y = term - c12; t = s12 + y; c12 = (t - s12) - y; s12 = t
        term = kf * (dz0 * dz0)
        y = term - c22; t = s22 + y; c22 = (t - s22) - y; s22 = t
        term = kf * dz0
        y = term - cb0; t = sb0 + y; cb0 = (t - sb0) - y; sb0 = t
        term = kf * dz1
        y = term - cb1; t = sb1 + y; cb1 = (t - sb1) - y; sb1 = t
    out_a[0] = s11
    out_a[1] = s12
    out_a[2] = s12
    out_a[3] = s22
    out_b[0] = sb0
    out_b[1] = sb1


cdef void _row_generic(const double* tx, const double[:, ::1] states, long skip,
                       int family, double gamma, double eps, double lam,
                       double r0, double r1, double delta_floor,
                       double* out_a, double* out_b, long* hits) noexcept nogil:
    cdef long n = states.shape[0]
    cdef long d = states.shape[1]
    cdef long k, i, j, idx
    cdef long nup = (d * (d + 1)) // 2
    cdef double dz[MAXD]
    cdef double s_up[MAXD_UPPER]
    cdef double c_up[MAXD_UPPER]
    cdef double s_b[MAXD]
    cdef double c_b[MAXD]
    cdef double s_tr = 0.0, c_tr = 0.0
    cdef double r2, kf, term, y, t
    for idx in range(nup):
        s_up[idx] = 0.0
        c_up[idx] = 0.0
    for i in range(d):
        s_b[i] = 0.0
        c_b[i] = 0.0
    for k in range(n):
        if k == skip:
            continue
        r2 = 0.0
        for i in range(d):
            dz[i] = tx[i] - states[k, i]
            r2 += dz[i] * dz[i]
        kf = _radial_factor(family, r2, gamma, eps, lam, r0, r1, delta_floor, hits)
        term = kf * r2
        y = term - c_tr; t = s_tr + y; c_tr = (t - s_tr) - y; s_tr = t
        idx = 0
        for i in range(d):
            for j in range(i, d):
                term = kf * (dz[i] * dz[j])
                y = term - c_up[idx]; t = s_up[idx] + y
                c_up[idx] = (t - s_up[idx]) - y; s_up[idx] = t
                idx = idx + 1
            term = kf * dz[i]
            y = term - c_b[i]; t = s_b[i] + y; c_b[i] = (t - s_b[i]) - y; s_b[i] = t
    idx = 0
    for i in range(d):
        for j in range(i, d):
            if i == j:
                out_a[i * d + i] = s_tr - s_up[idx]
            else:
                out_a[i * d + j] = -s_up[idx]
                out_a[j * d + i] = -s_up[idx]
            idx = idx + 1
        out_b[i] = s_b[i]


def pair_sums(const double[:, ::1] targets, const double[:, ::1] states, int family,
              double gamma, double eps, double lam, double r0, double r1,
              double delta_floor, long[::1] exclude, int workers=1):
    """Raw Kahan-compensated pair sums.

    Returns (a_sums (m,d,d), b_sums (m,d), floor_hits int) where
    a_sums[i] = sum_k K (|z|^2 I - zz^T) and b_sums[i] = sum_k K z over
    sources k != exclude[i] (exclude[i] = -1 keeps all sources).
    """
    cdef long m = targets.shape[0]
    cdef long d = targets.shape[1]
    if states.shape[1] != d:
        raise ValueError("targets and states disagree on dimension")
    if exclude.shape[0] != m:
        raise ValueError("exclude must have one entry per target")
    if d > MAXD:
        raise ValueError("compiled kernel supports dim <= %d" % MAXD)

    a_np = np.empty((m, d, d), dtype=np.float64)
    b_np = np.empty((m, d), dtype=np.float64)
    hits_np = np.zeros(m, dtype=np.int64)
    cdef double[:, :, ::1] a = a_np
    cdef double[:, ::1] b = b_np
    cdef long[::1] hits = hits_np
    cdef long i
    cdef int nthreads = workers if workers > 0 else 1

    if d == 2:
        if nthreads > 1:
            for i in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
                _row_d2(targets[i, 0], targets[i, 1], states, exclude[i],
                        family, gamma, eps, lam, r0, r1, delta_floor,
                        &a[i, 0, 0], &b[i, 0], &hits[i])
        else:
            with nogil:
                for i in range(m):
                    _row_d2(targets[i, 0], targets[i, 1], states, exclude[i],
                            family, gamma, eps, lam, r0, r1, delta_floor,
                            &a[i, 0, 0], &b[i, 0], &hits[i])
    else:
        if nthreads > 1:
            for i in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
                _row_generic(&targets[i, 0], states, exclude[i],
                             family, gamma, eps, lam, r0, r1, delta_floor,
                             &a[i, 0, 0], &b[i, 0], &hits[i])
        else:
            with nogil:
                for i in range(m):
                    _row_generic(&targets[i, 0], states, exclude[i],
                                 family, gamma, eps, lam, r0, r1, delta_floor,
                                 &a[i, 0, 0], &b[i, 0], &hits[i])

    return a_np, b_np, int(hits_np.sum())
