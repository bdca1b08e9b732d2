"""Pure NumPy fallback for the pair-interaction accumulator.

Mirrors the compiled kernel's contract (see ``_pairkern.pyx``): raw sums of
K(|z|)(|z|^2 I - z z^T) and K(|z|) z over sources, with optional one-index
exclusion per target and floored-|z| counting for the soft family.

Targets are processed in fixed chunks so the reduction order — numpy's
pairwise summation within each chunk — is deterministic for a given problem
size.  It is not bit-identical to the compiled backend's sequential Kahan
order; the two agree to ~1e-10 relative, which the backend tests pin.
"""

import numpy as np

_CHUNK = 256

_SOFT = 2
_CUTOFF = 3


def _radial_factor_array(family, r2, gamma, eps, lam, r0, r1, delta_floor):
    """Kernel factor K per pair; returns (K, floored_mask_or_None)."""
    if family == 0:
        return np.ones_like(r2), None
    if family == 1:
        t = np.clip((r2 - r0) / (r1 - r0), 0.0, 1.0)
        ramp = 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        return lam + (1.0 - lam) * ramp, None
    r = np.sqrt(r2)
    if family == _SOFT:
        floored = r < delta_floor
        kap = np.maximum(r, delta_floor)
    else:
        floored = None
        half = 0.5 * eps
        t = np.clip((r - half) / half, 0.0, 1.0)
        blend = half * (1.0 + t * t * t * (6.0 + t * (-8.0 + 3.0 * t)))
        kap = np.where(r >= eps, r, blend)
    if gamma == -1.0:
        return 1.0 / kap, floored
    if gamma == -2.0:
        return 1.0 / (kap * kap), floored
    return kap ** gamma, floored


def pair_sums(targets, states, family, gamma, eps, lam, r0, r1,
              delta_floor, exclude, workers=1):
    """Raw pair sums; same contract as the compiled ``pair_sums``.

    ``workers`` is accepted for interface parity and ignored (numpy kernels
    run single-threaded here).
    """
    m, d = targets.shape
    n = states.shape[0]
    a_out = np.empty((m, d, d))
    b_out = np.empty((m, d))
    hits = 0
    diag = np.arange(d)
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        z = targets[lo:hi, None, :] - states[None, :, :]
        r2 = np.einsum("cnd,cnd->cn", z, z)
        weight, floored = _radial_factor_array(
            family, r2, gamma, eps, lam, r0, r1, delta_floor
        )
        ex = exclude[lo:hi]
        rows = np.nonzero(ex >= 0)[0]
        if rows.size:
            weight[rows, ex[rows]] = 0.0
            if floored is not None:
                floored[rows, ex[rows]] = False
        if floored is not None:
            hits += int(np.count_nonzero(floored))
        scatter = np.einsum("cn,cni,cnj->cij", weight, z, z)
        trace_term = np.einsum("cn,cn->c", weight, r2)
        a_chunk = -scatter
        a_chunk[:, diag, diag] += trace_term[:, None]
        a_out[lo:hi] = a_chunk
        b_out[lo:hi] = np.einsum("cn,cnd->cd", weight, z)
    return a_out, b_out, hits
