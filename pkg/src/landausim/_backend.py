"""Backend selection for the pair-interaction accumulator.

At import time the compiled Cython kernel is preferred; if it is missing
(no compiler at install time) the pure NumPy implementation takes over.
Set ``LANDAUSIM_BACKEND=pure`` to force the fallback, or
``LANDAUSIM_BACKEND=compiled`` to insist on the extension (ImportError if it
is not built).

Both backends return raw sums; this module applies the shared normalization
(divide by the source count, scale the drift by -(d-1)) so the scaling
arithmetic is identical whichever backend ran.
"""

import os

import numpy as np

from . import _pairkern_py
from .errors import DomainError
from .kernels import DELTA_FLOOR

_FAMILY_CODES = {"maxwell": 0, "pseudo_maxwell": 1, "soft": 2, "soft_cutoff": 3}

_COMPILED_MAX_DIM = 6

_forced = os.environ.get("LANDAUSIM_BACKEND", "").strip().lower()

_compiled = None
if _forced not in ("pure", "python"):
    try:
        from . import _pairkern as _compiled
    except ImportError:
        _compiled = None
if _forced == "compiled" and _compiled is None:
    raise ImportError(
        "LANDAUSIM_BACKEND=compiled but the extension module is not built"
    )

#: Name of the backend selected at import: "compiled" or "pure".
BACKEND = "compiled" if _compiled is not None else "pure"


def compiled_available():
    return _compiled is not None


def _normalize_exclude(exclude, m, n):
    if exclude is None:
        return np.full(m, -1, dtype=np.int64)
    ex = np.ascontiguousarray(exclude, dtype=np.int64)
    if ex.shape != (m,):
        raise DomainError("exclude must have shape (%d,)" % m)
    if np.any(ex >= n) or np.any(ex < -1):
        raise DomainError("exclude entries must be -1 or valid source indices")
    return ex


def pair_fields(spec, targets, states, exclude=None, workers=1, impl=None):
    """Empirical-measure kernel fields at each target.

    Returns ``(a, b, floor_hits)`` where ``a[i]`` / ``b[i]`` are the kernel
    diffusion matrix and drift vector of target i against the empirical
    measure of ``states`` (uniform weights, excluding ``exclude[i]`` when
    >= 0), and ``floor_hits`` counts soft-family pairs whose |z| was floored.

    ``impl`` overrides backend selection: one of None (auto), "compiled",
    "pure".
    """
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    states = np.ascontiguousarray(states, dtype=np.float64)
    if targets.ndim != 2 or states.ndim != 2:
        raise DomainError("targets and states must be (m, d) and (n, d) arrays")
    m, d = targets.shape
    n = states.shape[0]
    if states.shape[1] != d:
        raise DomainError("targets and states disagree on dimension")
    if d != spec.dim:
        raise DomainError(
            "state dimension %d does not match kernel dimension %d" % (d, spec.dim)
        )
    ex = _normalize_exclude(exclude, m, n)

    counts = n - (ex >= 0).astype(np.int64)
    if np.any(counts < 1):
        raise DomainError("each target needs at least one included source")

    if impl is None:
        use_compiled = _compiled is not None and d <= _COMPILED_MAX_DIM
    elif impl == "compiled":
        if _compiled is None:
            raise DomainError("compiled backend requested but not built")
        if d > _COMPILED_MAX_DIM:
            raise DomainError("compiled backend supports dim <= %d" % _COMPILED_MAX_DIM)
        use_compiled = True
    elif impl in ("pure", "python"):
        use_compiled = False
    else:
        raise DomainError("unknown backend %r" % impl)

    mod = _compiled if use_compiled else _pairkern_py
    a_raw, b_raw, hits = mod.pair_sums(
        targets, states, _FAMILY_CODES[spec.family],
        float(spec.gamma), float(spec.eps), float(spec.lambda_floor),
        float(spec.r0), float(spec.r1), DELTA_FLOOR, ex, int(workers),
    )
    denom = counts.astype(np.float64)
    a = a_raw / denom[:, None, None]
    b = b_raw * (-(d - 1.0))
    b /= denom[:, None]
    return a, b, hits
