"""Flat key=value run configuration.

Files are line-oriented: ``section.key = value`` with ``#`` comments and
blank lines ignored.  Unknown keys, duplicate keys, and malformed values are
all ConfigError with the offending line.  Example::

    kernel.family = maxwell
    init.preset   = paper_sec5
    run.n         = 5000
    run.N         = 200
    run.T         = 2.5
    run.seed      = 2024
    run.replicates = 16
    run.exclusion = auto
    run.sqrt_method = cholesky
    out.dir       = out/sec5

Coordinates of a custom product law can be given instead of a preset::

    init.coord0 = gaussian(0, 0.1)
    init.coord1 = mixture2(1, 0.1)
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from .ensemble import Gaussian1d, InitialLaw, Mixture1d, preset_law
from .errors import ConfigError, DomainError
from .integrator import SimConfig
from .kernels import KernelSpec

_KNOWN_KEYS = {
    "kernel.family", "kernel.dim", "kernel.gamma", "kernel.epsilon",
    "kernel.lambda_floor", "kernel.r0", "kernel.r1",
    "init.preset",
    "run.n", "run.N", "run.T", "run.seed", "run.replicates",
    "run.exclusion", "run.sqrt_method", "run.snapshot_stride",
    "run.refinement", "run.workers",
    "out.dir", "out.hist_coord", "out.hist_bins", "out.hist_range",
    "out.hist_times",
    "rate.n_list", "rate.N_list", "rate.bootstrap",
}

_COORD_RE = re.compile(r"^init\.coord(\d+)$")
_COMPONENT_RE = re.compile(
    r"^(gaussian|mixture2)\s*\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)$")

DEFAULT_RATE_N = (50, 100, 200, 400, 800, 1600)
DEFAULT_RATE_STEPS = (25, 50, 100, 200, 400)


@dataclass(frozen=True)
class RunSetup:
    """Parsed configuration: the simulation config plus output and
    experiment settings."""

    sim: SimConfig
    out_dir: Path
    hist_coord: int
    hist_bins: int
    hist_range: Tuple[float, float]
    hist_times: Optional[Tuple[float, ...]]
    rate_n_list: Tuple[int, ...]
    rate_step_list: Tuple[int, ...]
    bootstrap: int
    exclusion_mode: str


def parse_config_text(text, origin="<config>"):
    """Parse config text into a raw {key: value} dict of strings."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                "%s:%d: expected 'key = value', got %r" % (origin, lineno, raw.strip()))
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(
                "%s:%d: empty key or value" % (origin, lineno))
        if key not in _KNOWN_KEYS and not _COORD_RE.match(key):
            raise ConfigError("%s:%d: unknown key %r" % (origin, lineno, key))
        if key in values:
            raise ConfigError("%s:%d: duplicate key %r" % (origin, lineno, key))
        values[key] = value
    return values


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    return build_setup(parse_config_text(text, origin=str(path)))


def _get(values, key, default=None, convert=str):
    if key not in values:
        return default
    raw = values.pop(key)
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError("bad value for %s: %r (%s)" % (key, raw, exc)) from exc


def _as_int(raw):
    return int(raw, 0) if isinstance(raw, str) else int(raw)


def _as_float(raw):
    return float(raw)

def _as_choice(options):
    def convert(raw):
        if raw not in options:
            raise ValueError("expected one of %s" % ", ".join(options))
        return raw
    return convert


def _as_int_list(raw):
    items = [p.strip() for p in raw.split(",") if p.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(int(p) for p in items)


def _as_float_list(raw):
    items = [p.strip() for p in raw.split(",") if p.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(p) for p in items)


def _parse_component(key, raw):
    m = _COMPONENT_RE.match(raw.strip())
    if not m:
        raise ConfigError(
            "bad value for %s: %r (expected gaussian(mean, std) or "
            "mixture2(center, std))" % (key, raw))
    kind, first, second = m.groups()
    try:
        a, b = float(first), float(second)
    except ValueError as exc:
        raise ConfigError("bad numbers in %s: %r" % (key, raw)) from exc
    return Gaussian1d(a, b) if kind == "gaussian" else Mixture1d(a, b)


def _build_law(values, dim):
    preset = _get(values, "init.preset")
    coord_keys = sorted(
        (int(_COORD_RE.match(k).group(1)), k)
        for k in list(values) if _COORD_RE.match(k)
    )
    if preset is not None and coord_keys:
        raise ConfigError("give either init.preset or init.coord*, not both")
    if preset is not None:
        try:
            return preset_law(preset)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if coord_keys:
        indices = [i for i, _ in coord_keys]
        if indices != list(range(len(indices))):
            raise ConfigError(
                "init.coord indices must be contiguous from 0, got %s" % indices)
        return InitialLaw(components=tuple(
            _parse_component(k, values.pop(k)) for _, k in coord_keys))
    # Default: standard product Gaussian in the kernel dimension.
    return InitialLaw(components=tuple(Gaussian1d(0.0, 1.0) for _ in range(dim)))


def build_setup(values, overrides=None):
    """Build a RunSetup from raw config values (a dict of strings).

    ``overrides`` may carry seed/workers/out_dir values from the command line
    which take precedence over the file.
    """
    values = dict(values)
    overrides = overrides or {}

    family = _get(values, "kernel.family", "maxwell",
                  _as_choice(("maxwell", "pseudo_maxwell", "soft", "soft_cutoff")))
    dim = _get(values, "kernel.dim", 2, _as_int)
    kwargs = {}
    gamma = _get(values, "kernel.gamma", None, _as_float)
    eps = _get(values, "kernel.epsilon", None, _as_float)
    lam = _get(values, "kernel.lambda_floor", None, _as_float)
    r0 = _get(values, "kernel.r0", None, _as_float)
    r1 = _get(values, "kernel.r1", None, _as_float)
    allowed = {
        "maxwell": (),
        "pseudo_maxwell": ("kernel.lambda_floor", "kernel.r0", "kernel.r1"),
        "soft": ("kernel.gamma",),
        "soft_cutoff": ("kernel.gamma", "kernel.epsilon"),
    }[family]
    for key, val in (("kernel.gamma", gamma), ("kernel.epsilon", eps),
                     ("kernel.lambda_floor", lam), ("kernel.r0", r0),
                     ("kernel.r1", r1)):
        if val is not None and key not in allowed:
            raise ConfigError(
                "%s does not apply to the %s family" % (key, family))
    try:
        if family == "maxwell":
            spec = KernelSpec.maxwell(dim)
        elif family == "pseudo_maxwell":
            if lam is not None:
                kwargs["lambda_floor"] = lam
            if r0 is not None:
                kwargs["r0"] = r0
            if r1 is not None:
                kwargs["r1"] = r1
            spec = KernelSpec.pseudo_maxwell(dim, **kwargs)
        elif family == "soft":
            spec = KernelSpec.soft(dim, gamma if gamma is not None else -1.0)
        else:
            spec = KernelSpec.soft_cutoff(
                dim, gamma if gamma is not None else -1.0,
                eps if eps is not None else 0.1)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    law = _build_law(values, dim)

    exclusion_mode = _get(values, "run.exclusion", "auto",
                          _as_choice(("auto", "on", "off")))
    if exclusion_mode == "auto":
        self_exclusion = family in ("soft", "soft_cutoff")
    elif exclusion_mode == "on":
        self_exclusion = True
    else:
        if family == "soft":
            raise ConfigError(
                "run.exclusion = off is not allowed for the soft family "
                "(the self-pair is singular); use soft_cutoff or exclusion on")
        self_exclusion = False

    seed = overrides.get("seed")
    if seed is None:
        seed = _get(values, "run.seed", 2024, _as_int)
    else:
        values.pop("run.seed", None)
    workers = overrides.get("workers")
    if workers is None:
        workers = _get(values, "run.workers", 1, _as_int)
    else:
        values.pop("run.workers", None)

    try:
        sim = SimConfig(
            kernel=spec,
            law=law,
            n=_get(values, "run.n", 1000, _as_int),
            steps_per_unit=_get(values, "run.N", 200, _as_int),
            horizon=_get(values, "run.T", 1.0, _as_float),
            seed=seed,
            replicates=_get(values, "run.replicates", 1, _as_int),
            self_exclusion=self_exclusion,
            sqrt_method=_get(values, "run.sqrt_method", "cholesky",
                             _as_choice(("cholesky", "sym_sqrt"))),
            snapshot_stride=_get(values, "run.snapshot_stride", 0, _as_int),
            noise_refinement=_get(values, "run.refinement", 1, _as_int),
            workers=workers,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    out_dir = overrides.get("out_dir")
    if out_dir is None:
        out_dir = _get(values, "out.dir", "out")
    else:
        values.pop("out.dir", None)

    hist_range = _get(values, "out.hist_range", (-3.0, 3.0), _as_float_list)
    if len(hist_range) != 2 or not hist_range[1] > hist_range[0]:
        raise ConfigError("out.hist_range needs 'lo, hi' with hi > lo")
    hist_coord = _get(values, "out.hist_coord", min(1, dim - 1), _as_int)
    if not 0 <= hist_coord < dim:
        raise ConfigError("out.hist_coord must lie in [0, %d)" % dim)
    hist_times = _get(values, "out.hist_times", None, _as_float_list)

    setup = RunSetup(
        sim=sim,
        out_dir=Path(out_dir),
        hist_coord=hist_coord,
        hist_bins=_get(values, "out.hist_bins", 80, _as_int),
        hist_range=(float(hist_range[0]), float(hist_range[1])),
        hist_times=hist_times,
        rate_n_list=_get(values, "rate.n_list", DEFAULT_RATE_N, _as_int_list),
        rate_step_list=_get(values, "rate.N_list", DEFAULT_RATE_STEPS,
                            _as_int_list),
        bootstrap=_get(values, "rate.bootstrap", 1000, _as_int),
        exclusion_mode=exclusion_mode,
    )
    if values:
        raise ConfigError("unused config keys: %s" % ", ".join(sorted(values)))
    if setup.hist_bins < 1:
        raise ConfigError("out.hist_bins must be >= 1")
    if setup.bootstrap < 0:
        raise ConfigError("rate.bootstrap must be >= 0")
    return setup
