"""Interacting-particle simulation of the spatially homogeneous Landau
dynamics, with exact closed-form references for Maxwell molecules."""

__version__ = "0.1.0"

from ._backend import BACKEND, compiled_available, pair_fields
from .analysis import (RateSeries, ellipticity_monitor, fit_rate,
                       gaussian_density, histogram, wasserstein2_1d,
                       wasserstein2_exact)
from .ensemble import (Ensemble, Gaussian1d, InitialLaw, Mixture1d,
                       empirical_a, empirical_b, preset_law, sample_initial)
from .errors import (ConfigError, DegenerateFit, DomainError, LandauSimError,
                     NonFinite, NotCentered, NotPsd, Singular,
                     SingularRelativeVelocity)
from .integrator import (SimConfig, Trajectory, coupled_particle_vs_reference,
                         coupled_time_refinement, n_floor_steps,
                         refinement_ladder, simulate,
                         simulate_mckean_reference, step)
from .kernels import KernelSpec, a_field, b_field, cutoff_kappa
from .maxwell import MomentFlow
from .noise import NoisePlan

__all__ = [
    "BACKEND", "ConfigError", "DegenerateFit", "DomainError", "Ensemble",
    "Gaussian1d", "InitialLaw", "KernelSpec", "LandauSimError", "Mixture1d",
    "MomentFlow", "NoisePlan", "NonFinite", "NotCentered", "NotPsd",
    "RateSeries", "SimConfig", "Singular", "SingularRelativeVelocity",
    "Trajectory", "a_field", "b_field", "compiled_available",
    "coupled_particle_vs_reference", "coupled_time_refinement",
    "cutoff_kappa", "ellipticity_monitor", "empirical_a", "empirical_b",
    "fit_rate", "gaussian_density", "histogram", "n_floor_steps",
    "pair_fields", "preset_law", "refinement_ladder", "sample_initial",
    "simulate", "simulate_mckean_reference", "step", "wasserstein2_1d",
    "wasserstein2_exact",
]
