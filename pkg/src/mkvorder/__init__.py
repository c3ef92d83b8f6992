"""Simulation and convex-order verification for scaled McKean-Vlasov dynamics."""

from .model import (
    DiffusionSpec,
    DriftSpec,
    InitialLaw,
    MeasureSummary,
    MKVModel,
    TimeGrid,
    drift_lookup,
    linear_drift,
    matrix_partial_order,
    preset_lookup,
)
from .measure import DiscreteMeasure, MeasurePath, mixture, moment, wasserstein_1d, wasserstein_exact
from .rng import StreamSpec, gaussian_block, psd_sqrt
from .simulate import ParticleEnsemble, PathBundle, coupled_simulate, simulate_particle_system
from .validate import ProbeConfig, validate_assumptions

__version__ = "0.1.0"

__all__ = [
    "DiffusionSpec", "DriftSpec", "InitialLaw", "MeasureSummary", "MKVModel", "TimeGrid",
    "drift_lookup", "linear_drift", "matrix_partial_order", "preset_lookup",
    "DiscreteMeasure", "MeasurePath", "mixture", "moment", "wasserstein_1d", "wasserstein_exact",
    "StreamSpec", "gaussian_block", "psd_sqrt",
    "ParticleEnsemble", "PathBundle", "coupled_simulate", "simulate_particle_system",
    "ProbeConfig", "validate_assumptions",
]
