"""Scripted studies: convergence rates, order chains, LQ control and per-step checks."""

from .chains import (
    ChainConfig,
    ChainProcesses,
    ChainReport,
    bounding_experiment,
    check_chain,
    default_battery,
    partitioning_experiment,
)
from .checks import StepReport, marginal_propagation_check, mean_preservation_check
from .convergence import ConvergenceReport, LogLogFit, MomentBoundReport, convergence_study, moment_bound_study
from .lq import LQConfig, LQReport, lq_control_experiment, lq_null_calibration
from .riccati import RiccatiSolution, RiccatiSystem, solve_riccati

__all__ = [
    "ChainConfig", "ChainProcesses", "ChainReport", "bounding_experiment", "check_chain",
    "default_battery", "partitioning_experiment", "StepReport", "marginal_propagation_check",
    "mean_preservation_check", "ConvergenceReport", "LogLogFit", "MomentBoundReport",
    "convergence_study", "moment_bound_study", "LQConfig", "LQReport", "lq_control_experiment",
    "lq_null_calibration", "RiccatiSolution", "RiccatiSystem", "solve_riccati",
]
