"""Brute-force stochastic reference for the deterministic spectra.

Imports nothing from the deterministic covariance path.
"""

from ._accel import ENV_FLAG, NUMBA_AVAILABLE, use_numba
from .simulate import (
    OracleInstabilityError,
    TrajectoryConfig,
    build_system,
    burn_in_check,
    check_config,
    oracle_correlation,
    phase_increments,
    simulate_trajectory,
    step_halving_check,
    trajectory_rng,
)
from .welch import EstimatorError, WelchEstimate, segment_periodograms, welch_cross_spectrum

__all__ = [
    "ENV_FLAG", "NUMBA_AVAILABLE", "EstimatorError", "OracleInstabilityError", "TrajectoryConfig",
    "WelchEstimate", "build_system", "burn_in_check", "check_config",
    "oracle_correlation", "phase_increments",
    "segment_periodograms", "simulate_trajectory", "step_halving_check", "trajectory_rng",
    "use_numba", "welch_cross_spectrum",
]
