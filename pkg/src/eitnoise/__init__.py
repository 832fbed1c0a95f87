"""Laser phase-noise to intensity-noise correlation spectra of Lambda atoms."""

from .doppler import VelocityGrid, compute_spectra, doppler_average_spectra, make_grid
from .model import (
    AnalysisGrid,
    AtomConfig,
    DopplerSpec,
    LaserField,
    Model,
    ModelError,
    analysis_grid_mhz,
    mhz_to_rad,
    rad_to_mhz,
    validate,
)
from .spectra import SpectrumResult, correlation_coefficient, sum_diff

__version__ = "0.1.0"

__all__ = [
    "AnalysisGrid", "AtomConfig", "DopplerSpec", "LaserField", "Model", "ModelError",
    "SpectrumResult", "VelocityGrid", "analysis_grid_mhz", "compute_spectra",
    "correlation_coefficient", "doppler_average_spectra", "make_grid", "mhz_to_rad",
    "rad_to_mhz", "sum_diff", "validate",
]
