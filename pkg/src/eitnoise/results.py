"""Container for sampled spectra and the derived correlation coefficient.

Shared by the deterministic engine and the Monte Carlo estimator, so it
depends on numpy only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: C is reported as missing where S11 * S22 falls below this (normalised units).
DENOMINATOR_FLOOR = 1e-30
NEGATIVE_TOLERANCE = 1e-12


class SpectrumConsistencyError(ArithmeticError):
    """An auto-spectrum came out negative: a sign error upstream."""


def correlation_coefficient(s11, s22, s12) -> np.ndarray:
    """``C = S12 / sqrt(S11 S22)``; NaN marks a missing value.

    Raises
    ------
    SpectrumConsistencyError
        If an auto-spectrum is negative beyond round-off.
    """
    s11 = np.asarray(s11, dtype=float)
    s22 = np.asarray(s22, dtype=float)
    s12 = np.asarray(s12, dtype=float)
    if s11.shape != s22.shape or s11.shape != s12.shape:
        raise ValueError("spectra must have equal shapes")
    for name, s in (("S11", s11), ("S22", s22)):
        if np.any(s < -NEGATIVE_TOLERANCE):
            raise SpectrumConsistencyError(f"{name} negative: min {s.min():.3e}")
    denom = np.clip(s11, 0.0, None) * np.clip(s22, 0.0, None)
    ok = denom > DENOMINATOR_FLOOR
    c = np.full(s11.shape, np.nan)
    c[ok] = s12[ok] / np.sqrt(denom[ok])
    return c


def sum_diff(s11, s22, s12) -> tuple[np.ndarray, np.ndarray]:
    s11, s22, s12 = (np.asarray(a, dtype=float) for a in (s11, s22, s12))
    if not (s11.shape == s22.shape == s12.shape):
        raise ValueError("spectra must have equal shapes")
    return s11 + s22 + 2.0 * s12, s11 + s22 - 2.0 * s12


@dataclass
class SpectrumResult:
    """Sampled spectra on an angular-frequency grid (rad/s).

    ``stderr`` is filled only by the Monte Carlo estimator and maps column
    names (``S11``, ``S22``, ``S12``, ``C``) to standard-error arrays.
    """

    frequencies: np.ndarray
    S11: np.ndarray
    S22: np.ndarray
    S12: np.ndarray
    Ss: np.ndarray
    Sd: np.ndarray
    C: np.ndarray
    metadata: dict = field(default_factory=dict)
    stderr: Optional[dict] = None

    @classmethod
    def from_auto_cross(cls, frequencies, s11, s22, s12, metadata=None, stderr=None) -> "SpectrumResult":
        ss, sd = sum_diff(s11, s22, s12)
        return cls(
            frequencies=np.asarray(frequencies, dtype=float),
            S11=np.asarray(s11, dtype=float),
            S22=np.asarray(s22, dtype=float),
            S12=np.asarray(s12, dtype=float),
            Ss=ss,
            Sd=sd,
            C=correlation_coefficient(s11, s22, s12),
            metadata=dict(metadata or {}),
            stderr=stderr,
        )

    @property
    def freqs_mhz(self) -> np.ndarray:
        return self.frequencies / (2.0 * math.pi * 1e6)
