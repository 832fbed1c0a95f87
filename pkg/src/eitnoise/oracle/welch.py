"""Segment-averaged auto and cross periodograms of two real series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

MIN_SEGMENTS = 4


class EstimatorError(ValueError):
    """The data cannot support a spectral estimate with quantified variance."""


@dataclass
class WelchEstimate:
    """Two-sided spectral densities on ``omega`` (rad/s) with segment-scatter errors.

    Densities follow ``S(omega) = int R(tau) exp(i omega tau) d tau``, so white
    noise of variance ``s2`` sampled at ``dt`` has ``S = s2 * dt``.
    """

    omega: np.ndarray
    S11: np.ndarray
    S22: np.ndarray
    S12: np.ndarray
    se11: np.ndarray
    se22: np.ndarray
    se12: np.ndarray
    n_segments: int


def segment_periodograms(i1, i2, dt: float, segment_length: int, overlap: float = 0.5,
                         window: str = "hann") -> tuple[np.ndarray, np.ndarray]:
    """Per-segment ``(P11, P22, Re P12)``, shape ``(K, 3, nfreq)``, and angular frequencies."""
    i1 = np.asarray(i1, dtype=float)
    i2 = np.asarray(i2, dtype=float)
    if i1.shape != i2.shape or i1.ndim != 1:
        raise EstimatorError("channels must be 1-D arrays of equal length")
    if not 0.0 <= overlap < 1.0:
        raise EstimatorError(f"overlap must lie in [0, 1), got {overlap}")
    step = max(1, int(round(segment_length * (1.0 - overlap))))
    starts = np.arange(0, len(i1) - segment_length + 1, step)
    if len(starts) < MIN_SEGMENTS:
        raise EstimatorError(
            f"{len(starts)} segment(s) of {segment_length} samples fit in {len(i1)} samples; "
            f"need at least {MIN_SEGMENTS}"
        )
    win = get_window(window, segment_length)
    norm = dt / np.sum(win**2)
    idx = starts[:, None] + np.arange(segment_length)[None, :]
    seg1 = i1[idx]
    seg2 = i2[idx]
    seg1 = (seg1 - seg1.mean(axis=1, keepdims=True)) * win
    seg2 = (seg2 - seg2.mean(axis=1, keepdims=True)) * win
    x1 = np.fft.rfft(seg1, axis=1)
    x2 = np.fft.rfft(seg2, axis=1)
    p = np.stack([np.abs(x1) ** 2, np.abs(x2) ** 2, np.real(x1 * x2.conj())], axis=1) * norm
    omega = 2.0 * np.pi * np.fft.rfftfreq(segment_length, dt)
    return p, omega


def welch_cross_spectrum(i1, i2, dt: float, segment_length: int, overlap: float = 0.5,
                         window: str = "hann") -> WelchEstimate:
    """Welch estimate of ``S11, S22`` and the symmetrised cross spectrum ``S12``.

    ``S12`` is the real part of the averaged cross periodogram. Standard errors
    are the segment standard deviation over ``sqrt(K)``; with overlapping
    segments they are mildly optimistic.

    Raises
    ------
    EstimatorError
        If fewer than four segments fit in the series.
    """
    p, omega = segment_periodograms(i1, i2, dt, segment_length, overlap, window)
    k = p.shape[0]
    mean = p.mean(axis=0)
    se = p.std(axis=0, ddof=1) / np.sqrt(k)
    return WelchEstimate(omega, mean[0], mean[1], mean[2], se[0], se[1], se[2], k)
