"""Velocity-class quadrature over the Gaussian kv distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DopplerSpec, ModelError


@dataclass(frozen=True)
class VelocityGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


def _symmetrized(nodes: np.ndarray, weights: np.ndarray) -> VelocityGrid:
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return VelocityGrid(nodes=nodes, weights=weights / weights.sum())


def make_grid(spec: DopplerSpec) -> VelocityGrid:
    """Nodes (kv, rad/s) and normalised weights for a :class:`DopplerSpec`.

    ``gauss-hermite`` rescales the probabilists' Hermite rule to standard
    deviation ``sigma_kv``. ``trapezoid`` places ``M`` equally spaced nodes on
    ``[-W, W]`` (``W = scale`` or ``4 sigma_kv``) weighted by the Gaussian.
    ``tangent`` maps the whole line onto ``(-pi/2, pi/2)`` with
    ``kv = scale * tan(theta)`` and applies the midpoint rule in ``theta``.
    """
    if not spec.enabled:
        return VelocityGrid(nodes=np.zeros(1), weights=np.ones(1))
    m = spec.n_classes
    if m % 2 == 0:
        raise ModelError(f"velocity grid needs an odd node count, got {m}")
    if spec.sigma_kv == 0.0:
        return VelocityGrid(nodes=np.zeros(1), weights=np.ones(1))
    if spec.rule == "gauss-hermite":
        x, w = np.polynomial.hermite_e.hermegauss(m)
        return _symmetrized(spec.sigma_kv * x, w)
    if spec.rule == "trapezoid":
        half = spec.scale if spec.scale > 0 else 4.0 * spec.sigma_kv
        kv = np.linspace(-half, half, m)
        w = np.exp(-0.5 * (kv / spec.sigma_kv) ** 2)
        w[[0, -1]] *= 0.5
        return _symmetrized(kv, w)
    if spec.rule == "tangent":
        if not spec.scale > 0:
            raise ModelError("tangent rule needs a positive scale")
        theta = -0.5 * np.pi + (np.arange(m) + 0.5) * np.pi / m
        kv = spec.scale * np.tan(theta)
        w = np.exp(-0.5 * (kv / spec.sigma_kv) ** 2) / np.cos(theta) ** 2
        return _symmetrized(kv, w)
    raise ModelError(f"unknown quadrature rule {spec.rule!r}")
