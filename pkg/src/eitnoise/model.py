"""Physical parameters of the two-laser / Lambda-atom problem.

Every rate and frequency stored on these objects is an angular frequency in
rad/s. Configuration files speak ordinary frequency in MHz (or multiples of the
excited-state decay rate); :func:`mhz_to_rad` / :func:`rad_to_mhz` are the only
place the 2*pi factor lives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

TWO_PI_MHZ = 2.0 * math.pi * 1e6

#: 85Rb 5P3/2 F'=2 sits 63.4 MHz below F'=3.
RB85_EXCITED_SPLITTING_MHZ = -63.4

#: one-dimensional kv spread for room-temperature 85Rb at 780 nm.
RB85_SIGMA_KV_MHZ = 220.0

QUADRATURE_RULES = ("gauss-hermite", "trapezoid", "tangent")


class ModelError(ValueError):
    """A physical parameter violates its invariants."""


def mhz_to_rad(value):
    """Ordinary frequency in MHz -> angular frequency in rad/s."""
    return np.asarray(value, dtype=float) * TWO_PI_MHZ if np.ndim(value) else float(value) * TWO_PI_MHZ


def rad_to_mhz(value):
    """Angular frequency in rad/s -> ordinary frequency in MHz."""
    return np.asarray(value, dtype=float) / TWO_PI_MHZ if np.ndim(value) else float(value) / TWO_PI_MHZ


@dataclass(frozen=True)
class LaserField:
    """One phase-diffusing driving laser.

    ``linewidth_b`` is the phase diffusion coefficient: ``<dphi^2> = 2 b dt``,
    i.e. a Lorentzian line of full width ``2 b``. ``detuning`` is
    ``omega_laser - omega_transition`` for the zero-velocity class, positive when
    the laser is above the |0> resonance.
    """

    label: int
    rabi: float
    detuning: float = 0.0
    linewidth_b: float = 0.0


@dataclass(frozen=True)
class AtomConfig:
    """Level structure and relaxation rates.

    Levels are |0>, |1>, |2> and (four-level only) |0'>. ``dipole_weights`` are
    ordered ``(1<->0, 2<->0, 1<->0', 2<->0')`` and multiply the Rabi frequency of
    the laser driving that transition. ``branching[e]`` gives the fractions of
    the decay of excited level ``e`` (|0>, then |0'>) into (|1>, |2>).
    ``ground_equilibrium`` is the ground mixture re-injected by the transit
    flow at rate ``gamma_ground``.
    """

    n_levels: int
    gamma_exc: float
    gamma_ground: float
    excited_splitting: float = 0.0
    dipole_weights: Optional[tuple] = None
    branching: Optional[tuple] = None
    ground_equilibrium: tuple = (0.5, 0.5)

    def __post_init__(self):
        n_exc = 2 if self.n_levels == 4 else 1
        if self.dipole_weights is None:
            object.__setattr__(self, "dipole_weights", (1.0,) * (2 * n_exc))
        else:
            object.__setattr__(self, "dipole_weights", tuple(float(w) for w in self.dipole_weights))
        if self.branching is None:
            object.__setattr__(self, "branching", ((0.5, 0.5),) * n_exc)
        else:
            object.__setattr__(
                self, "branching", tuple(tuple(float(f) for f in row) for row in self.branching)
            )
        object.__setattr__(
            self, "ground_equilibrium", tuple(float(f) for f in self.ground_equilibrium)
        )

    @property
    def excited_levels(self) -> tuple:
        return (0, 3) if self.n_levels == 4 else (0,)


@dataclass(frozen=True)
class AnalysisGrid:
    """Angular analysis frequencies (rad/s) at which spectra are sampled."""

    frequencies: tuple

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(w) for w in self.frequencies))

    @property
    def omega(self) -> np.ndarray:
        return np.asarray(self.frequencies, dtype=float)


@dataclass(frozen=True)
class DopplerSpec:
    """Velocity-class quadrature settings.

    ``scale`` (rad/s) is the half-width of the ``trapezoid`` window (0 means
    ``4 * sigma_kv``) and the length scale ``L`` of the ``tangent`` rule, whose
    nodes ``L tan(theta)`` sit on a uniform midpoint grid in ``theta``: dense
    within ``|kv| < L`` and reaching the far tails of the Gaussian. It is
    ignored by ``gauss-hermite``. ``cross_class=False``
    drops the covariance between distinct velocity classes, leaving an
    incoherent sum of single-class spectra.
    """

    enabled: bool = False
    sigma_kv: float = 0.0
    n_classes: int = 1
    rule: str = "gauss-hermite"
    scale: float = 0.0
    cross_class: bool = True


@dataclass(frozen=True)
class Model:
    laser1: LaserField
    laser2: LaserField
    atom: AtomConfig
    grid: AnalysisGrid
    doppler: DopplerSpec = field(default_factory=DopplerSpec)

    def with_updates(self, **changes) -> "Model":
        return replace(self, **changes)


def _finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ModelError(f"{name} must be finite, got {value!r}")


def _check_laser(laser: LaserField, expected_label: int) -> None:
    if laser.label != expected_label:
        raise ModelError(f"laser{expected_label} carries label {laser.label}")
    for name in ("rabi", "detuning", "linewidth_b"):
        _finite(f"laser{expected_label}.{name}", getattr(laser, name))
    if laser.rabi < 0:
        raise ModelError(f"laser{expected_label}: negative Rabi frequency {laser.rabi}")
    if laser.linewidth_b < 0:
        raise ModelError(f"laser{expected_label}: negative linewidth {laser.linewidth_b}")


def _check_atom(atom: AtomConfig) -> None:
    if atom.n_levels not in (3, 4):
        raise ModelError(f"n_levels must be 3 or 4, got {atom.n_levels}")
    for name in ("gamma_exc", "gamma_ground", "excited_splitting"):
        _finite(f"atom.{name}", getattr(atom, name))
    if atom.gamma_exc <= 0:
        raise ModelError(f"non-positive decay rate: gamma_exc = {atom.gamma_exc}")
    if atom.gamma_ground < 0:
        raise ModelError(f"negative ground decay rate: gamma_ground = {atom.gamma_ground}")
    if atom.n_levels == 3 and atom.excited_splitting != 0.0:
        raise ModelError("excited_splitting must be 0 for a 3-level atom")
    n_exc = len(atom.excited_levels)
    if len(atom.dipole_weights) != 2 * n_exc:
        raise ModelError(f"expected {2 * n_exc} dipole weights, got {len(atom.dipole_weights)}")
    if any(w < 0 or not math.isfinite(w) for w in atom.dipole_weights):
        raise ModelError(f"dipole weights must be finite and >= 0: {atom.dipole_weights}")
    if len(atom.branching) != n_exc:
        raise ModelError(f"expected branching for {n_exc} excited level(s)")
    for row in list(atom.branching) + [atom.ground_equilibrium]:
        if len(row) != 2 or any(f < 0 for f in row) or abs(sum(row) - 1.0) > 1e-12:
            raise ModelError(f"fractions must be two non-negative numbers summing to 1: {row}")


def _check_grid(grid: AnalysisGrid) -> None:
    w = grid.omega
    if w.size == 0:
        raise ModelError("empty analysis frequency grid")
    if not np.all(np.isfinite(w)):
        raise ModelError("analysis frequencies must be finite")
    if np.any(w < 0):
        raise ModelError("analysis frequencies must be >= 0")
    if np.any(np.diff(w) <= 0):
        raise ModelError("analysis frequencies must be strictly increasing")


def _check_doppler(spec: DopplerSpec) -> None:
    _finite("doppler.sigma_kv", spec.sigma_kv)
    if spec.sigma_kv < 0:
        raise ModelError("doppler.sigma_kv must be >= 0")
    if spec.rule not in QUADRATURE_RULES:
        raise ModelError(f"unknown quadrature rule {spec.rule!r}; choose from {QUADRATURE_RULES}")
    if spec.n_classes < 1:
        raise ModelError("doppler.n_classes must be >= 1")
    if spec.enabled:
        if spec.n_classes < 3 or spec.n_classes % 2 == 0:
            raise ModelError(
                f"doppler.n_classes must be odd and >= 3 when enabled, got {spec.n_classes}"
            )
    _finite("doppler.scale", spec.scale)
    if spec.scale < 0:
        raise ModelError("doppler.scale must be >= 0")
    if spec.enabled and spec.rule == "tangent" and not spec.scale > 0:
        raise ModelError("tangent rule needs a positive doppler.scale")


def validate(model: Model) -> Model:
    """Check every invariant of ``model`` and return it unchanged.

    Raises
    ------
    ModelError
        On the first violated invariant, naming the offending field.
    """
    _check_laser(model.laser1, 1)
    _check_laser(model.laser2, 2)
    _check_atom(model.atom)
    _check_grid(model.grid)
    _check_doppler(model.doppler)
    return model


def swap_lasers(model: Model) -> Model:
    """Exchange the roles of the two lasers (and their ground states).

    Used by symmetry checks: S11 and S22 trade places, S12 and C do not change.
    """
    atom = model.atom
    w = atom.dipole_weights
    swapped_w = tuple(w[i ^ 1] for i in range(len(w)))
    atom = replace(
        atom,
        dipole_weights=swapped_w,
        branching=tuple((b, a) for a, b in atom.branching),
        ground_equilibrium=atom.ground_equilibrium[::-1],
    )
    l1 = replace(model.laser2, label=1)
    l2 = replace(model.laser1, label=2)
    return replace(model, laser1=l1, laser2=l2, atom=atom)


def analysis_grid_mhz(freqs_mhz: Sequence[float]) -> AnalysisGrid:
    return AnalysisGrid(tuple(mhz_to_rad(np.asarray(freqs_mhz, dtype=float))))
