"""Monte Carlo trajectories of the phase-noise-driven atom and their spectra.

This module rebuilds the master equation from the model parameters on its
own and never touches the deterministic covariance machinery, so agreement
between the two paths is an independent check of signs and prefactors.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..model import Model, ModelError, validate
from ..quadrature import VelocityGrid, make_grid
from ..results import SpectrumResult
from . import _accel
from .kernels import integrate_numba, integrate_numpy
from .welch import segment_periodograms

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy PCG64, SeedSequence(seed, spawn_key=(trajectory, stream)), streams: 0 burn-in, 1 recorded phases, 2 detector"
NUMPY_BATCH = 16


class OracleInstabilityError(RuntimeError):
    """A trajectory diverged; the step size is too large for the parameters."""


@dataclass(frozen=True)
class TrajectoryConfig:
    """Time stepping, ensemble size and estimator settings (times in seconds).

    ``kappa`` is the linear atom-field coupling of the detected intensity,
    ``I_q = 1 - 2 kappa Im P_q``; spectra are divided by ``kappa**2`` so they
    are comparable with the deterministic normalised units. ``kappa = 0`` is
    the empty-cell control. ``detector_noise`` adds independent white noise of
    that standard deviation per sample to each channel.
    """

    dt: float
    total_time: float
    n_trajectories: int
    seed: int
    burn_in: float
    segment_length: int
    overlap: float = 0.5
    window: str = "hann"
    sample_every: int = 1
    kappa: float = 1.0
    detector_noise: float = 0.0
    noise_refinement: int = 0

    @classmethod
    def from_gamma_units(cls, gamma: float, dt: float, total_time: float, burn_in: float, **kw):
        """Build from times expressed in units of ``1 / gamma``."""
        return cls(dt=dt / gamma, total_time=total_time / gamma, burn_in=burn_in / gamma, **kw)

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))

    @property
    def n_samples(self) -> int:
        return int(round(self.total_time / (self.dt * self.sample_every)))

    @property
    def n_steps(self) -> int:
        return self.burn_steps + self.n_samples * self.sample_every

    def halved(self) -> "TrajectoryConfig":
        """Half the integration step on the same sampling grid and Brownian path."""
        if self.noise_refinement < 1:
            raise ValueError("halving needs noise_refinement >= 1 to keep the Brownian path")
        return dataclasses.replace(self, dt=self.dt / 2, sample_every=self.sample_every * 2,
                                   noise_refinement=self.noise_refinement - 1)


@dataclass(frozen=True)
class OracleSystem:
    """Arrays consumed by the trajectory kernels for one model."""

    h0: np.ndarray
    node_w: np.ndarray
    pol_w: np.ndarray
    loss: np.ndarray
    dec_e: np.ndarray
    dec_g: np.ndarray
    dec_rate: np.ndarray
    gamma: float
    rho_eq: np.ndarray
    b: tuple


def build_system(model: Model, grid: Optional[VelocityGrid] = None) -> OracleSystem:
    """Level energies, couplings and decay channels in the phase-free rotating frame."""
    validate(model)
    grid = grid if grid is not None else make_grid(model.doppler)
    atom, l1, l2 = model.atom, model.laser1, model.laser2
    n = atom.n_levels
    w = atom.dipole_weights
    couplings = [(0, 1, w[0] * l1.rabi), (0, 2, w[1] * l2.rabi)]
    if n == 4:
        couplings += [(3, 1, w[2] * l1.rabi), (3, 2, w[3] * l2.rabi)]
    h0 = np.zeros((len(grid), n, n), dtype=complex)
    for j, kv in enumerate(grid.nodes):
        # energies relative to |1>, in the frame co-rotating with both lasers
        e_exc = -(l1.detuning - kv)
        h0[j, 0, 0] = e_exc
        h0[j, 2, 2] = e_exc + (l2.detuning - kv)
        if n == 4:
            h0[j, 3, 3] = e_exc + atom.excited_splitting
        for e, g, coupling in couplings:
            h0[j, e, g] = h0[j, g, e] = -coupling
    pol_w = np.zeros((2, n), dtype=complex)
    pol_w[0, 0], pol_w[1, 0] = w[0], w[1]
    if n == 4:
        pol_w[0, 3], pol_w[1, 3] = w[2], w[3]
    dec = [
        (e, g, atom.gamma_exc * frac)
        for e, fractions in zip(atom.excited_levels, atom.branching)
        for g, frac in zip((1, 2), fractions)
        if frac > 0
    ]
    loss = np.zeros(n)
    for e, _, rate in dec:
        loss[e] += rate
    rho_eq = np.zeros((n, n), dtype=complex)
    rho_eq[1, 1], rho_eq[2, 2] = atom.ground_equilibrium
    return OracleSystem(
        h0=h0,
        node_w=np.asarray(grid.weights, dtype=float),
        pol_w=pol_w,
        loss=loss,
        dec_e=np.array([d[0] for d in dec], dtype=np.int64),
        dec_g=np.array([d[1] for d in dec], dtype=np.int64),
        dec_rate=np.array([d[2] for d in dec], dtype=float),
        gamma=float(atom.gamma_ground),
        rho_eq=rho_eq,
        b=(l1.linewidth_b, l2.linewidth_b),
    )


def check_config(model: Model, cfg: TrajectoryConfig, system: Optional[OracleSystem] = None) -> None:
    """Enforce the step-size, burn-in and segmentation rules.

    Raises
    ------
    ModelError
        Naming the violated rule.
    """
    system = system or build_system(model)
    gam = model.atom.gamma_exc
    b1, b2 = system.b
    if cfg.dt <= 0 or cfg.total_time <= 0 or cfg.burn_in < 0:
        raise ModelError("dt and total_time must be positive, burn_in non-negative")
    w = model.atom.dipole_weights
    rabi = max(model.laser1.rabi, model.laser2.rabi) * max(w)
    fastest = max(gam, b1, b2, rabi)
    if cfg.dt * fastest > 0.05 * (1 + 1e-9):
        raise ModelError(f"dt * max(Gamma, b, Omega) = {cfg.dt * fastest:.3g} exceeds 0.05")
    if cfg.dt * np.abs(system.h0).max() > 0.5:
        raise ModelError(f"dt * max|H| = {cfg.dt * np.abs(system.h0).max():.3g} exceeds 0.5; reduce dt")
    slow = model.atom.gamma_ground + b1 + b2
    if slow > 0 and cfg.burn_in * slow < 10.0 - 1e-9:
        raise ModelError(f"burn_in must be >= 10 / (gamma + b1 + b2) = {10.0 / slow:.3g} s")
    seg = cfg.segment_length
    if seg < 2 or seg & (seg - 1):
        raise ModelError(f"segment_length must be a power of two, got {seg}")
    if cfg.n_trajectories < 1 or cfg.sample_every < 1:
        raise ModelError("n_trajectories and sample_every must be >= 1")
    if cfg.kappa < 0 or cfg.detector_noise < 0:
        raise ModelError("kappa and detector_noise must be >= 0")


def trajectory_rng(seed: int, index: int, stream: int = 1) -> np.random.Generator:
    """Private generator for one trajectory and one noise stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index, stream))))


def phase_increments(rng: np.random.Generator, b: tuple, dt: float, n_steps: int, refine: int = 0) -> np.ndarray:
    """Wiener increments ``sqrt(2 b_q dt) xi`` for both lasers, shape ``(n_steps, 2)``.

    With ``refine > 0`` each increment is the sum of ``2**refine`` sub-increments.
    """
    f = 2**refine
    scale = np.sqrt(2.0 * np.asarray(b, dtype=float) * dt / f)
    fine = rng.standard_normal((n_steps * f, 2)) * scale
    return fine.reshape(n_steps, f, 2).sum(axis=1) if f > 1 else fine


def _draws(system: OracleSystem, cfg: TrajectoryConfig, index: int):
    r = cfg.noise_refinement
    burn = phase_increments(trajectory_rng(cfg.seed, index, 0), system.b, cfg.dt, cfg.burn_steps, r)
    rec = phase_increments(trajectory_rng(cfg.seed, index, 1), system.b, cfg.dt, cfg.n_steps - cfg.burn_steps, r)
    det = trajectory_rng(cfg.seed, index, 2).standard_normal((cfg.n_samples, 2)) * cfg.detector_noise
    return np.concatenate([burn, rec]), det


def _raise_unstable(model: Model, cfg: TrajectoryConfig, index: int, step: int) -> None:
    raise OracleInstabilityError(
        f"trajectory {index} diverged at step {step} (dt={cfg.dt:.3g} s, "
        f"rabi=({model.laser1.rabi:.3g}, {model.laser2.rabi:.3g}) rad/s, "
        f"detuning=({model.laser1.detuning:.3g}, {model.laser2.detuning:.3g}) rad/s)"
    )


def _intensities(im_p: np.ndarray, det: np.ndarray, kappa: float) -> np.ndarray:
    # constant carrier dropped: the estimator subtracts segment means anyway
    return -2.0 * kappa * im_p + det


def _run_numba(model, system, cfg, index):
    dphi, det = _draws(system, cfg, index)
    out = np.zeros((cfg.n_samples, 2))
    rho0 = np.broadcast_to(system.rho_eq, system.h0.shape).copy()
    status = integrate_numba(
        rho0, system.h0, system.node_w, system.pol_w, system.loss, system.dec_e, system.dec_g,
        system.dec_rate, system.gamma, system.rho_eq, dphi, cfg.dt, cfg.burn_steps, cfg.sample_every, out,
    )
    if status >= 0:
        _raise_unstable(model, cfg, index, status)
    return _intensities(out, det, cfg.kappa)


def _run_numpy(model, system, cfg, indices):
    draws = [_draws(system, cfg, i) for i in indices]
    dphi = np.stack([d[0] for d in draws])
    out = np.zeros((len(indices), cfg.n_samples, 2))
    rho0 = np.broadcast_to(system.rho_eq, system.h0.shape).copy()
    status = integrate_numpy(
        rho0, system.h0, system.node_w, system.pol_w, system.loss, system.dec_e, system.dec_g,
        system.dec_rate, system.gamma, system.rho_eq, dphi, cfg.dt, cfg.burn_steps, cfg.sample_every, out,
    )
    for i, st in zip(indices, status):
        if st >= 0:
            _raise_unstable(model, cfg, i, int(st))
    return [_intensities(o, d[1], cfg.kappa) for o, d in zip(out, draws)]


def simulate_trajectory(model: Model, cfg: TrajectoryConfig, index: int = 0,
                        grid: Optional[VelocityGrid] = None, backend: Optional[str] = None) -> np.ndarray:
    """Detected intensity fluctuations ``(I1, I2)`` of one trajectory, shape ``(n_samples, 2)``.

    The phase realisation is drawn from the stream ``(cfg.seed, index)`` and is
    shared by all velocity classes. ``backend`` is ``"numba"``, ``"numpy"`` or
    None (numba when available).
    """
    system = build_system(model, grid)
    check_config(model, cfg, system)
    return _simulate(model, system, cfg, [index], _backend(backend))[0]


def _backend(backend: Optional[str]) -> str:
    if backend is None:
        return "numba" if _accel.use_numba() else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not _accel.use_numba():
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend


def _simulate(model, system, cfg, indices, backend, workers=1):
    if backend == "numba":
        if workers > 1 and len(indices) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(lambda i: _run_numba(model, system, cfg, i), indices))
        return [_run_numba(model, system, cfg, i) for i in indices]
    out = []
    for start in range(0, len(indices), NUMPY_BATCH):
        out += _run_numpy(model, system, cfg, indices[start:start + NUMPY_BATCH])
    return out


def _nearest_bins(omega_bins: np.ndarray, freqs: Optional[Sequence[float]]) -> np.ndarray:
    if freqs is None:
        return np.arange(1, len(omega_bins))
    idx = np.array([int(np.argmin(np.abs(omega_bins - f))) for f in np.asarray(freqs, dtype=float)])
    return np.unique(idx)


def _jackknife_c(per_traj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = per_traj.shape[0]
    total = per_traj.sum(axis=0)
    full = total / n
    with np.errstate(invalid="ignore", divide="ignore"):
        c_full = full[2] / np.sqrt(full[0] * full[1])
        if n < 2:
            return c_full, np.full_like(c_full, np.nan)
        loo = (total[None] - per_traj) / (n - 1)
        c_loo = loo[:, 2] / np.sqrt(loo[:, 0] * loo[:, 1])
    se = np.sqrt((n - 1) / n * np.sum((c_loo - c_loo.mean(axis=0)) ** 2, axis=0))
    return c_full, se


def oracle_correlation(model: Model, cfg: TrajectoryConfig, freqs: Optional[Sequence[float]] = None,
                       grid: Optional[VelocityGrid] = None, workers: int = 1,
                       backend: Optional[str] = None) -> SpectrumResult:
    """Monte Carlo spectra and ``C`` with standard errors.

    Results are reported at the periodogram bins nearest to ``freqs`` (rad/s;
    all positive bins when None); the actual bin frequencies are returned in
    ``frequencies``. ``stderr`` holds segment-scatter errors for the spectra
    and a delete-one-trajectory jackknife error for ``C``.
    """
    system = build_system(model, grid)
    check_config(model, cfg, system)
    backend = _backend(backend)
    dt_s = cfg.dt * cfg.sample_every
    indices = list(range(cfg.n_trajectories))
    sums = None
    sq = None
    per_traj = []
    n_seg = 0
    sel = None
    omega = None
    # chunked so memory stays bounded by one batch of raw series
    chunk = max(NUMPY_BATCH, workers)
    for start in range(0, len(indices), chunk):
        series = _simulate(model, system, cfg, indices[start:start + chunk], backend, workers)
        for s in series:
            p, omega_all = segment_periodograms(s[:, 0], s[:, 1], dt_s, cfg.segment_length, cfg.overlap, cfg.window)
            if sel is None:
                sel = _nearest_bins(omega_all, freqs)
                omega = omega_all[sel]
            p = p[:, :, sel]
            per_traj.append(p.mean(axis=0))
            sums = p.sum(axis=0) if sums is None else sums + p.sum(axis=0)
            sq = (p**2).sum(axis=0) if sq is None else sq + (p**2).sum(axis=0)
            n_seg += p.shape[0]
    scale = model.atom.gamma_exc / (cfg.kappa**2 if cfg.kappa > 0 else 1.0)
    mean = sums / n_seg
    var = np.maximum(sq / n_seg - mean**2, 0.0) * n_seg / max(n_seg - 1, 1)
    se = np.sqrt(var / n_seg) * scale
    s = mean * scale
    _, c_se = _jackknife_c(np.array(per_traj))
    meta = {
        "model": dataclasses.asdict(model),
        "oracle": dataclasses.asdict(cfg),
        "rng": RNG_ALGORITHM,
        "seed": int(cfg.seed),
        "backend": backend,
        "n_segments": int(n_seg),
        "velocity_nodes": int(system.h0.shape[0]),
        "normalization": "periodogram x gamma_exc / kappa^2",
    }
    return SpectrumResult.from_auto_cross(omega, s[0], s[1], s[2], metadata=meta,
                                          stderr={"S11": se[0], "S22": se[1], "S12": se[2], "C": c_se})


def step_halving_check(model: Model, cfg: TrajectoryConfig, freqs=None, **kw) -> dict:
    """Compare ``C`` at ``dt`` and ``dt / 2`` on the same Brownian paths.

    ``passed`` when the largest shift is below one standard error of ``C``.
    """
    base = dataclasses.replace(cfg, noise_refinement=cfg.noise_refinement + 1)
    a = oracle_correlation(model, base, freqs, **kw)
    b = oracle_correlation(model, base.halved(), freqs, **kw)
    return _gate(a, b)


def burn_in_check(model: Model, cfg: TrajectoryConfig, freqs=None, **kw) -> dict:
    """Compare ``C`` for ``burn_in`` and ``2 * burn_in`` on the same recorded noise."""
    a = oracle_correlation(model, cfg, freqs, **kw)
    b = oracle_correlation(model, dataclasses.replace(cfg, burn_in=2 * cfg.burn_in), freqs, **kw)
    return _gate(a, b)


def _gate(a: SpectrumResult, b: SpectrumResult) -> dict:
    shift = np.abs(a.C - b.C)
    ratio = shift / a.stderr["C"]
    return {
        "shift": shift,
        "se": a.stderr["C"],
        "max_shift": float(np.nanmax(shift)),
        "max_shift_in_se": float(np.nanmax(ratio)),
        "passed": bool(np.nanmax(ratio) < 1.0),
    }
