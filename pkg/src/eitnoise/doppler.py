"""Velocity-class quadrature and the Doppler-averaged spectrum.

Atoms in different velocity classes see the same laser phases, so their
polarizations fluctuate together. The averaged spectrum is the double sum over
class pairs ``(j, k)`` of ``W_j W_k`` times the pair's contribution; with the
cross-class covariance switched off only the diagonal ``j == k`` survives and
the result is an incoherent ``sum_j W_j S_jj``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from .liouville import GeneratorSet, make_generators
from .model import Model, validate
from .quadrature import VelocityGrid, make_grid  # noqa: F401  re-exported
from .spectra import SpectrumResult, polarization_functionals, projected_one_sided, symmetrize
from .stationary import SolverError, covariance_row, equal_time_covariance, noise_mask, steady_state

log = logging.getLogger(__name__)

#: block size along k for the batched covariance solves (bounds peak memory)
ROW_CHUNK = 48
RESIDUAL_LIMIT = 1e-8


def _fingerprint(model: Model, grid: VelocityGrid) -> str:
    payload = json.dumps(dataclasses.asdict(model), sort_keys=True, default=list)
    h = hashlib.sha256(payload.encode())
    h.update(np.ascontiguousarray(grid.nodes).tobytes())
    h.update(np.ascontiguousarray(grid.weights).tobytes())
    return h.hexdigest()


def _checked_row(gen_j: GeneratorSet, gens: list, xbar_j, xbars, j: int) -> np.ndarray:
    rows = []
    mask = noise_mask(gen_j)
    for start in range(0, len(gens), ROW_CHUNK):
        sl = slice(start, start + ROW_CHUNK)
        c2 = covariance_row(gen_j, gens[sl], xbar_j, xbars[sl])
        # residual of the Lyapunov-type equation for every block of the chunk
        a1k = np.array([g.A1 for g in gens[sl]])
        g = c2 + xbar_j[None, :, None] * xbars[sl].conj()[:, None, :]
        lhs = gen_j.A1 @ g + g @ a1k.conj().transpose(0, 2, 1) - mask * g
        rhs = gen_j.y0[None, :, None] * xbars[sl].conj()[:, None, :] + xbar_j[None, :, None] * gen_j.y0.conj()[None, None, :]
        err = np.linalg.norm(lhs - rhs, axis=(1, 2))
        scale = np.maximum(np.linalg.norm(rhs, axis=(1, 2)), 1e-300)
        bad = ~np.isfinite(err) | (err > RESIDUAL_LIMIT * scale)
        if np.any(bad):
            k = start + int(np.argmax(bad))
            raise SolverError(
                f"covariance block (j={j}, k={k}, kv_j={gen_j.kv:.6g}, "
                f"kv_k={gens[k].kv:.6g} rad/s) failed its residual check"
            )
        rows.append(c2)
    return np.concatenate(rows)


def doppler_average_spectra(
    model: Model,
    grid: Optional[VelocityGrid] = None,
    freqs: Optional[np.ndarray] = None,
    workers: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
    checkpoint: Optional[str] = None,
) -> SpectrumResult:
    """Velocity-averaged spectra on ``freqs`` (rad/s; defaults to the model grid).

    Parameters
    ----------
    workers
        Thread count for the loop over velocity classes ``j``. The output is
        identical for any value: per-class terms are stored by index and summed
        in a fixed order.
    progress
        Called as ``progress(done, total)`` after each class.
    checkpoint
        Optional ``.npz`` path. Finished classes are stored there and reused
        when the same model and grid are run again.
    """
    validate(model)
    grid = grid if grid is not None else make_grid(model.doppler)
    omegas = model.grid.omega if freqs is None else np.asarray(freqs, dtype=float)
    m = len(grid)
    cross = model.doppler.cross_class
    gens = [make_generators(model, kv) for kv in grid.nodes]
    xbars = np.array([steady_state(g) for g in gens])
    u, v = polarization_functionals(model.atom)
    w = grid.weights

    fp = _fingerprint(model, grid) + repr((cross, omegas.tobytes().hex()))
    parts = np.zeros((m, len(omegas), 2, 2), dtype=complex)
    done = np.zeros(m, dtype=bool)
    if checkpoint and os.path.exists(checkpoint):
        with np.load(checkpoint, allow_pickle=False) as ck:
            if str(ck["fingerprint"]) == fp:
                parts[:] = ck["parts"]
                done[:] = ck["done"]
                log.info("resumed %d/%d velocity classes from %s", done.sum(), m, checkpoint)

    def one_class(j: int) -> np.ndarray:
        if cross:
            c2 = np.tensordot(w, _checked_row(gens[j], gens, xbars[j], xbars, j), axes=1)
        else:
            c2 = equal_time_covariance(gens[j], gens[j], xbars[j], xbars[j]).c2
        return w[j] * projected_one_sided(gens[j].A1, c2, omegas, u, v)

    todo = [j for j in range(m) if not done[j]]
    n_done = m - len(todo)

    def record(j: int, part: np.ndarray) -> None:
        nonlocal n_done
        parts[j] = part
        done[j] = True
        n_done += 1
        if progress is not None:
            progress(n_done, m)
        if checkpoint and (n_done % 8 == 0 or n_done == m):
            tmp = checkpoint + ".tmp.npz"
            np.savez(tmp, fingerprint=fp, parts=parts, done=done)
            os.replace(tmp, checkpoint)

    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for j, part in zip(todo, pool.map(one_class, todo)):
                record(j, part)
    else:
        for j in todo:
            record(j, one_class(j))

    s = symmetrize(parts.sum(axis=0)) * model.atom.gamma_exc
    meta = {
        "model": dataclasses.asdict(model),
        "velocity_nodes": int(m),
        "quadrature": model.doppler.rule if model.doppler.enabled else "none",
        "cross_class": bool(cross),
        "normalization": "spectral prefactor = 1, multiplied by gamma_exc",
    }
    return SpectrumResult.from_auto_cross(omegas, s[:, 0, 0], s[:, 1, 1], s[:, 0, 1], metadata=meta)


def compute_spectra(model: Model, workers: int = 1, **kwargs) -> SpectrumResult:
    """Spectra of ``model`` on its own analysis grid, Doppler-averaged if enabled."""
    return doppler_average_spectra(model, workers=workers, **kwargs)
