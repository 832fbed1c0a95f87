"""Steady state and equal-time covariance of the phase-averaged dynamics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .liouville import GeneratorSet

MAX_CONDITION = 1e14


class SolverError(RuntimeError):
    """A linear system of the deterministic path is singular or ill-conditioned."""


def checked_solve(a: np.ndarray, b: np.ndarray, context: str) -> np.ndarray:
    """Dense LU solve that refuses condition numbers above ``MAX_CONDITION``."""
    a = np.asarray(a, dtype=complex)
    anorm = np.abs(a).sum(axis=0).max()
    if anorm == 0.0:
        raise SolverError(f"{context}: zero matrix")
    with warnings.catch_warnings():
        # singularity is reported below through the condition estimate
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    rcond, _ = lapack.zgecon(lu, anorm, norm="1")
    if not rcond > 1.0 / MAX_CONDITION:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise SolverError(f"{context}: condition estimate {cond:.3g} exceeds {MAX_CONDITION:.0e}")
    return sla.lu_solve((lu, piv), b)


def steady_state(gen: GeneratorSet) -> np.ndarray:
    """Stationary mean ``xbar = A1^{-1} y0``."""
    return checked_solve(
        gen.A1, gen.y0,
        f"steady state (kv={gen.kv:.6g} rad/s, b1={gen.b1:.6g}, b2={gen.b2:.6g})",
    )


@dataclass(frozen=True)
class CovarianceBlock:
    """``c2 = <x_j x_k^dag> - <x_j><x_k^dag>`` for velocity classes j, k."""

    c2: np.ndarray
    kv_j: float
    kv_k: float


def noise_mask(gen: GeneratorSet) -> np.ndarray:
    """Coefficients of the ``2 b N G N`` terms as an elementwise mask on G."""
    d1 = np.diag(gen.N1)
    d2 = np.diag(gen.N2)
    return 2.0 * gen.b1 * np.outer(d1, d1) + 2.0 * gen.b2 * np.outer(d2, d2)


def covariance_operator(gen_j: GeneratorSet, gen_k: GeneratorSet) -> np.ndarray:
    """Matrix of ``G -> A1_j G + G A1_k^dag - 2 b1 N1 G N1 - 2 b2 N2 G N2``.

    Acts on ``vec(G)`` stacked column by column.
    """
    d = gen_j.dim
    eye = np.eye(d)
    op = np.kron(eye, gen_j.A1) + np.kron(gen_k.A1.conj(), eye)
    op -= np.diag(noise_mask(gen_j).reshape(-1, order="F"))
    return op


def _noiseless(gen: GeneratorSet) -> bool:
    return gen.b1 == 0.0 and gen.b2 == 0.0


def _check_open(gen: GeneratorSet) -> None:
    if not np.any(gen.y0):
        raise SolverError(
            "covariance equation is singular in the b1 = b2 = gamma = 0 limit "
            "(no transit flow); use gamma_ground > 0"
        )


def equal_time_covariance(
    gen_j: GeneratorSet, gen_k: GeneratorSet, xbar_j: np.ndarray, xbar_k: np.ndarray
) -> CovarianceBlock:
    """Stationary covariance between the atomic vectors of two velocity classes.

    Both classes see the same Wiener phases, so the cross-class block obeys the
    same Lyapunov-type equation as the diagonal one::

        A1_j G + G A1_k^dag - 2 b1 N1 G N1 - 2 b2 N2 G N2 = y0 xbar_k^dag + xbar_j y0^dag
    """
    _check_open(gen_j)
    d = gen_j.dim
    if _noiseless(gen_j):
        return CovarianceBlock(c2=np.zeros((d, d), dtype=complex), kv_j=gen_j.kv, kv_k=gen_k.kv)
    rhs = np.outer(gen_j.y0, xbar_k.conj()) + np.outer(xbar_j, gen_k.y0.conj())
    op = covariance_operator(gen_j, gen_k)
    g = checked_solve(
        op, rhs.reshape(-1, order="F"),
        f"covariance (kv_j={gen_j.kv:.6g}, kv_k={gen_k.kv:.6g} rad/s)",
    ).reshape(d, d, order="F")
    c2 = g - np.outer(xbar_j, xbar_k.conj())
    return CovarianceBlock(c2=c2, kv_j=gen_j.kv, kv_k=gen_k.kv)


def covariance_row(
    gen_j: GeneratorSet, gens: list, xbar_j: np.ndarray, xbars: np.ndarray
) -> np.ndarray:
    """``c2(j, k)`` for every ``k`` at once, shape ``(len(gens), d, d)``.

    Same equation as :func:`equal_time_covariance`, solved as one batched LU
    call. Conditioning is not estimated here; callers validate the diagonal
    block with the checked solver first.
    """
    _check_open(gen_j)
    d = gen_j.dim
    if _noiseless(gen_j):
        return np.zeros((len(gens), d, d), dtype=complex)
    eye = np.eye(d)
    left = np.kron(eye, gen_j.A1) - np.diag(noise_mask(gen_j).reshape(-1, order="F"))
    ops = np.stack([left + np.kron(g.A1.conj(), eye) for g in gens])
    y0 = gen_j.y0
    rhs = y0[None, :, None] * xbars.conj()[:, None, :] + xbar_j[None, :, None] * y0.conj()[None, None, :]
    # column-major vec of each (d, d) block
    rhs_vec = rhs.transpose(0, 2, 1).reshape(len(gens), d * d)
    sol = np.linalg.solve(ops, rhs_vec[..., None])[..., 0]
    g = sol.reshape(len(gens), d, d).transpose(0, 2, 1)
    return g - xbar_j[None, :, None] * xbars.conj()[:, None, :]
