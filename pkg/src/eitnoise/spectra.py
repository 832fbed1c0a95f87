"""Intensity-noise spectra from the regression theorem.

For ``tau >= 0`` the centred two-time correlation of the atomic vector decays
with the same generator as the mean, ``c2(tau) = exp(-A1 tau) c2``, so its
one-sided Fourier transform is the resolvent ``(s + A1)^{-1} c2`` at
``s = -i omega``. The detected intensity fluctuation of field ``q`` is
proportional to ``Im p_q`` (first order in the atomic response), which mixes
the products ``<p_q p_q'>`` and ``<p_q p_q'^*>``.

Spectra are reported in normalised units: the field/sample prefactor is set to
one and the spectral density is made dimensionless by multiplying with the
excited-state decay rate.
"""

from __future__ import annotations

import numpy as np

from .liouville import GeneratorSet, conjugate_permutation, slot
from .model import AtomConfig
from .results import (  # noqa: F401  re-exported
    DENOMINATOR_FLOOR,
    SpectrumConsistencyError,
    SpectrumResult,
    correlation_coefficient,
    sum_diff,
)
from .stationary import SolverError, checked_solve


def polarization_functionals(atom: AtomConfig) -> tuple[np.ndarray, np.ndarray]:
    """Row vectors ``u, v`` with ``p_q = u[q] . x`` and ``p_q^* = v[q] . x``.

    ``p_q`` is the dipole-weighted sum of the slowly varying coherences that
    radiate into field ``q``: ``rho_{0q}`` and, for four levels, ``rho_{0'q}``.
    """
    n = atom.n_levels
    d = n * n
    u = np.zeros((2, d), dtype=complex)
    w = atom.dipole_weights
    for q in (1, 2):
        u[q - 1, slot(n, 0, q)] = w[q - 1]
        if n == 4:
            u[q - 1, slot(n, 3, q)] = w[q + 1]
    v = u.conj()[:, conjugate_permutation(n)]
    return u, v


def laplace_correlation(gen: GeneratorSet, c2: np.ndarray, omega: float, sign: int = -1) -> np.ndarray:
    """Laplace transform ``[s + A1]^{-1} c2`` of the regressed covariance at ``s = sign * i omega``."""
    s = sign * 1j * omega
    try:
        return checked_solve(gen.A1 + s * np.eye(gen.dim), c2, f"resolvent at s={s:.6g}")
    except SolverError as exc:
        raise SolverError(f"{exc} (kv={gen.kv:.6g} rad/s)") from None


def one_sided_products(g_minus: np.ndarray, g_plus: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Positive-lag Fourier transform of the intensity covariance, shape ``(..., 2, 2)``.

    ``g_minus`` / ``g_plus`` are the Laplace-domain correlations at ``s = -i w``
    and ``s = +i w``. Entry ``[q, q']`` is the transform of
    ``-<p_q(t+tau) p_q'(t)> + <p_q(t+tau) p_q'^*(t)> + c.c.`` over ``tau >= 0``.
    """
    def bracket(g):
        non_conj = np.einsum("qi,...ij,rj->...qr", u, g, v.conj())
        conj = np.einsum("qi,...ij,rj->...qr", u, g, u.conj())
        return -non_conj + conj

    return bracket(g_minus) + bracket(g_plus).conj()


def projected_one_sided(a1: np.ndarray, c2: np.ndarray, omegas: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Same as :func:`one_sided_products` applied to the resolvents of ``c2``.

    Only the four columns ``c2 @ [v^dag, u^dag]`` are propagated, so the cost
    per frequency is one ``d x d`` factorisation with a ``d x 4`` right-hand side.
    """
    d = a1.shape[0]
    rhs = c2 @ np.hstack([v.conj().T, u.conj().T])
    eye = np.eye(d)[None]
    shift = 1j * np.asarray(omegas, dtype=float)[:, None, None]
    rhs_b = np.broadcast_to(rhs, (len(omegas), d, 4))
    x_minus = np.linalg.solve(a1[None] - shift * eye, rhs_b)
    x_plus = np.linalg.solve(a1[None] + shift * eye, rhs_b)

    def bracket(x):
        return -(u @ x[..., :2]) + u @ x[..., 2:]

    return bracket(x_minus) + bracket(x_plus).conj()


def symmetrize(h: np.ndarray) -> np.ndarray:
    """Full-line symmetrised spectrum ``(S_qq' + S_q'q) / 2`` from positive-lag parts.

    The negative-lag half of ``S_qq'`` is the conjugate positive-lag half of
    ``S_q'q``, so the symmetrised matrix is ``Re(H + H^T)``.
    """
    return np.real(h + np.swapaxes(h, -1, -2))


def assemble_cross_spectrum(g_minus: np.ndarray, g_plus: np.ndarray, atom: AtomConfig) -> np.ndarray:
    """Real symmetric ``2 x 2`` spectral matrix ``[[S11, S12], [S12, S22]]``.

    ``g_minus`` and ``g_plus`` must already carry the velocity-class weights
    and be summed over class pairs.
    """
    u, v = polarization_functionals(atom)
    return symmetrize(one_sided_products(g_minus, g_plus, u, v))
