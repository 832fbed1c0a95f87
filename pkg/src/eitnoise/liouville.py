"""Rotating-frame Bloch generators for one velocity class.

State-vector layout
-------------------
The density matrix of an ``n``-level atom is flattened into the vector ``x`` of
length ``n**2``: first the populations, then every coherence pair ``(j, k)``,
``(k, j)`` for ``j < k``. Level indices are ``0 = |0>``, ``1 = |1>``,
``2 = |2>``, ``3 = |0'>``.

======  ========  ==========
index   3-level   4-level
======  ========  ==========
0       rho_00    rho_00
1       rho_11    rho_11
2       rho_22    rho_22
3       rho_01    rho_0'0'
4       rho_10    rho_01
5       rho_02    rho_10
6       rho_20    rho_02
7       rho_12    rho_20
8       rho_21    rho_00'
9                 rho_0'0
10                rho_12
11                rho_21
12                rho_10'
13                rho_0'1
14                rho_20'
15                rho_0'2
======  ========  ==========

Phase convention: in the frame where the laser phases are explicit, laser ``q``
enters as ``-Omega_q exp(+i phi_q) |e><q| + h.c.``. Removing the phases,
``x = exp(-i N1 phi1) exp(-i N2 phi2) rho``, gives ``N_q = +1`` on ``rho_eq`` and
``-1`` on ``rho_qe``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import AtomConfig, LaserField, Model

LEVEL_NAMES = ("0", "1", "2", "0'")


@lru_cache(maxsize=None)
def index_map(n: int) -> tuple:
    """Ordered ``(row, col)`` density-matrix element for every slot of ``x``."""
    pairs = [(k, k) for k in range(n)]
    for j in range(n):
        for k in range(j + 1, n):
            pairs += [(j, k), (k, j)]
    return tuple(pairs)


@lru_cache(maxsize=None)
def slot(n: int, row: int, col: int) -> int:
    return index_map(n).index((row, col))


@lru_cache(maxsize=None)
def _vec_permutation(n: int) -> np.ndarray:
    # x[i] = vec(rho)[perm[i]] with vec row-major
    return np.array([a * n + b for a, b in index_map(n)])


@lru_cache(maxsize=None)
def conjugate_permutation(n: int) -> np.ndarray:
    """``conj(x) == x[perm]`` for any Hermitian density matrix."""
    pairs = index_map(n)
    return np.array([pairs.index((b, a)) for a, b in pairs])


def element_label(n: int, i: int) -> str:
    a, b = index_map(n)[i]
    return f"rho_{LEVEL_NAMES[a]}{LEVEL_NAMES[b]}"


def to_vector(rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    return np.asarray(rho, dtype=complex).reshape(-1)[_vec_permutation(n)]


def to_matrix(x: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(x.shape[0])))
    out = np.zeros(n * n, dtype=complex)
    out[_vec_permutation(n)] = x
    return out.reshape(n, n)


def _level_charges(n: int) -> tuple[np.ndarray, np.ndarray]:
    c1 = np.zeros(n)
    c2 = np.zeros(n)
    c1[1] = -1.0
    c2[2] = -1.0
    return c1, c2


def phase_weight_matrices(atom: AtomConfig) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal matrices counting the net laser-phase factors of each element.

    Optical coherences driven by laser ``q`` carry ``+-1`` in ``N_q`` and 0 in the
    other; the ground coherence carries opposite unit charges in both;
    populations and the excited-excited coherence carry nothing.
    """
    n = atom.n_levels
    c1, c2 = _level_charges(n)
    pairs = index_map(n)
    d1 = np.array([c1[a] - c1[b] for a, b in pairs])
    d2 = np.array([c2[a] - c2[b] for a, b in pairs])
    return np.diag(d1), np.diag(d2)


def hamiltonian(atom: AtomConfig, laser1: LaserField, laser2: LaserField, kv: float = 0.0) -> np.ndarray:
    """Rotating-frame Hamiltonian / hbar, laser phases removed.

    Both optical detunings are shifted by ``-kv`` (co-propagating beams, equal
    wavenumbers), so the Raman detuning does not depend on velocity.
    """
    n = atom.n_levels
    d1 = laser1.detuning - kv
    d2 = laser2.detuning - kv
    w = atom.dipole_weights
    h = np.zeros((n, n), dtype=complex)
    h[0, 0] = -d1
    h[2, 2] = d2 - d1
    h[0, 1] = h[1, 0] = -w[0] * laser1.rabi
    h[0, 2] = h[2, 0] = -w[1] * laser2.rabi
    if n == 4:
        h[3, 3] = -d1 + atom.excited_splitting
        h[3, 1] = h[1, 3] = -w[2] * laser1.rabi
        h[3, 2] = h[2, 3] = -w[3] * laser2.rabi
    return h


def _liouvillian_rowmajor(h: np.ndarray, atom: AtomConfig) -> np.ndarray:
    n = h.shape[0]
    eye = np.eye(n)
    # vec(A X B) = (A kron B^T) vec(X) for row-major vec
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for e, fractions in zip(atom.excited_levels, atom.branching):
        for g, frac in zip((1, 2), fractions):
            if frac == 0.0:
                continue
            c = np.zeros((n, n))
            c[g, e] = np.sqrt(atom.gamma_exc * frac)
            cdc = c.T @ c
            lv += np.kron(c, c) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    lv -= atom.gamma_ground * np.eye(n * n)
    return lv


def ground_mixture(atom: AtomConfig) -> np.ndarray:
    rho = np.zeros((atom.n_levels, atom.n_levels), dtype=complex)
    rho[1, 1], rho[2, 2] = atom.ground_equilibrium
    return rho


def build_bloch_matrix(
    atom: AtomConfig, laser1: LaserField, laser2: LaserField, kv: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Bloch matrix ``A`` and transit source ``y0`` in the ``x`` layout.

    ``dx/dt = A x + y0`` is the noise-free rotating-frame master equation with
    spontaneous decay, uniform transit relaxation at ``gamma_ground`` and
    re-injection of the ground mixture at the same rate.
    """
    if not np.isfinite(kv):
        raise ValueError(f"velocity shift kv must be finite, got {kv!r}")
    h = hamiltonian(atom, laser1, laser2, kv)
    perm = _vec_permutation(atom.n_levels)
    lv = _liouvillian_rowmajor(h, atom)
    a = lv[np.ix_(perm, perm)]
    y0 = atom.gamma_ground * ground_mixture(atom).reshape(-1)[perm]
    return a, y0


def build_a1(
    a: np.ndarray, n1: np.ndarray, n2: np.ndarray, laser1: LaserField, laser2: LaserField
) -> np.ndarray:
    """Phase-averaged generator: ``d<x> = (-A1 <x> + y0) dt``."""
    if not (a.shape == n1.shape == n2.shape and a.shape[0] == a.shape[1]):
        raise ValueError(f"dimension mismatch: A {a.shape}, N1 {n1.shape}, N2 {n2.shape}")
    return laser1.linewidth_b * (n1 @ n1) + laser2.linewidth_b * (n2 @ n2) - a


@dataclass(frozen=True)
class GeneratorSet:
    A: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    A1: np.ndarray
    y0: np.ndarray
    kv: float
    b1: float
    b2: float

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def make_generators(model: Model, kv: float = 0.0) -> GeneratorSet:
    a, y0 = build_bloch_matrix(model.atom, model.laser1, model.laser2, kv)
    n1, n2 = phase_weight_matrices(model.atom)
    a1 = build_a1(a, n1, n2, model.laser1, model.laser2)
    return GeneratorSet(
        A=a, N1=n1, N2=n2, A1=a1, y0=y0, kv=float(kv),
        b1=model.laser1.linewidth_b, b2=model.laser2.linewidth_b,
    )
