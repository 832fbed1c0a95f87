"""Fixed-step integration of the phase-driven density matrix.

Within each step the laser phases are frozen and the master equation is
advanced with classical RK4; the phases then take their Wiener increment. The
Hamiltonian is applied in the frame where the laser phases are explicit:
``H_ab = H0_ab exp(i (theta_a - theta_b))`` with ``theta = (0, -phi1, -phi2, 0)``.

Both implementations take the same pre-drawn phase increments so they can be
compared sample by sample.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

# level charge pattern: theta_a = -phi_1 * Q1[a] - phi_2 * Q2[a]
Q1 = np.array([0.0, 1.0, 0.0, 0.0])
Q2 = np.array([0.0, 0.0, 1.0, 0.0])


@njit(cache=True, nogil=True)
def _deriv(rho, h, loss, dec_e, dec_g, dec_rate, gamma, rho_eq, out):
    n = rho.shape[0]
    for a in range(n):
        for b in range(n):
            acc = 0j
            for c in range(n):
                acc += h[a, c] * rho[c, b] - rho[a, c] * h[c, b]
            out[a, b] = -1j * acc - 0.5 * (loss[a] + loss[b]) * rho[a, b] - gamma * (rho[a, b] - rho_eq[a, b])
    for i in range(dec_e.shape[0]):
        out[dec_g[i], dec_g[i]] += dec_rate[i] * rho[dec_e[i], dec_e[i]]


@njit(cache=True, nogil=True)
def integrate_numba(rho0, h0, node_w, pol_w, loss, dec_e, dec_g, dec_rate, gamma, rho_eq,
                    dphi, dt, burn, every, out):
    """Advance one trajectory; fills ``out[s, q] = Im P_q`` and returns a status.

    Status is -1 on success, otherwise the step index at which some density
    matrix element exceeded 10 in modulus.
    """
    m, n, _ = h0.shape
    rho = rho0.copy()
    h = np.empty((n, n), dtype=np.complex128)
    k1 = np.empty((n, n), dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    ph = np.zeros(n, dtype=np.complex128)
    phi1 = 0.0
    phi2 = 0.0
    n_steps = dphi.shape[0]
    s = 0
    for it in range(n_steps):
        for a in range(n):
            ph[a] = np.exp(-1j * (phi1 * Q1[a] + phi2 * Q2[a]))
        for j in range(m):
            r = rho[j]
            for a in range(n):
                for b in range(n):
                    h[a, b] = h0[j, a, b] * ph[a] * np.conj(ph[b])
            _deriv(r, h, loss, dec_e, dec_g, dec_rate, gamma, rho_eq, k1)
            for a in range(n):
                for b in range(n):
                    tmp[a, b] = r[a, b] + 0.5 * dt * k1[a, b]
            _deriv(tmp, h, loss, dec_e, dec_g, dec_rate, gamma, rho_eq, k2)
            for a in range(n):
                for b in range(n):
                    tmp[a, b] = r[a, b] + 0.5 * dt * k2[a, b]
            _deriv(tmp, h, loss, dec_e, dec_g, dec_rate, gamma, rho_eq, k3)
            for a in range(n):
                for b in range(n):
                    tmp[a, b] = r[a, b] + dt * k3[a, b]
            _deriv(tmp, h, loss, dec_e, dec_g, dec_rate, gamma, rho_eq, k4)
            for a in range(n):
                for b in range(n):
                    r[a, b] += dt / 6.0 * (k1[a, b] + 2.0 * k2[a, b] + 2.0 * k3[a, b] + k4[a, b])
                    if abs(r[a, b]) > 10.0:
                        return it
        phi1 += dphi[it, 0]
        phi2 += dphi[it, 1]
        if it >= burn and (it - burn) % every == every - 1:
            e1 = np.exp(-1j * phi1)
            e2 = np.exp(-1j * phi2)
            p1 = 0j
            p2 = 0j
            for j in range(m):
                for e in range(n):
                    p1 += node_w[j] * pol_w[0, e] * rho[j, e, 1]
                    p2 += node_w[j] * pol_w[1, e] * rho[j, e, 2]
            out[s, 0] = (p1 * e1).imag
            out[s, 1] = (p2 * e2).imag
            s += 1
    return -1


def integrate_numpy(rho0, h0, node_w, pol_w, loss, dec_e, dec_g, dec_rate, gamma, rho_eq,
                    dphi, dt, burn, every, out):
    """Vectorised twin of :func:`integrate_numba` over a batch of trajectories.

    ``dphi`` has shape ``(B, T, 2)`` and ``out`` ``(B, S, 2)``; ``rho0`` is
    shared. Returns one status per trajectory.
    """
    b_count = dphi.shape[0]
    m, n, _ = h0.shape
    rho = np.broadcast_to(rho0, (b_count,) + rho0.shape).copy()
    status = np.full(b_count, -1)
    phi = np.zeros((b_count, 2))
    relax = 0.5 * (loss[:, None] + loss[None, :])
    q1, q2 = Q1[:n], Q2[:n]

    def deriv(r, h):
        d = -1j * (h @ r - r @ h) - relax * r - gamma * (r - rho_eq)
        for e, g, rate in zip(dec_e, dec_g, dec_rate):
            d[..., g, g] += rate * r[..., e, e]
        return d

    # diverging members overflow before they are flagged; status reports them
    with np.errstate(over="ignore", invalid="ignore"):
        _numpy_steps(rho, h0, node_w, pol_w, q1, q2, phi, dphi, dt, burn, every, out, status, deriv)
    return status


def _numpy_steps(rho, h0, node_w, pol_w, q1, q2, phi, dphi, dt, burn, every, out, status, deriv):
    s = 0
    for it in range(dphi.shape[1]):
        ph = np.exp(-1j * (phi[:, :1] * q1 + phi[:, 1:] * q2))
        h = h0[None] * (ph[:, None, :, None] * ph.conj()[:, None, None, :])
        k1 = deriv(rho, h)
        k2 = deriv(rho + 0.5 * dt * k1, h)
        k3 = deriv(rho + 0.5 * dt * k2, h)
        k4 = deriv(rho + dt * k3, h)
        rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        blown = (status < 0) & np.any(np.abs(rho) > 10.0, axis=(1, 2, 3))
        status[blown] = it
        if np.all(status >= 0):
            break
        phi += dphi[:, it]
        if it >= burn and (it - burn) % every == every - 1:
            p1 = np.einsum("j,e,bje->b", node_w, pol_w[0], rho[:, :, :, 1])
            p2 = np.einsum("j,e,bje->b", node_w, pol_w[1], rho[:, :, :, 2])
            out[:, s, 0] = (p1 * np.exp(-1j * phi[:, 0])).imag
            out[:, s, 1] = (p2 * np.exp(-1j * phi[:, 1])).imag
            s += 1
