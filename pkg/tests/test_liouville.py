import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitnoise.liouville import (
    build_a1,
    build_bloch_matrix,
    conjugate_permutation,
    element_label,
    hamiltonian,
    index_map,
    make_generators,
    phase_weight_matrices,
    slot,
    to_matrix,
    to_vector,
)

from conftest import GAMMA, four_level, random_model, three_level


def random_density(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = z @ z.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("n", [3, 4])
def test_index_map_is_a_bijection(n):
    pairs = index_map(n)
    assert len(pairs) == n * n == len(set(pairs))
    assert all(pairs[k] == (k, k) for k in range(n))
    x = np.arange(n * n, dtype=complex)
    np.testing.assert_array_equal(to_vector(to_matrix(x)), x)


def test_documented_slots():
    assert element_label(3, 3) == "rho_01"
    assert element_label(3, 8) == "rho_21"
    assert element_label(4, 3) == "rho_0'0'"
    assert slot(4, 1, 2) == 10


@pytest.mark.parametrize("n", [3, 4])
def test_conjugate_permutation(n, rng):
    x = to_vector(random_density(rng, n))
    np.testing.assert_allclose(np.conj(x), x[conjugate_permutation(n)], atol=1e-15)


def test_phase_weights_three_level():
    n1, n2 = phase_weight_matrices(three_level().atom)
    d1, d2 = np.diag(n1), np.diag(n2)
    i01, i12 = slot(3, 0, 1), slot(3, 1, 2)
    assert d1[i01] == 1 and d2[i01] == 0
    assert d1[i12] ** 2 + d2[i12] ** 2 == 2
    assert np.all(d1[:3] == 0) and np.all(d2[:3] == 0)
    assert set(d1) | set(d2) <= {-1.0, 0.0, 1.0}
    # conjugate elements carry opposite charges
    perm = conjugate_permutation(3)
    np.testing.assert_array_equal(d1[perm], -d1)


def test_phase_weights_four_level():
    n1, n2 = phase_weight_matrices(four_level().atom)
    d1, d2 = np.diag(n1), np.diag(n2)
    for a, b in [(0, 3), (3, 0)]:
        assert d1[slot(4, a, b)] == 0 and d2[slot(4, a, b)] == 0
    assert d1[slot(4, 3, 1)] == 1 and d2[slot(4, 3, 2)] == 1
    for n in (n1, n2):
        sq = n @ n
        assert np.all(np.isin(np.diag(sq), [0.0, 1.0]))
        assert np.count_nonzero(sq - np.diag(np.diag(sq))) == 0


def test_a1_ground_coherence_entry():
    m = three_level(rabi=0.3, detuning=0.7, b=0.08, b2=0.05, gamma_ground=0.02)
    g = make_generators(m)
    i = slot(3, 1, 2)
    assert g.A1[i, i].real == pytest.approx((0.02 + 0.08 + 0.05) * GAMMA, rel=1e-12)


def test_a1_without_noise_is_bloch_generator():
    m = three_level(b=0.0)
    g = make_generators(m)
    np.testing.assert_array_equal(g.A1, -g.A)


def test_a1_dimension_mismatch():
    m = three_level()
    a, _ = build_bloch_matrix(m.atom, m.laser1, m.laser2)
    n1, n2 = phase_weight_matrices(four_level().atom)
    with pytest.raises(ValueError, match="mismatch"):
        build_a1(a, n1, n2, m.laser1, m.laser2)


def test_nonfinite_kv_rejected():
    m = three_level()
    with pytest.raises(ValueError, match="finite"):
        build_bloch_matrix(m.atom, m.laser1, m.laser2, np.nan)


def test_velocity_shift_leaves_raman_detuning():
    m = four_level()
    h0 = hamiltonian(m.atom, m.laser1, m.laser2, 0.0)
    h1 = hamiltonian(m.atom, m.laser1, m.laser2, 5 * GAMMA)
    assert h1[2, 2] == h0[2, 2]
    assert h1[0, 0] - h0[0, 0] == pytest.approx(5 * GAMMA)
    assert h1[3, 3] - h0[3, 3] == pytest.approx(5 * GAMMA)


@pytest.mark.parametrize("n", [3, 4])
def test_hermiticity_pairing(n, rng):
    for _ in range(10):
        m = random_model(rng, n)
        g = make_generators(m, kv=rng.normal() * GAMMA)
        x = to_vector(random_density(rng, n))
        for flow in (g.A @ x + g.y0, -g.A1 @ x + g.y0):
            r = to_matrix(flow)
            np.testing.assert_allclose(r, r.conj().T, atol=1e-9 * np.abs(r).max())


@pytest.mark.parametrize("n", [3, 4])
def test_trace_preservation(n, rng):
    for _ in range(10):
        m = random_model(rng, n)
        g = make_generators(m)
        x = to_vector(random_density(rng, n))
        for flow in (g.A @ x + g.y0, -g.A1 @ x + g.y0):
            assert abs(flow[:n].sum()) <= 1e-12 * GAMMA * (1 + np.abs(x).max())


@pytest.mark.parametrize("n", [3, 4])
def test_a1_stability_random_draws(n):
    rng = np.random.default_rng(100 + n)
    worst = -np.inf
    for _ in range(100):
        m = random_model(rng, n)
        g = make_generators(m, kv=rng.normal(0, 20) * GAMMA)
        # max Re eig(-A1) in units of Gamma
        worst = max(worst, np.linalg.eigvals(-g.A1).real.max() / GAMMA)
    assert worst <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-5.0, 5.0), st.floats(0.0, 1.0), st.floats(1e-3, 0.2))
def test_a1_stability_property(rabi, det, b, gg):
    g = make_generators(three_level(rabi=rabi, detuning=det, b=b, gamma_ground=gg))
    assert np.linalg.eigvals(-g.A1).real.max() <= 1e-12 * GAMMA


def test_source_only_on_ground_populations():
    g = make_generators(four_level())
    nz = np.flatnonzero(g.y0)
    assert set(nz) == {1, 2}
    assert g.y0[1] == pytest.approx(0.5 * 0.02 * GAMMA)
