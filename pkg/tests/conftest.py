import numpy as np
import pytest

from eitnoise.model import (
    AtomConfig,
    DopplerSpec,
    LaserField,
    Model,
    analysis_grid_mhz,
    mhz_to_rad,
)

GAMMA = mhz_to_rad(6.0)

# filled by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def three_level(rabi=0.1, detuning=0.0, b=0.08, gamma_ground=0.02, freqs_mhz=(0.1, 0.5, 1.0, 2.0),
                ratio=1.12, doppler=None, b2=None, detuning2=None, **atom_kw):
    """3-level model in units of Gamma (rates) and MHz (analysis grid)."""
    return Model(
        LaserField(1, rabi * GAMMA, detuning * GAMMA, b * GAMMA),
        LaserField(2, ratio * rabi * GAMMA, (detuning if detuning2 is None else detuning2) * GAMMA,
                   (b if b2 is None else b2) * GAMMA),
        AtomConfig(3, GAMMA, gamma_ground * GAMMA, **atom_kw),
        analysis_grid_mhz(freqs_mhz),
        doppler or DopplerSpec(),
    )


def four_level(rabi=0.8, detuning_mhz=28.6, b=0.08, gamma_ground=0.02, freqs_mhz=(1.0, 3.5),
               doppler=None, **atom_kw):
    atom_kw.setdefault("excited_splitting", mhz_to_rad(-63.4))
    return Model(
        LaserField(1, rabi * GAMMA, mhz_to_rad(detuning_mhz), b * GAMMA),
        LaserField(2, 1.12 * rabi * GAMMA, mhz_to_rad(detuning_mhz), b * GAMMA),
        AtomConfig(4, GAMMA, gamma_ground * GAMMA, **atom_kw),
        analysis_grid_mhz(freqs_mhz),
        doppler or DopplerSpec(),
    )


def random_model(rng, n_levels=3):
    """Parameters drawn inside the ranges explored by the figures."""
    rabi = rng.uniform(0.05, 3.0)
    kw = dict(
        rabi=rabi,
        b=rng.uniform(0.01, 0.5),
        gamma_ground=rng.uniform(0.005, 0.1),
    )
    if n_levels == 3:
        return three_level(detuning=rng.uniform(-4, 4), detuning2=rng.uniform(-4, 4),
                           ratio=rng.uniform(0.5, 2.0), b2=rng.uniform(0.01, 0.5), **kw)
    return four_level(detuning_mhz=rng.uniform(-60, 60), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
