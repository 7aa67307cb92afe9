import numpy as np
import pytest

from gpi_isac import PathProfile, SystemConfig, UlaArray, generate_channel_set

SCENE_TARGET = ((np.pi / 6, 1.0),)
SCENE_CLUTTER = ((-np.pi / 3, 1.0), (-np.pi / 8, 1.0), (np.pi / 3, 1.0))
MASK_CENTERS = (-np.pi / 4, 0.0, np.pi / 4)


def random_instance(rng, n, k, m, kappa=0.3, snr_db=20.0):
    """Random system with multipath users: returns (cfg, array, chset)."""
    cfg = SystemConfig.from_snr_db(n, k, m, snr_db)
    array = UlaArray(n)
    profiles = [PathProfile.random(rng) for _ in range(k)]
    chset = generate_channel_set(profiles, array, kappa, rng)
    return cfg, array, chset


def random_unit(rng, size):
    f = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return f / np.linalg.norm(f)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report(criterion, title, passed, detail=""):
    """Record and print one acceptance line."""
    line = f"criterion {criterion:<4} {'PASS' if passed else 'FAIL'}  {title}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
