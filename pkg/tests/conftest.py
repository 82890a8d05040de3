import numpy as np
import pytest

from coulomb_formation import AbsoluteState, DesiredConfiguration, FormationModel, square_clf

SQUARE_MASSES = [100.0, 96.0, 130.0, 100.0]
SQUARE_POSITIONS = [[-100.0, -90.0], [-50.0, 30.0], [100.0, 60.0], [100.0, -60.0]]
SQUARE_XI_DES = [0.0, 150.0, 150.0, 150.0, 150.0, 0.0]


@pytest.fixture
def square_model():
    return FormationModel(SQUARE_MASSES, d=2)


@pytest.fixture
def square_desired():
    return DesiredConfiguration(SQUARE_XI_DES)


@pytest.fixture
def square_initial():
    return AbsoluteState.at_rest(SQUARE_POSITIONS)


@pytest.fixture
def square_P_clf():
    return square_clf()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_positions(rng, N, d, scale=60.0, min_sep=5.0):
    """Positions whose pairwise distances all exceed ``min_sep``."""
    while True:
        pos = rng.uniform(-scale, scale, size=(N, d))
        diff = pos[:, None] - pos[None]
        dist = np.sqrt((diff**2).sum(-1)) + np.eye(N) * 1e9
        if dist.min() > min_sep:
            return pos


def random_case(rng, N=None, d=None):
    """A random collision-free formation, desired configuration and error state."""
    N = int(rng.integers(2, 6)) if N is None else N
    d = int(rng.integers(1, 4)) if d is None else d
    model = FormationModel(rng.uniform(50, 150, size=N), d=d)
    des_pos = random_positions(rng, N, d)
    des = DesiredConfiguration((des_pos[1:] - des_pos[0]).ravel())
    pos = random_positions(rng, N, d)
    vel = rng.normal(scale=0.5, size=(N, d))
    return model, des, AbsoluteState(pos, vel)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
