import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from structacoustics.geometry import build_geometry
from structacoustics.nonlinearity import DampingProfile, ModelParams

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def geom16():
    return build_geometry("reduced-2D", 16)


@pytest.fixture(scope="session")
def geom12():
    return build_geometry("reduced-2D", 12)


@pytest.fixture(scope="session")
def geom3d():
    return build_geometry("full-3D", 9)


@pytest.fixture
def linear_params():
    return ModelParams()


@pytest.fixture
def cubic_params():
    cubic = DampingProfile(3.0, 3.0, 1.0)
    return ModelParams(p=3.0, q=3.0, damping_u=cubic, damping_w=cubic)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_pair(geom, rng, amp=1.0):
    """Random smooth packed vectors (two stiffness solves applied to noise)."""
    from scipy.sparse.linalg import spsolve
    u = rng.standard_normal(geom.n_u)
    w = rng.standard_normal(geom.n_w)
    for _ in range(2):
        u = spsolve(geom.stiffness_u.tocsc(), geom.weights_u * u)
        w = spsolve(geom.stiffness_w.tocsc(), geom.weights_w * w)
    u *= amp / np.abs(u).max()
    w *= amp / np.abs(w).max()
    return u, w


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
