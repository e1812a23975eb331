import pytest

from eploop.spectral import build_spectral_frame
from eploop.system import SystemParams, circular_loop


@pytest.fixture(scope="session")
def sysp():
    return SystemParams.from_gamma(1.0)


@pytest.fixture(scope="session")
def fig2_loop(sysp):
    """Reference loop: Gamma*t_f = 50, r0 = Gamma/2, alpha = 0, clockwise."""
    return circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=50.0)


@pytest.fixture(scope="session")
def fig2_frame(fig2_loop, sysp):
    return build_spectral_frame(fig2_loop, sysp)


@pytest.fixture(scope="session")
def fig2_loop_ccw(sysp):
    return circular_loop(sysp, r0=0.5, alpha=0.0, s=-1, t_f=50.0)


@pytest.fixture(scope="session")
def fig2_frame_ccw(fig2_loop_ccw, sysp):
    return build_spectral_frame(fig2_loop_ccw, sysp)


@pytest.fixture(scope="session")
def fig3_loop(sysp):
    """Short loop used for the control problem: Gamma*t_f = 10."""
    return circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0)


@pytest.fixture(scope="session")
def fig3_frame(fig3_loop, sysp):
    return build_spectral_frame(fig3_loop, sysp)
