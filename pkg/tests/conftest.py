import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from connprob.gaussian import Gaussian2, SpectralForm

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def spec_of(l1, l2, b1, b2) -> SpectralForm:
    return SpectralForm(np.array([l1, l2], dtype=float), np.eye(2), np.array([b1, b2], dtype=float))


def random_spd(rng, lo=0.05, hi=5.0) -> np.ndarray:
    """SPD matrix with eigenvalues uniform in [lo, hi] and a random rotation."""
    lam = rng.uniform(lo, hi, size=2)
    a = rng.uniform(0, np.pi)
    P = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    return P @ np.diag(lam) @ P.T


@st.composite
def valid_specs(draw, lam_lo=0.55, lam_hi=5.0, b_max=4.0):
    """Spectral forms with both eigenvalues above 1/2 (the series regime)."""
    l1 = draw(st.floats(lam_lo, lam_hi))
    l2 = draw(st.floats(lam_lo, lam_hi))
    b1 = draw(st.floats(-b_max, b_max))
    b2 = draw(st.floats(-b_max, b_max))
    return spec_of(max(l1, l2), min(l1, l2), b1, b2)


@st.composite
def gaussians(draw, lam_lo=0.05, lam_hi=5.0, mean_max=6.0):
    l1 = draw(st.floats(lam_lo, lam_hi))
    l2 = draw(st.floats(lam_lo, lam_hi))
    a = draw(st.floats(0.0, np.pi))
    P = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    mean = [draw(st.floats(-mean_max, mean_max)), draw(st.floats(-mean_max, mean_max))]
    return Gaussian2(mean, P @ np.diag([l1, l2]) @ P.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
