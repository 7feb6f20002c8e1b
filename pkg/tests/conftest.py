import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from starflow import starset as ss

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


def smooth_radii(c, amps, phases, M):
    """Trigonometric radius profile ``c + sum a_k cos(k theta + phi_k)``."""
    th = 2 * np.pi * np.arange(M) / M
    r = np.full(M, float(c))
    for k, (a, p) in enumerate(zip(amps, phases), start=1):
        r += a * np.cos((k + 1) * th + p)
    return r


def random_star(rng, M=128, c=(0.9, 1.3), amp=0.06, modes=3):
    """Smooth set comfortably inside the class with r0 = 0.3, R0 = 2."""
    return ss.RadialSet.from_radii(
        smooth_radii(rng.uniform(*c), rng.uniform(-amp, amp, modes), rng.uniform(0, 2 * np.pi, modes), M)
    )


@st.composite
def star_sets(draw, M=128, amp=0.06):
    seed = draw(st.integers(0, 2**31 - 1))
    return random_star(np.random.default_rng(seed), M=M, amp=amp)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
