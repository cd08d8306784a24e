import numpy as np
import pytest

from textonloc.config import RunConfig
from textonloc.simulator.camera import CameraModel
from textonloc.simulator.pipeline import build_environment

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def check(number, title, ok, detail):
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


SMALL_CAMERA = CameraModel(out_width=160, out_height=120, footprint_width=1.0)


@pytest.fixture(scope="session")
def small_env():
    """A 3x3 m floor seen through a 160x120 camera; builds in seconds."""
    cfg = RunConfig(training_frames=150, test_frames=60)
    return build_environment(cfg, SMALL_CAMERA, meters_per_pixel=0.01, size=(3.0, 3.0),
                             dictionary_images=20, patches_per_image=200, epochs=3)


@pytest.fixture(scope="session")
def default_env():
    """Reference-size environment: 5x5 m floor, 640x480 frames, 800 map frames."""
    return build_environment(RunConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
