import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pitchpos.camera import CameraPose, pose_to_homography
from pitchpos.field import standard_field

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, name, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {name}: {detail}")


@pytest.fixture(scope="session")
def template():
    return standard_field()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose(rng):
    return CameraPose(rng.normal(52, 2), rng.normal(-45, 6), rng.uniform(10, 25), rng.uniform(1500, 5000),
                      rng.uniform(-35, 35), rng.uniform(-15, -5))


def random_homography(rng):
    return pose_to_homography(random_pose(rng))
