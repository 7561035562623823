"""Shared fixtures: the full tracking stack at two control rates.

The admissible sets are disk-cached under tests/_cache keyed by the
constraint provenance hash; the first run on a fresh checkout builds
them (the fine-rate set takes a few minutes on one core), later runs
load instantly.
"""

from pathlib import Path

import numpy as np
import pytest

from visgov.constraints import build_poly_constraints
from visgov.geometry import CameraModel, tighten_fov_sound
from visgov.moas import MoasConfig, load_or_construct
from visgov.plant import build_closed_loop
from visgov.trig import trig_approx

CACHE_DIR = Path(__file__).parent / "_cache"

# Measured values the acceptance tests want surfaced (set sizes, timing,
# worst margins). Printed as a terminal section so they are visible in a
# plain `pytest -v` run, where per-test stdout is captured.
ACCEPTANCE_REPORT: list = []


def pytest_terminal_summary(terminalreporter):
    # the tests import this module as tests.conftest, which may be a
    # separate instance from the conftest pytest loaded; read the list
    # they actually appended to
    from tests.conftest import ACCEPTANCE_REPORT as lines

    if lines:
        terminalreporter.section("acceptance report")
        for line in lines:
            terminalreporter.write_line(line)


class TrackingStack:
    """Bundle of the pieces a governed run needs."""

    def __init__(self, ts: float, epsilon: float):
        self.cam = CameraModel(alpha_h=np.radians(45), alpha_v=np.radians(35), eps_z=0.1)
        self.approx = trig_approx(source="table")
        self.fov = tighten_fov_sound(self.cam, self.approx, np.radians(4), np.radians(4))
        self.plant = build_closed_loop(Ts=ts)
        self.constraints = build_poly_constraints(
            self.fov, self.approx, self.plant, eps_z=self.cam.eps_z
        )
        self.moas = load_or_construct(
            CACHE_DIR,
            self.constraints.lifted,
            self.constraints,
            MoasConfig(epsilon=epsilon),
        )


@pytest.fixture(scope="session")
def quad_coarse():
    """Tracking stack at a 0.1 s control period; builds in well under a
    minute, used by loop-logic tests that do not need the production rate."""
    return TrackingStack(ts=0.1, epsilon=0.01)


@pytest.fixture(scope="session")
def quad():
    """Production stack: 0.01 s control period, epsilon 0.01."""
    return TrackingStack(ts=0.01, epsilon=0.01)
