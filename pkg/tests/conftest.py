"""Shared fixtures.  Expensive objects are session-scoped and built lazily."""

import time

import numpy as np
import pytest

from elasticsurf import forward as F
from elasticsurf import kernels as K

MEDIUM = K.ElasticMedium(1.0, 1.0, 15.0)
TIMINGS = {}          # wall-clock seconds of expensive fixtures
ACCEPTANCE = []       # one summary line per acceptance criterion
PARAMS = K.StressParams.for_medium(MEDIUM)


class Solved:
    """Factored truncated-surface system plus the pieces tests need."""

    def __init__(self, surface, geometry, node_count, **bie_overrides):
        self.surface = surface
        self.geometry = geometry
        self.bie = F.BIEConfig.default(MEDIUM, geometry, node_count=node_count, **bie_overrides)
        self.mesh = F.build_mesh(surface, self.bie)
        self.matrix = F.assemble_system(self.mesh, MEDIUM, PARAMS, self.bie.eta)
        self.system = F.FactoredSystem(self.matrix)

    def density(self, data):
        phi = self.system.solve(F.dirichlet_rhs(self.mesh, data))
        return F.DensitySolution(phi.reshape(-1, 2))


@pytest.fixture(scope="session")
def small_geometry():
    return F.MeasurementGeometry(2.0, 4.0, 20)


@pytest.fixture(scope="session")
def small_solved(small_geometry):
    return Solved(F.example3(), small_geometry, 512)


@pytest.fixture(scope="session")
def small_dataset(small_geometry):
    bie = F.BIEConfig.default(MEDIUM, small_geometry, node_count=512)
    return F.generate_dataset(F.example3(), small_geometry, MEDIUM, PARAMS, bie)


@pytest.fixture(scope="session")
def example3_dataset():
    """Full Example 3 data: H = 2, A = 20, N = 100, n = 2048, default truncation."""
    geo = F.MeasurementGeometry(2.0, 20.0, 100)
    bie = F.BIEConfig.default(MEDIUM, geo, node_count=2048)
    start = time.perf_counter()
    ds = F.generate_dataset(F.example3(), geo, MEDIUM, PARAMS, bie)
    TIMINGS["example3_dataset"] = time.perf_counter() - start
    return ds


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
