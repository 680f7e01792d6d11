import time

import numpy as np
import pytest

from obstaclelab import fields, solver

H = 1.0 / 128

# wall time of the shared solves, charged to every acceptance criterion using them
SOLVE_SECONDS = {}


def random_trace_one(rng, n, scale=1.0):
    m = rng.normal(scale=scale, size=(n, n))
    m = 0.5 * (m + m.T)
    return m + (1.0 - np.trace(m)) / n * np.eye(n)


def random_qplus(rng, n):
    lam = rng.dirichlet(np.ones(n))
    rot, _ = np.linalg.qr(rng.normal(size=(n, n)))
    a = rot @ np.diag(lam) @ rot.T
    a = 0.5 * (a + a.T)
    return a + (1.0 - np.trace(a)) / n * np.eye(n)


@pytest.fixture(scope="session")
def half_x1_sq():
    return fields.quadratic(np.diag([1.0, 0.0]))


@pytest.fixture(scope="session")
def classical_128(half_x1_sq):
    """Classical solve with data 1/2 x1^2 at h = 1/128 (default SOR factor)."""
    m = fields.grid_nodes(2, H)
    t0 = time.perf_counter()
    out = solver.solve_classical(solver.ProblemSpec(2, m, H, half_x1_sq))
    SOLVE_SECONDS["classical_128"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def no_sign_saddle_128():
    q = fields.quadratic(np.diag([2.0, -1.0]))
    m = fields.grid_nodes(2, H)
    t0 = time.perf_counter()
    u, rep = solver.solve_no_sign(solver.ProblemSpec(2, m, H, q))
    SOLVE_SECONDS["no_sign_saddle_128"] = time.perf_counter() - t0
    return q, u, rep
