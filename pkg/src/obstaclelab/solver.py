"""Discrete obstacle-problem solvers on the grid cube.

``solve_classical`` is projected SOR for u >= 0, Lap_h u <= 1, u (1 - Lap_h u) = 0.
``solve_no_sign`` is an experimental fixed-point loop for Lap_h u = chi_Omega
with Omega = {u != 0 or grad u != 0}; it may fail to converge, and says so.
"""

from dataclasses import dataclass, field
import logging

import numba
import numpy as np
from scipy import ndimage

from .errors import NegativeBoundaryData
from .fields import GridField, central_gradient_norm, laplacian_values

log = logging.getLogger(__name__)


@numba.njit(cache=True)
def _sor_sweep(u, rhs_h2, interior, strides, omega, project):
    nd = strides.shape[0]
    two_n = 2.0 * nd
    for k in range(interior.shape[0]):
        i = interior[k]
        s = 0.0
        for d in range(nd):
            s += u[i + strides[d]] + u[i - strides[d]]
        gs = (s - rhs_h2[i]) / two_n
        new = u[i] + omega * (gs - u[i])
        if project and new < 0.0:
            new = 0.0
        u[i] = new


@numba.njit(cache=True)
def _residual(u, rhs, interior, strides, inv_h2, complementarity):
    nd = strides.shape[0]
    worst = 0.0
    for k in range(interior.shape[0]):
        i = interior[k]
        s = -2.0 * nd * u[i]
        for d in range(nd):
            s += u[i + strides[d]] + u[i - strides[d]]
        lap = s * inv_h2
        if complementarity:
            r = abs(min(u[i], rhs[i] - lap))
        else:
            r = abs(lap - rhs[i])
        if r > worst:
            worst = r
    return worst


@dataclass(frozen=True)
class ProblemSpec:
    """Grid, Dirichlet data and iteration controls.

    ``boundary`` is a field (anything with ``eval``) or a callable mapping a
    (k, n) array of points to k values; only its values on the cube boundary
    are used.  ``eps_u`` and ``eps_g`` default to h^2 and h.
    """

    n: int
    m: int
    h: float
    boundary: object
    max_sweeps: int = 100_000
    sor_omega: float = 1.9
    tol_residual: float = 1e-8
    eps_u: float = None
    eps_g: float = None
    max_outer: int = 200
    check_every: int = 10

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not 0.0 < self.sor_omega < 2.0:
            raise ValueError("sor_omega must lie in (0, 2)")
        if self.m < 3:
            raise ValueError("need at least 3 nodes per axis")
        if self.eps_u is None:
            object.__setattr__(self, "eps_u", self.h**2)
        if self.eps_g is None:
            object.__setattr__(self, "eps_g", self.h)
        if not (self.eps_u > 0 and self.eps_g > 0):
            raise ValueError("eps_u and eps_g must be positive")

    @property
    def L(self):
        return self.h * (self.m - 1) / 2.0


@dataclass
class SolveReport:
    mode: str
    converged: bool = False
    outer_iterations: int = 0
    sweeps: int = 0
    residual: float = float("inf")
    omega_changes: int = 0
    coincidence_cells: int = 0
    free_boundary_cells: np.ndarray = None
    omega_sizes: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def summary(self):
        fb = self.free_boundary_cells
        return {
            "type": "summary",
            "mode": self.mode,
            "converged": self.converged,
            "outer_iterations": self.outer_iterations,
            "sweeps": self.sweeps,
            "residual": self.residual,
            "omega_changes": self.omega_changes,
            "coincidence_cells": self.coincidence_cells,
            "free_boundary_count": 0 if fb is None else len(fb),
            "free_boundary_cells": [] if fb is None else fb.tolist(),
            "omega_sizes_tail": self.omega_sizes[-10:],
        }


def optimal_omega(m):
    """Model-problem optimal SOR factor for m nodes per axis."""
    return 2.0 / (1.0 + np.sin(np.pi / (m - 1)))


class _Grid:
    """Flat-index bookkeeping shared by the sweeps."""

    def __init__(self, spec):
        self.shape = (spec.m,) * spec.n
        mask = np.zeros(self.shape, dtype=bool)
        mask[(slice(1, -1),) * spec.n] = True
        self.interior_mask = mask
        self.interior = np.flatnonzero(mask).astype(np.int64)
        self.strides = np.array(
            [spec.m ** (spec.n - 1 - d) for d in range(spec.n)], dtype=np.int64
        )


def _boundary_values(spec):
    g = GridField(spec.n, spec.m, spec.h, np.zeros((spec.m,) * spec.n))
    pts = np.column_stack([c.ravel() for c in g.coords()])
    f = spec.boundary.eval if hasattr(spec.boundary, "eval") else spec.boundary
    vals = np.asarray(f(pts), dtype=float).reshape(g.values.shape)
    u = np.zeros_like(vals)
    grid = _Grid(spec)
    u[~grid.interior_mask] = vals[~grid.interior_mask]
    return u, grid


def _sor_solve(spec, grid, u, rhs, project, tol, nodes=None):
    """In-place SOR on flat ``u`` over ``nodes`` (default: all interior nodes)
    until the residual there drops to ``tol``."""
    nodes = grid.interior if nodes is None else nodes
    rhs_h2 = rhs * spec.h**2
    inv_h2 = 1.0 / spec.h**2
    sweeps = 0
    res = _residual(u, rhs, nodes, grid.strides, inv_h2, project)
    while res > tol and sweeps < spec.max_sweeps:
        for _ in range(min(spec.check_every, spec.max_sweeps - sweeps)):
            _sor_sweep(u, rhs_h2, nodes, grid.strides, spec.sor_omega, project)
            sweeps += 1
        res = _residual(u, rhs, nodes, grid.strides, inv_h2, project)
    return sweeps, res


def coincidence_indicator(u, h, eps_u, eps_g):
    """Interior nodes with |u| <= eps_u and |grad_h u| <= eps_g (raw contact set)."""
    inner = (slice(1, -1),) * u.ndim
    return (np.abs(u[inner]) <= eps_u) & (central_gradient_norm(u, h) <= eps_g)


def contact_set(u, h, eps_u, eps_g):
    """Coincidence nodes used by the fixed-point solver, as a full-grid mask.

    Only contact nodes whose whole stencil also lies in the raw contact set
    count; isolated or lower-dimensional contact has measure zero and does not
    switch the right-hand side off.  Boundary nodes count as contact when
    |u| <= eps_u.  Boundary nodes are never returned.
    """
    contact = np.abs(u) <= eps_u
    inner = (slice(1, -1),) * u.ndim
    contact[inner] &= central_gradient_norm(u, h) <= eps_g
    cross = ndimage.generate_binary_structure(u.ndim, 1)
    solid = ndimage.binary_erosion(contact, structure=cross, border_value=1)
    outer = np.ones(u.shape, dtype=bool)
    outer[inner] = False
    solid[outer] = False
    return solid


def free_boundary_cells(chi_inner):
    """Mask of nodes whose indicator differs from a neighbour's along a grid edge."""
    n = chi_inner.ndim
    edge = np.zeros(chi_inner.shape, dtype=bool)
    for d in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[d] = slice(None, -1)
        hi[d] = slice(1, None)
        diff = chi_inner[tuple(lo)] != chi_inner[tuple(hi)]
        edge[tuple(lo)] |= diff
        edge[tuple(hi)] |= diff
    return edge


def _free_boundary_list(edge):
    return np.argwhere(edge) + 1


def _finish(spec, grid, u, report):
    uu = u.reshape(grid.shape)
    raw = coincidence_indicator(uu, spec.h, spec.eps_u, spec.eps_g)
    report.coincidence_cells = int(raw.sum())
    report.free_boundary_cells = _free_boundary_list(free_boundary_cells(~raw))
    return GridField(spec.n, spec.m, spec.h, uu)


def solve_classical(spec):
    """Projected SOR for the classical obstacle problem with zero obstacle.

    Returns (GridField, SolveReport); on exhausted sweeps the last iterate is
    returned with ``converged=False``.
    """
    u, grid = _boundary_values(spec)
    if np.any(u[~grid.interior_mask] < 0.0):
        raise NegativeBoundaryData("classical obstacle problem needs g >= 0")
    flat = u.ravel()
    rhs = np.ones_like(flat)
    sweeps, res = _sor_solve(spec, grid, flat, rhs, True, spec.tol_residual)
    report = SolveReport("classical", converged=res <= spec.tol_residual, outer_iterations=1,
                         sweeps=sweeps, residual=float(res))
    report.history.append({"type": "iteration", "outer": 1, "sweeps": sweeps,
                           "residual": float(res)})
    out = _finish(spec, grid, flat, report)
    if not report.converged:
        log.warning("projected SOR stopped after %d sweeps, residual %.3e", sweeps, res)
    return out, report


def solve_no_sign(spec):
    """Fixed-point iteration for Lap_h u = chi_Omega with a self-consistent Omega.

    Each outer step freezes the coincidence set K = {u = |grad u| = 0} of the
    current iterate, pins u = 0 on K and solves Lap_h u = 1 elsewhere by SOR;
    it stops when K reproduces itself.  Nonnegative data starts from the
    classical solution, other data from K empty.  Convergence is not
    guaranteed; the report carries the Omega-set sizes of the iterations.
    """
    u, grid = _boundary_values(spec)
    flat = u.ravel()
    sweeps = 0
    if np.all(u[~grid.interior_mask] >= 0.0):
        sweeps, _ = _sor_solve(spec, grid, flat, np.ones_like(flat), True, spec.tol_residual)
        pinned = contact_set(flat.reshape(grid.shape), spec.h, spec.eps_u, spec.eps_g)
    else:
        pinned = np.zeros(grid.shape, dtype=bool)
    report = SolveReport("no_sign", sweeps=sweeps)
    rhs = np.ones_like(flat)
    for k in range(1, spec.max_outer + 1):
        active = grid.interior[~pinned.ravel()[grid.interior]]
        flat[pinned.ravel()] = 0.0
        s, res = _sor_solve(spec, grid, flat, rhs, False, spec.tol_residual, active)
        report.sweeps += s
        new_pinned = contact_set(flat.reshape(grid.shape), spec.h, spec.eps_u, spec.eps_g)
        changes = int(np.count_nonzero(new_pinned != pinned))
        size = int(len(active))
        report.outer_iterations = k
        report.residual = float(res)
        report.omega_changes = changes
        report.omega_sizes.append(size)
        report.history.append({"type": "iteration", "outer": k, "sweeps": s,
                               "residual": float(res), "omega_size": size,
                               "omega_changes": changes})
        pinned = new_pinned
        if changes == 0 and res <= spec.tol_residual:
            report.converged = True
            break
    if not report.converged:
        log.warning("no-sign iteration did not settle; last Omega sizes %s",
                    report.omega_sizes[-10:])
    return _finish(spec, grid, flat, report), report


def residual_no_sign(u, eps_u, eps_g):
    """max |Lap_h u - chi| over interior nodes at graph distance >= 2 from the
    discrete free boundary, chi being the raw threshold indicator."""
    vals = u.values
    chi = (~coincidence_indicator(vals, u.h, eps_u, eps_g)).astype(float)
    lap = laplacian_values(vals, u.h)
    edge = free_boundary_cells(chi.astype(bool))
    cross = ndimage.generate_binary_structure(u.n, 1)
    band = ndimage.binary_dilation(edge, structure=cross)
    keep = ~band
    if not keep.any():
        return 0.0
    return float(np.abs(lap - chi)[keep].max())


def complementarity_residual(u):
    """max |min(u, 1 - Lap_h u)| over interior nodes."""
    inner = (slice(1, -1),) * u.n
    lap = laplacian_values(u.values, u.h)
    return float(np.abs(np.minimum(u.values[inner], 1.0 - lap)).max())
