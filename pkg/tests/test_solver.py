import numpy as np
import pytest

from obstaclelab import fields, solver
from obstaclelab.errors import NegativeBoundaryData
from obstaclelab.solver import ProblemSpec

from conftest import H

SADDLE = np.diag([2.0, -1.0])


def spec_for(g, h=1 / 32, n=2, **kw):
    return ProblemSpec(n, fields.grid_nodes(n, h), h, g, **kw)


def nodal_error(u, exact):
    pts = np.column_stack([c.ravel() for c in u.coords()])
    return np.abs(u.values.ravel() - exact.eval(pts)).max()


class TestProblemSpec:
    def test_defaults(self):
        s = spec_for(lambda p: np.zeros(len(p)))
        assert s.eps_u == (1 / 32) ** 2 and s.eps_g == 1 / 32 and s.sor_omega == 1.9

    @pytest.mark.parametrize("kw", [{"sor_omega": 2.0}, {"sor_omega": 0.0},
                                    {"tol_residual": 0.0}, {"eps_u": -1.0}, {"eps_g": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            spec_for(lambda p: np.zeros(len(p)), **kw)

    def test_optimal_omega(self):
        assert 1.9 < solver.optimal_omega(321) < 2.0
        assert solver.optimal_omega(3) == pytest.approx(1.0)


class TestClassical:
    def test_half_x1_sq(self, classical_128, half_x1_sq):
        u, rep = classical_128
        assert rep.converged and rep.residual <= 1e-8
        assert nodal_error(u, half_x1_sq) <= 5 * H * H
        assert np.all(u.values >= 0.0)

    def test_complementarity_invariant(self, classical_128):
        u, rep = classical_128
        inner = (slice(1, -1),) * 2
        lap = fields.laplacian_values(u.values, u.h)
        m = np.minimum(u.values[inner], 1.0 - lap)
        assert m.min() >= -1e-8 and m.max() <= u.values.max()
        assert solver.complementarity_residual(u) <= 1e-8

    def test_classical_solves_no_sign_equation(self, classical_128):
        u, _ = classical_128
        assert solver.residual_no_sign(u, H * H, H) <= 0.05

    def test_constant_one_no_contact(self):
        u, rep = solver.solve_classical(spec_for(lambda p: np.ones(len(p))))
        assert rep.converged and rep.coincidence_cells == 0
        assert np.all(u.values > 0)
        assert len(rep.free_boundary_cells) == 0

    def test_zero_data(self):
        u, rep = solver.solve_classical(spec_for(lambda p: np.zeros(len(p))))
        assert np.all(u.values == 0.0)
        assert rep.coincidence_cells == (u.m - 2) ** 2

    def test_negative_data(self):
        with pytest.raises(NegativeBoundaryData):
            solver.solve_classical(spec_for(fields.quadratic(SADDLE)))

    def test_not_converged_flag(self):
        u, rep = solver.solve_classical(spec_for(lambda p: np.ones(len(p)), max_sweeps=5))
        assert not rep.converged and rep.sweeps == 5 and rep.residual > 1e-8

    def test_deterministic(self):
        s = spec_for(fields.half_space([0.6, 0.8]))
        a, ra = solver.solve_classical(s)
        b, rb = solver.solve_classical(s)
        assert a.values.tobytes() == b.values.tobytes()
        assert ra.summary() == rb.summary()

    def test_three_dimensional_smoke(self):
        q = fields.quadratic(np.diag([1.0, 0.0, 0.0]))
        s = ProblemSpec(3, fields.grid_nodes(3, 1 / 8), 1 / 8, q, sor_omega=1.5)
        u, rep = solver.solve_classical(s)
        assert rep.converged
        assert nodal_error(u, q) <= 1e-8


class TestNoSign:
    def test_saddle(self, no_sign_saddle_128):
        q, u, rep = no_sign_saddle_128
        assert rep.converged
        assert nodal_error(u, q) <= 5 * H * H

    def test_half_space(self):
        hs = fields.half_space([1.0, 0.0])
        u, rep = solver.solve_no_sign(spec_for(hs, 1 / 64))
        assert rep.converged
        assert nodal_error(u, hs) <= 5 * (1 / 64) ** 2

    def test_zero_data_one_iteration(self):
        u, rep = solver.solve_no_sign(spec_for(lambda p: np.zeros(len(p))))
        assert rep.converged and rep.outer_iterations == 1
        assert np.all(u.values == 0.0)

    def test_report_summary(self, no_sign_saddle_128):
        _, _, rep = no_sign_saddle_128
        s = rep.summary()
        assert s["type"] == "summary" and s["mode"] == "no_sign"
        assert s["residual"] >= 0 and s["omega_sizes_tail"]
        assert all(h["type"] == "iteration" for h in rep.history)

    def test_exhausted_outer_loop_reports(self):
        s = spec_for(fields.quadratic(SADDLE), max_outer=1, max_sweeps=3)
        _, rep = solver.solve_no_sign(s)
        assert not rep.converged and rep.omega_sizes

    def test_deterministic(self):
        s = spec_for(fields.perturbed_quadratic(SADDLE, 0.1))
        a, _ = solver.solve_no_sign(s)
        b, _ = solver.solve_no_sign(s)
        assert a.values.tobytes() == b.values.tobytes()


class TestResidualNoSign:
    @pytest.mark.parametrize(
        "field",
        [fields.quadratic(SADDLE), fields.quadratic(np.diag([1.0, 0.0])),
         fields.half_space([1.0, 0.0]), fields.perturbed_quadratic(SADDLE, 0.1)],
    )
    def test_presets(self, field):
        g = fields.sample_field(field, 2, fields.grid_nodes(2, H), H)
        assert solver.residual_no_sign(g, H * H, H) <= 0.05

    def test_zero(self):
        g = fields.GridField(2, 17, 1 / 8, np.zeros((17, 17)))
        assert solver.residual_no_sign(g, 1e-4, 1e-4) == 0.0

    def test_detects_wrong_equation(self):
        # 1/2 |x|^2 has Laplacian 2 where chi = 1
        x, y = fields.GridField(2, 33, 1 / 16, np.zeros((33, 33))).coords()
        g = fields.GridField(2, 33, 1 / 16, 0.5 * (x * x + y * y))
        assert solver.residual_no_sign(g, 1e-6, 1e-6) == pytest.approx(1.0, abs=1e-9)


def test_free_boundary_cells_edge_rule():
    chi = np.zeros((5, 5), dtype=bool)
    chi[:, 3:] = True
    edge = solver.free_boundary_cells(chi)
    assert edge[:, 2].all() and edge[:, 3].all()
    assert not edge[:, [0, 1, 4]].any()
