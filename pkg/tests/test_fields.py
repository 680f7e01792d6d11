import numpy as np
import pytest
import sympy as sp

from obstaclelab import fields
from obstaclelab.errors import GridTooSmall, OutOfDomain, ScaleOutOfDomain
from obstaclelab.sphere import make_rule

H = 1.0 / 64
SADDLE = np.diag([2.0, -1.0])


def grid_of(field, h=H, n=2):
    return fields.sample_field(field, n, fields.grid_nodes(n, h), h)


def random_interior(rng, k, n=2, radius=1.0):
    p = rng.normal(size=(k, n))
    p /= np.linalg.norm(p, axis=1)[:, None]
    return p * radius * rng.uniform(0, 1, size=(k, 1)) ** (1 / n)


class TestAnalytic:
    def test_eval(self):
        assert fields.quadratic(np.diag([1.0, 0.0])).eval([0.3, 0.7]) == pytest.approx(0.045)
        assert fields.half_space([1.0, 0.0]).eval([-0.5, 0.2]) == 0.0

    def test_grad(self):
        np.testing.assert_array_equal(fields.quadratic(SADDLE).grad([1.0, 1.0]), [2.0, -1.0])
        hs = fields.half_space([1.0, 0.0])
        np.testing.assert_array_equal(hs.grad([0.5, 0.0]), [0.5, 0.0])
        np.testing.assert_array_equal(hs.grad([-0.5, 0.0]), [0.0, 0.0])

    def test_perturbed_grad_matches_finite_difference(self):
        u = fields.perturbed_quadratic(SADDLE, 0.3)
        x = np.array([0.31, -0.47])
        step = 1e-6
        fd = [(u.eval(x + step * e) - u.eval(x - step * e)) / (2 * step) for e in np.eye(2)]
        np.testing.assert_allclose(u.grad(x), fd, atol=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            fields.half_space([1.0, 1.0])
        with pytest.raises(Exception):
            fields.quadratic(np.eye(2))


class TestGridField:
    def test_geometry(self):
        g = grid_of(fields.quadratic(np.diag([1.0, 0.0])))
        assert g.m == 161 and g.L == 1.25
        assert g.axis()[80] == 0.0

    def test_interpolation_error_bound(self):
        u = fields.quadratic(np.diag([1.0, 0.0]))
        g = grid_of(u)
        pts = random_interior(np.random.default_rng(0), 2000)
        err = np.abs(g.eval(pts) - u.eval(pts)).max()
        assert err <= 2 * H * H
        # exact bilinear error for 1/2 x1^2 is h^2 theta(1-theta)/2 <= h^2/8
        assert err <= H * H / 8 * (1 + 1e-9)

    def test_grid_gradient_on_quadratic(self):
        u = fields.quadratic(SADDLE)
        g = grid_of(u)
        pts = random_interior(np.random.default_rng(1), 200)
        np.testing.assert_allclose(g.grad(pts), u.grad(pts), atol=1e-12)

    def test_out_of_domain(self):
        g = grid_of(fields.quadratic(SADDLE))
        with pytest.raises(OutOfDomain):
            g.eval([1.3, 0.0])
        with pytest.raises(OutOfDomain):
            g.grad([1.25, 0.0])
        assert g.eval([1.25, -1.25]) == pytest.approx(fields.quadratic(SADDLE).eval([1.25, -1.25]))

    @pytest.mark.parametrize(
        "field",
        [fields.quadratic(SADDLE), fields.perturbed_quadratic(SADDLE, 0.1),
         fields.half_space([0.6, 0.8])],
    )
    def test_interpolation_order(self, field):
        pts = random_interior(np.random.default_rng(2), 4000)
        errs = []
        for h in (1 / 16, 1 / 32, 1 / 64):
            errs.append(np.abs(grid_of(field, h).eval(pts) - field.eval(pts)).max())
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert orders.min() >= 1.9

    def test_file_round_trip(self, tmp_path):
        g = grid_of(fields.perturbed_quadratic(SADDLE, 0.1), 1 / 16)
        fields.write_field(tmp_path / "f.fld", g)
        back = fields.read_field(tmp_path / "f.fld")
        assert (back.n, back.m, back.h) == (g.n, g.m, g.h)
        np.testing.assert_array_equal(back.values, g.values)
        fields.write_field(tmp_path / "g.fld", back)
        assert (tmp_path / "f.fld").read_bytes() == (tmp_path / "g.fld").read_bytes()

    def test_3d_grid(self):
        a = np.diag([0.5, 0.3, 0.2])
        u = fields.quadratic(a)
        g = fields.sample_field(u, 3, fields.grid_nodes(3, 1 / 8), 1 / 8)
        pts = random_interior(np.random.default_rng(4), 300, n=3)
        assert np.abs(g.eval(pts) - u.eval(pts)).max() <= (1 / 8) ** 2 / 8 * 3


class TestRescale:
    def test_homogeneous_fixed_points(self):
        pts = random_interior(np.random.default_rng(5), 100)
        for u in (fields.quadratic(SADDLE), fields.half_space([1.0, 0.0])):
            for r in (0.25, 0.5, 2.0):
                np.testing.assert_allclose(fields.rescale(u, [0, 0], r).eval(pts), u.eval(pts),
                                           atol=1e-13)

    def test_perturbed_deviation_scales_with_r(self):
        eps, r = 0.1, 0.2
        u = fields.perturbed_quadratic(SADDLE, eps)
        view = fields.rescale(u, [0.0, 0.0], r)
        pts = random_interior(np.random.default_rng(6), 3000)
        dev = np.abs(view.eval(pts) - fields.quadratic(SADDLE).eval(pts)).max()
        assert dev <= eps * r * 2**1.5
        assert dev >= 0.5 * eps * r  # |Re z^3| reaches ~1 near the unit circle

    def test_composition_analytic(self):
        rng = np.random.default_rng(8)
        u = fields.perturbed_quadratic(SADDLE, 0.2)
        pts = random_interior(rng, 50)
        for _ in range(20):
            x0 = rng.uniform(-0.5, 0.5, 2)
            r, s = rng.uniform(0.05, 1.0, 2)
            nested = fields.rescale(fields.rescale(u, x0, r), [0, 0], s)
            direct = fields.rescale(u, x0, r * s)
            np.testing.assert_allclose(nested.eval(pts), direct.eval(pts), rtol=1e-12, atol=1e-12)

    def test_composition_grid(self):
        rng = np.random.default_rng(9)
        g = grid_of(fields.perturbed_quadratic(SADDLE, 0.2))
        pts = random_interior(rng, 50)
        for _ in range(10):
            x0 = rng.uniform(-0.2, 0.2, 2)
            r, s = rng.uniform(0.2, 1.0, 2)
            nested = fields.rescale(fields.rescale(g, x0, r), [0, 0], s)
            direct = fields.rescale(g, x0, r * s)
            np.testing.assert_allclose(nested.eval(pts), direct.eval(pts), atol=1e-8)

    def test_gradient_scaling(self):
        u = fields.perturbed_quadratic(SADDLE, 0.2)
        v = fields.rescale(u, [0.1, 0.2], 0.5)
        x = np.array([0.3, -0.4])
        np.testing.assert_allclose(v.grad(x), u.grad([0.1 + 0.15, 0.2 - 0.2]) / 0.5)

    def test_scale_out_of_domain(self):
        g = grid_of(fields.quadratic(SADDLE))
        with pytest.raises(ScaleOutOfDomain):
            fields.rescale(g, [1.0, 0.0], 0.5)
        with pytest.raises(ValueError):
            fields.rescale(g, [0.0, 0.0], 0.0)


class TestSphereSamples:
    def test_isotropic(self):
        rule = make_rule(2, 32)
        vals = fields.sphere_samples(fields.quadratic(np.eye(2) / 2), [0, 0], 1.0, rule)
        np.testing.assert_allclose(vals, 0.25, atol=1e-15)

    def test_half_space(self):
        rule = make_rule(2, 32)
        vals = fields.sphere_samples(fields.half_space([1.0, 0.0]), [0, 0], 1.0, rule)
        np.testing.assert_allclose(vals, 0.5 * np.maximum(rule.nodes[:, 0], 0) ** 2, atol=1e-15)

    def test_grid_samples(self):
        rule = make_rule(2, 32)
        u = fields.quadratic(np.diag([1.0, 0.0]))
        g = grid_of(u)
        dev = np.abs(fields.sphere_samples(g, [0, 0], 1.0, rule)
                     - fields.sphere_samples(u, [0, 0], 1.0, rule)).max()
        assert dev <= 2 * H * H

    def test_out_of_domain(self):
        g = grid_of(fields.quadratic(SADDLE))
        with pytest.raises(OutOfDomain):
            fields.sphere_samples(g, [0.5, 0.0], 1.0, make_rule(2, 16))


class TestLaplacian:
    def interior(self, lap):
        return lap.values[lap.valid]

    def test_quadratic_exact(self):
        lap = fields.discrete_laplacian(grid_of(fields.quadratic(SADDLE)))
        assert not lap.valid[0, 5] and lap.valid[5, 5]
        assert np.abs(self.interior(lap) - 1.0).max() <= 1e-12 / H**2 * H**2 * 1e3

    def test_affine_zero(self):
        g = fields.GridField(2, 33, 1 / 16, np.zeros((33, 33)))
        x, y = g.coords()
        g = fields.GridField(2, 33, 1 / 16, 0.3 * x - 2.0 * y + 1.0)
        assert np.abs(self.interior(fields.discrete_laplacian(g))).max() <= 1e-11

    def test_harmonic_cubic_stencil_symbolic(self):
        x, y, h = sp.symbols("x y h")
        p = x**3 - 3 * x * y**2
        stencil = (p.subs(x, x + h) + p.subs(x, x - h) + p.subs(y, y + h) + p.subs(y, y - h)
                   - 4 * p) / h**2
        assert sp.simplify(stencil) == 0

    def test_perturbed_quadratic_exact(self):
        lap = fields.discrete_laplacian(grid_of(fields.perturbed_quadratic(SADDLE, 0.1)))
        assert np.abs(self.interior(lap) - 1.0).max() <= 1e-9

    def test_too_small(self):
        with pytest.raises(GridTooSmall):
            fields.discrete_laplacian(fields.GridField(2, 2, 2.0, np.zeros((2, 2))))
