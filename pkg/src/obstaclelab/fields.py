"""Scalar fields on a cube [-L, L]^n containing the unit ball.

Grid fields hold nodal values and are read by multilinear interpolation;
analytic presets evaluate in closed form.  ``rescale`` produces the blowup
view x -> u(x0 + r x) / r^2.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    GridTooSmall,
    NonFiniteSample,
    OutOfDomain,
    ScaleOutOfDomain,
    UnsupportedDimension,
)
from .quadratic_forms import QuadraticBlowup, eval_q, make_quadratic

DEFAULT_HALF_WIDTH = 1.25


def _points(x, n):
    """Return (pts, single) with pts shaped (k, n)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(1, -1) if single else x
    if pts.shape[1] != n:
        raise OutOfDomain(f"point dimension {pts.shape[1]} != field dimension {n}")
    if not np.all(np.isfinite(pts)):
        raise OutOfDomain("non-finite point")
    return pts, single


def _out(vals, single):
    return float(vals[0]) if single else vals


@dataclass(frozen=True, eq=False)
class GridField:
    """Nodal values on a uniform grid with m nodes per axis and spacing h.

    Node i along each axis sits at -L + i*h with L = h*(m-1)/2.  ``valid`` marks
    nodes carrying meaningful values (derived fields blank their boundary).
    """

    n: int
    m: int
    h: float
    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        if self.n not in (2, 3):
            raise UnsupportedDimension(f"grid dimension {self.n} not supported")
        vals = np.array(self.values, dtype=float).reshape((self.m,) * self.n)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteSample("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.valid is not None:
            mask = np.array(self.valid, dtype=bool).reshape(vals.shape)
            mask.setflags(write=False)
            object.__setattr__(self, "valid", mask)

    @property
    def L(self):
        return self.h * (self.m - 1) / 2.0

    @property
    def resolution_length(self):
        return self.h

    def axis(self):
        return -self.L + self.h * np.arange(self.m)

    def coords(self):
        """Node coordinates as a list of n broadcastable arrays (ij indexing)."""
        return np.meshgrid(*([self.axis()] * self.n), indexing="ij")

    def contains(self, x, margin=0.0):
        pts, _ = _points(x, self.n)
        lim = self.L - margin + 1e-12 * self.L
        return bool(np.all(np.abs(pts) <= lim))

    def ball_inside(self, x0, r):
        x0 = np.asarray(x0, dtype=float)
        return bool(np.all(np.abs(x0) + r <= self.L * (1 + 1e-12)))

    def eval(self, x):
        pts, single = _points(x, self.n)
        if not self.contains(pts):
            raise OutOfDomain("point outside the grid cube")
        s = (pts + self.L) / self.h
        idx = np.clip(np.floor(s).astype(np.int64), 0, self.m - 2)
        frac = s - idx
        out = np.zeros(len(pts))
        for corner in np.ndindex(*([2] * self.n)):
            w = np.ones(len(pts))
            for d, c in enumerate(corner):
                w *= frac[:, d] if c else 1.0 - frac[:, d]
            out += w * self.values[tuple(idx[:, d] + corner[d] for d in range(self.n))]
        return _out(out, single)

    def grad(self, x):
        """Central differences of the interpolant with step h."""
        pts, single = _points(x, self.n)
        if not self.contains(pts, margin=self.h):
            raise OutOfDomain("gradient needs points at least h inside the grid")
        g = np.empty_like(pts)
        for d in range(self.n):
            step = np.zeros(self.n)
            step[d] = self.h
            g[:, d] = (self.eval(pts + step) - self.eval(pts - step)) / (2.0 * self.h)
        return g[0] if single else g


class _Analytic:
    resolution_length = 0.0

    def contains(self, x, margin=0.0):
        return True

    def ball_inside(self, x0, r):
        return True


@dataclass(frozen=True)
class QuadraticField(_Analytic):
    """u(x) = 1/2 x.Ax."""

    q: QuadraticBlowup

    @property
    def n(self):
        return self.q.n

    def eval(self, x):
        pts, single = _points(x, self.n)
        return _out(eval_q(self.q, pts), single)

    def grad(self, x):
        pts, single = _points(x, self.n)
        g = pts @ self.q.mat
        return g[0] if single else g


@dataclass(frozen=True)
class HalfSpaceField(_Analytic):
    """u(x) = 1/2 ((x.e)^+)^2."""

    e: np.ndarray

    def __post_init__(self):
        e = np.array(self.e, dtype=float)
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("half-space direction must be a unit vector")
        e.setflags(write=False)
        object.__setattr__(self, "e", e)

    @property
    def n(self):
        return len(self.e)

    def eval(self, x):
        pts, single = _points(x, self.n)
        s = np.maximum(pts @ self.e, 0.0)
        return _out(0.5 * s * s, single)

    def grad(self, x):
        pts, single = _points(x, self.n)
        g = np.maximum(pts @ self.e, 0.0)[:, None] * self.e
        return g[0] if single else g


@dataclass(frozen=True)
class PerturbedQuadraticField(_Analytic):
    """u(x) = 1/2 x.Ax + eps Re((x1 + i x2)^3), planar only.

    The cubic is harmonic, so the Laplacian is Tr A = 1 everywhere and the
    blowup at the origin is exactly 1/2 x.Ax.
    """

    q: QuadraticBlowup
    eps: float

    def __post_init__(self):
        if self.q.n != 2:
            raise UnsupportedDimension("perturbed_quadratic is defined for n=2")

    @property
    def n(self):
        return 2

    def eval(self, x):
        pts, single = _points(x, 2)
        x1, x2 = pts[:, 0], pts[:, 1]
        return _out(eval_q(self.q, pts) + self.eps * (x1**3 - 3.0 * x1 * x2**2), single)

    def grad(self, x):
        pts, single = _points(x, 2)
        x1, x2 = pts[:, 0], pts[:, 1]
        g = pts @ self.q.mat
        g[:, 0] += self.eps * 3.0 * (x1**2 - x2**2)
        g[:, 1] += self.eps * (-6.0 * x1 * x2)
        return g[0] if single else g


def quadratic(a):
    return QuadraticField(a if isinstance(a, QuadraticBlowup) else make_quadratic(a))


def half_space(e):
    return HalfSpaceField(e)


def perturbed_quadratic(a, eps):
    q = a if isinstance(a, QuadraticBlowup) else make_quadratic(a)
    return PerturbedQuadraticField(q, float(eps))


@dataclass(frozen=True)
class FieldView:
    """The rescaled field x -> base(x0 + r x) / r^2."""

    base: object
    x0: np.ndarray
    r: float

    @property
    def n(self):
        return self.base.n

    @property
    def resolution_length(self):
        return self.base.resolution_length / self.r

    def _map(self, x):
        pts, single = _points(x, self.n)
        return self.x0 + self.r * pts, single

    def contains(self, x, margin=0.0):
        pts, _ = self._map(x)
        return self.base.contains(pts, margin * self.r)

    def ball_inside(self, x0, r):
        return self.base.ball_inside(self.x0 + self.r * np.asarray(x0, float), self.r * r)

    def eval(self, x):
        pts, single = self._map(x)
        return _out(np.atleast_1d(self.base.eval(pts)) / self.r**2, single)

    def grad(self, x):
        pts, single = self._map(x)
        g = np.atleast_2d(self.base.grad(pts)) / self.r
        return g[0] if single else g


def rescale(field, x0, r):
    """u_{x0,r}(x) = u(x0 + r x) / r^2, viewed lazily.

    Rescaling a view composes into a single view of the base field.
    """
    if not r > 0:
        raise ValueError("scale must be positive")
    x0 = np.asarray(x0, dtype=float)
    if len(x0) != field.n:
        raise OutOfDomain("center dimension does not match field")
    if not field.ball_inside(x0, r):
        raise ScaleOutOfDomain(f"ball of radius {r!r} around {x0.tolist()} leaves the domain")
    if isinstance(field, FieldView):
        return FieldView(field.base, field.x0 + field.r * x0, field.r * r)
    x0 = x0.copy()
    x0.setflags(write=False)
    return FieldView(field, x0, float(r))


def sphere_samples(field, x0, r, rule):
    """Values of ``field`` at x0 + r*node for each node of ``rule``."""
    pts = np.asarray(x0, dtype=float) + r * rule.nodes
    if not field.contains(pts):
        raise OutOfDomain("sphere leaves the field domain")
    vals = np.atleast_1d(field.eval(pts))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("non-finite field sample")
    return vals


def grid_nodes(n, h, half_width=DEFAULT_HALF_WIDTH):
    """Nodes per axis for spacing h covering [-half_width, half_width]."""
    m = int(round(2.0 * half_width / h)) + 1
    if abs((m - 1) * h - 2.0 * half_width) > 1e-9 * half_width:
        raise ValueError(f"spacing {h!r} does not divide the cube width {2 * half_width!r}")
    return m


def sample_field(field, n, m, h):
    """GridField holding the nodal values of an analytic field."""
    g = GridField(n, m, h, np.zeros((m,) * n))
    pts = np.column_stack([c.ravel() for c in g.coords()])
    return GridField(n, m, h, np.asarray(field.eval(pts)).reshape((m,) * n))


def _interior(n):
    return (slice(1, -1),) * n


def _shifted(n, d, k):
    sl = [slice(1, -1)] * n
    sl[d] = slice(1 + k, (-1 + k) or None)
    return tuple(sl)


def laplacian_values(u, h):
    """(sum of neighbours - 2n*centre)/h^2 at interior nodes of array ``u``."""
    n = u.ndim
    c = u[_interior(n)]
    acc = -2.0 * n * c
    for d in range(n):
        acc = acc + u[_shifted(n, d, 1)] + u[_shifted(n, d, -1)]
    return acc / (h * h)


def central_gradient_norm(u, h):
    """|grad_h u| by central differences at interior nodes of array ``u``."""
    n = u.ndim
    sq = np.zeros(tuple(s - 2 for s in u.shape))
    for d in range(n):
        g = (u[_shifted(n, d, 1)] - u[_shifted(n, d, -1)]) / (2.0 * h)
        sq += g * g
    return np.sqrt(sq)


def discrete_laplacian(g):
    """Standard (2n+1)-point Laplacian; boundary nodes are marked invalid."""
    if g.m < 3:
        raise GridTooSmall("need at least 3 nodes per axis")
    out = np.zeros_like(g.values)
    out[_interior(g.n)] = laplacian_values(g.values, g.h)
    valid = np.zeros(out.shape, dtype=bool)
    valid[_interior(g.n)] = True
    return GridField(g.n, g.m, g.h, out, valid)


def write_field(path, g):
    """Text format: 'n m h' header, then m^n values, last axis fastest."""
    rows = g.values.reshape(-1, g.m)
    lines = [f"{g.n} {g.m} {g.h:.17g}"]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path):
    tokens = Path(path).read_text().split()
    try:
        n, m, h = int(tokens[0]), int(tokens[1]), float(tokens[2])
        vals = np.array([float(t) for t in tokens[3:]])
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed field file {path}: {exc}") from None
    if len(vals) != m**n:
        raise ConfigError(f"field file {path}: expected {m**n} values, found {len(vals)}")
    return GridField(n, m, h, vals.reshape((m,) * n))
