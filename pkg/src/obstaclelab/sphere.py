"""Quadrature on spheres and exact low-degree monomial moments.

Two rule families are provided: equally spaced angles on the circle and a
Gauss-Legendre (polar cosine) times uniform (azimuth) product rule on S^2.
Both integrate the degree-4 integrands used by the lab exactly.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import NonFiniteSample, ResolutionTooLow, UnsupportedDimension

DEFAULT_RESOLUTION = 32


@dataclass(frozen=True)
class SphereRule:
    """Nodes on the unit sphere and positive surface-measure weights."""

    n: int
    nodes: np.ndarray  # (k, n)
    weights: np.ndarray  # (k,)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class MomentTable:
    """Unit-sphere integrals of 1, x_i^2, x_i^4 and x_i^2 x_j^2 (i != j)."""

    n: int
    omega: float
    S2: float
    S4: float
    S22: float

    def as_dict(self):
        return {"omega": self.omega, "S2": self.S2, "S4": self.S4, "S22": self.S22}


def _check_dim(n):
    if n not in (2, 3):
        raise UnsupportedDimension(f"dimension {n} not supported (use 2 or 3)")


def make_rule(n, resolution=DEFAULT_RESOLUTION):
    """Build a quadrature rule on the unit sphere in R^n.

    For n=2 the rule has ``resolution`` equally spaced angles and is exact for
    trigonometric polynomials of degree < resolution. For n=3 it is the product
    of ``resolution`` Gauss-Legendre points in cos(theta) and ``2*resolution``
    uniform azimuths, exact for polynomials of degree <= 2*resolution - 1.
    """
    _check_dim(n)
    # at least 8 azimuths on the equator in either dimension
    low = 8 if n == 2 else 4
    if resolution < low:
        raise ResolutionTooLow(f"resolution {resolution} < {low} for n={n}")
    if n == 2:
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(resolution, 2.0 * np.pi / resolution)
    else:
        mu, wmu = np.polynomial.legendre.leggauss(resolution)
        nphi = 2 * resolution
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        s = np.sqrt(1.0 - mu * mu)
        x = np.outer(s, np.cos(phi))
        y = np.outer(s, np.sin(phi))
        z = np.repeat(mu[:, None], nphi, axis=1)
        nodes = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
        nodes /= np.linalg.norm(nodes, axis=1)[:, None]
        weights = np.repeat(wmu * (2.0 * np.pi / nphi), nphi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereRule(n, nodes, weights)


def integrate(rule, f, r=1.0, center=None):
    """Integrate ``f`` over the sphere of radius ``r`` (surface measure).

    ``f`` is called once with the (k, n) array of points ``center + r*nodes``
    and must return k values.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    pts = r * rule.nodes
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("integrand returned a non-finite value")
    return float(np.dot(rule.weights, vals)) * r ** (rule.n - 1)


def sphere_area(n):
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def exact_moments(n):
    _check_dim(n)
    omega = sphere_area(n)
    S22 = omega / (n * (n + 2))
    return MomentTable(n=n, omega=omega, S2=omega / n, S4=3.0 * S22, S22=S22)


def quadrature_moments(n, resolution=DEFAULT_RESOLUTION):
    """The MomentTable entries recomputed by quadrature (for cross-checks)."""
    rule = make_rule(n, resolution)
    return MomentTable(
        n=n,
        omega=integrate(rule, lambda x: np.ones(len(x))),
        S2=integrate(rule, lambda x: x[:, 0] ** 2),
        S4=integrate(rule, lambda x: x[:, 0] ** 4),
        S22=integrate(rule, lambda x: x[:, 0] ** 2 * x[:, 1] ** 2),
    )
