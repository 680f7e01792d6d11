"""Monneau traces, blowup fitting and the cross-scale uniqueness diagnostic."""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import EmptyRadii, RankDeficient, ScaleFloorReached
from .fields import rescale, sphere_samples
from .quadratic_forms import QPLUS, eval_q, is_psd
from .sphere import DEFAULT_RESOLUTION, make_rule

SHELL_FRACTION = 0.5
FLOOR_FACTOR = 4.0
COND_LIMIT = 1e10
DECADE = 10.0
UNIQUE = "unique_blowup_consistent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class MonneauTrace:
    center: np.ndarray
    q: object
    radii: np.ndarray
    values: np.ndarray

    def rows(self):
        return list(zip(self.radii.tolist(), self.values.tolist()))


def monneau(u, x0, q, radii, rule=None):
    """M(r) = r^-(n+3) * integral over the sphere |y - x0| = r of (u(y) - q(y - x0))^2.

    Monotonicity in r is only promised for nonnegative q; a warning is issued
    otherwise but the trace is still produced.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise EmptyRadii("no radii given")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    n = u.n
    rule = rule or make_rule(n, DEFAULT_RESOLUTION)
    if q.class_tag != QPLUS and not is_psd(q):
        warnings.warn("comparison quadratic is not in Q+; monotonicity is not guaranteed",
                      stacklevel=2)
    x0 = np.asarray(x0, dtype=float)
    vals = np.empty(len(radii))
    for k, r in enumerate(radii):
        diff = sphere_samples(u, x0, r, rule) - eval_q(q, r * rule.nodes)
        vals[k] = np.dot(rule.weights, diff * diff) * r ** (n - 1) / r ** (n + 3)
    return MonneauTrace(x0, q, radii, vals)


def check_monotone(trace, slack=0.0):
    """(ok, worst_violation): ok iff M(r_{k+1}) >= M(r_k) - slack for every pair."""
    drops = trace.values[:-1] - trace.values[1:]
    worst = float(max(drops.max(initial=0.0), 0.0))
    return worst <= slack, worst


def annulus_cloud(n, inner, count=None):
    """Deterministic Halton points, area-uniform in {inner <= |x| <= 1}.

    The cloud is deliberately not centrally symmetric, so odd higher-order
    terms of the data leak into the fitted quadratic at first order in r and
    the cross-scale trend stays measurable.
    """
    count = count or (512 if n == 2 else 1024)
    s = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    rho = (inner**n + s[:, 0] * (1.0 - inner**n)) ** (1.0 / n)
    if n == 2:
        phi = 2.0 * np.pi * s[:, 1]
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
    else:
        z = 1.0 - 2.0 * s[:, 1]
        phi = 2.0 * np.pi * s[:, 2]
        w = np.sqrt(1.0 - z * z)
        dirs = np.column_stack([w * np.cos(phi), w * np.sin(phi), z])
    return rho[:, None] * dirs


def annulus_shells(rule, inner, shells=5):
    """Copies of a sphere rule on ``shells`` radii spread over [inner, 1]."""
    return np.vstack([rho * rule.nodes for rho in np.linspace(inner, 1.0, shells)])


def _sample_points(n, inner, points):
    if points is None:
        return annulus_cloud(n, inner)
    if hasattr(points, "nodes"):
        return annulus_shells(points, inner)
    return np.asarray(points, dtype=float)


def _design(p):
    n = p.shape[1]
    cols = [np.ones(len(p))] + [p[:, i] for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    for i, j in pairs:
        cols.append(0.5 * p[:, i] ** 2 if i == j else p[:, i] * p[:, j])
    return np.column_stack(cols), pairs


@dataclass(frozen=True)
class BlowupFit:
    r: float
    A_fit: np.ndarray
    c0: float
    c1: np.ndarray
    rms_residual: float


def fit_blowup(u, x0, r, shell_inner_fraction=SHELL_FRACTION, points=None):
    """Least-squares fit of u_{x0,r} by c0 + c1.x + 1/2 x.Ax on the annulus
    {shell_inner_fraction <= |x| <= 1}.

    ``points`` is None (Halton cloud), a SphereRule (concentric shells) or an
    explicit array of rescaled sample points.  A has one unknown per upper
    triangle entry, so it is symmetric by construction.
    """
    if not 0.0 < shell_inner_fraction < 1.0:
        raise ValueError("shell_inner_fraction must lie in (0, 1)")
    view = rescale(u, x0, r)
    p = _sample_points(u.n, shell_inner_fraction, points)
    y = np.atleast_1d(view.eval(p))
    design, pairs = _design(p)
    if np.linalg.cond(design) > COND_LIMIT:
        raise RankDeficient("fitting system is too ill-conditioned")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    n = u.n
    a = np.zeros((n, n))
    for c, (i, j) in zip(coef[n + 1 :], pairs):
        a[i, j] = a[j, i] = c
    resid = y - design @ coef
    return BlowupFit(float(r), a, float(coef[0]), coef[1 : n + 1].copy(),
                     float(np.sqrt(np.mean(resid * resid))))


def trace_normalize(a):
    """Shift A by a multiple of I to trace 1 (the part invisible on one sphere)."""
    n = a.shape[0]
    return a + (1.0 - np.trace(a)) / n * np.eye(n)


@dataclass
class UniquenessReport:
    scales: np.ndarray
    fits: list
    normalized: list
    max_pairwise: float
    tail_pairwise: float
    trend: np.ndarray
    verdict: str
    tol: float
    truncated: bool = False
    requested_levels: int = 0

    def trend_ratios(self):
        t = self.trend
        return t[1:] / t[:-1]

    def rows(self):
        out = []
        for j, (fit, a) in enumerate(zip(self.fits, self.normalized)):
            dist = float(self.trend[j - 1]) if j > 0 else float("nan")
            out.append([j, fit.r, *a.ravel().tolist(), fit.rms_residual, dist])
        return out

    def header(self):
        n = self.normalized[0].shape[0] if self.normalized else 0
        cols = [f"a{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        return ["level", "r", *cols, "rms_residual", "pairwise_dist"]


def _pairwise_max(mats):
    best = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            best = max(best, float(np.linalg.norm(mats[i] - mats[j])))
    return best


def _scale_ladder(u, r0, levels):
    if levels < 3:
        raise ValueError("need at least 3 levels")
    scales = r0 * 2.0 ** -np.arange(levels + 1)
    floor = FLOOR_FACTOR * u.resolution_length
    keep = scales >= floor * (1 - 1e-12)
    if not keep.all():
        warnings.warn(
            f"scales below {floor!r} dropped (grid floor); report truncated",
            ScaleFloorReached, stacklevel=3,
        )
    return scales[keep], not keep.all()


def uniqueness_diagnostic(u, x0, r0, levels, tol, shell_inner_fraction=SHELL_FRACTION,
                          points=None):
    """Fit blowups on the dyadic ladder r0 2^-j, j = 0..levels, and test whether
    the trace-normalized fits agree over the last three scales."""
    scales, truncated = _scale_ladder(u, r0, levels)
    fits = [fit_blowup(u, x0, r, shell_inner_fraction, points) for r in scales]
    mats = [trace_normalize(f.A_fit) for f in fits]
    trend = np.array([np.linalg.norm(b - a) for a, b in zip(mats, mats[1:])])
    tail = _pairwise_max(mats[-3:]) if len(mats) >= 3 else float("inf")
    verdict = UNIQUE if tail <= tol else INCONCLUSIVE
    return UniquenessReport(scales, fits, mats, _pairwise_max(mats), tail, trend,
                            verdict, tol, truncated, levels)


def _direction_grid(n):
    if n == 2:
        phi = 2.0 * np.pi * np.arange(64) / 64
        return np.column_stack([np.cos(phi), np.sin(phi)])
    k = np.arange(512) + 0.5
    z = 1.0 - 2.0 * k / 512
    phi = np.pi * (1.0 + 5**0.5) * k
    w = np.sqrt(1.0 - z * z)
    return np.column_stack([w * np.cos(phi), w * np.sin(phi), z])


def _angles_to_dir(n, ang):
    if n == 2:
        return np.array([np.cos(ang[0]), np.sin(ang[0])])
    th, ph = ang
    return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def _dir_to_angles(e):
    if len(e) == 2:
        return np.array([np.arctan2(e[1], e[0])])
    return np.array([np.arccos(np.clip(e[2], -1, 1)), np.arctan2(e[1], e[0])])


def half_space_fit(p, y):
    """Best 1/2((x.e)^+)^2 over unit e: direction grid, then local polish.

    Returns (rms, e).
    """
    n = p.shape[1]

    def rms(e):
        s = np.maximum(p @ e, 0.0)
        d = y - 0.5 * s * s
        return float(np.sqrt(np.mean(d * d)))

    grid = _direction_grid(n)
    scores = [rms(e) for e in grid]
    e0 = grid[int(np.argmin(scores))]
    best = (min(scores), e0)
    res = optimize.minimize(lambda a: rms(_angles_to_dir(n, a)), _dir_to_angles(e0),
                            method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
    if res.fun < best[0]:
        best = (float(res.fun), _angles_to_dir(n, res.x))
    return best


@dataclass(frozen=True)
class Classification:
    label: str
    reason: str
    scales: np.ndarray = None
    quad_rms: list = field(default_factory=list)
    half_space_rms: list = field(default_factory=list)


def classify_point(u, x0, r0, levels, shell_inner_fraction=SHELL_FRACTION):
    """singular / regular / unresolved by comparing quadratic and half-space
    fits over the last two dyadic scales (decade separation required)."""
    x0 = np.asarray(x0, dtype=float)
    h = u.resolution_length
    tol_u, tol_g = max(h * h, 1e-12), max(h, 1e-12)
    if abs(u.eval(x0)) > tol_u or np.linalg.norm(u.grad(x0)) > tol_g:
        return Classification("unresolved", "not_free_boundary")
    scales, _ = _scale_ladder(u, r0, levels)
    p = annulus_cloud(u.n, shell_inner_fraction)
    quad, half = [], []
    for r in scales:
        y = np.atleast_1d(rescale(u, x0, r).eval(p))
        quad.append(fit_blowup(u, x0, r, shell_inner_fraction, p).rms_residual)
        half.append(half_space_fit(p, y)[0])
    tiny = 1e-14
    q2, hs2 = np.array(quad[-2:]), np.array(half[-2:])
    if np.all(hs2 >= DECADE * q2) and np.all(hs2 > tiny):
        label, reason = "singular", "quadratic_model_wins"
    elif np.all(q2 >= DECADE * hs2) and np.all(q2 > tiny):
        label, reason = "regular", "half_space_model_wins"
    else:
        label, reason = "unresolved", "no_decade_separation"
    return Classification(label, reason, scales, quad, half)
