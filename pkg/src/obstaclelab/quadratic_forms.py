"""Homogeneous quadratics q(x) = 1/2 x.Ax with Tr A = 1, and the pencil argument.

The uniqueness argument compares two candidate blowup matrices A and A~ by
pairing them against the one-parameter family of nonnegative quadratics
B^t = diag(..., 1/2 - t/2 (slot i0), ..., 1/2 + t/2 (slot j0), ...), written
in the frame where A - A~ is diagonal.  ``replay_uniqueness`` runs that
argument numerically for every index pair and reports whether A = A~.
"""

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    IndexOutOfRange,
    NonSymmetric,
    NotPSD,
    PencilParamOutOfRange,
    TraceViolation,
)
from .sphere import exact_moments

Q = "Q"
QPLUS = "Qplus"

SYM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-12
JACOBI_TOL = 1e-13
REPLAY_TOL = 1e-9


def sym_matrix(entries):
    """Validate and return a read-only float copy of a symmetric square matrix."""
    a = np.array(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > SYM_TOL * scale:
        raise NonSymmetric("matrix is not symmetric")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadraticBlowup:
    """q(x) = 1/2 x.mat.x with Tr mat = 1; ``class_tag`` is Q or Qplus (q >= 0)."""

    mat: np.ndarray
    class_tag: str = Q

    @property
    def n(self):
        return self.mat.shape[0]

    def __call__(self, x):
        return eval_q(self, x)


def make_quadratic(entries, class_tag=Q):
    if class_tag not in (Q, QPLUS):
        raise ValueError(f"unknown class tag {class_tag!r}")
    a = sym_matrix(entries)
    tr = float(np.trace(a))
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceViolation(f"trace is {tr!r}, expected 1")
    if class_tag == QPLUS:
        lmin = float(np.linalg.eigvalsh(a)[0])
        if lmin < -PSD_TOL:
            raise NotPSD(f"smallest eigenvalue {lmin!r} < 0")
    return QuadraticBlowup(a, class_tag)


def is_psd(q, tol=PSD_TOL):
    return float(np.linalg.eigvalsh(q.mat)[0]) >= -tol


def eval_q(q, x):
    """1/2 x.Ax; ``x`` may be one point (n,) or an array of points (k, n)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return 0.5 * float(x @ q.mat @ x)
    return 0.5 * np.einsum("ki,ij,kj->k", x, q.mat, x)


def pencil_Bt(n, i0, j0, t):
    """The nonnegative pencil member with 1/2 - t/2 at i0 and 1/2 + t/2 at j0.

    Indices are 1-based with 1 <= i0 < j0 <= n; t ranges over the closed [-1, 1].
    """
    if not (1 <= i0 < j0 <= n):
        raise IndexOutOfRange(f"need 1 <= i0 < j0 <= n, got ({i0}, {j0}) with n={n}")
    if not abs(t) <= 1.0:
        raise PencilParamOutOfRange(f"|t| = {abs(t)!r} > 1")
    b = np.zeros((n, n))
    b[i0 - 1, i0 - 1] = 0.5 - 0.5 * t
    b[j0 - 1, j0 - 1] = 0.5 + 0.5 * t
    b.setflags(write=False)
    return QuadraticBlowup(b, QPLUS)


def jacobi_eigh(m, tol=JACOBI_TOL, max_sweeps=64):
    """Cyclic Jacobi eigen-decomposition of a small symmetric matrix.

    Returns (eigenvalues, V) with m = V diag(eigenvalues) V^T, unsorted.
    """
    a = np.array(m, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[offdiag] ** 2))
        if off <= tol * scale:
            break
        for p, q in combinations(range(n), 2):
            if a[p, q] == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
            if abs(theta) > 1e150:
                t = 0.5 / theta
            else:
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(n)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    return np.diag(a).copy(), v


@dataclass(frozen=True)
class EigenSplit:
    """Eigenvalues of A - A~ (descending) and the orthogonal matrix diagonalizing it."""

    lambdas: np.ndarray
    rotation: np.ndarray


def _same_dim(*qs):
    dims = {q.n for q in qs}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def eigen_split(A, At):
    _same_dim(A, At)
    d = A.mat - At.mat
    lam, v = jacobi_eigh(0.5 * (d + d.T))
    # stable sort: ties keep the lowest original index first
    order = np.argsort(-lam, kind="stable")
    return EigenSplit(lam[order], v[:, order])


def _moments_for(n, moments):
    if moments is None:
        return exact_moments(n)
    if moments.n != n:
        raise DimensionMismatch(f"moment table is for n={moments.n}, forms have n={n}")
    return moments


def f_of_t(A, At, i0, j0, t, moments=None):
    """Integral over the unit sphere of (x.(A-A~)x)(x.(A+A~-2B^t)x).

    Evaluated in closed form from the moment table, in the eigenframe of A - A~
    where the pencil B^t is placed.  Only the diagonal of the second form
    contributes because the first one is diagonal there.
    """
    n = _same_dim(A, At)
    mt = _moments_for(n, moments)
    b = pencil_Bt(n, i0, j0, t).mat
    split = eigen_split(A, At)
    r = split.rotation
    c = np.diag(r.T @ (A.mat + At.mat) @ r) - 2.0 * np.diag(b)
    lam = split.lambdas
    # sum_i lam_i [c_i S4 + sum_{j != i} c_j S22]
    return float(np.dot(lam, c * mt.S4 + (c.sum() - c) * mt.S22))


def f_integrand(A, At, i0, j0, t):
    """The integrand of ``f_of_t`` in original coordinates, for quadrature checks."""
    n = _same_dim(A, At)
    r = eigen_split(A, At).rotation
    b = r @ pencil_Bt(n, i0, j0, t).mat @ r.T
    d = A.mat - At.mat
    s = A.mat + At.mat - 2.0 * b

    def integrand(x):
        return np.einsum("ki,ij,kj->k", x, d, x) * np.einsum("ki,ij,kj->k", x, s, x)

    return integrand


def fprime_closed(A, At, i0, j0, moments=None):
    """Slope of ``f_of_t`` in t: (lambda_i0 - lambda_j0) (S4 - S22)."""
    n = _same_dim(A, At)
    if not (1 <= i0 < j0 <= n):
        raise IndexOutOfRange(f"need 1 <= i0 < j0 <= n, got ({i0}, {j0}) with n={n}")
    mt = _moments_for(n, moments)
    lam = eigen_split(A, At).lambdas
    return float((lam[i0 - 1] - lam[j0 - 1]) * (mt.S4 - mt.S22))


@dataclass(frozen=True)
class PairResult:
    i0: int
    j0: int
    lambda_diff: float
    fprime: float


@dataclass(frozen=True)
class ReplayReport:
    lambdas: np.ndarray
    pair_results: list = field(default_factory=list)
    verdict: str = "equal"
    witness: tuple = None
    tol: float = REPLAY_TOL

    def summary_lines(self):
        lines = [f"lambdas: {' '.join(repr(float(x)) for x in self.lambdas)}"]
        for p in self.pair_results:
            lines.append(
                f"pair ({p.i0},{p.j0}): lambda_diff={p.lambda_diff!r} fprime={p.fprime!r}"
            )
        lines.append(f"verdict: {self.verdict}")
        if self.witness is not None:
            lines.append(f"witness: ({self.witness[0]},{self.witness[1]})")
        return lines


def replay_uniqueness(A, At, tol=REPLAY_TOL):
    """Decide A = A~ by differentiating the pencil identity for every index pair.

    If some lambda_i0 != lambda_j0 the slope of f would be nonzero, contradicting
    f = 0 along the pencil; if all pairs agree the eigenvalues are equal and,
    summing to zero, vanish.
    """
    n = _same_dim(A, At)
    mt = exact_moments(n)
    lam = eigen_split(A, At).lambdas
    pairs = []
    witness = None
    for i0, j0 in combinations(range(1, n + 1), 2):
        diff = float(lam[i0 - 1] - lam[j0 - 1])
        pairs.append(PairResult(i0, j0, diff, diff * (mt.S4 - mt.S22)))
        if witness is None and abs(diff) > tol:
            witness = (i0, j0)
    verdict = "equal" if float(np.abs(lam).max()) <= tol else "distinct"
    if verdict == "equal":
        witness = None
    return ReplayReport(lam, pairs, verdict, witness, tol)


def write_matrix(path, a):
    """Text format: dimension on line 1, then one row per line (17 significant digits)."""
    a = np.asarray(a, dtype=float)
    lines = [str(a.shape[0])]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in a)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        n = int(lines[0][0])
        rows = [[float(v) for v in ln] for ln in lines[1 : n + 1]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed matrix file {path}: {exc}") from None
    if len(rows) != n or any(len(r) != n for r in rows) or len(lines) != n + 1:
        raise ConfigError(f"matrix file {path}: expected {n} rows of {n} entries")
    return np.array(rows)
