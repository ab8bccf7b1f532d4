"""Points, residuals and frames on the submanifolds of S^{2l-1} built from a Clifford system.

Notation: s_a(x) = <P_a x, x>.

* ``M_i``   : |x| = 1, s_0 = ... = s_i = 0                 (dim 2l - i - 2; M_m = M_+)
* ``N_i``   : |x| = 1, s_0^2 + ... + s_i^2 = 1             (dim l + i - 1;  N_m = M_-)
* ``U(i,c)``: points of M_i with s_{i+1} = c, |c| < 1     (dim 2l - i - 3)
* ``V(i,c)``: points of N_i with s_i = c, |c| < 1         (dim l + i - 2)
* focal sets ``U(i, +-1)`` = SE_+-(P_{i+1}) and ``V(i, +-1)`` = SE_+-(P_i)   (dim l - 1)
* ``Mt(t)`` : the hypersurface F = cos 4t of the sphere, t in (0, pi/4) the distance to M_+.

Every manifold also has a smooth extension of its normal projector to a
neighbourhood, which the calculus module differentiates to get the second
fundamental form.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .clifford import CliffordSystem, Variant, clifford_element, eigenspace_projector, qconj, qmul
from .errors import ConvergenceFailure, InvalidManifold, NotOnFocalManifold, ProjectionFailure, RankDeficiency
from .forms import QuarticForm, clifford_moments

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200
MAX_RESTARTS = 10


class Kind(str, enum.Enum):
    SPHERE = "S"
    M = "M"
    N = "N"
    LEVEL_U = "U"
    LEVEL_V = "V"
    FOCAL_U = "focalU"
    FOCAL_V = "focalV"
    HYPERSURFACE = "Mt"


@dataclass(frozen=True)
class ManifoldId:
    kind: Kind
    i: int | None = None
    level: float | None = None  # c for level sets, +-1 for focal sets, t for Mt

    @classmethod
    def sphere(cls) -> "ManifoldId":
        return cls(Kind.SPHERE)

    @classmethod
    def M(cls, i: int) -> "ManifoldId":
        return cls(Kind.M, i)

    @classmethod
    def N(cls, i: int) -> "ManifoldId":
        return cls(Kind.N, i)

    @classmethod
    def level_u(cls, i: int, c: float) -> "ManifoldId":
        return cls(Kind.LEVEL_U, i, float(c))

    @classmethod
    def level_v(cls, i: int, c: float) -> "ManifoldId":
        return cls(Kind.LEVEL_V, i, float(c))

    @classmethod
    def focal_u(cls, i: int, sign: int) -> "ManifoldId":
        return cls(Kind.FOCAL_U, i, float(sign))

    @classmethod
    def focal_v(cls, i: int, sign: int) -> "ManifoldId":
        return cls(Kind.FOCAL_V, i, float(sign))

    @classmethod
    def hypersurface(cls, t: float) -> "ManifoldId":
        return cls(Kind.HYPERSURFACE, None, float(t))

    @property
    def sign(self) -> int:
        return 1 if self.level > 0 else -1

    def label(self) -> str:
        k = self.kind
        if k is Kind.SPHERE:
            return "S"
        if k in (Kind.M, Kind.N):
            return f"{k.value}_{self.i}"
        if k in (Kind.FOCAL_U, Kind.FOCAL_V):
            return f"{k.value}_{self.i}({'+' if self.level > 0 else '-'})"
        if k is Kind.HYPERSURFACE:
            return f"Mt(t={self.level:g})"
        return f"{k.value}_{self.i}(c={self.level:g})"

    def dimension(self, l: int) -> int:
        k, i = self.kind, self.i
        if k is Kind.SPHERE:
            return 2 * l - 1
        if k is Kind.M:
            return 2 * l - i - 2
        if k is Kind.N:
            return l + i - 1
        if k is Kind.LEVEL_U:
            return 2 * l - i - 3
        if k is Kind.LEVEL_V:
            return l + i - 2
        if k in (Kind.FOCAL_U, Kind.FOCAL_V):
            return l - 1
        return 2 * l - 2

    def validate(self, sys: CliffordSystem) -> None:
        k, i, m = self.kind, self.i, sys.m
        ok = True
        if k is Kind.SPHERE:
            pass
        elif k is Kind.M:
            ok = i is not None and 0 <= i <= m
        elif k is Kind.N:
            # N_0 = SE_+(P_0) u SE_-(P_0) is allowed as the base of the V(1, c) family
            ok = i is not None and 0 <= i <= m
        elif k is Kind.LEVEL_U:
            ok = i is not None and 0 <= i <= m - 1 and abs(self.level) < 1
        elif k is Kind.LEVEL_V:
            ok = i is not None and 1 <= i <= m and abs(self.level) < 1
        elif k is Kind.FOCAL_U:
            ok = i is not None and 0 <= i <= m - 1 and abs(self.level) == 1
        elif k is Kind.FOCAL_V:
            ok = i is not None and 0 <= i <= m and abs(self.level) == 1
        elif k is Kind.HYPERSURFACE:
            ok = 0 < self.level < math.pi / 4 and sys.m2 > 0
        if not ok:
            raise InvalidManifold(f"{self.label()} is not defined for {sys.label()}")


@dataclass(frozen=True)
class SamplePoint:
    manifold: ManifoldId
    coords: np.ndarray
    residual: float
    tangent_frame: np.ndarray  # (2l, dim) orthonormal columns
    normal_frame: np.ndarray  # (2l, 2l - dim), first column is the position vector

    @property
    def dim(self) -> int:
        return self.tangent_frame.shape[1]


# -- residuals ----------------------------------------------------------------

def _pmats(sys: CliffordSystem) -> np.ndarray:
    return sys.float_matrices


def clifford_operator(sys: CliffordSystem, x: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients s_0..s_i at x and the operator sum_a s_a P_a (a unit sphere element on N_i)."""
    s = clifford_moments(_pmats(sys)[: i + 1], x)
    return s, clifford_element(sys, s)


def _n_residual(pm: np.ndarray, x: np.ndarray, i: int) -> float:
    s = clifford_moments(pm[: i + 1], x)
    ns = np.linalg.norm(s)
    if ns == 0:
        return 1.0
    p = np.tensordot(s / ns, pm[: i + 1], axes=1)
    return float(max(abs(np.sum(s * s) - 1.0), np.max(np.abs(p @ x - x))))


def residual(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray) -> float:
    """Max constraint violation of x for the manifold (first order in the distance)."""
    x = np.asarray(x, dtype=float)
    pm = _pmats(sys)
    k, i = mid.kind, mid.i
    sphere = abs(float(x @ x) - 1.0)
    if k is Kind.SPHERE:
        return sphere
    if k is Kind.M:
        return max(sphere, float(np.max(np.abs(clifford_moments(pm[: i + 1], x)))))
    if k is Kind.N:
        return max(sphere, _n_residual(pm, x, i))
    if k is Kind.LEVEL_U:
        r = residual(sys, ManifoldId.M(i), x)
        return max(r, abs(float(x @ pm[i + 1] @ x) - mid.level))
    if k is Kind.LEVEL_V:
        r = residual(sys, ManifoldId.N(i), x)
        return max(r, abs(float(x @ pm[i] @ x) - mid.level))
    if k in (Kind.FOCAL_U, Kind.FOCAL_V):
        p = pm[i + 1] if k is Kind.FOCAL_U else pm[i]
        return max(sphere, float(np.max(np.abs(p @ x - mid.sign * x))))
    f = QuarticForm(sys).value(x)
    return max(sphere, abs(float(f) - math.cos(4 * mid.level)))


def membership_report(sys: CliffordSystem, x: np.ndarray) -> list[tuple[ManifoldId, float]]:
    """Residuals of x against every discrete manifold of the system."""
    ids = [ManifoldId.sphere()]
    ids += [ManifoldId.M(i) for i in range(sys.m + 1)]
    ids += [ManifoldId.N(i) for i in range(1, sys.m + 1)]
    ids += [ManifoldId.focal_u(i, s) for i in range(sys.m) for s in (1, -1)]
    ids += [ManifoldId.focal_v(i, s) for i in range(1, sys.m + 1) for s in (1, -1)]
    return [(mid, residual(sys, mid, x)) for mid in ids]


def is_member(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray, tol: float = 1e-10) -> bool:
    return residual(sys, mid, x) <= tol


# -- Newton projection --------------------------------------------------------

Constraint = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _constraints(sys: CliffordSystem, mid: ManifoldId) -> Constraint:
    """Residual vector r(y) and Jacobian J(y) whose common zero set is the manifold."""
    pm = _pmats(sys)
    k, i = mid.kind, mid.i
    if k is Kind.SPHERE:
        idx: list[int] = []
    elif k is Kind.M:
        idx = list(range(i + 1))
    elif k is Kind.LEVEL_U:
        idx = list(range(i + 2))
    elif k is Kind.HYPERSURFACE:
        form = QuarticForm(sys)
        target = math.cos(4 * mid.level)

        def hyper(y):
            r = np.array([y @ y - 1.0, form.value(y) - target])
            jac = np.stack([2 * y, form.gradient(y)])
            return r, jac
        return hyper
    else:
        raise InvalidManifold(f"no polynomial constraint system for {mid.label()}")
    targets = np.zeros(len(idx))
    if k is Kind.LEVEL_U:
        targets[-1] = mid.level
    sub = pm[idx]

    def poly(y):
        py = sub @ y
        r = np.concatenate([py @ y - targets, [y @ y - 1.0]])
        jac = np.vstack([2 * py, 2 * y[None, :]])
        return r, jac
    return poly


def newton_project(constraint: Constraint, y: np.ndarray, tol: float = NEWTON_TOL,
                   max_iter: int = NEWTON_MAX_ITER) -> tuple[np.ndarray, float, bool]:
    """Damped Gauss-Newton with minimum-norm steps and step halving."""
    x = np.array(y, dtype=float)
    r, jac = constraint(x)
    err = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if err <= tol:
            return x, err, True
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        base = np.linalg.norm(r)
        t = 1.0
        for _ in range(30):
            cand = x + t * step
            rc, jc = constraint(cand)
            if np.linalg.norm(rc) < base:
                break
            t *= 0.5
        else:
            return x, err, False
        x, r, jac = cand, rc, jc
        err = float(np.max(np.abs(r)))
    return x, err, err <= tol


def _project_eigenspace(p: np.ndarray, y: np.ndarray, sign: int) -> np.ndarray:
    z = 0.5 * (y + sign * (p @ y))
    nz = np.linalg.norm(z)
    if nz < 1e-8:
        raise ProjectionFailure("point is nearly orthogonal to the target eigenspace")
    return z / nz


def retract(sys: CliffordSystem, mid: ManifoldId, y: np.ndarray) -> np.ndarray:
    """A smooth map from a neighbourhood onto the manifold that fixes it pointwise."""
    y = np.asarray(y, dtype=float)
    pm = _pmats(sys)
    k, i = mid.kind, mid.i
    if k is Kind.SPHERE:
        return y / np.linalg.norm(y)
    if k in (Kind.FOCAL_U, Kind.FOCAL_V):
        p = pm[i + 1] if k is Kind.FOCAL_U else pm[i]
        return _project_eigenspace(p, y, mid.sign)
    if k in (Kind.N, Kind.LEVEL_V):
        s = clifford_moments(pm[: i + 1], y)
        if k is Kind.LEVEL_V:
            head = s[:i]
            nh = np.linalg.norm(head)
            if nh < 1e-8:
                raise ProjectionFailure("level-set retraction undefined at this point")
            s = np.concatenate([math.sqrt(1 - mid.level ** 2) * head / nh, [mid.level]])
        else:
            s = s / np.linalg.norm(s)
        return _project_eigenspace(np.tensordot(s, pm[: i + 1], axes=1), y, 1)
    x, err, ok = newton_project(_constraints(sys, mid), y)
    if not ok:
        raise ProjectionFailure(f"Newton projection onto {mid.label()} stalled at residual {err:.3e}")
    return x


# -- normal spaces -----------------------------------------------------------

def _span_projector(vectors: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(vectors)
    return q @ q.T


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def normal_projector(sys: CliffordSystem, mid: ManifoldId, y: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the normal space (in R^{2l}), smooth in y near the manifold."""
    y = np.asarray(y, dtype=float)
    pm = _pmats(sys)
    n = sys.dim
    k, i = mid.kind, mid.i
    yy = np.outer(y, y) / (y @ y)
    if k is Kind.SPHERE:
        return yy
    if k is Kind.M:
        return _span_projector(np.column_stack([y] + [p @ y for p in pm[: i + 1]]))
    if k is Kind.N:
        w = (pm[: i + 1] @ y).T
        s = w.T @ y
        s_hat = s / np.linalg.norm(s)
        big_p = np.tensordot(s_hat, pm[: i + 1], axes=1)
        perp = np.eye(i + 1) - np.outer(s_hat, s_hat)
        return 0.5 * (np.eye(n) - big_p) - w @ perp @ w.T / (y @ y) + yy
    if k in (Kind.FOCAL_U, Kind.FOCAL_V):
        p = pm[i + 1] if k is Kind.FOCAL_U else pm[i]
        return 0.5 * (np.eye(n) - mid.sign * p) + yy
    if k is Kind.HYPERSURFACE:
        base = yy
        direction = QuarticForm(sys).gradient(y)
    else:
        base_id = ManifoldId.M(i) if k is Kind.LEVEL_U else ManifoldId.N(i)
        base = normal_projector(sys, base_id, y)
        direction = pm[i + 1] @ y if k is Kind.LEVEL_U else pm[i] @ y
    nu = _unit(direction - base @ direction)
    return base + np.outer(nu, nu)


def level_normal(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray) -> np.ndarray:
    """The unit normal of a level hypersurface inside its parent manifold.

    U(i, c): xi = (P_{i+1}x - cx)/sqrt(1 - c^2); V(i, c): eta = (P_i x - cx)/sqrt(1 - c^2);
    Mt: the sphere-tangential part of grad F, normalised (points toward M_+).
    """
    pm = _pmats(sys)
    if mid.kind is Kind.LEVEL_U:
        return (pm[mid.i + 1] @ x - mid.level * x) / math.sqrt(1 - mid.level ** 2)
    if mid.kind is Kind.LEVEL_V:
        return (pm[mid.i] @ x - mid.level * x) / math.sqrt(1 - mid.level ** 2)
    if mid.kind is Kind.HYPERSURFACE:
        g = QuarticForm(sys).gradient(x)
        return _unit(g - (g @ x) * x)
    raise InvalidManifold(f"{mid.label()} is not a level hypersurface")


def frames(sys: CliffordSystem, x: np.ndarray, mid: ManifoldId) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (tangent, normal) frames; the normal frame starts with x."""
    x = np.asarray(x, dtype=float)
    n = sys.dim
    d = mid.dimension(sys.l)
    if mid.kind is Kind.M:
        normal = np.column_stack([x] + [p @ x for p in _pmats(sys)[: mid.i + 1]])
    else:
        proj = normal_projector(sys, mid, x)
        rest = proj - np.outer(x, x) / (x @ x)
        evals, evecs = np.linalg.eigh(rest)
        normal = np.column_stack([x / np.linalg.norm(x), evecs[:, evals > 0.5]])
    if normal.shape[1] != n - d:
        raise RankDeficiency(f"{mid.label()}: normal rank {normal.shape[1]}, expected {n - d}")
    tangent = scipy.linalg.null_space(normal.T, rcond=1e-8)
    if tangent.shape[1] != d:
        raise RankDeficiency(f"{mid.label()}: tangent rank {tangent.shape[1]}, expected {d}")
    return tangent, normal


# -- sampling ---------------------------------------------------------------

def _unit_gaussian(rng: np.random.Generator, n: int) -> np.ndarray:
    return _unit(rng.standard_normal(n))


def _sample_eigensphere(sys: CliffordSystem, coeffs: Sequence[float], sign: int,
                        rng: np.random.Generator) -> np.ndarray:
    basis = eigenspace_projector(sys, coeffs, sign)
    return _unit(basis @ rng.standard_normal(basis.shape[1]))


def normal_exponential(p: np.ndarray, x: np.ndarray, t: float) -> np.ndarray:
    """cos t * x + sin t * P x."""
    return math.cos(t) * x + math.sin(t) * (p @ x)


def _sample_one(sys: CliffordSystem, mid: ManifoldId, rng: np.random.Generator) -> np.ndarray:
    k, i, n = mid.kind, mid.i, sys.dim
    pm = _pmats(sys)
    if k is Kind.SPHERE:
        return _unit_gaussian(rng, n)
    if k is Kind.N:
        coeffs = np.zeros(sys.m + 1)
        coeffs[: i + 1] = _unit_gaussian(rng, i + 1)
        return _sample_eigensphere(sys, coeffs, 1, rng)
    if k in (Kind.FOCAL_U, Kind.FOCAL_V):
        coeffs = np.zeros(sys.m + 1)
        coeffs[i + 1 if k is Kind.FOCAL_U else i] = 1.0
        return _sample_eigensphere(sys, coeffs, mid.sign, rng)
    if k is Kind.LEVEL_U:
        base = _sample_one(sys, ManifoldId.M(i + 1), rng)
        return normal_exponential(pm[i + 1], base, 0.5 * math.asin(mid.level))
    if k is Kind.LEVEL_V:
        base = _sample_one(sys, ManifoldId.N(i - 1), rng)
        return normal_exponential(pm[i], base, 0.5 * math.asin(mid.level))
    constraint = _constraints(sys, mid)
    for _ in range(MAX_RESTARTS):
        x, err, ok = newton_project(constraint, _unit_gaussian(rng, n))
        if ok:
            return x / np.linalg.norm(x)
    raise ConvergenceFailure(f"{MAX_RESTARTS} consecutive Newton failures on {mid.label()}")


def point_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """One independent generator per point, so samples do not depend on batch order."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def make_point(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray) -> SamplePoint:
    tangent, normal = frames(sys, x, mid)
    return SamplePoint(manifold=mid, coords=x, residual=residual(sys, mid, x),
                       tangent_frame=tangent, normal_frame=normal)


def sample_coords(sys: CliffordSystem, mid: ManifoldId, n: int, seed: int = 0) -> np.ndarray:
    """n points as an (n, 2l) array, without frames."""
    mid.validate(sys)
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.stack([_sample_one(sys, mid, rng) for rng in point_rngs(seed, n)])


def sample(sys: CliffordSystem, mid: ManifoldId, n: int, seed: int = 0) -> list[SamplePoint]:
    return [make_point(sys, mid, x) for x in sample_coords(sys, mid, n, seed)]


def write_points_csv(path: str | Path, points: Iterable[SamplePoint]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        rows = list(points)
        if not rows:
            return
        n = rows[0].coords.shape[0]
        writer.writerow(["manifold"] + [f"x{j}" for j in range(n)] + ["residual"])
        for p in rows:
            writer.writerow([p.manifold.label()] + [repr(float(v)) for v in p.coords] + [repr(p.residual)])


# -- quaternionic charts for the m = 4, l = 8 systems ---------------------------

def _quaternion_blocks(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return x[0:4], x[4:8], x[8:12], x[12:16]


@dataclass
class ChartImage:
    variant: Variant
    image: np.ndarray
    check_residual: float


def sp2_charts(sys: CliffordSystem, x: np.ndarray, tol: float = 1e-10) -> ChartImage:
    """Quaternionic chart of M_+ for the two (m, l) = (4, 8) systems.

    q-same:     x -> sqrt(2) [[u1, u2], [v1, v2]], a quaternionic unitary 2x2 matrix.
    q-opposite: x -> (u1, u2, 2(conj(u2) v1 - conj(v2) u1)), whose last factor is a unit quaternion.
    """
    if sys.variant is Variant.STANDARD:
        raise NotOnFocalManifold("charts are only defined for the quaternionic (4, 2) systems")
    if residual(sys, ManifoldId.M(sys.m), x) > tol:
        raise NotOnFocalManifold("point is not on M_+")
    u1, u2, v1, v2 = _quaternion_blocks(x)
    if sys.variant is Variant.QUATERNION_SAME:
        g = math.sqrt(2) * np.array([[u1, u2], [v1, v2]])
        rows = [np.sum(g[r] ** 2) - 1.0 for r in range(2)]
        cross = qmul(g[0, 0], qconj(g[1, 0])) + qmul(g[0, 1], qconj(g[1, 1]))
        err = max(max(abs(r) for r in rows), float(np.max(np.abs(cross))))
        return ChartImage(sys.variant, g, err)
    w = 2 * (qmul(qconj(u2), v1) - qmul(qconj(v2), u1))
    err = abs(float(np.linalg.norm(w)) - 1.0)
    return ChartImage(sys.variant, np.concatenate([u1, u2, w]), err)
