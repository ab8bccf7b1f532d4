"""Normal exponential maps, focal maps and the harmonic maps built from them.

Most maps here are restrictions of linear maps x -> L x of R^{2l}, so their
pushforwards are L itself and the Laplacian of the composed map is L H with H
the mean curvature vector of the source.  The one nonlinear map is the focal
projection of a level hypersurface onto M_+, which uses the unit normal field.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from .calculus import laplacian_of_map, mean_curvature, rel_err, unit_normal_field
from .clifford import CliffordSystem, find_extension
from .errors import InvalidManifold, NotOnSource
from .manifolds import ManifoldId, make_point, residual, sample_coords

SQRT2 = math.sqrt(2.0)


class MapKind(str, enum.Enum):
    PHI_T = "PhiT"
    PSI_T = "PsiT"
    PHI_QUARTER = "PhiQuarter"
    PSI_QUARTER = "PsiQuarter"
    MPLUS_TO_MMINUS = "MPlusToMMinus"
    MPLUS_TO_HYPERSURFACE = "MPlusToHypersurface"
    MMINUS_TO_MPLUS = "MMinusToMPlus"
    MMINUS_TO_HYPERSURFACE = "MMinusToHypersurface"
    HYPERSURFACE_TO_MPLUS = "HypersurfaceToMPlus"


@dataclass(frozen=True)
class FocalMap:
    kind: MapKind
    i: int | None = None
    t: float | None = None  # angle; for the M_- maps it is the distance s from M_-
    sign: int = 1
    coeffs: tuple[float, ...] | None = None  # unit vector choosing P in the Clifford sphere

    def label(self) -> str:
        parts = [self.kind.value]
        if self.i is not None:
            parts.append(f"i={self.i}")
        if self.t is not None:
            parts.append(f"t={self.t:g}")
        if self.kind in (MapKind.PHI_QUARTER, MapKind.PSI_QUARTER):
            parts.append("+" if self.sign > 0 else "-")
        return "(".join(parts[:1]) + ("(" + ",".join(parts[1:]) + ")" if parts[1:] else "")

    # source and target ------------------------------------------------------
    def source(self, sys: CliffordSystem) -> ManifoldId:
        k = self.kind
        if k in (MapKind.PHI_T, MapKind.PHI_QUARTER):
            return ManifoldId.M(self.i + 1)
        if k in (MapKind.PSI_T, MapKind.PSI_QUARTER):
            return ManifoldId.N(self.i - 1)
        if k in (MapKind.MPLUS_TO_MMINUS, MapKind.MPLUS_TO_HYPERSURFACE):
            return ManifoldId.M(sys.m)
        if k in (MapKind.MMINUS_TO_MPLUS, MapKind.MMINUS_TO_HYPERSURFACE):
            return ManifoldId.N(sys.m)
        return ManifoldId.hypersurface(self.t)

    def target(self, sys: CliffordSystem) -> ManifoldId:
        k = self.kind
        if k is MapKind.PHI_T:
            return ManifoldId.level_u(self.i, math.sin(2 * self.t))
        if k is MapKind.PSI_T:
            return ManifoldId.level_v(self.i, math.sin(2 * self.t))
        if k is MapKind.PHI_QUARTER:
            return ManifoldId.focal_u(self.i, self.sign)
        if k is MapKind.PSI_QUARTER:
            return ManifoldId.focal_v(self.i, self.sign)
        if k is MapKind.MPLUS_TO_MMINUS:
            return ManifoldId.N(sys.m)
        if k is MapKind.MPLUS_TO_HYPERSURFACE:
            return ManifoldId.hypersurface(self.t)
        if k is MapKind.MMINUS_TO_MPLUS:
            return ManifoldId.M(sys.m)
        if k is MapKind.MMINUS_TO_HYPERSURFACE:
            return ManifoldId.hypersurface(math.pi / 4 - self.t)
        return ManifoldId.M(sys.m)

    # the linear map, when there is one -------------------------------------------
    def normal_operator(self, sys: CliffordSystem) -> np.ndarray:
        """The symmetric P with image cos(t) x + sin(t) P x (or (x + P x)/sqrt 2)."""
        pm = sys.float_matrices
        k = self.kind
        if k in (MapKind.PHI_T, MapKind.PHI_QUARTER):
            return pm[self.i + 1]
        if k in (MapKind.PSI_T, MapKind.PSI_QUARTER):
            return pm[self.i]
        if k in (MapKind.MPLUS_TO_MMINUS, MapKind.MPLUS_TO_HYPERSURFACE):
            c = np.zeros(sys.m + 1)
            coeffs = self.coeffs if self.coeffs is not None else (1.0,)
            c[: len(coeffs)] = coeffs
            c /= np.linalg.norm(c)
            return np.tensordot(c, pm, axes=1)
        if k in (MapKind.MMINUS_TO_MPLUS, MapKind.MMINUS_TO_HYPERSURFACE):
            return _extension(sys).astype(float)
        raise InvalidManifold(f"{self.label()} is not linear")

    def angle(self) -> float:
        if self.kind in (MapKind.PHI_QUARTER, MapKind.PSI_QUARTER):
            return self.sign * math.pi / 4
        if self.kind in (MapKind.MPLUS_TO_MMINUS, MapKind.MMINUS_TO_MPLUS):
            return math.pi / 4
        return self.t

    @property
    def is_linear(self) -> bool:
        return self.kind is not MapKind.HYPERSURFACE_TO_MPLUS

    def matrix(self, sys: CliffordSystem) -> np.ndarray:
        a = self.angle()
        return math.cos(a) * np.eye(sys.dim) + math.sin(a) * self.normal_operator(sys)


@lru_cache(maxsize=None)
def _extension_cached(text: str) -> np.ndarray:
    return find_extension(CliffordSystem.from_json(text))


def _extension(sys: CliffordSystem) -> np.ndarray:
    return _extension_cached(sys.to_json())


def _focal_projection(sys: CliffordSystem, t: float):
    """y -> cos t * y + sin t * xi(y): from the level at distance t back to M_+ along the normal."""
    xi, dxi = unit_normal_field(sys)
    c, s = math.cos(t), math.sin(t)
    return (lambda y: c * y + s * xi(y)), (lambda y, w: c * w + s * dxi(y, w))


def apply(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    src = fmap.source(sys)
    r = residual(sys, src, x)
    if r > tol:
        raise NotOnSource(f"{fmap.label()}: point is {r:.2e} away from {src.label()}")
    if fmap.is_linear:
        return fmap.matrix(sys) @ x
    return _focal_projection(sys, fmap.t)[0](x)


# -- pushforward -----------------------------------------------------------------

@dataclass
class PushforwardReport:
    t: float
    err_minus_space: float  # |(phi_t)_* X - (cos t + sin t) X| on T_{-1}
    err_plus_space: float  # |(phi_t)_* X - (cos t - sin t) X| on T_{1}
    err_isometric: float  # | |(phi_t)_* X| - |X| | on T_0
    dims: tuple[int, int, int]

    @property
    def max_err(self) -> float:
        return max(self.err_minus_space, self.err_plus_space, self.err_isometric)


def principal_decomposition(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray,
                            tangent: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal bases of T_{-1} = E_+(P) n T, T_1 = E_-(P) n T and T_0 at x on the source.

    For PhiT, T_0 has the explicit basis {P_a P_{i+1} x : a <= i}; for PsiT it is the
    orthogonal complement of the two eigenspace parts.
    """
    p = fmap.normal_operator(sys)
    pm = sys.float_matrices
    if fmap.kind in (MapKind.PHI_T, MapKind.PHI_QUARTER):
        t0 = np.column_stack([pm[a] @ (p @ x) for a in range(fmap.i + 1)])
    else:
        t0 = None
    compressed = tangent.T @ p @ tangent
    evals, evecs = np.linalg.eigh(compressed)
    minus = tangent @ evecs[:, evals > 1 - 1e-8]
    plus = tangent @ evecs[:, evals < -1 + 1e-8]
    if t0 is None:
        rest = np.abs(evals) < 1 - 1e-8
        vecs = tangent @ evecs[:, rest]
        # T_0 is invariant under x -> P x only up to the normal part; keep the tangent rows
        t0 = vecs
    return minus, plus, t0


def pushforward(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Differential of the map at x applied to X."""
    if fmap.is_linear:
        return fmap.matrix(sys) @ X
    return _focal_projection(sys, fmap.t)[1](x, X)


def pushforward_check(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray,
                      rng: np.random.Generator | None = None) -> PushforwardReport:
    """Check the three scaling laws of the normal exponential map on a random vector of each part."""
    if fmap.kind not in (MapKind.PHI_T, MapKind.PSI_T, MapKind.PHI_QUARTER, MapKind.PSI_QUARTER):
        raise InvalidManifold("scaling laws apply to the normal exponential maps")
    rng = rng or np.random.default_rng(0)
    tangent = make_point(sys, fmap.source(sys), x).tangent_frame
    minus, plus, t0 = principal_decomposition(sys, fmap, x, tangent)
    t = fmap.angle()
    c, s = math.cos(t), math.sin(t)

    def rand(basis):
        return basis @ rng.standard_normal(basis.shape[1]) if basis.shape[1] else np.zeros(sys.dim)

    X1, X2, X3 = rand(minus), rand(plus), rand(t0)
    e1 = float(np.linalg.norm(pushforward(sys, fmap, x, X1) - (c + s) * X1))
    e2 = float(np.linalg.norm(pushforward(sys, fmap, x, X2) - (c - s) * X2))
    e3 = abs(float(np.linalg.norm(pushforward(sys, fmap, x, X3)) - np.linalg.norm(X3)))
    return PushforwardReport(t=t, err_minus_space=e1, err_plus_space=e2, err_isometric=e3,
                             dims=(minus.shape[1], plus.shape[1], t0.shape[1]))


def volume_element_factor(sys: CliffordSystem, i: int, t: float) -> float:
    """(cos 2t)^(l - i - 2), the Jacobian of phi_t: M_{i+1} -> U_{sin 2t}."""
    if abs(t) >= math.pi / 4:
        raise ValueError("need |t| < pi/4")
    return math.cos(2 * t) ** (sys.l - i - 2)


def jacobian_determinant(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray) -> float:
    """Product of the singular values of the pushforward on the full tangent frame of the source."""
    tangent = make_point(sys, fmap.source(sys), x).tangent_frame
    image = np.column_stack([pushforward(sys, fmap, x, e) for e in tangent.T])
    return float(np.prod(np.linalg.svd(image, compute_uv=False)))


@dataclass
class KGRatio:
    n: int  # exponent l - i - 2
    k1: float
    k2: float
    g: float

    @property
    def ratio(self) -> float:
        return max(self.k1, self.k2, self.g) / self.g

    @property
    def predicted(self) -> float:
        return self.n / (self.n - 1)


def kg_ratio(n: int) -> KGRatio:
    """K_j = int (cos 2t)^n / kappa_j^2 dt and G = int (cos 2t)^n dt over [-pi/4, pi/4].

    kappa_1 = cos t + sin t, kappa_2 = cos t - sin t.  Needs n >= 2 for K_1 to be finite.
    """
    if n < 2:
        raise ValueError("the ratio needs l - i - 3 > 0")
    lo, hi = -math.pi / 4, math.pi / 4
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=200)
    k1 = scipy.integrate.quad(lambda t: math.cos(2 * t) ** n / (math.cos(t) + math.sin(t)) ** 2, lo, hi, **opts)[0]
    k2 = scipy.integrate.quad(lambda t: math.cos(2 * t) ** n / (math.cos(t) - math.sin(t)) ** 2, lo, hi, **opts)[0]
    g = scipy.integrate.quad(lambda t: math.cos(2 * t) ** n, lo, hi, **opts)[0]
    return KGRatio(n=n, k1=k1, k2=k2, g=g)


def write_volume_csv(path: str | Path, sys: CliffordSystem, i: int, ts: Sequence[float]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "volume_factor"])
        for t in ts:
            w.writerow([repr(float(t)), repr(volume_element_factor(sys, i, t))])


# -- fibres of the quarter maps --------------------------------------------------

@dataclass
class FiberReport:
    map: str
    focal_points: int
    samples_per_point: int
    fiber_dim: int
    expected_dim: int
    max_image_err: float  # fibre points map back to y
    max_source_residual: float  # fibre points lie on the source
    max_radius_err: float  # | |x - y/sqrt2| - 1/sqrt2 |
    max_gram_err: float  # <x_j - y/sqrt2, x_k - y/sqrt2> against <z_j, z_k>/2
    max_geodesic_tangential: float  # tangential acceleration of great circles in the fibre
    max_normal_acc_err: float  # sphere acceleration minus P c(s) / 2

    @property
    def passed(self) -> bool:
        return (self.fiber_dim == self.expected_dim and self.max_image_err <= 1e-10
                and self.max_source_residual <= 1e-10 and self.max_radius_err <= 1e-10
                and self.max_gram_err <= 1e-10 and self.max_geodesic_tangential <= 1e-8
                and self.max_normal_acc_err <= 1e-8)


def fiber_directions(sys: CliffordSystem, fmap: FocalMap, y: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the linear space whose unit sphere parametrises the fibre over y."""
    pm = sys.float_matrices
    sgn = fmap.sign
    if fmap.kind is MapKind.PHI_QUARTER:
        p = pm[fmap.i + 1]
        e_other = scipy.linalg.orth(0.5 * (np.eye(sys.dim) - sgn * p), rcond=1e-10)
        cons = np.column_stack([pm[a] @ y for a in range(fmap.i + 1)])
        coeff = scipy.linalg.null_space(cons.T @ e_other, rcond=1e-8)
        return e_other @ coeff
    if fmap.kind is MapKind.PSI_QUARTER:
        return np.column_stack([pm[a] @ y for a in range(fmap.i)])
    raise InvalidManifold("fibres are parametrised for the quarter maps only")


def fiber_check(sys: CliffordSystem, fmap: FocalMap, focal_points: int = 5, n: int = 50,
                seed: int = 0) -> FiberReport:
    src = fmap.source(sys)
    tgt = fmap.target(sys)
    p = fmap.normal_operator(sys)
    expected = sys.l - fmap.i - 2 if fmap.kind is MapKind.PHI_QUARTER else fmap.i - 1
    rng = np.random.default_rng(seed)
    worst = dict(img=0.0, src=0.0, rad=0.0, gram=0.0, geo=0.0, acc=0.0)
    dims = []
    for y in sample_coords(sys, tgt, focal_points, seed):
        basis = fiber_directions(sys, fmap, y)
        k = basis.shape[1]
        coeff = rng.standard_normal((n, k))
        z = (coeff / np.linalg.norm(coeff, axis=1, keepdims=True)) @ basis.T
        xs = (y + z) / SQRT2
        centred = xs - y / SQRT2
        dims.append(np.linalg.matrix_rank(z, tol=1e-8) - 1 if n > k else k - 1)
        for x in xs:
            worst["img"] = max(worst["img"], float(np.max(np.abs(apply(sys, fmap, x, tol=1e-9) - y))))
            worst["src"] = max(worst["src"], residual(sys, src, x))
        worst["rad"] = max(worst["rad"], float(np.max(np.abs(np.linalg.norm(centred, axis=1) - 1 / SQRT2))))
        worst["gram"] = max(worst["gram"], float(np.max(np.abs(centred @ centred.T - z @ z.T / 2))))
        if k >= 2:
            z0, v0 = z[0], z[1] - (z[1] @ z[0]) * z[0]
            v0 /= np.linalg.norm(v0)
            for s in np.linspace(0, 2 * math.pi, 9)[:-1]:
                c = (y + math.cos(s) * z0 + math.sin(s) * v0) / SQRT2
                acc = -(math.cos(s) * z0 + math.sin(s) * v0) / SQRT2
                tangent = make_point(sys, src, c).tangent_frame
                worst["geo"] = max(worst["geo"], float(np.linalg.norm(tangent.T @ acc)))
                speed2 = 0.5
                sphere_acc = acc + speed2 * c
                worst["acc"] = max(worst["acc"], float(np.max(np.abs(sphere_acc - 0.5 * fmap.sign * (p @ c)))))
    return FiberReport(map=fmap.label(), focal_points=focal_points, samples_per_point=n,
                       fiber_dim=int(min(dims)) if len(set(dims)) == 1 else -1, expected_dim=expected,
                       max_image_err=worst["img"], max_source_residual=worst["src"],
                       max_radius_err=worst["rad"], max_gram_err=worst["gram"],
                       max_geodesic_tangential=worst["geo"], max_normal_acc_err=worst["acc"])


def horizontal_singular_values(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray) -> np.ndarray:
    """Singular values of the pushforward on the orthogonal complement of its kernel."""
    tangent = make_point(sys, fmap.source(sys), x).tangent_frame
    image = np.column_stack([pushforward(sys, fmap, x, e) for e in tangent.T])
    sv = np.linalg.svd(image, compute_uv=False)
    return sv[sv > 1e-8]


# -- eigenmaps and tension fields ---------------------------------------------------

def eigenvalue_of(sys: CliffordSystem, fmap: FocalMap) -> int:
    if fmap.kind is MapKind.PHI_QUARTER:
        return 2 * sys.l - fmap.i - 3
    if fmap.kind is MapKind.PSI_QUARTER:
        return sys.l + fmap.i - 2
    raise InvalidManifold("only the quarter maps are eigenmaps")


def map_laplacian(sys: CliffordSystem, fmap: FocalMap, x: np.ndarray) -> np.ndarray:
    """Componentwise Laplacian on the source of the composed map into R^{2l}."""
    pt = make_point(sys, fmap.source(sys), x)
    H = mean_curvature(sys, pt).vector
    if fmap.is_linear:
        return fmap.matrix(sys) @ H
    fn, dfn = _focal_projection(sys, fmap.t)
    return laplacian_of_map(fn, x, pt.tangent_frame, H, deriv=dfn)


@dataclass
class EigenmapReport:
    map: str
    eigenvalue: int
    samples: int
    max_rel_err: float
    max_image_norm_err: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= 1e-6 and self.max_image_norm_err <= 1e-12


def eigenmap_check(sys: CliffordSystem, fmap: FocalMap, n: int, seed: int = 0) -> EigenmapReport:
    lam = eigenvalue_of(sys, fmap)
    err = norm_err = 0.0
    for x in sample_coords(sys, fmap.source(sys), n, seed):
        img = apply(sys, fmap, x)
        lap = map_laplacian(sys, fmap, x)
        err = max(err, float(np.max(rel_err(lap, -lam * img, lam))))
        norm_err = max(norm_err, abs(float(np.linalg.norm(img)) - 1.0))
    return EigenmapReport(map=fmap.label(), eigenvalue=lam, samples=n, max_rel_err=err,
                          max_image_norm_err=norm_err)


@dataclass
class TensionReport:
    map: str
    samples: int
    max_tangential: float
    max_target_residual: float
    section_err: float | None = None

    @property
    def passed(self) -> bool:
        ok = self.max_tangential <= 1e-6 and self.max_target_residual <= 1e-10
        return ok and (self.section_err is None or self.section_err <= 1e-9)

    def to_dict(self) -> dict:
        return {**asdict(self), "pass": self.passed}


def tension_normality(sys: CliffordSystem, fmap: FocalMap, n: int, seed: int = 0) -> TensionReport:
    """The Laplacian of the composed map is normal to the target at the image point."""
    tgt = fmap.target(sys)
    tang = res = 0.0
    section = None
    for x in sample_coords(sys, fmap.source(sys), n, seed):
        img = apply(sys, fmap, x)
        res = max(res, residual(sys, tgt, img))
        lap = map_laplacian(sys, fmap, x)
        T = make_point(sys, tgt, img).tangent_frame
        tang = max(tang, float(np.linalg.norm(T.T @ lap)))
        if fmap.kind is MapKind.MPLUS_TO_HYPERSURFACE:
            back = _focal_projection(sys, fmap.t)[0](img)
            section = max(section or 0.0, float(np.max(np.abs(back - x))))
    return TensionReport(map=fmap.label(), samples=n, max_tangential=tang, max_target_residual=res,
                         section_err=section)


def well_definedness(sys: CliffordSystem, fmap: FocalMap, n: int, seed: int = 0) -> float:
    """Largest target residual over n applications."""
    tgt = fmap.target(sys)
    return max(residual(sys, tgt, apply(sys, fmap, x)) for x in sample_coords(sys, fmap.source(sys), n, seed))


def level_consistency(sys: CliffordSystem, i: int, n: int, ts: Sequence[float] | None = None,
                      seed: int = 0) -> float:
    """max |f_i(phi_t(x)) - sin 2t| over n points of M_{i+1} and a grid of angles."""
    ts = np.linspace(-math.pi / 4, math.pi / 4, 64) if ts is None else np.asarray(ts, dtype=float)
    p = sys.float_matrices[i + 1]
    err = 0.0
    for x in sample_coords(sys, ManifoldId.M(i + 1), n, seed):
        px = p @ x
        for t in ts:
            y = math.cos(t) * x + math.sin(t) * px
            err = max(err, abs(float(y @ (p @ y)) - math.sin(2 * t)))
    return err
