"""Intrinsic gradients and Laplacians, second fundamental forms and mean curvature.

The second fundamental form of a submanifold of R^{2l} (so including the
sphere component -<X,Y>x) is computed in one of three ways:

* ``closed``     on M_i: B(X,Y) = -<X,Y>x - sum_a <P_a X, Y> P_a x;
* ``projector``  anywhere: B(X,Y) = -(D_X Pi_N) Y, differentiating a smooth
  extension of the normal projector with a five-point stencil;
* ``retraction`` anywhere: normal part of c''(0) for c(s) = retract(x + sX),
  a Richardson-extrapolated second difference, polarised for X != Y.

The intrinsic Laplacian of a restricted function then is
Lap f = sum_a Hess F(e_a, e_a) + <grad F, H> with H the mean curvature vector.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .clifford import CliffordSystem
from .errors import FocalAngle, InvalidManifold
from .forms import QuadraticForm, QuarticForm
from .manifolds import (Kind, ManifoldId, SamplePoint, make_point, normal_projector, retract,
                        sample)

PROJECTOR_STEP = 1e-4
RETRACTION_STEP = 1e-4
FD_STEP = 1e-3


class AmbientFunction(Protocol):
    def value(self, x: np.ndarray) -> np.ndarray: ...
    def gradient(self, x: np.ndarray) -> np.ndarray: ...
    def hessian(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class RestrictedFunction:
    ambient: AmbientFunction
    domain: ManifoldId


def f_i(sys: CliffordSystem, i: int) -> RestrictedFunction:
    """F_i(x) = <P_{i+1} x, x> restricted to M_i."""
    return RestrictedFunction(QuadraticForm.from_system(sys, i + 1), ManifoldId.M(i))


def g_i(sys: CliffordSystem, i: int) -> RestrictedFunction:
    """G_i(x) = <P_i x, x> restricted to N_i."""
    return RestrictedFunction(QuadraticForm.from_system(sys, i), ManifoldId.N(i))


# -- second fundamental form ------------------------------------------------------

def _projector_derivative(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray, v: np.ndarray,
                          h: float | None = None) -> np.ndarray:
    h = PROJECTOR_STEP if h is None else h
    proj = lambda s: normal_projector(sys, mid, x + s * v)
    return (-proj(2 * h) + 8 * proj(h) - 8 * proj(-h) + proj(-2 * h)) / (12 * h)


def _closed_form_b(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray, X: np.ndarray,
                   Y: np.ndarray) -> np.ndarray:
    if mid.kind is not Kind.M:
        raise InvalidManifold("the closed-form second fundamental form only exists on M_i")
    pm = sys.float_matrices[: mid.i + 1]
    coeffs = np.einsum("aij,...i,...j->...a", pm, X, Y)
    return -np.einsum("...,k->...k", np.einsum("...i,...i->...", X, Y), x) - coeffs @ (pm @ x)


def _retraction_bxx(sys: CliffordSystem, mid: ManifoldId, x: np.ndarray, X: np.ndarray,
                    h: float) -> np.ndarray:
    def second_difference(step):
        return (retract(sys, mid, x + step * X) - 2 * x + retract(sys, mid, x - step * X)) / step ** 2
    acc = (4 * second_difference(h / 2) - second_difference(h)) / 3
    return normal_projector(sys, mid, x) @ acc


def second_fundamental_form(sys: CliffordSystem, p: SamplePoint, X: np.ndarray, Y: np.ndarray,
                            method: str = "auto") -> np.ndarray:
    """B(X, Y) as a vector of R^{2l} normal to the manifold at p."""
    x, mid = p.coords, p.manifold
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if method == "auto":
        method = "closed" if mid.kind is Kind.M else "projector"
    if method == "closed":
        return _closed_form_b(sys, mid, x, X, Y)
    if method == "projector":
        return -_projector_derivative(sys, mid, x, X) @ Y
    if method == "retraction":
        h = RETRACTION_STEP
        if np.allclose(X, Y, atol=0, rtol=0):
            return _retraction_bxx(sys, mid, x, X, h)
        return (_retraction_bxx(sys, mid, x, X + Y, h) - _retraction_bxx(sys, mid, x, X - Y, h)) / 4
    raise ValueError(f"unknown method {method!r}")


@dataclass
class SecondFundamentalData:
    point: SamplePoint
    tensor: np.ndarray  # (d, d, 2l): B(e_a, e_b)

    @property
    def mean_curvature_vector(self) -> np.ndarray:
        return np.einsum("aak->k", self.tensor)

    @property
    def normal_components(self) -> np.ndarray:
        """<B(e_a, e_b), nu_k> for the columns nu_k of the normal frame."""
        return self.tensor @ self.point.normal_frame

    @property
    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.tensor - self.tensor.transpose(1, 0, 2))))

    def sphere_part(self) -> np.ndarray:
        """Second fundamental form inside the unit sphere: B + <e_a, e_b> x."""
        d = self.tensor.shape[0]
        return self.tensor + np.eye(d)[:, :, None] * self.point.coords

    @property
    def norm_squared(self) -> float:
        """|B|^2 of the submanifold of the sphere."""
        return float(np.sum(self.sphere_part() ** 2))


def second_fundamental_data(sys: CliffordSystem, p: SamplePoint, method: str = "auto") -> SecondFundamentalData:
    T = p.tangent_frame
    d = T.shape[1]
    if method == "auto":
        method = "closed" if p.manifold.kind is Kind.M else "projector"
    if method == "closed":
        tensor = _closed_form_b(sys, p.manifold, p.coords, T.T[:, None, :], T.T[None, :, :])
    elif method == "projector":
        derivs = [_projector_derivative(sys, p.manifold, p.coords, T[:, a]) for a in range(d)]
        tensor = -np.stack([dp @ T for dp in derivs]).transpose(0, 2, 1)
    else:
        tensor = np.empty((d, d, sys.dim))
        for a in range(d):
            for b in range(a, d):
                tensor[a, b] = tensor[b, a] = second_fundamental_form(sys, p, T[:, a], T[:, b], method)
    return SecondFundamentalData(point=p, tensor=tensor)


@dataclass
class MeanCurvature:
    vector: np.ndarray
    components: np.ndarray  # <H, nu_k> along the normal frame, the first entry is <H, x>

    @property
    def sphere_tangent(self) -> np.ndarray:
        return self.components[1:]


def mean_curvature(sys: CliffordSystem, p: SamplePoint, method: str = "auto") -> MeanCurvature:
    """H = sum_a B(e_a, e_a); minimal in the sphere iff all components but <H, x> = -dim vanish."""
    T = p.tangent_frame
    if method == "auto":
        method = "closed" if p.manifold.kind is Kind.M else "projector"
    if method == "closed":
        h = _closed_form_b(sys, p.manifold, p.coords, T.T, T.T).sum(axis=0)
    elif method == "projector":
        h = -sum(_projector_derivative(sys, p.manifold, p.coords, T[:, a]) @ T[:, a] for a in range(T.shape[1]))
    else:
        h = second_fundamental_data(sys, p, method).mean_curvature_vector
    return MeanCurvature(vector=h, components=p.normal_frame.T @ h)


def relative_mean_curvature(sys: CliffordSystem, p: SamplePoint, parent: ManifoldId,
                            method: str = "auto") -> np.ndarray:
    """Mean curvature vector of p's manifold inside a parent manifold containing it."""
    h = mean_curvature(sys, p, method).vector
    tangent = make_point(sys, parent, p.coords).tangent_frame
    return tangent @ (tangent.T @ h)


# -- calculus on restricted functions -----------------------------------------

def intrinsic_gradient(f: RestrictedFunction, p: SamplePoint) -> np.ndarray:
    T = p.tangent_frame
    return T @ (T.T @ f.ambient.gradient(p.coords))


def hessian_trace(hess: np.ndarray, tangent: np.ndarray) -> float:
    return float(np.einsum("ia,ij,ja->", tangent, hess, tangent))


def intrinsic_laplacian(f: RestrictedFunction, p: SamplePoint, sys: CliffordSystem | None = None,
                        H: np.ndarray | None = None, minimal: bool = False) -> float:
    """Lap f = sum_a Hess F(e_a, e_a) + <grad F, H>.

    ``minimal=True`` uses H = -dim * x, valid once minimality has been verified;
    otherwise H is taken from the argument or computed from ``sys``.
    """
    x, T = p.coords, p.tangent_frame
    if H is None:
        if minimal:
            H = -T.shape[1] * x
        elif sys is None:
            raise ValueError("need sys, H, or minimal=True")
        else:
            H = mean_curvature(sys, p).vector
    return hessian_trace(f.ambient.hessian(x), T) + float(f.ambient.gradient(x) @ H)


def laplacian_of_map(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, tangent: np.ndarray,
                     H: np.ndarray, deriv: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
                     h: float | None = None) -> np.ndarray:
    """Componentwise Laplacian of a smooth map R^{2l} -> R^q restricted to a submanifold.

    With an analytic directional derivative ``deriv(y, v)`` the second derivatives are
    five-point differences of it (step h/10); otherwise a fourth-order second-difference
    stencil on ``func`` with step h is used.
    """
    h = FD_STEP if h is None else h
    if deriv is not None:
        k = h / 10
        total = sum((-deriv(x + 2 * k * e, e) + 8 * deriv(x + k * e, e) - 8 * deriv(x - k * e, e)
                     + deriv(x - 2 * k * e, e)) / (12 * k) for e in tangent.T)
        return total + deriv(x, H)
    f0 = func(x)
    total = sum((-func(x + 2 * h * e) + 16 * func(x + h * e) - 30 * f0 + 16 * func(x - h * e)
                 - func(x - 2 * h * e)) / (12 * h * h) for e in tangent.T)
    first = (-func(x + 2 * h * H) + 8 * func(x + h * H) - 8 * func(x - h * H) + func(x - 2 * h * H)) / (12 * h)
    return total + first


# -- verification routines -------------------------------------------------------

def rel_err(actual, expected, scale: float) -> np.ndarray:
    """|actual - expected| / max(|expected|, scale); scale is the natural magnitude of the quantity."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return np.abs(actual - expected) / np.maximum(np.abs(expected), scale)


@dataclass
class ClaimBlock:
    claim: str
    samples: int
    max_abs_err: float
    max_rel_err: float
    tolerance: float
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_err <= self.tolerance)

    def to_dict(self) -> dict:
        return {"claim": self.claim, "samples": self.samples, "max_abs_err": self.max_abs_err,
                "max_rel_err": self.max_rel_err, "tolerance": self.tolerance, "pass": self.passed,
                **self.extra}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def verify_isoparametric_pair(sys: CliffordSystem, which: str, i: int, samples: int, seed: int = 0,
                              tol: float = 1e-6) -> list[ClaimBlock]:
    """|grad h|^2 = 4(1 - h^2) and Lap h = -lam h for h = f_i (lam = 4(l-i-1)) or g_i (lam = 4i)."""
    if which == "f":
        fn, lam = f_i(sys, i), 4.0 * (sys.l - i - 1)
    elif which == "g":
        fn, lam = g_i(sys, i), 4.0 * i
    else:
        raise ValueError("which must be 'f' or 'g'")
    pts = sample(sys, fn.domain, samples, seed)
    grad_a, grad_e, lap_a, lap_e = [], [], [], []
    for p in pts:
        v = float(fn.ambient.value(p.coords))
        g = intrinsic_gradient(fn, p)
        grad_a.append(g @ g)
        grad_e.append(4 * (1 - v * v))
        lap_a.append(intrinsic_laplacian(fn, p, sys))
        lap_e.append(-lam * v)
    ge = np.abs(np.subtract(grad_a, grad_e))
    le = np.abs(np.subtract(lap_a, lap_e))
    name = f"{which}_{i}"
    return [
        ClaimBlock(f"|grad {name}|^2 = 4(1 - {name}^2)", samples, float(ge.max()),
                   float(rel_err(grad_a, grad_e, 4.0).max()), tol),
        ClaimBlock(f"Lap {name} = -{lam:g} {name}", samples, float(le.max()),
                   float(rel_err(lap_a, lap_e, max(lam, 1.0)).max()), tol),
    ]


def unit_normal_field(sys: CliffordSystem) -> tuple[Callable, Callable]:
    """xi(y) = sphere-tangential part of grad F at y, normalised, and its derivative D xi(y)[w].

    At a point of the hypersurface F = cos 4t this is the unit normal pointing toward M_+.
    """
    form = QuarticForm(sys)

    def xi(y):
        g = form.gradient(y)
        yy = y @ y
        v = g - (g @ y) / yy * y
        return v / np.linalg.norm(v)

    def dxi(y, w):
        g = form.gradient(y)
        hw = form.hessian(y) @ w
        yy = y @ y
        gy = g @ y
        v = g - gy / yy * y
        dv = hw - ((hw @ y + g @ w) / yy - 2 * gy * (y @ w) / yy ** 2) * y - gy / yy * w
        nv = np.linalg.norm(v)
        u = v / nv
        return (dv - u * (u @ dv)) / nv

    return xi, dxi


@dataclass
class HypersurfaceIdentityReport:
    t: float
    samples: int
    mean_curvature_expected: float
    max_err_position: float
    max_err_normal: float
    max_err_h_from_position: float
    max_err_h_from_normal: float
    tolerance: float = 1e-6

    @property
    def passed(self) -> bool:
        return max(self.max_err_position, self.max_err_normal) <= self.tolerance

    def to_dict(self) -> dict:
        return {**self.__dict__, "pass": self.passed}


def isoparametric_principal_curvatures(m1: int, m2: int, t: float) -> list[tuple[float, int]]:
    """(curvature, multiplicity) of the level at distance t from M_+, normal pointing toward M_+.

    These are cot(t + k pi/4) for k = 0..3 with multiplicities m1, m2, m1, m2.
    """
    return [(1.0 / math.tan(t + k * math.pi / 4), mult) for k, mult in enumerate((m1, m2, m1, m2))]


def isoparametric_mean_curvature(m1: int, m2: int, t: float) -> float:
    return float(sum(mult * kappa for kappa, mult in isoparametric_principal_curvatures(m1, m2, t)))


def verify_hypersurface_laplacian_identities(sys: CliffordSystem, t: float, samples: int,
                                             seed: int = 0) -> HypersurfaceIdentityReport:
    """Lap x = -n x + H xi and Lap xi = H x - |B|^2 xi on the level hypersurface F = cos 4t."""
    if abs(abs(math.cos(4 * t)) - 1) <= 1e-8:
        raise FocalAngle(f"t = {t} is a focal angle")
    mid = ManifoldId.hypersurface(t)
    xi, dxi = unit_normal_field(sys)
    n = mid.dimension(sys.l)
    err_pos = err_nor = err_hp = err_hn = 0.0
    expected_h = isoparametric_mean_curvature(sys.m1, sys.m2, t)
    for p in sample(sys, mid, samples, seed):
        x, T = p.coords, p.tangent_frame
        data = second_fundamental_data(sys, p)
        hvec = data.mean_curvature_vector
        nu = xi(x)
        h_scalar = float(hvec @ nu)
        b2 = float(np.sum((data.tensor @ nu) ** 2))
        lap_x = hvec
        lap_xi = laplacian_of_map(xi, x, T, hvec, deriv=dxi)
        err_pos = max(err_pos, float(np.max(np.abs(lap_x - (-n * x + h_scalar * nu)))))
        err_nor = max(err_nor, float(np.max(np.abs(lap_xi - (h_scalar * x - b2 * nu)))))
        err_hp = max(err_hp, abs(float(lap_x @ nu) - h_scalar), abs(h_scalar - expected_h))
        err_hn = max(err_hn, abs(float(lap_xi @ x) - h_scalar))
    return HypersurfaceIdentityReport(t=t, samples=samples, mean_curvature_expected=expected_h,
                                      max_err_position=err_pos, max_err_normal=err_nor,
                                      max_err_h_from_position=err_hp, max_err_h_from_normal=err_hn)
