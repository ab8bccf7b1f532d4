"""The quartic F(x) = |x|^4 - 2 sum_a <P_a x, x>^2 and the quadratic forms <S x, x>.

All evaluations accept a single point of shape (n,) or a batch of shape (N, n).
Gradients and Hessians are closed form; finite differences are only used in tests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .clifford import CliffordSystem
from .errors import DegenerateFoliation


def clifford_moments(pmats: np.ndarray, x: np.ndarray) -> np.ndarray:
    """s_a = <P_a x, x> for every matrix in the stack, shape (..., m+1)."""
    return np.einsum("aij,...i,...j->...a", pmats, x, x)


@dataclass(frozen=True)
class QuarticForm:
    system: CliffordSystem

    @property
    def pmats(self) -> np.ndarray:
        return self.system.float_matrices

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.einsum("...i,...i->...", x, x)
        s = clifford_moments(self.pmats, x)
        return r2 ** 2 - 2.0 * np.sum(s ** 2, axis=-1)

    __call__ = value

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pm = self.pmats
        r2 = np.einsum("...i,...i->...", x, x)
        px = np.einsum("aij,...j->...ai", pm, x)
        s = np.einsum("...ai,...i->...a", px, x)
        return 4.0 * r2[..., None] * x - 8.0 * np.einsum("...a,...ai->...i", s, px)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pm = self.pmats
        n = x.shape[-1]
        r2 = np.einsum("...i,...i->...", x, x)
        px = np.einsum("aij,...j->...ai", pm, x)
        s = np.einsum("...ai,...i->...a", px, x)
        h = 4.0 * r2[..., None, None] * np.eye(n) + 8.0 * np.einsum("...i,...j->...ij", x, x)
        h -= 8.0 * np.einsum("...a,aij->...ij", s, pm)
        h -= 16.0 * np.einsum("...ai,...aj->...ij", px, px)
        return h

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)


@dataclass(frozen=True)
class QuadraticForm:
    """x -> <S x, x> for a symmetric S; F_i and G_i take S = P_{i+1} and S = P_i."""

    matrix: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or not np.allclose(s, s.T, atol=1e-14):
            raise ValueError("QuadraticForm needs a symmetric square matrix")
        object.__setattr__(self, "matrix", s)

    @classmethod
    def from_system(cls, system: CliffordSystem, alpha: int) -> "QuadraticForm":
        return cls(system.matrices[alpha].astype(float))

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.matrix, x)

    __call__ = value

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * np.asarray(x, dtype=float) @ self.matrix

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2.0 * self.matrix, x.shape[:-1] + self.matrix.shape)


@dataclass(frozen=True)
class LinearForm:
    """x -> <w, x>; coordinate functionals are the unit vectors w = e_j."""

    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float))

    @classmethod
    def coordinate(cls, n: int, j: int) -> "LinearForm":
        return cls(np.eye(n)[j])

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.vector

    __call__ = value

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.vector, x.shape)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.vector.shape[0]
        return np.zeros(x.shape[:-1] + (n, n))


def eval_quartic(form: QuarticForm, x: np.ndarray) -> np.ndarray:
    return form.value(x)


def quartic_gradient_hessian(form: QuarticForm, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return form.gradient(x), form.hessian(x)


@dataclass
class PdeReport:
    m: int
    l: int
    variant: str
    samples: int
    max_rel_err_grad_pde: float
    max_rel_err_lap_pde: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


def verify_munzner_pde(form: QuarticForm, samples: int, seed: int = 0) -> PdeReport:
    """Check |grad F|^2 = 16|x|^6 and Lap F = 8(m2 - m1)|x|^2 at Gaussian random points."""
    sys = form.system
    m1, m2 = sys.m1, sys.m2
    if m2 <= 0:
        raise DegenerateFoliation(f"m2 = l - m - 1 = {m2} for {sys.label()}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, sys.dim))
    r2 = np.sum(x * x, axis=1)
    g = form.gradient(x)
    grad_err = np.abs(np.sum(g * g, axis=1) / (16.0 * r2 ** 3) - 1.0)
    lap = form.laplacian(x)
    expected = 8.0 * (m2 - m1) * r2
    # relative to the scale 8 l |x|^2 so that m1 = m2 (expected 0) stays meaningful
    lap_err = np.abs(lap - expected) / (8.0 * sys.l * r2)
    return PdeReport(m=sys.m, l=sys.l, variant=sys.variant.value, samples=samples,
                     max_rel_err_grad_pde=float(grad_err.max()),
                     max_rel_err_lap_pde=float(lap_err.max()))
