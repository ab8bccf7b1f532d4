"""Symmetric Clifford systems P_0, ..., P_m on R^{2l} with exact sign entries.

Everything algebraic here runs on small-integer numpy arrays, so identities
such as ``P_a P_b + P_b P_a = 2 delta_ab I`` are checked with zero tolerance.
Floating point only appears when eigenspaces are extracted.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ExtensionUnavailable, InvalidVariant, NotUnitCoefficients

_I2 = np.eye(2, dtype=np.int64)
_X2 = np.array([[0, 1], [1, 0]], dtype=np.int64)
_Z2 = np.array([[1, 0], [0, -1]], dtype=np.int64)
_J2 = np.array([[0, -1], [1, 0]], dtype=np.int64)
_LETTERS = {"I": _I2, "X": _X2, "Z": _Z2, "J": _J2}

# Anticommuting skew words over {I, X, Z, J}; found by exhaustive search and
# re-verified by tests.  Seven on R^8 realise C_{0,7}, eight on R^16 realise C_{0,8}.
_WORDS_8 = ("IIJ", "IJX", "XJZ", "ZJZ", "JIZ", "JXX", "JZX")
_WORDS_16 = ("IIIJ", "IIJX", "IXJZ", "IZJZ", "IJIZ", "IJXX", "XJZX", "ZJZX")

_BASE_DELTA = {1: 1, 2: 2, 3: 4, 4: 4, 5: 8, 6: 8, 7: 8, 8: 8}


class Variant(str, enum.Enum):
    STANDARD = "standard"
    QUATERNION_SAME = "q-same"
    QUATERNION_OPPOSITE = "q-opposite"


class Discriminant(str, enum.Enum):
    PLUS_IDENTITY = "PlusIdentity"
    MINUS_IDENTITY = "MinusIdentity"
    NOT_SCALAR = "NotScalar"


def tensor_word(word: str) -> np.ndarray:
    return reduce(np.kron, (_LETTERS[c] for c in word), np.ones((1, 1), dtype=np.int64))


# -- quaternions ------------------------------------------------------------

def qmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product on arrays whose last axis holds (1, i, j, k) coordinates."""
    p = np.asarray(p)
    q = np.asarray(q)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ], axis=-1)


def qconj(q: np.ndarray) -> np.ndarray:
    q = np.array(q, copy=True)
    q[..., 1:] *= -1
    return q


def quaternion_left(unit: str) -> np.ndarray:
    """Integer 4x4 matrix of r -> q r for q one of 'i', 'j', 'k'."""
    q = np.zeros(4, dtype=np.int64)
    q["1ijk".index(unit)] = 1
    basis = np.eye(4, dtype=np.int64)
    return np.stack([qmul(q, e) for e in basis], axis=1)


# -- Radon-Hurwitz dimension and skew generators ----------------------------

def delta(m: int) -> int:
    """Dimension of an irreducible module of the Clifford algebra C_{m-1}."""
    if m < 1:
        raise ValueError(f"delta(m) needs m >= 1, got {m}")
    factor = 1
    while m > 8:
        m -= 8
        factor *= 16
    return factor * _BASE_DELTA[m]


@dataclass(frozen=True)
class SkewGeneratorSet:
    dim: int
    generators: tuple[np.ndarray, ...]

    @property
    def count(self) -> int:
        return len(self.generators)


def _base_generators(m: int) -> list[np.ndarray]:
    if m == 1:
        return []
    if m == 2:
        return [_J2.copy()]
    if m in (3, 4):
        return [quaternion_left(u) for u in "ijk"[: m - 1]]
    return [tensor_word(w) for w in _WORDS_8[: m - 1]]


def construct_generators(m: int) -> SkewGeneratorSet:
    """m-1 skew, orthogonal, pairwise anticommuting sign matrices on R^{delta(m)}.

    Uses the period-8 step: with G_1..G_8 generating C_{0,8} on R^16 and
    Omega = G_1...G_8 (symmetric, squares to I, anticommutes with each G_a),
    a set E_j on R^n lifts to {G_a (x) I_n} + {Omega (x) E_j} on R^{16n}.
    """
    if m < 1:
        raise ValueError(f"construct_generators needs m >= 1, got {m}")
    if m <= 8:
        gens = _base_generators(m)
        return SkewGeneratorSet(dim=delta(m), generators=tuple(_freeze(g) for g in gens))
    inner = construct_generators(m - 8)
    g16 = [tensor_word(w) for w in _WORDS_16]
    omega = reduce(np.matmul, g16)
    n = inner.dim
    eye = np.eye(n, dtype=np.int64)
    gens = [np.kron(g, eye) for g in g16] + [np.kron(omega, e) for e in inner.generators]
    return SkewGeneratorSet(dim=16 * n, generators=tuple(_freeze(g) for g in gens))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


def check_skew_generators(gens: Sequence[np.ndarray]) -> list[str]:
    """Exact check of skew-symmetry, orthogonality and E_iE_j + E_jE_i = -2 delta_ij I."""
    problems = []
    for a, e in enumerate(gens):
        n = e.shape[0]
        if (e.T + e).any():
            problems.append(f"E{a + 1} not skew")
        if (e.T @ e - np.eye(n, dtype=np.int64)).any():
            problems.append(f"E{a + 1} not orthogonal")
    for a, b in itertools.combinations_with_replacement(range(len(gens)), 2):
        n = gens[a].shape[0]
        target = -2 * np.eye(n, dtype=np.int64) if a == b else 0
        if (gens[a] @ gens[b] + gens[b] @ gens[a] - target).any():
            problems.append(f"E{a + 1},E{b + 1} fail anticommutation")
    return problems


# -- symmetric Clifford systems ---------------------------------------------

def _block_pair(e: np.ndarray) -> np.ndarray:
    """The symmetric matrix of (u, v) -> (E v, -E u)."""
    z = np.zeros_like(e)
    return np.block([[z, e], [-e, z]])


def discriminant_of(matrices: Sequence[np.ndarray], tol: float = 1e-10) -> Discriminant:
    prod = reduce(np.matmul, matrices)
    eye = np.eye(prod.shape[0])
    if np.issubdtype(prod.dtype, np.integer):
        if not (prod - eye.astype(np.int64)).any():
            return Discriminant.PLUS_IDENTITY
        if not (prod + eye.astype(np.int64)).any():
            return Discriminant.MINUS_IDENTITY
        return Discriminant.NOT_SCALAR
    if np.max(np.abs(prod - eye)) <= tol:
        return Discriminant.PLUS_IDENTITY
    if np.max(np.abs(prod + eye)) <= tol:
        return Discriminant.MINUS_IDENTITY
    return Discriminant.NOT_SCALAR


@dataclass(frozen=True)
class CliffordSystem:
    m: int
    l: int
    k: int
    variant: Variant
    matrices: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def delta_m(self) -> int:
        return delta(self.m)

    @property
    def dim(self) -> int:
        return 2 * self.l

    @property
    def m1(self) -> int:
        return self.m

    @property
    def m2(self) -> int:
        return self.l - self.m - 1

    @property
    def product_discriminant(self) -> Discriminant:
        return discriminant_of(self.matrices)

    @property
    def float_matrices(self) -> np.ndarray:
        """Stacked (m+1, 2l, 2l) float copy, convenient for vectorised evaluation."""
        return np.stack(self.matrices).astype(float)

    def label(self) -> str:
        return f"m{self.m}_l{self.l}_{self.variant.value}"

    def to_json(self) -> str:
        return json.dumps({
            "m": self.m,
            "l": self.l,
            "k": self.k,
            "variant": self.variant.value,
            "matrices": [p.tolist() for p in self.matrices],
            "product_discriminant": self.product_discriminant.value,
        })

    @classmethod
    def from_json(cls, text: str) -> "CliffordSystem":
        doc = json.loads(text)
        mats = tuple(_freeze(np.array(p, dtype=np.int64)) for p in doc["matrices"])
        sys = cls(m=doc["m"], l=doc["l"], k=doc["k"], variant=Variant(doc["variant"]), matrices=mats)
        problems = check_system(sys)
        if problems:
            raise ValueError("invalid Clifford system: " + "; ".join(problems))
        return sys


def build_system(m: int, k: int, variant: Variant | str = Variant.STANDARD) -> CliffordSystem:
    """P_0(u,v)=(u,-v), P_1(u,v)=(v,u), P_{1+i}(u,v)=(E_i v, -E_i u) on R^{2l}, l = k delta(m)."""
    variant = Variant(variant)
    if m < 1 or k < 1:
        raise ValueError(f"need m >= 1 and k >= 1, got m={m}, k={k}")
    if variant is not Variant.STANDARD and (m, k) != (4, 2):
        raise InvalidVariant(f"variant {variant.value} only exists for (m, k) = (4, 2)")
    base = construct_generators(m)
    l = k * base.dim
    eye_k = np.eye(k, dtype=np.int64)
    if variant is Variant.QUATERNION_OPPOSITE:
        flip = np.diag([1, -1]).astype(np.int64)
        gens = [np.kron(flip, e) for e in base.generators]
    else:
        gens = [np.kron(eye_k, e) for e in base.generators]
    eye_l = np.eye(l, dtype=np.int64)
    zero_l = np.zeros((l, l), dtype=np.int64)
    p0 = np.block([[eye_l, zero_l], [zero_l, -eye_l]])
    p1 = np.block([[zero_l, eye_l], [eye_l, zero_l]])
    mats = [p0, p1] + [_block_pair(e) for e in gens]
    return CliffordSystem(m=m, l=l, k=k, variant=variant, matrices=tuple(_freeze(p) for p in mats))


def check_system(sys: CliffordSystem) -> list[str]:
    """Exact integer check of every structural invariant; returns a list of violations."""
    problems = []
    n = sys.dim
    eye = np.eye(n, dtype=np.int64)
    if len(sys.matrices) != sys.m + 1:
        problems.append("wrong matrix count")
    if sys.l % delta(sys.m):
        problems.append("l is not a multiple of delta(m)")
    for a, p in enumerate(sys.matrices):
        if p.shape != (n, n):
            problems.append(f"P{a} has shape {p.shape}")
            continue
        if not set(np.unique(p)) <= {-1, 0, 1}:
            problems.append(f"P{a} has entries outside {{-1,0,1}}")
        if (p - p.T).any():
            problems.append(f"P{a} not symmetric")
        if (p.T @ p - eye).any():
            problems.append(f"P{a} not orthogonal")
        if int(np.trace(p)) != 0:
            problems.append(f"P{a} has nonzero trace")
    for a, b in itertools.combinations_with_replacement(range(len(sys.matrices)), 2):
        pa, pb = sys.matrices[a], sys.matrices[b]
        target = 2 * eye if a == b else 0
        if (pa @ pb + pb @ pa - target).any():
            problems.append(f"P{a},P{b} fail anticommutation")
    return problems


def product_discriminant(sys: CliffordSystem) -> Discriminant:
    return sys.product_discriminant


def clifford_element(sys: CliffordSystem, coefficients: Sequence[float]) -> np.ndarray:
    """sum_a c_a P_a, with a short coefficient vector padded by zeros."""
    c = np.zeros(sys.m + 1)
    c[: len(coefficients)] = coefficients
    return np.tensordot(c, sys.float_matrices, axes=1)


def eigenspace_projector(sys: CliffordSystem, coefficients: Sequence[float], sign: int) -> np.ndarray:
    """Orthonormal basis (columns) of E_sign(P) for P = sum c_a P_a with |c| = 1."""
    c = np.asarray(coefficients, dtype=float)
    if abs(np.linalg.norm(c) - 1.0) > 1e-12:
        raise NotUnitCoefficients(f"|c| = {np.linalg.norm(c)!r}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    p = clifford_element(sys, c)
    proj = 0.5 * (np.eye(sys.dim) + sign * p)
    return scipy.linalg.orth(proj, rcond=1e-10)


def _as_signed_permutation(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(perm, sign) with e @ unit(a) = sign[a] * unit(perm[a])."""
    perm = np.argmax(np.abs(e), axis=0)
    sign = e[perm, np.arange(e.shape[1])]
    return perm, sign


def _generator_factors(sys: CliffordSystem) -> list[np.ndarray]:
    """The l x l factors E_i with P_{1+i}(u, v) = (E_i v, -E_i u)."""
    l = sys.l
    return [p[:l, l:] for p in sys.matrices[2:]]


def find_extension(sys: CliffordSystem) -> np.ndarray:
    """An exact symmetric P_{m+1} extending the system, or ExtensionUnavailable.

    Anticommuting with P_0 and P_1 forces P_{m+1}(u, v) = (Y v, -Y u) with Y
    skew and Y^2 = -I, and Y must anticommute with every E_i.  Since the E_i
    are signed permutations, the search runs over skew signed permutations Y:
    fixing Y on one basis vector determines it on the whole orbit of the group
    generated by the E_i, so a small backtracking search is exhaustive.
    """
    l = sys.l
    gens = [_as_signed_permutation(e) for e in _generator_factors(sys)]
    target = [-1] * l
    sgn = [0] * l
    source = [-1] * l

    def propagate(a: int, b: int, s: int, trail: list[int]) -> bool:
        queue = [(a, b, s)]
        while queue:
            a, b, s = queue.pop()
            if target[a] >= 0:
                if target[a] != b or sgn[a] != s:
                    return False
                continue
            if a == b or source[b] >= 0:
                return False
            target[a], sgn[a], source[b] = b, s, a
            trail.append(a)
            queue.append((b, a, -s))
            for perm, sign in gens:
                queue.append((int(perm[a]), int(perm[b]), -s * int(sign[a]) * int(sign[b])))
        return True

    def undo(trail: list[int]) -> None:
        for a in trail:
            source[target[a]] = -1
            target[a], sgn[a] = -1, 0

    def search() -> bool:
        free = next((a for a in range(l) if target[a] < 0), None)
        if free is None:
            return True
        for b in range(l):
            if b == free or source[b] >= 0:
                continue
            for s in (1, -1):
                trail: list[int] = []
                if propagate(free, b, s, trail) and search():
                    return True
                undo(trail)
        return False

    if l % 2 or not search():
        raise ExtensionUnavailable(f"no exact-sign extension found for {sys.label()}")
    y = np.zeros((l, l), dtype=np.int64)
    y[target, np.arange(l)] = sgn
    pm = _block_pair(y)
    assert all(not (pm @ p + p @ pm).any() for p in sys.matrices)
    return _freeze(pm)
