"""Shape operators of the level sets U_c, V_c, the sigma optimiser on M_+/M_-, and Ricci curvature of M_+."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .calculus import second_fundamental_data
from .clifford import CliffordSystem
from .errors import FocalLevel, InvalidManifold
from .forms import QuarticForm, clifford_moments
from .manifolds import Kind, ManifoldId, SamplePoint, level_normal, residual, sample

FOCAL_GUARD = 1e-8


# -- shape operators of U_c and V_c ------------------------------------------------

def _level_data(sys: CliffordSystem, p: SamplePoint) -> tuple[np.ndarray, float]:
    mid = p.manifold
    if mid.kind not in (Kind.LEVEL_U, Kind.LEVEL_V):
        raise InvalidManifold(f"shape operators are defined on U_c and V_c, not {mid.label()}")
    c = mid.level
    if abs(c) >= 1 - FOCAL_GUARD:
        raise FocalLevel(f"|c| = {abs(c)} is a focal level")
    alpha = mid.i + 1 if mid.kind is Kind.LEVEL_U else mid.i
    return sys.float_matrices[alpha], c


def shape_operator(sys: CliffordSystem, p: SamplePoint, X: np.ndarray) -> np.ndarray:
    """A X = -((P X)^T - c X) / sqrt(1 - c^2), with ^T the tangential part along the level set."""
    pa, c = _level_data(sys, p)
    T = p.tangent_frame
    return -(T @ (T.T @ (pa @ X)) - c * X) / math.sqrt(1 - c * c)


def shape_matrix(sys: CliffordSystem, p: SamplePoint, method: str = "closed") -> np.ndarray:
    """Matrix of the shape operator in the tangent frame of p."""
    pa, c = _level_data(sys, p)
    T = p.tangent_frame
    if method == "closed":
        return -(T.T @ pa @ T - c * np.eye(T.shape[1])) / math.sqrt(1 - c * c)
    if method == "numeric":
        nu = level_normal(sys, p.manifold, p.coords)
        return second_fundamental_data(sys, p, "projector").tensor @ nu
    raise ValueError(f"unknown method {method!r}")


def predicted_spectrum(mid: ManifoldId, l: int) -> list[tuple[float, int]]:
    """(curvature, multiplicity) pairs for U(i, c) or V(i, c), ascending."""
    c, i = mid.level, mid.i
    lo, hi = -math.sqrt((1 - c) / (1 + c)), math.sqrt((1 + c) / (1 - c))
    if mid.kind is Kind.LEVEL_U:
        mults = (l - i - 2, i + 1, l - i - 2)
    else:
        mults = (i - 1, l - i, i - 1)
    return [(v, k) for v, k in zip((lo, 0.0, hi), mults) if k > 0]


def cluster(values: np.ndarray, gap: float | None = None) -> list[tuple[float, int]]:
    """Group sorted eigenvalues; neighbours closer than 1e-5 (1 + max|v|) share a cluster."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return []
    if gap is None:
        gap = 1e-5 * (1 + np.max(np.abs(values)))
    groups = [[values[0]]]
    for v in values[1:]:
        if v - groups[-1][-1] < gap:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


@dataclass
class ShapeSpectrum:
    manifold: str
    eigenvalues: list[float]
    clusters: list[tuple[float, int]]
    predicted: list[tuple[float, int]]
    max_eigenvalue_error: float
    multiplicity_mismatches: int

    @property
    def matches(self) -> bool:
        return self.multiplicity_mismatches == 0

    def to_dict(self) -> dict:
        return asdict(self)


def principal_spectrum(sys: CliffordSystem, p: SamplePoint, method: str = "closed") -> ShapeSpectrum:
    eig = np.linalg.eigvalsh(shape_matrix(sys, p, method))
    predicted = predicted_spectrum(p.manifold, sys.l)
    expected = np.sort(np.concatenate([[v] * k for v, k in predicted]))
    clusters = cluster(eig)
    err = float(np.max(np.abs(eig - expected))) if eig.size == expected.size else math.inf
    mismatches = 0
    if len(clusters) != len(predicted):
        mismatches = abs(len(clusters) - len(predicted)) or 1
    else:
        mismatches = sum(k1 != k2 for (_, k1), (_, k2) in zip(clusters, predicted))
    return ShapeSpectrum(manifold=p.manifold.label(), eigenvalues=eig.tolist(), clusters=clusters,
                         predicted=predicted, max_eigenvalue_error=err, multiplicity_mismatches=mismatches)


def _eigenspaces(sys: CliffordSystem, p: SamplePoint) -> dict[float, np.ndarray]:
    """Ambient orthonormal bases of each predicted principal space, from the numerical eigenvectors."""
    evals, evecs = np.linalg.eigh(shape_matrix(sys, p))
    out = {}
    for value, _ in predicted_spectrum(p.manifold, sys.l):
        sel = np.abs(evals - value) < 1e-6 * (1 + abs(value))
        out[value] = p.tangent_frame @ evecs[:, sel]
    return out


@dataclass
class PrincipalSpaceReport:
    manifold: str
    minus_space_residual: float  # distance of the kappa_- eigenvectors from E_+(P)
    plus_space_residual: float  # distance of the kappa_+ eigenvectors from E_-(P)
    kernel_dim: int
    expected_kernel_dim: int
    kernel_angle: float  # largest principal angle between computed and predicted kernels
    minus_span_angle: float | None = None  # V_c only: angle to span{Q(x - P_i x)}

    @property
    def passed(self) -> bool:
        ok = max(self.minus_space_residual, self.plus_space_residual) <= 1e-7
        ok = ok and self.kernel_dim == self.expected_kernel_dim and self.kernel_angle <= 1e-6
        return ok and (self.minus_span_angle is None or self.minus_span_angle <= 1e-6)


def _max_angle(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape[1] != b.shape[1]:
        return math.pi / 2
    if a.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(a, b)))


def _orth_complement_in(coeff_dim: int, direction: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of a unit vector in R^coeff_dim."""
    return scipy.linalg.null_space(direction[None, :])


def principal_space_membership(sys: CliffordSystem, p: SamplePoint) -> PrincipalSpaceReport:
    pa, c = _level_data(sys, p)
    x = p.coords
    pm = sys.float_matrices
    mid = p.manifold
    spaces = _eigenspaces(sys, p)
    lo, hi = -math.sqrt((1 - c) / (1 + c)), math.sqrt((1 + c) / (1 - c))
    minus = spaces.get(lo, np.zeros((sys.dim, 0)))
    plus = spaces.get(hi, np.zeros((sys.dim, 0)))
    kernel = spaces.get(0.0, np.zeros((sys.dim, 0)))
    res_minus = float(np.max(np.abs(minus - pa @ minus))) / 2 if minus.size else 0.0
    res_plus = float(np.max(np.abs(plus + pa @ plus))) / 2 if plus.size else 0.0
    i = mid.i
    span_angle = None
    if mid.kind is Kind.LEVEL_U:
        xi = level_normal(sys, mid, x)
        predicted_kernel = scipy.linalg.orth(np.column_stack([q @ xi for q in pm[: i + 1]]))
        expected_dim = i + 1
    else:
        s = clifford_moments(pm[: i + 1], x)
        big_p = np.tensordot(s, pm[: i + 1], axes=1)
        e_plus = scipy.linalg.orth(0.5 * (np.eye(sys.dim) + big_p), rcond=1e-10)
        rs = _orth_complement_in(i + 1, s)
        cons = [x] + [pm[i] @ (np.tensordot(r, pm[: i + 1], axes=1) @ x) for r in rs.T]
        coeffs = scipy.linalg.null_space(np.column_stack(cons).T @ e_plus, rcond=1e-8)
        predicted_kernel = e_plus @ coeffs
        expected_dim = sys.l - i
        if i >= 2:
            head = s[:i] / np.linalg.norm(s[:i])
            qs = _orth_complement_in(i, head)
            w = x - pm[i] @ x
            span = np.column_stack([np.tensordot(q, pm[:i], axes=1) @ w for q in qs.T])
            span_angle = _max_angle(scipy.linalg.orth(span), minus)
    return PrincipalSpaceReport(manifold=mid.label(), minus_space_residual=res_minus,
                                plus_space_residual=res_plus, kernel_dim=kernel.shape[1],
                                expected_kernel_dim=expected_dim,
                                kernel_angle=_max_angle(predicted_kernel, kernel),
                                minus_span_angle=span_angle)


# -- sigma(M_+-) -------------------------------------------------------------

def sigma_matrices(sys: CliffordSystem, p: SamplePoint) -> np.ndarray:
    """Symmetric (K, d, d) matrices A_k with |B(Ty, Ty)|^2 = sum_k (y^T A_k y)^2 (sphere part of B).

    On M_+ these are T^T P_a T; elsewhere they come from the numerical second fundamental form
    projected on the sphere-tangent normals.
    """
    T = p.tangent_frame
    if p.manifold == ManifoldId.M(sys.m):
        return np.einsum("ia,kij,jb->kab", T, sys.float_matrices, T)
    data = second_fundamental_data(sys, p)
    sym = 0.5 * (data.sphere_part() + data.sphere_part().transpose(1, 0, 2))
    return np.einsum("abk,kn->nab", sym, p.normal_frame[:, 1:])


def _objective(A: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values sum_k (y^T A_k y)^2 and Euclidean gradients, batched over (points, restarts)."""
    AY = np.einsum("pkab,prb->prka", A, Y)
    q = np.einsum("prka,pra->prk", AY, Y)
    return np.sum(q * q, axis=-1), 4 * np.einsum("prk,prka->pra", q, AY)


def _objective_rows(A: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same as _objective for flat rows: A (n, K, d, d), Y (n, d)."""
    AY = np.einsum("nkab,nb->nka", A, Y)
    q = np.einsum("nka,na->nk", AY, Y)
    return np.sum(q * q, axis=-1), 4 * np.einsum("nk,nka->na", q, AY)


def _tangent_part(g: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return g - np.sum(g * Y, axis=-1, keepdims=True) * Y


def sphere_ascent(A: np.ndarray, Y: np.ndarray, maximize: bool = True, tol: float = 1e-10,
                  max_iter: int = 20000) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Projected gradient ascent (or descent) on unit spheres with Armijo backtracking.

    A: (P, K, d, d); Y: (P, R, d) unit starting vectors.  Returns (Y, values, grad norms, iterations).
    Only rows that have not converged are updated, so a few slow restarts stay cheap.
    """
    sgn = 1.0 if maximize else -1.0
    shape = Y.shape[:2]
    Y = (Y / np.linalg.norm(Y, axis=-1, keepdims=True)).reshape(-1, Y.shape[-1])
    rows_a = np.repeat(np.arange(shape[0]), shape[1])
    step = np.full(len(Y), 0.1)
    val, grad = _objective_rows(A[rows_a], Y)
    gn = np.linalg.norm(_tangent_part(grad, Y), axis=-1)
    active = np.flatnonzero(gn >= tol)
    it = 0
    for it in range(1, max_iter + 1):
        if active.size == 0:
            break
        Aa, Ya, va, ga = A[rows_a[active]], Y[active], val[active], grad[active]
        rg = _tangent_part(ga, Ya)
        g0 = gn[active]
        t = step[active].copy()
        done = np.zeros(active.size, dtype=bool)
        for _ in range(40):
            cand = Ya + sgn * t[:, None] * rg
            cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
            cval, cgrad = _objective_rows(Aa, cand)
            armijo = sgn * (cval - va) >= 1e-4 * t * g0 ** 2
            # near the optimum value changes drop below rounding; then accept any step that
            # shrinks the Riemannian gradient without losing more than rounding in value
            cgn = np.linalg.norm(_tangent_part(cgrad, cand), axis=-1)
            floor = (sgn * (cval - va) >= -1e-15 * (1 + np.abs(va))) & (cgn < g0)
            ok = ~done & (armijo | floor)
            Ya[ok], va[ok], ga[ok], gn[active[ok]] = cand[ok], cval[ok], cgrad[ok], cgn[ok]
            done |= ok
            if done.all():
                break
            t = np.where(done, t, 0.5 * t)
        Y[active], val[active], grad[active] = Ya, va, ga
        step[active] = np.where(done, 2.0 * t, step[active])
        # rows whose line search failed sit at the rounding floor and are frozen
        active = active[done & (gn[active] >= tol)]
    gn = np.linalg.norm(_tangent_part(grad, Y), axis=-1)
    return Y.reshape(*shape, -1), val.reshape(shape), gn.reshape(shape), it


@dataclass
class SigmaCertificate:
    manifold: str
    sigma_hat: float
    maximizer_point: list[float]
    maximizer_direction: list[float]
    max_witness_value: float
    max_witness_target_residual: float  # X_1 as a point of M_- (on M_+ runs) or M_+ (on M_- runs)
    min_witness_value: float
    min_witness_direction: list[float]
    min_witness_target_residual: float  # X_0 as a point of M_+ (M_+ runs) or M_- (M_- runs)
    identity_residual: float
    minimality_residual: float
    max_grad_norm: float
    points: int
    restarts: int
    iterations: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def sigma_optimize(sys: CliffordSystem, which: str = "+", points: int = 32, restarts: int = 64,
                   seed: int = 0, tol: float = 1e-10, max_iter: int = 20000) -> SigmaCertificate:
    """Maximise and minimise |B(X, X)|^2 over unit tangent X on M_+ (which='+') or M_- (which='-').

    Also checks |B(X,X)|^2 = (1 - F(X))/2 on M_+ and (1 + F(X))/2 on M_- at every start and end
    direction, and the trace of each normal shape operator (minimality).
    """
    if sys.m2 <= 0:
        raise InvalidManifold("sigma needs a genuine quartic foliation (m2 >= 1)")
    mid = ManifoldId.M(sys.m) if which == "+" else ManifoldId.N(sys.m)
    other = ManifoldId.N(sys.m) if which == "+" else ManifoldId.M(sys.m)
    pts = sample(sys, mid, points, seed)
    A = np.stack([sigma_matrices(sys, p) for p in pts])
    d = A.shape[-1]
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(points + 1)[-1])
    Y0 = rng.standard_normal((points, restarts, d))
    Y0 /= np.linalg.norm(Y0, axis=-1, keepdims=True)
    ymax, vmax, gmax, it1 = sphere_ascent(A, Y0, True, tol, max_iter)
    ymin, vmin, gmin, it2 = sphere_ascent(A, Y0, False, tol, max_iter)
    form = QuarticForm(sys)
    frames = np.stack([p.tangent_frame for p in pts])
    sign = -1.0 if which == "+" else 1.0
    ident = 0.0
    for Y in (Y0, ymax, ymin):
        vals, _ = _objective(A, Y)
        X = np.einsum("pia,pra->pri", frames, Y)
        ident = max(ident, float(np.max(np.abs(vals - (1 + sign * form.value(X)) / 2))))
    minimality = float(np.max(np.abs(np.trace(A, axis1=-2, axis2=-1))))
    bp, br = np.unravel_index(np.argmax(vmax), vmax.shape)
    wp, wr = np.unravel_index(np.argmin(vmin), vmin.shape)
    x1 = frames[bp] @ ymax[bp, br]
    x0 = frames[wp] @ ymin[wp, wr]
    return SigmaCertificate(
        manifold="M+" if which == "+" else "M-",
        sigma_hat=float(vmax[bp, br]),
        maximizer_point=pts[bp].coords.tolist(),
        maximizer_direction=x1.tolist(),
        max_witness_value=float(vmax[bp, br]),
        max_witness_target_residual=residual(sys, other, x1),
        min_witness_value=float(vmin[wp, wr]),
        min_witness_direction=x0.tolist(),
        min_witness_target_residual=residual(sys, mid, x0),
        identity_residual=ident,
        minimality_residual=minimality,
        max_grad_norm=float(max(gmax.max(), gmin.max())),
        points=points, restarts=restarts, iterations=max(it1, it2),
    )


def sigma_identity_residual(sys: CliffordSystem, draws: int, seed: int = 0) -> float:
    """max |sum_a <P_a X, X>^2 - (1 - F(X))/2| over random unit tangents X on M_+."""
    pts = sample(sys, ManifoldId.M(sys.m), max(1, draws // 100), seed)
    rng = np.random.default_rng(seed + 1)
    form = QuarticForm(sys)
    pm = sys.float_matrices
    worst = 0.0
    per = -(-draws // len(pts))
    for p in pts:
        X = rng.standard_normal((per, p.dim)) @ p.tangent_frame.T
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        lhs = np.sum(clifford_moments(pm, X) ** 2, axis=1)
        worst = max(worst, float(np.max(np.abs(lhs - (1 - form.value(X)) / 2))))
    return worst


# -- Ricci curvature of M_+ --------------------------------------------------------

def ricci_formula(sys: CliffordSystem, p: SamplePoint, X: np.ndarray) -> tuple[float, float]:
    """(closed formula, Gauss equation) values of Ric(X, X) for a unit tangent X of M_+.

    Formula: 2(l - m - 2) + 2 sum_{a<b} <X, P_a P_b x>^2.
    Gauss:   (dim - 1)|X|^2 - sum_a |A_a X|^2 with A_a X = -(P_a X)^T.
    """
    if p.manifold != ManifoldId.M(sys.m):
        raise InvalidManifold("the Ricci formula is stated on M_+")
    pm = sys.float_matrices
    x, T = p.coords, p.tangent_frame
    pairs = [(a, b) for a in range(sys.m + 1) for b in range(a + 1, sys.m + 1)]
    formula = 2 * (sys.l - sys.m - 2) + 2 * sum(float(X @ (pm[a] @ (pm[b] @ x))) ** 2 for a, b in pairs)
    n = T.shape[1]
    shape_sq = sum(float(np.sum((T.T @ (q @ X)) ** 2)) for q in pm)
    gauss = (n - 1) * float(X @ X) - shape_sq
    return formula, gauss


def ricci_gram(sys: CliffordSystem, x: np.ndarray) -> np.ndarray:
    """Gram matrix of {P_a P_b x : a < b}."""
    pm = sys.float_matrices
    vecs = np.column_stack([pm[a] @ (pm[b] @ x) for a in range(sys.m + 1) for b in range(a + 1, sys.m + 1)])
    return vecs.T @ vecs


EXCEPTIONS = {
    (1, 1): "not harmonically unstable (pi_1 = Z_2)",
    (1, 2): "not harmonically unstable (pi_2 = Z)",
    (2, 1): "not harmonically unstable (pi_1 = Z)",
    (2, 3): "undetermined",
    (5, 2): "not harmonically unstable (pi_2 = Z)",
    (6, 1): "not harmonically unstable (pi_1 = Z)",
    (9, 6): "undetermined",
}


def harmonic_instability(m1: int, m2: int, homogeneous: bool | None = None) -> str:
    """Classification of M_+ by the Ricci lower bound rho >= 2(m2 - 1) against dim/2 and the exceptions."""
    if (m1, m2) == (4, 3):
        if homogeneous is None:
            return "homogeneous: harmonically unstable (rho = 6 > 5); inhomogeneous: undetermined"
        return "harmonically unstable (rho = 6 > 5)" if homogeneous else "undetermined"
    if (m1, m2) in EXCEPTIONS:
        return EXCEPTIONS[(m1, m2)]
    dim = m1 + 2 * m2
    if 2 * (m2 - 1) > dim / 2:
        return "harmonically unstable (Ricci lower bound)"
    return "not decided by the Ricci lower bound"


def classification_table(homogeneous_43: bool | None = None) -> list[dict]:
    rows = []
    for (m1, m2) in [(1, 1), (1, 2), (2, 1), (2, 3), (4, 3), (5, 2), (6, 1), (9, 6)]:
        if (m1, m2) == (4, 3):
            for hom in (True, False):
                rows.append({"m1": m1, "m2": m2, "family": "homogeneous" if hom else "inhomogeneous",
                             "verdict": harmonic_instability(m1, m2, hom)})
        else:
            rows.append({"m1": m1, "m2": m2, "family": "", "verdict": harmonic_instability(m1, m2)})
    return rows
