"""Run configuration, the claims registry, and deterministic JSON verification reports."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .calculus import (mean_curvature, second_fundamental_data, verify_hypersurface_laplacian_identities,
                       verify_isoparametric_pair)
from .clifford import CliffordSystem, Discriminant, Variant, build_system, check_system, find_extension
from .curvature import (classification_table, principal_space_membership, principal_spectrum, ricci_formula,
                        ricci_gram, shape_matrix, sigma_identity_residual, sigma_optimize)
from .errors import ConfigError, ExtensionUnavailable, OtfkmError, WrongVariant
from .focal import (FocalMap, MapKind, eigenmap_check, fiber_check, horizontal_singular_values, jacobian_determinant,
                    kg_ratio, level_consistency, pushforward_check, tension_normality, volume_element_factor,
                    well_definedness, write_volume_csv)
from .forms import QuarticForm, verify_munzner_pde
from .manifolds import Kind, ManifoldId, make_point, residual, sample, sample_coords, sp2_charts, write_points_csv
from .spectral import (GraphSpec, sphere_calibration, verify_eigenvalue_inequalities,
                       verify_explicit_eigenfunctions, write_eigenvalues_csv)

SUITES = ("clifford", "forms", "manifolds", "calculus", "curvature", "sigma", "focal", "spectral")
# later suites only read the system, so they can run side by side once the first four are done
STAGES = (("clifford",), ("forms",), ("manifolds",), ("calculus",), ("curvature", "sigma", "focal", "spectral"))

STATUSES = ("PASS", "FAIL", "ESTIMATE-PASS", "ESTIMATE-FAIL", "NOT-APPLICABLE", "NOT-VERIFIABLE")

DEFAULT_SAMPLES = {
    "munzner": 1000,
    "membership": 20,
    "isoparametric": 500,
    "minimal": 200,
    "hypersurface": 50,
    "spectra": 20,
    "principal_spaces": 10,
    "ricci": 100,
    "sigma_points": 32,
    "sigma_restarts": 64,
    "sigma_identity": 10000,
    "pushforward": 50,
    "fiber_points": 5,
    "fiber_samples": 50,
    "eigenmap": 200,
    "tension": 200,
    "well_defined": 1000,
    "explicit": 200,
    "graph_points": 8000,
}
# counts that a global --samples override leaves alone (budgets rather than sample sizes)
FIXED_BUDGETS = {"sigma_points", "sigma_restarts", "fiber_points", "graph_points"}

DEFAULT_TOLERANCES = {
    "munzner": 1e-9,
    "membership": 1e-10,
    "isoparametric": 1e-6,
    "minimal": 1e-7,
    "hypersurface": 1e-6,
    "spectra": 1e-8,
    "principal_spaces": 1e-7,
    "totally_geodesic": 1e-6,
    "ricci": 1e-6,
    "sigma_plus_low": 1e-4,
    "sigma_plus_high": 1e-6,
    "sigma_minus_low": 1e-2,
    "sigma_minus_high": 1e-3,
    "sigma_witness": 1e-6,
    "sigma_identity": 1e-10,
    "pushforward": 1e-9,
    "volume": 1e-8,
    "kg_ratio": 1e-6,
    "fiber": 1e-8,
    "eigenmap": 1e-6,
    "tension": 1e-6,
    "landing": 1e-10,
    "section": 1e-9,
    "explicit": 1e-6,
}

LEVELS = (-0.9, -0.5, 0.0, 0.5, 0.9)
HYPERSURFACE_ANGLES = (0.2, 0.5)


@dataclass
class RunConfig:
    m: int = 1
    k: int = 3
    variant: str = "standard"
    seed: int = 0
    suites: tuple[str, ...] = SUITES
    samples: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SAMPLES))
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str | None = None
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        cfg = cls()
        known = {f for f in cfg.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, value in doc.items():
            if key == "samples":
                if isinstance(value, int):
                    cfg.samples = override_samples(cfg.samples, value)
                else:
                    cfg.samples = {**cfg.samples, **value}
            elif key == "tolerances":
                cfg.tolerances = {**cfg.tolerances, **value}
            elif key == "suites":
                cfg.suites = tuple(value)
            else:
                setattr(cfg, key, value)
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def validate(self) -> CliffordSystem:
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suites {unknown}; choose from {list(SUITES)}")
        bad = [k for k, v in self.tolerances.items() if not (isinstance(v, (int, float)) and v > 0)]
        if bad:
            raise ConfigError(f"tolerances must be positive: {bad}")
        bad = [k for k, v in self.samples.items() if not (isinstance(v, int) and v >= 1)]
        if bad:
            raise ConfigError(f"sample counts must be positive integers: {bad}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            sys = build_system(self.m, self.k, self.variant)
        except (ValueError, OtfkmError) as e:
            raise ConfigError(str(e)) from e
        if sys.m2 < 1:
            raise ConfigError(f"{sys.label()} has m2 = {sys.m2}; the quartic foliation needs m2 >= 1")
        return sys

    def echo(self) -> dict:
        d = asdict(self)
        d["suites"] = list(self.suites)
        d.pop("out")
        d.pop("threads")
        return d


def override_samples(samples: dict[str, int], n: int) -> dict[str, int]:
    return {k: (v if k in FIXED_BUDGETS else n) for k, v in samples.items()}


@dataclass
class Context:
    sys: CliffordSystem
    config: RunConfig
    out: Path | None

    def n(self, key: str) -> int:
        return self.config.samples[key]

    def tol(self, key: str) -> float:
        return self.config.tolerances[key]

    @property
    def seed(self) -> int:
        return self.config.seed


ClaimResult = tuple[str, dict]


@dataclass(frozen=True)
class Claim:
    id: str
    anchor: str
    suite: str
    label: str  # EXACT or ESTIMATE
    run: Callable[[Context], ClaimResult]


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _f(v) -> float | None:
    """JSON-friendly float (inf and nan become strings)."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else repr(v)


# -- clifford -------------------------------------------------------------------

def _anticommutation(ctx: Context) -> ClaimResult:
    problems = check_system(ctx.sys)
    return _status(not problems), {"violations": problems, "matrices": ctx.sys.m + 1, "l": ctx.sys.l}


def _discriminant(ctx: Context) -> ClaimResult:
    d = ctx.sys.product_discriminant
    scalar = d is not Discriminant.NOT_SCALAR
    metrics = {"discriminant": d.value, "scalar": scalar}
    if ctx.sys.variant is Variant.QUATERNION_SAME:
        return _status(scalar), metrics
    if ctx.sys.variant is Variant.QUATERNION_OPPOSITE or ctx.sys.m == 1:
        return _status(not scalar), metrics
    return "PASS", metrics


def _extension(ctx: Context) -> ClaimResult:
    try:
        y = find_extension(ctx.sys)
    except ExtensionUnavailable as e:
        if ctx.sys.variant is Variant.QUATERNION_SAME:
            return "PASS", {"extends": False, "expected": "no extension", "detail": str(e)}
        return "NOT-APPLICABLE", {"extends": False, "detail": str(e)}
    mats = list(ctx.sys.matrices) + [y]
    ok = not any((a @ b + b @ a - (2 * np.eye(len(y), dtype=np.int64) if i == j else 0)).any()
                 for i, a in enumerate(mats) for j, b in enumerate(mats))
    ok = ok and ctx.sys.variant is not Variant.QUATERNION_SAME
    return _status(ok), {"extends": True}


# -- forms ------------------------------------------------------------------------

def _munzner(ctx: Context) -> ClaimResult:
    r = verify_munzner_pde(QuarticForm(ctx.sys), ctx.n("munzner"), ctx.seed)
    ok = max(r.max_rel_err_grad_pde, r.max_rel_err_lap_pde) <= ctx.tol("munzner")
    return _status(ok), {"samples": r.samples, "max_rel_err_grad_pde": r.max_rel_err_grad_pde,
                         "max_rel_err_lap_pde": r.max_rel_err_lap_pde, "tolerance": ctx.tol("munzner")}


# -- manifolds -----------------------------------------------------------------------

def all_manifolds(sys: CliffordSystem) -> list[ManifoldId]:
    m = sys.m
    out = [ManifoldId.sphere()]
    out += [ManifoldId.M(i) for i in range(m + 1)]
    out += [ManifoldId.N(i) for i in range(1, m + 1)]
    out += [ManifoldId.level_u(i, c) for i in range(m) for c in (-0.5, 0.5)]
    out += [ManifoldId.level_v(i, c) for i in range(1, m + 1) for c in (-0.5, 0.5)]
    out += [ManifoldId.focal_u(i, s) for i in range(m) for s in (1, -1)]
    out += [ManifoldId.focal_v(i, s) for i in range(1, m + 1) for s in (1, -1)]
    out += [ManifoldId.hypersurface(t) for t in HYPERSURFACE_ANGLES]
    return out


def _membership(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    worst = {"residual": 0.0, "unit": 0.0, "frame": 0.0}
    dims_ok = True
    nesting = 0.0
    rows = []
    for mid in all_manifolds(sys):
        pts = sample(sys, mid, ctx.n("membership"), ctx.seed)
        for p in pts:
            frame = np.hstack([p.tangent_frame, p.normal_frame])
            worst["residual"] = max(worst["residual"], p.residual)
            worst["unit"] = max(worst["unit"], abs(float(np.linalg.norm(p.coords)) - 1))
            worst["frame"] = max(worst["frame"], float(np.max(np.abs(frame.T @ frame - np.eye(sys.dim)))))
            dims_ok &= p.dim == mid.dimension(sys.l)
            if mid.kind is Kind.M and mid.i > 0:
                nesting = max(nesting, residual(sys, ManifoldId.M(mid.i - 1), p.coords))
            if mid.kind is Kind.N and mid.i < sys.m:
                nesting = max(nesting, residual(sys, ManifoldId.N(mid.i + 1), p.coords))
        rows.append({"manifold": mid.label(), "dim": mid.dimension(sys.l)})
        if ctx.out is not None:
            write_points_csv(ctx.out / "points" / f"{slug(mid.label())}.csv", pts)
    tol = ctx.tol("membership")
    ok = dims_ok and worst["residual"] <= tol and worst["unit"] <= 1e-12 and worst["frame"] <= 1e-10 and nesting <= tol
    return _status(ok), {"manifolds": rows, "max_residual": worst["residual"], "max_unit_err": worst["unit"],
                         "max_frame_err": worst["frame"], "max_nesting_residual": nesting, "dimensions_ok": dims_ok}


def slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "_-." else "_" for c in label).strip("_")


def _focal_identification(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    pm = sys.float_matrices
    worst = 0.0
    for i in range(sys.m):
        for s in (1, -1):
            for x in sample_coords(sys, ManifoldId.focal_u(i, s), ctx.n("membership"), ctx.seed):
                worst = max(worst, float(np.max(np.abs(pm[i + 1] @ x - s * x))))
    for i in range(1, sys.m + 1):
        for s in (1, -1):
            for x in sample_coords(sys, ManifoldId.focal_v(i, s), ctx.n("membership"), ctx.seed):
                worst = max(worst, float(np.max(np.abs(pm[i] @ x - s * x))))
    return _status(worst <= 1e-10), {"max_eigen_residual": worst, "tolerance": 1e-10}


def _charts(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    if sys.variant is Variant.STANDARD:
        return "NOT-APPLICABLE", {"reason": "charts exist for the quaternionic (4, 8) systems only"}
    worst = max(sp2_charts(sys, x).check_residual for x in sample_coords(sys, ManifoldId.M(sys.m), ctx.n("membership"), ctx.seed))
    return _status(worst <= 1e-9), {"max_chart_residual": worst, "variant": sys.variant.value}


# -- calculus ---------------------------------------------------------------------------

def _pair(which: str, indices: Callable[[CliffordSystem], range]) -> Callable[[Context], ClaimResult]:
    def run(ctx: Context) -> ClaimResult:
        blocks = []
        for i in indices(ctx.sys):
            blocks += verify_isoparametric_pair(ctx.sys, which, i, ctx.n("isoparametric"), ctx.seed,
                                                ctx.tol("isoparametric"))
        return _status(all(b.passed for b in blocks)), {"blocks": [b.to_dict() for b in blocks]}
    return run


def _minimal_sequence(ctx: Context) -> ClaimResult:
    """Sphere-tangent mean curvature of M_i in S, of M_{i+j} in M_i, and of N_i in N_{i+j}."""
    sys = ctx.sys
    n = ctx.n("minimal")
    worst = {"M_in_S": 0.0, "M_in_M": 0.0, "N_in_S": 0.0, "N_in_N": 0.0, "position": 0.0}
    for kind, top in (("M", sys.m), ("N", sys.m)):
        ids = [ManifoldId.M(i) for i in range(top + 1)] if kind == "M" else [ManifoldId.N(i) for i in range(1, top + 1)]
        for mid in ids:
            parents = ([ManifoldId.M(j) for j in range(mid.i)] if kind == "M"
                       else [ManifoldId.N(j) for j in range(mid.i + 1, sys.m + 1)])
            for p in sample(sys, mid, n, ctx.seed):
                h = mean_curvature(sys, p)
                worst[f"{kind}_in_S"] = max(worst[f"{kind}_in_S"], float(np.max(np.abs(h.sphere_tangent), initial=0.0)))
                worst["position"] = max(worst["position"], abs(float(h.vector @ p.coords) + p.dim))
                for parent in parents:
                    T = make_point(sys, parent, p.coords).tangent_frame
                    worst[f"{kind}_in_{kind}"] = max(worst[f"{kind}_in_{kind}"], float(np.max(np.abs(T.T @ h.vector))))
    tol = ctx.tol("minimal")
    ok = max(v for k, v in worst.items() if k != "position") <= tol and worst["position"] <= 1e-7
    return _status(ok), {**{f"max_{k}": v for k, v in worst.items()}, "samples": n, "tolerance": tol}


def _hypersurface(ctx: Context) -> ClaimResult:
    reports = [verify_hypersurface_laplacian_identities(ctx.sys, t, ctx.n("hypersurface"), ctx.seed)
               for t in HYPERSURFACE_ANGLES]
    return _status(all(r.passed for r in reports)), {"reports": [r.to_dict() for r in reports]}


def _level_flow(ctx: Context) -> ClaimResult:
    errs = [level_consistency(ctx.sys, i, 5, seed=ctx.seed) for i in range(ctx.sys.m)]
    return _status(max(errs) <= 1e-10), {"max_err": max(errs), "angles": 64}


# -- curvature ---------------------------------------------------------------------------

def _levels(sys: CliffordSystem) -> list[ManifoldId]:
    return ([ManifoldId.level_u(i, c) for i in range(sys.m) for c in LEVELS]
            + [ManifoldId.level_v(i, c) for i in range(1, sys.m + 1) for c in LEVELS])


def _spectra(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    err, mismatches, rows = 0.0, 0, []
    for mid in _levels(sys):
        worst = 0.0
        for p in sample(sys, mid, ctx.n("spectra"), ctx.seed):
            s = principal_spectrum(sys, p)
            worst = max(worst, s.max_eigenvalue_error)
            mismatches += s.multiplicity_mismatches
        err = max(err, worst)
        rows.append({"manifold": mid.label(), "max_eigenvalue_error": _f(worst), "predicted": s.predicted})
    ok = err <= ctx.tol("spectra") and mismatches == 0
    return _status(ok), {"max_eigenvalue_error": _f(err), "multiplicity_mismatches": mismatches, "levels": rows}


def _spectrum_symmetry(ctx: Context) -> ClaimResult:
    """spec(U_{-c}) = -spec(U_c) with the natural normal; reversing that normal restores spec(U_c)."""
    sys = ctx.sys
    err = 0.0
    for mid in _levels(sys):
        if mid.level <= 0:
            continue
        mirror = replace(mid, level=-mid.level)
        a = np.linalg.eigvalsh(shape_matrix(sys, sample(sys, mid, 1, ctx.seed)[0]))
        b = np.linalg.eigvalsh(shape_matrix(sys, sample(sys, mirror, 1, ctx.seed)[0]))
        err = max(err, float(np.max(np.abs(np.sort(b) - np.sort(-a)))))
    return _status(err <= 1e-8), {"max_err": err}


def _principal_spaces(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    bad, worst = [], {"residual": 0.0, "kernel_angle": 0.0, "span_angle": 0.0}
    for mid in _levels(sys):
        for p in sample(sys, mid, ctx.n("principal_spaces"), ctx.seed):
            r = principal_space_membership(sys, p)
            worst["residual"] = max(worst["residual"], r.minus_space_residual, r.plus_space_residual)
            worst["kernel_angle"] = max(worst["kernel_angle"], r.kernel_angle)
            if r.minus_span_angle is not None:
                worst["span_angle"] = max(worst["span_angle"], r.minus_span_angle)
            if not r.passed:
                bad.append(r.manifold)
    return _status(not bad), {**{f"max_{k}": v for k, v in worst.items()}, "failed": sorted(set(bad))}


def _totally_geodesic(ctx: Context) -> ClaimResult:
    """Focal sets U_{+-1} are totally geodesic in M_i: B of the focal set has no M_i-tangent part."""
    sys = ctx.sys
    worst = 0.0
    for i in range(sys.m):
        for s in (1, -1):
            for p in sample(sys, ManifoldId.focal_u(i, s), 3, ctx.seed):
                data = second_fundamental_data(sys, p, "projector")
                T = make_point(sys, ManifoldId.M(i), p.coords).tangent_frame
                worst = max(worst, float(np.max(np.abs(data.tensor @ T))))
    return _status(worst <= ctx.tol("totally_geodesic")), {"max_tangential_B": worst}


def _ricci(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    rng = np.random.default_rng(ctx.seed)
    n = ctx.n("ricci")
    err, lowest = 0.0, math.inf
    for p in sample(sys, ManifoldId.M(sys.m), n, ctx.seed):
        X = p.tangent_frame @ rng.standard_normal(p.dim)
        X /= np.linalg.norm(X)
        a, b = ricci_formula(sys, p, X)
        err = max(err, abs(a - b))
        lowest = min(lowest, a)
    bound = 2 * (sys.l - sys.m - 2)
    ok = err <= ctx.tol("ricci") and lowest >= bound - 1e-9
    return _status(ok), {"pairs": n, "max_formula_vs_gauss": err, "min_value": lowest, "lower_bound": bound}


def _ricci_homogeneous(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    if sys.variant is not Variant.QUATERNION_SAME:
        return "NOT-APPLICABLE", {"reason": "the constant value belongs to the homogeneous (4, 8) system"}
    rng = np.random.default_rng(ctx.seed + 1)
    err = gram = 0.0
    for p in sample(sys, ManifoldId.M(sys.m), 20, ctx.seed):
        X = p.tangent_frame @ rng.standard_normal(p.dim)
        X /= np.linalg.norm(X)
        err = max(err, abs(ricci_formula(sys, p, X)[0] - 6.0))
        g = ricci_gram(sys, p.coords)
        gram = max(gram, float(np.max(np.abs(g - np.eye(len(g))))))
    return _status(err <= 1e-6 and gram <= 1e-9), {"max_err_from_6": err, "max_gram_err": gram}


def _classification(ctx: Context) -> ClaimResult:
    return "PASS", {"table": classification_table(), "system_m1_m2": [ctx.sys.m1, ctx.sys.m2]}


# -- sigma ------------------------------------------------------------------------------

def _sigma(which: str) -> Callable[[Context], ClaimResult]:
    def run(ctx: Context) -> ClaimResult:
        cert = sigma_optimize(ctx.sys, which, ctx.n("sigma_points"), ctx.n("sigma_restarts"), ctx.seed)
        lo, hi = ("sigma_plus_low", "sigma_plus_high") if which == "+" else ("sigma_minus_low", "sigma_minus_high")
        w = ctx.tol("sigma_witness")
        ok = 1 - ctx.tol(lo) <= cert.sigma_hat <= 1 + ctx.tol(hi)
        ok = ok and cert.max_witness_target_residual <= w and cert.min_witness_value <= w
        ok = ok and cert.min_witness_target_residual <= w
        ident_tol = ctx.tol("sigma_identity") if which == "+" else 1e-5
        ok = ok and cert.identity_residual <= ident_tol
        if ctx.out is not None:
            path = ctx.out / f"sigma_{'plus' if which == '+' else 'minus'}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(cert.to_json())
        d = asdict(cert)
        return _status(ok), {k: d[k] for k in d if not k.endswith(("_point", "_direction"))} | {
            "witness_max_direction": cert.maximizer_direction, "witness_min_direction": cert.min_witness_direction}
    return run


def _sigma_identity(ctx: Context) -> ClaimResult:
    r = sigma_identity_residual(ctx.sys, ctx.n("sigma_identity"), ctx.seed)
    return _status(r <= ctx.tol("sigma_identity")), {"draws": ctx.n("sigma_identity"), "max_residual": r}


# -- focal ----------------------------------------------------------------------------------

def _pushforward(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    rng = np.random.default_rng(ctx.seed)
    worst = 0.0
    for i in range(sys.m):
        for t in (0.3, -0.2, math.pi / 4):
            fm = FocalMap(MapKind.PHI_T, i=i, t=t)
            for x in sample_coords(sys, fm.source(sys), max(1, ctx.n("pushforward") // 3), ctx.seed):
                worst = max(worst, pushforward_check(sys, fm, x, rng).max_err)
    for i in range(1, sys.m + 1):
        fm = FocalMap(MapKind.PSI_T, i=i, t=0.3)
        for x in sample_coords(sys, fm.source(sys), max(1, ctx.n("pushforward") // 3), ctx.seed):
            worst = max(worst, pushforward_check(sys, fm, x, rng).max_err)
    return _status(worst <= ctx.tol("pushforward")), {"max_err": worst}


def _volume(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    worst = 0.0
    ts = np.linspace(-0.7, 0.7, 15)
    for i in range(sys.m):
        for t in (0.0, 0.3, -0.5):
            fm = FocalMap(MapKind.PHI_T, i=i, t=t)
            for x in sample_coords(sys, fm.source(sys), 3, ctx.seed):
                worst = max(worst, abs(jacobian_determinant(sys, fm, x) / volume_element_factor(sys, i, t) - 1))
        if ctx.out is not None:
            write_volume_csv(ctx.out / "volume" / f"volume_factor_i{i}.csv", sys, i, ts)
    return _status(worst <= ctx.tol("volume")), {"max_ratio_err": worst}


def _kg(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    rows = []
    for i in range(sys.m):
        n = sys.l - i - 2
        if n - 1 <= 0:
            rows.append({"i": i, "status": "NOT-APPLICABLE"})
            continue
        r = kg_ratio(n)
        rows.append({"i": i, "ratio": r.ratio, "predicted": r.predicted, "err": abs(r.ratio - r.predicted)})
    errs = [r["err"] for r in rows if "err" in r]
    if not errs:
        return "NOT-APPLICABLE", {"rows": rows}
    return _status(max(errs) <= ctx.tol("kg_ratio")), {"rows": rows}


def _quarter_maps(sys: CliffordSystem) -> list[FocalMap]:
    maps = [FocalMap(MapKind.PHI_QUARTER, i=i, sign=s) for i in range(sys.m) for s in (1, -1)]
    maps += [FocalMap(MapKind.PSI_QUARTER, i=i, sign=s) for i in range(1, sys.m + 1) for s in (1, -1)]
    return maps


def _fibers(ctx: Context) -> ClaimResult:
    reports = [fiber_check(ctx.sys, fm, ctx.n("fiber_points"), ctx.n("fiber_samples"), ctx.seed)
               for fm in _quarter_maps(ctx.sys)]
    return _status(all(r.passed for r in reports)), {"reports": [asdict(r) for r in reports]}


def _non_conformal(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    gaps = []
    for i in range(sys.m):
        fm = FocalMap(MapKind.PHI_QUARTER, i=i, sign=1)
        for x in sample_coords(sys, fm.source(sys), 5, ctx.seed):
            sv = horizontal_singular_values(sys, fm, x)
            gaps.append(float(sv.max() - sv.min()))
    return _status(min(gaps) >= 0.4), {"min_singular_gap": min(gaps)}


def _eigenmaps(ctx: Context) -> ClaimResult:
    maps = [fm for fm in _quarter_maps(ctx.sys) if fm.sign > 0]
    reports = [eigenmap_check(ctx.sys, fm, ctx.n("eigenmap"), ctx.seed) for fm in maps]
    ok = all(r.max_rel_err <= ctx.tol("eigenmap") and r.max_image_norm_err <= 1e-12 for r in reports)
    return _status(ok), {"reports": [asdict(r) for r in reports]}


def _tension_reports(ctx: Context, maps: list[FocalMap]) -> ClaimResult:
    reports = [tension_normality(ctx.sys, fm, ctx.n("tension"), ctx.seed) for fm in maps]
    ok = all(r.max_tangential <= ctx.tol("tension") and r.max_target_residual <= ctx.tol("landing")
             and (r.section_err is None or r.section_err <= ctx.tol("section")) for r in reports)
    return _status(ok), {"reports": [r.to_dict() for r in reports]}


def _tension_focal(ctx: Context) -> ClaimResult:
    return _tension_reports(ctx, [FocalMap(MapKind.HYPERSURFACE_TO_MPLUS, t=t) for t in HYPERSURFACE_ANGLES])


def _tension_plus(ctx: Context) -> ClaimResult:
    maps = [FocalMap(MapKind.MPLUS_TO_MMINUS), FocalMap(MapKind.MPLUS_TO_MMINUS, coeffs=(0.6, 0.8))]
    maps += [FocalMap(MapKind.MPLUS_TO_HYPERSURFACE, t=t) for t in HYPERSURFACE_ANGLES]
    return _tension_reports(ctx, maps)


def _tension_minus(ctx: Context) -> ClaimResult:
    try:
        find_extension(ctx.sys)
    except ExtensionUnavailable as e:
        return "NOT-APPLICABLE", {"reason": str(e)}
    maps = [FocalMap(MapKind.MMINUS_TO_MPLUS)] + [FocalMap(MapKind.MMINUS_TO_HYPERSURFACE, t=s) for s in (0.2, 0.5)]
    return _tension_reports(ctx, maps)


def _well_defined(ctx: Context) -> ClaimResult:
    sys = ctx.sys
    maps = [FocalMap(MapKind.PHI_T, i=i, t=0.3) for i in range(sys.m)] + _quarter_maps(sys)
    maps += [FocalMap(MapKind.MPLUS_TO_MMINUS), FocalMap(MapKind.MPLUS_TO_HYPERSURFACE, t=0.3)]
    worst = max(well_definedness(sys, fm, ctx.n("well_defined"), ctx.seed) for fm in maps)
    return _status(worst <= ctx.tol("landing")), {"max_target_residual": worst, "maps": len(maps)}


# -- spectral ------------------------------------------------------------------------------

def _estimate_status(ok: bool) -> str:
    return "ESTIMATE-PASS" if ok else "ESTIMATE-FAIL"


def _calibration(ctx: Context) -> ClaimResult:
    s2 = sphere_calibration(2, 4000, 0.10, seed=ctx.seed, stability=True)
    s3 = sphere_calibration(3, 8000, 0.12, seed=ctx.seed, stability=True)
    return _estimate_status(s2.passed and s3.passed), {"S2": s2.to_dict(), "S3": s3.to_dict()}


def _inequalities(ctx: Context) -> ClaimResult:
    spec = GraphSpec(n_points=ctx.n("graph_points"))
    rep = verify_eigenvalue_inequalities(ctx.sys, spec, seed=ctx.seed)
    if ctx.out is not None:
        write_eigenvalues_csv(ctx.out / "eigenvalues" / f"{ctx.sys.label()}.csv", list(rep.estimates.values()))
    applicable = [v for v in rep.verdicts if v.verdict != "NOT-APPLICABLE"]
    if not applicable:
        return "NOT-APPLICABLE", rep.to_dict()
    return _estimate_status(rep.passed), rep.to_dict()


def _explicit(ctx: Context) -> ClaimResult:
    try:
        r = verify_explicit_eigenfunctions(ctx.sys, ctx.n("explicit"), ctx.seed)
    except WrongVariant as e:
        return "NOT-APPLICABLE", {"reason": str(e)}
    return _status(r.passed), r.to_dict()


def _lambda17(ctx: Context) -> ClaimResult:
    if ctx.sys.variant is not Variant.QUATERNION_SAME:
        return "NOT-APPLICABLE", {"reason": "concerns the homogeneous (4, 8) system"}
    return "NOT-VERIFIABLE", {"reason": "an exact 17th eigenvalue needs the full spectrum, not desk-computable"}


CLAIMS: tuple[Claim, ...] = (
    Claim("clifford.anticommutation", "symmetric-clifford-relations", "clifford", "EXACT", _anticommutation),
    Claim("clifford.product_discriminant", "homogeneity-discriminant", "clifford", "EXACT", _discriminant),
    Claim("clifford.extension", "system-extension", "clifford", "EXACT", _extension),
    Claim("forms.munzner_pde", "cartan-munzner-equations", "forms", "EXACT", _munzner),
    Claim("manifolds.membership", "sequence-membership-and-frames", "manifolds", "EXACT", _membership),
    Claim("manifolds.focal_identification", "focal-sets-are-eigenspheres", "manifolds", "EXACT", _focal_identification),
    Claim("manifolds.quaternion_charts", "quaternionic-charts", "manifolds", "EXACT", _charts),
    Claim("calculus.f_identities", "isoparametric-f", "calculus", "EXACT",
          _pair("f", lambda s: range(s.m))),
    Claim("calculus.g_identities", "isoparametric-g", "calculus", "EXACT",
          _pair("g", lambda s: range(1, s.m + 1))),
    Claim("calculus.minimal_sequence", "minimal-sequences", "calculus", "EXACT", _minimal_sequence),
    Claim("calculus.hypersurface_identities", "hypersurface-laplacians", "calculus", "EXACT", _hypersurface),
    Claim("calculus.level_flow", "normal-flow-levels", "calculus", "EXACT", _level_flow),
    Claim("curvature.level_spectra", "three-principal-curvatures", "curvature", "EXACT", _spectra),
    Claim("curvature.spectrum_symmetry", "level-reflection-symmetry", "curvature", "EXACT", _spectrum_symmetry),
    Claim("curvature.principal_spaces", "principal-spaces", "curvature", "EXACT", _principal_spaces),
    Claim("curvature.focal_totally_geodesic", "focal-sets-totally-geodesic", "curvature", "EXACT", _totally_geodesic),
    Claim("curvature.ricci", "ricci-formula", "curvature", "EXACT", _ricci),
    Claim("curvature.ricci_homogeneous", "ricci-constant-homogeneous", "curvature", "EXACT", _ricci_homogeneous),
    Claim("curvature.classification", "instability-classification", "curvature", "EXACT", _classification),
    Claim("sigma.plus", "sigma-focal-plus", "sigma", "EXACT", _sigma("+")),
    Claim("sigma.minus", "sigma-focal-minus", "sigma", "EXACT", _sigma("-")),
    Claim("sigma.identity", "normal-slice-identity", "sigma", "EXACT", _sigma_identity),
    Claim("focal.pushforward", "pushforward-scaling", "focal", "EXACT", _pushforward),
    Claim("focal.volume_element", "volume-element", "focal", "EXACT", _volume),
    Claim("focal.kg_ratio", "volume-ratio-constant", "focal", "EXACT", _kg),
    Claim("focal.fibers", "totally-geodesic-fibres", "focal", "EXACT", _fibers),
    Claim("focal.non_conformality", "not-horizontally-conformal", "focal", "EXACT", _non_conformal),
    Claim("focal.eigenmaps", "focal-eigenmaps", "focal", "EXACT", _eigenmaps),
    Claim("focal.tension_focal_projection", "harmonic-focal-projection", "focal", "EXACT", _tension_focal),
    Claim("focal.tension_from_plus", "harmonic-maps-from-plus", "focal", "EXACT", _tension_plus),
    Claim("focal.tension_from_minus", "harmonic-maps-from-minus", "focal", "EXACT", _tension_minus),
    Claim("focal.well_defined", "maps-land-on-targets", "focal", "EXACT", _well_defined),
    Claim("spectral.sphere_calibration", "estimator-calibration", "spectral", "ESTIMATE", _calibration),
    Claim("spectral.inequalities", "eigenvalue-comparison", "spectral", "ESTIMATE", _inequalities),
    Claim("spectral.explicit_eigenfunctions", "explicit-eigenfunctions", "spectral", "EXACT", _explicit),
    Claim("spectral.lambda17_homogeneous", "homogeneous-17th-eigenvalue", "spectral", "EXACT", _lambda17),
)

# every verifiable statement the workbench is meant to cover; report-audit checks the mapping
ANCHORS: tuple[str, ...] = (
    "symmetric-clifford-relations", "homogeneity-discriminant", "system-extension", "cartan-munzner-equations",
    "sequence-membership-and-frames", "focal-sets-are-eigenspheres", "quaternionic-charts", "isoparametric-f",
    "isoparametric-g", "minimal-sequences", "hypersurface-laplacians", "normal-flow-levels",
    "three-principal-curvatures", "level-reflection-symmetry", "principal-spaces", "focal-sets-totally-geodesic",
    "ricci-formula", "ricci-constant-homogeneous", "instability-classification", "sigma-focal-plus",
    "sigma-focal-minus", "normal-slice-identity", "pushforward-scaling", "volume-element", "volume-ratio-constant",
    "totally-geodesic-fibres", "not-horizontally-conformal", "focal-eigenmaps", "harmonic-focal-projection",
    "harmonic-maps-from-plus", "harmonic-maps-from-minus", "maps-land-on-targets", "estimator-calibration",
    "eigenvalue-comparison", "explicit-eigenfunctions", "homogeneous-17th-eigenvalue",
)


def audit() -> dict:
    """Anchors without a claim, anchors claimed more than once, and claims with unknown anchors."""
    counts: dict[str, int] = {}
    for c in CLAIMS:
        counts[c.anchor] = counts.get(c.anchor, 0) + 1
    ids = [c.id for c in CLAIMS]
    return {
        "claims": len(CLAIMS),
        "anchors": len(ANCHORS),
        "unclaimed": [a for a in ANCHORS if a not in counts],
        "duplicated": sorted(a for a, n in counts.items() if n > 1),
        "unknown_anchors": sorted(a for a in counts if a not in ANCHORS),
        "duplicate_ids": sorted({i for i in ids if ids.count(i) > 1}),
    }


@dataclass
class ClaimOutcome:
    id: str
    anchor: str
    suite: str
    label: str
    status: str
    metrics: dict

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VerificationReport:
    version: str
    config: dict
    system: dict
    claims: list[ClaimOutcome]
    timings: dict[str, float]

    @property
    def failed(self) -> list[ClaimOutcome]:
        return [c for c in self.claims if c.status == "FAIL"]

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def to_dict(self, timings: bool = True) -> dict:
        d = {"version": self.version, "config": self.config, "system": self.system,
             "claims": [c.to_dict() for c in self.claims],
             "summary": {s: sum(c.status == s for c in self.claims) for s in STATUSES}}
        if timings:
            d["timings"] = self.timings
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def run_claim(claim: Claim, ctx: Context) -> ClaimOutcome:
    try:
        status, metrics = claim.run(ctx)
    except OtfkmError as e:  # module errors become failed claims, not crashes
        status, metrics = "FAIL", {"error": type(e).__name__, "detail": str(e)}
    if claim.label == "ESTIMATE" and status in ("PASS", "FAIL"):
        status = "ESTIMATE-" + status
    return ClaimOutcome(claim.id, claim.anchor, claim.suite, claim.label, status, metrics)


def _run_suite(suite: str, ctx: Context) -> tuple[list[ClaimOutcome], float]:
    start = time.perf_counter()
    outcomes = [run_claim(c, ctx) for c in CLAIMS if c.suite == suite]
    return outcomes, time.perf_counter() - start


def run(config: RunConfig) -> VerificationReport:
    sys = config.validate()
    out = Path(config.out) if config.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx = Context(sys, config, out)
    results: dict[str, list[ClaimOutcome]] = {}
    timings: dict[str, float] = {}
    for stage in STAGES:
        chosen = [s for s in stage if s in config.suites]
        if config.threads > 1 and len(chosen) > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                done = dict(zip(chosen, pool.map(lambda s: _run_suite(s, ctx), chosen)))
        else:
            done = {s: _run_suite(s, ctx) for s in chosen}
        for s in chosen:  # assembly in fixed suite order keeps the report deterministic
            results[s], timings[s] = done[s]
    claims = [c for s in SUITES if s in results for c in results[s]]
    report = VerificationReport(
        version=__version__, config=config.echo(),
        system={"label": sys.label(), "m": sys.m, "l": sys.l, "k": sys.k, "m1": sys.m1, "m2": sys.m2,
                "variant": sys.variant.value, "product_discriminant": sys.product_discriminant.value},
        claims=claims, timings=timings)
    if out is not None:
        (out / "report.json").write_text(report.to_json())
        (out / "system.json").write_text(sys.to_json())
    return report
