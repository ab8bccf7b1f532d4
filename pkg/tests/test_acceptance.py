"""One test per acceptance criterion; each prints a single PASS/FAIL line with its key numbers.

Tolerances are pinned here rather than read from the package defaults.
"""
import itertools
import math
import time

import numpy as np
import pytest

from otfkm.calculus import verify_isoparametric_pair
from otfkm.clifford import Discriminant, build_system
from otfkm.curvature import classification_table, principal_spectrum, ricci_formula, sigma_identity_residual, sigma_optimize
from otfkm.focal import (FocalMap, MapKind, eigenmap_check, fiber_check, kg_ratio, pushforward_check,
                         tension_normality)
from otfkm.forms import QuarticForm, verify_munzner_pde
from otfkm.manifolds import ManifoldId, sample, sample_coords
from otfkm.report import Context, RunConfig, _lambda17, _minimal_sequence
from otfkm.spectral import sphere_calibration, verify_eigenvalue_inequalities, verify_explicit_eigenfunctions

from conftest import SMOKE, system

LEVELS = (-0.9, -0.5, 0.0, 0.5, 0.9)


@pytest.fixture
def verdict(capsys):
    def emit(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        assert ok, f"criterion {n}: {title} {detail}"
    return emit


def ctx_for(case, samples):
    cfg = RunConfig(m=case[0], k=case[1], variant=case[2])
    cfg.samples.update(samples)
    return Context(system(*case), cfg, None)


def quarter_maps(s):
    maps = [FocalMap(MapKind.PHI_QUARTER, i=i, sign=sg) for i in range(s.m) for sg in (1, -1)]
    return maps + [FocalMap(MapKind.PSI_QUARTER, i=i, sign=sg) for i in range(1, s.m + 1) for sg in (1, -1)]


def test_criterion_01_clifford_exact(verdict):
    cases = [(1, 3, "standard"), (2, 2, "standard"), (3, 1, "standard"), (4, 2, "q-same"), (4, 2, "q-opposite"),
             (5, 1, "standard")]
    start = time.perf_counter()
    bad = 0
    for case in cases:
        s = build_system(*case)
        for a, b in itertools.product(range(s.m + 1), repeat=2):
            pa, pb = s.matrices[a], s.matrices[b]
            assert pa.dtype.kind == "i"
            expected = 2 * np.eye(s.dim, dtype=np.int64) if a == b else np.zeros((s.dim, s.dim), dtype=np.int64)
            bad += int(not (pa == pa.T).all()) + int(not (pa @ pb + pb @ pa == expected).all())
    elapsed = time.perf_counter() - start
    verdict(1, "Clifford relations exact", bad == 0 and elapsed < 5, f"violations={bad} time={elapsed:.2f}s")


def test_criterion_02_munzner(verdict):
    worst = 0.0
    for case in SMOKE:
        r = verify_munzner_pde(QuarticForm(system(*case)), 1000, seed=2)
        worst = max(worst, r.max_rel_err_grad_pde, r.max_rel_err_lap_pde)
    verdict(2, "Cartan-Munzner equations", worst <= 1e-9, f"max_rel_err={worst:.2e}")


def test_criterion_03_isoparametric(verdict):
    worst = 0.0
    for case in SMOKE:
        s = system(*case)
        blocks = [b for i in range(s.m) for b in verify_isoparametric_pair(s, "f", i, 500, seed=3)]
        blocks += [b for i in range(1, s.m + 1) for b in verify_isoparametric_pair(s, "g", i, 500, seed=3)]
        worst = max([worst] + [b.max_rel_err for b in blocks])
    verdict(3, "f_i and g_i gradient and Laplacian identities", worst <= 1e-6, f"max_rel_err={worst:.2e}")


def test_criterion_04_level_spectra(verdict):
    err, mismatches = 0.0, 0
    for case in SMOKE:
        s = system(*case)
        mids = ([ManifoldId.level_u(i, c) for i in range(s.m) for c in LEVELS]
                + [ManifoldId.level_v(i, c) for i in range(1, s.m + 1) for c in LEVELS])
        for mid in mids:
            for p in sample(s, mid, 20, seed=4):
                spec = principal_spectrum(s, p)
                err = max(err, spec.max_eigenvalue_error)
                mismatches += spec.multiplicity_mismatches
    verdict(4, "three principal curvatures on level sets", err <= 1e-8 and mismatches == 0,
            f"max_err={err:.2e} mismatches={mismatches}")


def test_criterion_05_minimal_sequences(verdict):
    worst = 0.0
    for case in SMOKE:
        _, metrics = _minimal_sequence(ctx_for(case, {"minimal": 200}))
        worst = max([worst] + [metrics[f"max_{k}"] for k in ("M_in_S", "M_in_M", "N_in_S", "N_in_N")])
    verdict(5, "minimal sequences", worst <= 1e-7, f"max_tangential_H={worst:.2e}")


def test_criterion_06_pushforward_and_kg(verdict):
    rng = np.random.default_rng(6)
    push = 0.0
    kg = 0.0
    for case in SMOKE:
        s = system(*case)
        for i in range(s.m):
            for t in (-0.5, 0.2, 0.6):
                fm = FocalMap(MapKind.PHI_T, i=i, t=t)
                for x in sample_coords(s, fm.source(s), 10, seed=6):
                    push = max(push, pushforward_check(s, fm, x, rng).max_err)
            n = s.l - i - 2
            if s.l - i - 3 > 0:
                r = kg_ratio(n)
                kg = max(kg, abs(r.ratio - (s.l - i - 2) / (s.l - i - 3)))
    verdict(6, "pushforward scaling and K/G", push <= 1e-9 and kg <= 1e-6, f"push={push:.2e} kg={kg:.2e}")


def test_criterion_07_fibers(verdict):
    worst, dims_ok = 0.0, True
    for case in SMOKE:
        s = system(*case)
        for fm in quarter_maps(s):
            r = fiber_check(s, fm, focal_points=5, n=50, seed=7)
            dims_ok &= r.fiber_dim == r.expected_dim
            worst = max(worst, r.max_gram_err, r.max_radius_err, r.max_geodesic_tangential, r.max_normal_acc_err)
    verdict(7, "totally geodesic sphere fibres", dims_ok and worst <= 1e-8, f"dims_ok={dims_ok} max={worst:.2e}")


def test_criterion_08_eigenmaps(verdict):
    worst, lam_ok = 0.0, True
    for case in SMOKE:
        s = system(*case)
        for fm in quarter_maps(s):
            r = eigenmap_check(s, fm, 200, seed=8)
            want = 2 * s.l - fm.i - 3 if fm.kind is MapKind.PHI_QUARTER else s.l + fm.i - 2
            lam_ok &= r.eigenvalue == want
            worst = max(worst, r.max_rel_err)
    verdict(8, "eigenmaps", lam_ok and worst <= 1e-6, f"max_rel_err={worst:.2e}")


def test_criterion_09_tension(verdict):
    tangential = landing = 0.0
    for case in SMOKE:
        s = system(*case)
        maps = [FocalMap(MapKind.HYPERSURFACE_TO_MPLUS, t=t) for t in (0.2, 0.5)]
        maps += [FocalMap(MapKind.MPLUS_TO_MMINUS), FocalMap(MapKind.MPLUS_TO_HYPERSURFACE, t=0.3)]
        if case[2] != "q-same" and s.m != 1:
            maps += [FocalMap(MapKind.MMINUS_TO_MPLUS), FocalMap(MapKind.MMINUS_TO_HYPERSURFACE, t=0.3)]
        for fm in maps:
            r = tension_normality(s, fm, 200, seed=9)
            tangential = max(tangential, r.max_tangential)
            landing = max(landing, r.max_target_residual)
    verdict(9, "harmonic maps via normal tension", tangential <= 1e-6 and landing <= 1e-10,
            f"tangential={tangential:.2e} landing={landing:.2e}")


@pytest.mark.parametrize("case", SMOKE, ids=[f"{m}-{k}-{v}" for m, k, v in SMOKE])
def test_criterion_10_sigma(verdict, case):
    s = system(*case)
    start = time.perf_counter()
    plus = sigma_optimize(s, "+", points=32, restarts=64, seed=10)
    minus = sigma_optimize(s, "-", points=32, restarts=64, seed=10)
    ident = max(plus.identity_residual, sigma_identity_residual(s, 10_000, seed=10))
    elapsed = time.perf_counter() - start
    ok = (1 - 1e-4 <= plus.sigma_hat <= 1 + 1e-6 and plus.max_witness_target_residual <= 1e-6
          and plus.min_witness_value <= 1e-6 and ident <= 1e-10
          and 1 - 1e-2 <= minus.sigma_hat <= 1 + 1e-3 and elapsed < 120)
    verdict(10, f"sigma certificate {s.label()}", ok,
            f"plus={plus.sigma_hat:.10f} minus={minus.sigma_hat:.10f} X1_res={plus.max_witness_target_residual:.1e} "
            f"|B(X0,X0)|^2={plus.min_witness_value:.1e} identity={ident:.1e} time={elapsed:.1f}s")


def test_criterion_11_exact_spectral_facts(verdict):
    opp = verify_explicit_eigenfunctions(system(4, 2, "q-opposite"), 200, seed=11)
    same = verify_explicit_eigenfunctions(system(4, 2, "q-same"), 200, seed=11)
    disc = (system(4, 2, "q-same").product_discriminant is not Discriminant.NOT_SCALAR
            and system(4, 2, "q-opposite").product_discriminant is Discriminant.NOT_SCALAR)
    status, _ = _lambda17(ctx_for((4, 2, "q-same"), {}))
    ok = (opp.phi_max_rel_err <= 1e-6 and opp.coordinate_max_rel_err <= 1e-6
          and same.coordinate_max_rel_err <= 1e-6 and disc and status == "NOT-VERIFIABLE")
    verdict(11, "explicit eigenfunctions and homogeneity", ok,
            f"phi={opp.phi_max_rel_err:.1e} coords={max(opp.coordinate_max_rel_err, same.coordinate_max_rel_err):.1e} "
            f"lambda17={status}")


def test_criterion_12_spectral_estimates(verdict):
    start = time.perf_counter()
    s2 = sphere_calibration(2, 4000, 0.10, seed=12, stability=True)
    s3 = sphere_calibration(3, 8000, 0.12, seed=12, stability=True)
    verdict(12, "(a) sphere calibration", s2.passed and s3.passed,
            f"S2 err={s2.rel_err:.3f} S3 err={s3.rel_err:.3f}")
    reports = [verify_eigenvalue_inequalities(system(1, k), seed=12) for k in (3, 4)]
    checked = [v for r in reports for v in r.verdicts if v.verdict != "NOT-APPLICABLE"]
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in reports) and all(v.label == "ESTIMATE" for v in checked) and checked
    verdict(12, "(b) ESTIMATE inequalities on (1,3) and (1,4)", bool(ok) and elapsed < 600,
            f"checked={len(checked)} time={elapsed:.0f}s")


def test_criterion_13_ricci(verdict):
    err = 0.0
    rng = np.random.default_rng(13)
    for case in SMOKE:
        s = system(*case)
        for p in sample(s, ManifoldId.M(s.m), 100, seed=13):
            X = p.tangent_frame @ rng.standard_normal(p.dim)
            X /= np.linalg.norm(X)
            a, b = ricci_formula(s, p, X)
            err = max(err, abs(a - b))
    s = system(4, 2, "q-same")
    hom = 0.0
    for p in sample(s, ManifoldId.M(4), 100, seed=13):
        X = p.tangent_frame @ rng.standard_normal(p.dim)
        X /= np.linalg.norm(X)
        hom = max(hom, abs(ricci_formula(s, p, X)[0] - 6.0))
    table = classification_table()
    verdict(13, "Ricci formula, homogeneous value 6, classification", err <= 1e-6 and hom <= 1e-6 and len(table) == 9,
            f"gauss_err={err:.1e} value6_err={hom:.1e} rows={len(table)}")
    assert math.isfinite(err)
