import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otfkm.curvature import (classification_table, cluster, harmonic_instability, predicted_spectrum,
                             principal_space_membership, principal_spectrum, ricci_formula, ricci_gram,
                             shape_matrix, sigma_identity_residual, sigma_optimize)
from otfkm.errors import InvalidManifold
from otfkm.manifolds import ManifoldId, sample

from conftest import SMOKE, ids, system

LEVELS = [-0.9, -0.5, 0.0, 0.5, 0.9]


def level_ids(s):
    return ([ManifoldId.level_u(i, c) for i in range(s.m) for c in LEVELS]
            + [ManifoldId.level_v(i, c) for i in range(1, s.m + 1) for c in LEVELS])


@pytest.mark.parametrize("case", SMOKE, ids=ids(SMOKE))
def test_level_spectra(case):
    s = system(*case)
    for mid in level_ids(s):
        for p in sample(s, mid, 3, seed=1):
            spec = principal_spectrum(s, p)
            assert spec.matches and spec.max_eigenvalue_error <= 1e-8


@pytest.mark.parametrize("mid", [ManifoldId.level_u(0, 0.3), ManifoldId.level_u(1, -0.6),
                                 ManifoldId.level_v(1, 0.7), ManifoldId.level_v(2, -0.2)], ids=lambda m: m.label())
def test_closed_shape_operator_matches_numeric(mid):
    s = system(2, 2)
    p = sample(s, mid, 1, seed=2)[0]
    assert np.allclose(shape_matrix(s, p), shape_matrix(s, p, "numeric"), atol=1e-7)


@pytest.mark.parametrize("mid", [ManifoldId.level_u(1, 0.4), ManifoldId.level_v(2, 0.4)], ids=lambda m: m.label())
def test_multiplicities_fill_tangent_space(mid):
    assert sum(k for _, k in predicted_spectrum(mid, 8)) == mid.dimension(8)


@given(c=st.floats(0.05, 0.95), i=st.integers(0, 1))
@settings(max_examples=20, deadline=None)
def test_reflection_negates_spectrum(c, i):
    # natural normal: spec(U_{-c}) = -spec(U_c), so reversing the normal at -c gives spec(U_c) back
    s = system(2, 2)
    a = np.linalg.eigvalsh(shape_matrix(s, sample(s, ManifoldId.level_u(i, c), 1)[0]))
    b = np.linalg.eigvalsh(shape_matrix(s, sample(s, ManifoldId.level_u(i, -c), 1)[0]))
    assert np.allclose(np.sort(b), np.sort(-a), atol=1e-9)
    assert np.allclose(np.sort(-b), np.sort(a), atol=1e-9)


@pytest.mark.parametrize("case", SMOKE, ids=ids(SMOKE))
def test_principal_spaces(case):
    s = system(*case)
    for mid in level_ids(s)[::3]:
        r = principal_space_membership(s, sample(s, mid, 1, seed=3)[0])
        assert r.passed, r


@pytest.mark.parametrize("case", SMOKE, ids=ids(SMOKE))
def test_ricci_formula_matches_gauss(case):
    s = system(*case)
    rng = np.random.default_rng(4)
    for p in sample(s, ManifoldId.M(s.m), 10, seed=4):
        X = p.tangent_frame @ rng.standard_normal(p.dim)
        X /= np.linalg.norm(X)
        formula, gauss = ricci_formula(s, p, X)
        assert formula == pytest.approx(gauss, abs=1e-9)
        assert formula >= 2 * (s.l - s.m - 2) - 1e-12


def test_ricci_homogeneous_constant():
    s = system(4, 2, "q-same")
    rng = np.random.default_rng(5)
    for p in sample(s, ManifoldId.M(4), 5, seed=5):
        X = p.tangent_frame @ rng.standard_normal(p.dim)
        X /= np.linalg.norm(X)
        assert ricci_formula(s, p, X)[0] == pytest.approx(6.0, abs=1e-9)
        assert np.allclose(ricci_gram(s, p.coords), np.eye(10), atol=1e-10)


def test_ricci_needs_top_manifold():
    s = system(1, 3)
    p = sample(s, ManifoldId.M(0), 1)[0]
    with pytest.raises(InvalidManifold):
        ricci_formula(s, p, p.tangent_frame[:, 0])


@pytest.mark.parametrize("case", SMOKE, ids=ids(SMOKE))
def test_sigma_identity(case):
    assert sigma_identity_residual(system(*case), 500, seed=6) <= 1e-10


@pytest.mark.parametrize("which", ["+", "-"])
def test_sigma_certificate_small(which):
    cert = sigma_optimize(system(1, 3), which, points=8, restarts=8, seed=7)
    assert 1 - 1e-2 <= cert.sigma_hat <= 1 + 1e-3
    assert cert.max_witness_target_residual <= 1e-6


def test_classification():
    table = {(r["m1"], r["m2"], r["family"]): r["verdict"] for r in classification_table()}
    assert table[(4, 3, "homogeneous")].startswith("harmonically unstable")
    assert table[(4, 3, "inhomogeneous")] == "undetermined"
    assert table[(1, 1, "")].startswith("not harmonically unstable")
    assert harmonic_instability(1, 10) == "harmonically unstable (Ricci lower bound)"
    assert harmonic_instability(3, 1) == "not decided by the Ricci lower bound"


def test_cluster():
    assert [k for _, k in cluster(np.array([1.0, 1 + 1e-9, 2.0, 2.0, 2.0, 3.0]))] == [2, 3, 1]


def test_reversing_normal_negates_spectrum():
    from otfkm.calculus import second_fundamental_data
    from otfkm.manifolds import level_normal

    s = system(1, 3)
    p = sample(s, ManifoldId.level_u(0, 0.4), 1, seed=11)[0]
    flipped = second_fundamental_data(s, p, "projector").tensor @ -level_normal(s, p.manifold, p.coords)
    assert np.allclose(np.sort(np.linalg.eigvalsh(flipped)), np.sort(-np.linalg.eigvalsh(shape_matrix(s, p))),
                       atol=1e-7)
