import numpy as np
import pytest

from otfkm.errors import Disconnected, Infeasible, WrongVariant
from otfkm.manifolds import ManifoldId
from otfkm.spectral import (GraphSpec, SpectralEstimate, _compare, estimate_spectrum, graph_spectrum,
                            sphere_calibration, sphere_eigenvalue, sphere_points, verify_explicit_eigenfunctions,
                            write_eigenvalues_csv)

from conftest import system

SMALL = GraphSpec(n_points=3000, k_neighbors=60)


@pytest.mark.parametrize("d,k,expected", [(1, 1, 1), (2, 1, 2), (2, 2, 6), (3, 1, 3), (3, 2, 8), (5, 3, 21)])
def test_sphere_eigenvalues(d, k, expected):
    assert sphere_eigenvalue(d, k) == expected


def test_sphere_points():
    p = sphere_points(3, 100, seed=1)
    assert p.shape == (100, 4)
    assert np.allclose(np.linalg.norm(p, axis=1), 1)
    assert (p == sphere_points(3, 100, seed=1)).all()


def test_raw_estimate_on_s2():
    cal = sphere_calibration(2, 3000, 0.10, spec=SMALL, seed=2)
    assert cal.expected == 2
    assert cal.rel_err <= 0.10
    assert cal.cluster_size == 3


def test_calibrated_estimate_on_s3():
    est = estimate_spectrum(None, 3, SMALL, r=4, seed=3)
    assert est.lambda1 == pytest.approx(3.0, rel=0.05)
    # the first cluster has multiplicity 4 and the next eigenvalue is 8
    assert np.allclose(est.eigenvalues[:4], 3.0, rtol=0.1)


def test_disconnected_graph():
    rng = np.random.default_rng(4)
    pts = np.vstack([rng.standard_normal((200, 3)), 1000 + rng.standard_normal((200, 3))])
    with pytest.raises(Disconnected):
        graph_spectrum(pts, GraphSpec(k_neighbors=10), 2)


def test_dimension_guard():
    with pytest.raises(Infeasible):
        estimate_spectrum(system(4, 2, "q-same"), ManifoldId.M(0), SMALL)
    with pytest.raises(Infeasible):
        estimate_spectrum(None, 7, SMALL)


def fake(label, values):
    return SpectralEstimate(label, 2, list(values), list(values), 1.0, None, 10, 5, 0.1, 0)


def test_compare_verdicts():
    out = _compare("N a) i=3", fake("N_3", [2.3, 5.0]), fake("N_2", [1.0, 2.0]), 2.0, range(1, 3))
    assert [v.verdict for v in out] == ["ESTIMATE-PASS", "ESTIMATE-FAIL"]
    assert all(v.label == "ESTIMATE" and v.slack == 0.2 for v in out)


def test_explicit_eigenfunctions_opposite():
    r = verify_explicit_eigenfunctions(system(4, 2, "q-opposite"), 20, seed=5)
    assert r.passed and r.label == "EXACT"
    assert r.phi_max_rel_err <= 1e-6 and r.coordinate_max_rel_err <= 1e-6


def test_explicit_eigenfunctions_same_reports_unverifiable():
    r = verify_explicit_eigenfunctions(system(4, 2, "q-same"), 20, seed=5)
    assert r.not_verifiable
    assert r.coordinate_max_rel_err <= 1e-6


def test_explicit_eigenfunctions_wrong_system():
    with pytest.raises(WrongVariant):
        verify_explicit_eigenfunctions(system(1, 3), 5)


def test_eigenvalue_csv(tmp_path):
    path = tmp_path / "e.csv"
    write_eigenvalues_csv(path, [fake("M_1", [3.0, 3.1])])
    lines = path.read_text().splitlines()
    assert lines[0].startswith("manifold,dim,k,lambda") and len(lines) == 3
