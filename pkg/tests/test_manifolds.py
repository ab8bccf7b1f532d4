import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otfkm.errors import InvalidManifold, NotOnFocalManifold
from otfkm.forms import QuarticForm
from otfkm.manifolds import (Kind, ManifoldId, is_member, membership_report, residual, retract, sample,
                             sample_coords, sp2_charts, write_points_csv)
from otfkm.report import all_manifolds

from conftest import SMOKE, ids, system


def oracle_residual(s, mid, x):
    """Membership straight from the defining equations."""
    pm = s.float_matrices
    q = np.array([x @ p @ x for p in pm])
    if mid.kind is Kind.M:
        return max(np.abs(q[: mid.i + 1]).max(), abs(x @ x - 1))
    if mid.kind is Kind.N:
        return max(abs(q[: mid.i + 1] @ q[: mid.i + 1] - 1), abs(QuarticForm(s).value(x) + 1))
    if mid.kind is Kind.LEVEL_U:
        return max(np.abs(q[: mid.i + 1]).max(), abs(q[mid.i + 1] - mid.level))
    raise AssertionError


@pytest.mark.parametrize("case", SMOKE, ids=ids(SMOKE))
def test_samples_on_manifolds(case):
    s = system(*case)
    for mid in all_manifolds(s):
        for p in sample(s, mid, 4, seed=5):
            assert p.residual <= 1e-10
            assert abs(np.linalg.norm(p.coords) - 1) <= 1e-12
            assert p.dim == mid.dimension(s.l)
            frame = np.hstack([p.tangent_frame, p.normal_frame])
            assert np.allclose(frame.T @ frame, np.eye(s.dim), atol=1e-10)
            assert np.allclose(p.normal_frame[:, 0], p.coords, atol=1e-10)


@pytest.mark.parametrize("case", SMOKE[:2], ids=ids(SMOKE[:2]))
def test_residual_matches_equations(case):
    s = system(*case)
    mids = [ManifoldId.M(i) for i in range(s.m + 1)] + [ManifoldId.level_u(0, 0.3)]
    mids += [ManifoldId.N(s.m)]
    for mid in mids:
        for x in sample_coords(s, mid, 5, seed=6):
            assert oracle_residual(s, mid, x) <= 1e-10
            assert residual(s, mid, x) <= 1e-10


@pytest.mark.parametrize("mid,dim", [
    (ManifoldId.sphere(), 5), (ManifoldId.M(0), 4), (ManifoldId.M(1), 3), (ManifoldId.N(1), 3),
    (ManifoldId.level_u(0, 0.2), 3), (ManifoldId.level_v(1, 0.2), 2), (ManifoldId.focal_u(0, 1), 2),
    (ManifoldId.hypersurface(0.3), 4),
])
def test_dimensions_l3(mid, dim):
    assert mid.dimension(3) == dim


def test_nesting():
    s = system(2, 2)
    for x in sample_coords(s, ManifoldId.M(2), 10, seed=7):
        assert is_member(s, ManifoldId.M(1), x) and is_member(s, ManifoldId.M(0), x)
    for x in sample_coords(s, ManifoldId.N(1), 10, seed=7):
        assert is_member(s, ManifoldId.N(2), x)
    report = dict((m.label(), r) for m, r in membership_report(s, sample_coords(s, ManifoldId.M(2), 1)[0]))
    assert report["M_2"] <= 1e-10


@pytest.mark.parametrize("mid", [ManifoldId.M(1), ManifoldId.N(1), ManifoldId.level_u(0, -0.4),
                                 ManifoldId.level_v(1, 0.6), ManifoldId.focal_u(0, -1),
                                 ManifoldId.hypersurface(0.4)], ids=lambda m: m.label())
def test_retract_is_identity_on_manifold_and_projects_nearby(mid):
    s = system(1, 3)
    rng = np.random.default_rng(8)
    for x in sample_coords(s, mid, 5, seed=8):
        assert np.allclose(retract(s, mid, x), x, atol=1e-10)
        y = retract(s, mid, x + 1e-3 * rng.standard_normal(s.dim))
        assert residual(s, mid, y) <= 1e-10
        assert np.linalg.norm(y - x) < 1e-2


@given(seed=st.integers(0, 10**6))
@settings(max_examples=10, deadline=None)
def test_sampling_deterministic(seed):
    s = system(1, 3)
    a = sample_coords(s, ManifoldId.level_u(0, 0.5), 3, seed)
    b = sample_coords(s, ManifoldId.level_u(0, 0.5), 3, seed)
    assert (a == b).all()


@pytest.mark.parametrize("mid", [ManifoldId.M(5), ManifoldId.level_u(0, 1.0), ManifoldId.level_v(0, 0.2),
                                 ManifoldId.hypersurface(math.pi / 4)], ids=lambda m: m.label())
def test_invalid_manifolds(mid):
    with pytest.raises(InvalidManifold):
        mid.validate(system(1, 3))


@pytest.mark.parametrize("variant", ["q-same", "q-opposite"])
def test_quaternion_charts(variant):
    s = system(4, 2, variant)
    for x in sample_coords(s, ManifoldId.M(4), 10, seed=9):
        assert sp2_charts(s, x).check_residual <= 1e-10
    with pytest.raises(NotOnFocalManifold):
        sp2_charts(s, sample_coords(s, ManifoldId.M(0), 1, seed=9)[0])


def test_points_csv(tmp_path):
    s = system(1, 3)
    pts = sample(s, ManifoldId.M(1), 3)
    path = tmp_path / "p" / "m1.csv"
    write_points_csv(path, pts)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("manifold,x0") and len(lines) == 4
    assert np.allclose([float(v) for v in lines[1].split(",")[1:-1]], pts[0].coords)
