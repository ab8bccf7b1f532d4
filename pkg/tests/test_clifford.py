import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from otfkm.clifford import (CliffordSystem, Discriminant, Variant, build_system, check_skew_generators,
                            check_system, clifford_element, construct_generators, delta, discriminant_of,
                            eigenspace_projector, find_extension, qconj, qmul)
from otfkm.errors import ExtensionUnavailable, InvalidVariant

from conftest import system

ALL = [(1, 3, "standard"), (2, 2, "standard"), (3, 1, "standard"), (4, 2, "q-same"), (4, 2, "q-opposite"),
       (5, 1, "standard"), (6, 1, "standard"), (7, 1, "standard"), (8, 1, "standard"), (9, 1, "standard")]


def signed_permutations(d):
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            e = np.zeros((d, d), dtype=np.int64)
            e[np.arange(d), perm] = signs
            yield e


def max_anticommuting_skew(d):
    """Largest family of skew, pairwise anticommuting signed permutations of R^d squaring to -I."""
    cands = [e for e in signed_permutations(d) if (e.T == -e).all() and (e @ e == -np.eye(d)).all()]
    best = 0
    for r in range(1, len(cands) + 1):
        found = any(all(((a @ b + b @ a) == 0).all() for a, b in itertools.combinations(c, 2))
                    for c in itertools.combinations(cands, r))
        if not found:
            break
        best = r
    return best


@pytest.mark.parametrize("m,k,variant", ALL)
def test_anticommutation_exact(m, k, variant):
    s = build_system(m, k, variant)
    assert s.l == k * delta(m)
    assert len(s.matrices) == m + 1
    for p in s.matrices:
        assert p.dtype == np.int64
        assert (p == p.T).all()
    for a, b in itertools.product(range(m + 1), repeat=2):
        pa, pb = s.matrices[a], s.matrices[b]
        expected = 2 * np.eye(2 * s.l, dtype=np.int64) if a == b else 0
        assert ((pa @ pb + pb @ pa) == expected).all()
    assert check_system(s) == []


@pytest.mark.parametrize("m", range(1, 18))
def test_skew_generators(m):
    g = construct_generators(m)
    assert g.count == m - 1
    assert g.dim == delta(m)
    assert check_skew_generators(g.generators) == []


@pytest.mark.parametrize("m,expected", [(1, 1), (2, 2), (3, 4), (4, 4), (5, 8), (8, 8), (9, 16), (10, 32),
                                        (12, 64), (16, 128), (17, 256)])
def test_delta_table(m, expected):
    assert delta(m) == expected


@pytest.mark.parametrize("d", [1, 2, 3])
def test_delta_is_minimal_brute_force(d):
    # m - 1 generators act on R^d exactly when delta(m) divides d
    allowed = max(m - 1 for m in range(1, 9) if d % delta(m) == 0)
    assert max_anticommuting_skew(d) == allowed


def test_quaternions():
    i, j, k = np.eye(4)[1], np.eye(4)[2], np.eye(4)[3]
    assert np.allclose(qmul(i, j), k)
    assert np.allclose(qmul(j, i), -k)
    q = np.array([1.0, 2.0, -1.0, 0.5])
    assert np.allclose(qmul(q, qconj(q)), [q @ q, 0, 0, 0])


def test_discriminants():
    assert build_system(4, 2, "q-same").product_discriminant is Discriminant.MINUS_IDENTITY
    assert build_system(4, 2, "q-opposite").product_discriminant is Discriminant.NOT_SCALAR


@pytest.mark.parametrize("variant", ["q-same", "q-opposite"])
def test_discriminant_conjugation_invariant(variant):
    s = build_system(4, 2, variant)
    q = special_ortho_group.rvs(2 * s.l, random_state=3)
    conj = [q @ p @ q.T for p in s.float_matrices]
    assert discriminant_of(conj) is s.product_discriminant


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_system(0, 1)
    with pytest.raises(ValueError):
        build_system(1, 0)
    with pytest.raises(InvalidVariant):
        build_system(3, 1, "q-same")
    with pytest.raises(ValueError):
        build_system(4, 2, "octonionic")


@pytest.mark.parametrize("m,k,variant", ALL[:6])
def test_json_roundtrip(m, k, variant):
    s = build_system(m, k, variant)
    t = CliffordSystem.from_json(s.to_json())
    assert t.label() == s.label()
    assert all((a == b).all() for a, b in zip(s.matrices, t.matrices))


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda c: np.linalg.norm(c) > 0.1))
@settings(max_examples=40, deadline=None)
def test_clifford_sphere_involutions(coeffs):
    s = system(3, 1)
    c = np.array(coeffs) / np.linalg.norm(coeffs)
    p = clifford_element(s, c)
    assert np.allclose(p @ p, np.eye(2 * s.l), atol=1e-12)
    for sign in (1, -1):
        basis = eigenspace_projector(s, c, sign)
        assert basis.shape == (2 * s.l, s.l)
        assert np.allclose(basis.T @ basis, np.eye(s.l), atol=1e-12)
        assert np.allclose(p @ basis, sign * basis, atol=1e-12)


@pytest.mark.parametrize("m,k,variant,exists", [
    (1, 2, "standard", True), (2, 2, "standard", True), (3, 1, "standard", True), (4, 2, "q-opposite", True),
    (5, 1, "standard", True), (7, 1, "standard", True), (1, 4, "standard", True),
    (1, 3, "standard", False), (4, 2, "q-same", False), (8, 1, "standard", False),
])
def test_extension(m, k, variant, exists):
    s = build_system(m, k, variant)
    if not exists:
        with pytest.raises(ExtensionUnavailable):
            find_extension(s)
        return
    y = find_extension(s)
    mats = list(s.matrices) + [y]
    for a, b in itertools.product(range(len(mats)), repeat=2):
        expected = 2 * np.eye(2 * s.l, dtype=np.int64) if a == b else 0
        assert ((mats[a] @ mats[b] + mats[b] @ mats[a]) == expected).all()


def test_variant_values():
    assert [v.value for v in Variant] == ["standard", "q-same", "q-opposite"]
