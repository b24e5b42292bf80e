import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bundlemorph.bundle import BundleElement, change_chart, mobius_bundle, tangent_bundle, trivial_bundle
from bundlemorph.errors import BaseMapMismatch, IncompatibleLocals, NoCoveringPatch
from bundlemorph.geometry import circle, sphere2
from bundlemorph.maps import circle_rotation, double_cover, identity_map, sphere_rotation
from bundlemorph.morphism import (BundleMorphism, ambient_frame_morphism, bundle_identity,
                                  check_overlap_compatibility, differential, evaluate, identity_section,
                                  identity_to_morph, invertibility_report, linear_combination, matrix_morphism,
                                  morph_to_identity, morphism_add, morphism_distance, morphism_scale,
                                  random_morphism, shriek_morphism, zero_morphism)
from bundlemorph.pullback import phi_shriek, pullback_bundle

S1 = circle()
TS1 = tangent_bundle(S1)
DBL = double_cover(S1)


def _elements(E, n, seed, where=None):
    rng = np.random.default_rng(seed)
    return [BundleElement(E.canonical_patch(x), x, rng.uniform(-10, 10, E.rank))
            for x in E.base.sample(n, seed, where=where)]


def test_differential_of_double_cover_is_two():
    d = differential(DBL)
    for x in S1.sample(64, 0):
        for lam in TS1.patches_at(x):
            for a in TS1.patches_at(DBL(x)):
                assert d.local_matrix(lam, a, x)[0, 0] == pytest.approx(2.0, abs=1e-12)
    el = BundleElement(0, np.array([1.0, 0.0]), np.array([0.75]))
    assert evaluate(d, el).fiber[0] == pytest.approx(1.5, abs=1e-12)


def test_zero_morphism_evaluates_to_zero():
    z = zero_morphism(mobius_bundle(), TS1, DBL)
    for el in _elements(z.source, 16, 0):
        out = evaluate(z, el)
        assert np.all(out.fiber == 0) and np.allclose(out.base_point, DBL(el.base_point))


def test_evaluation_is_patch_independent():
    d = differential(sphere_rotation(sphere2(), [1, 1, 0], 0.4))
    worst = 0.0
    for el in _elements(d.source, 256, 0):
        keys = d.keys_at(el.base_point)
        outs = [evaluate(d, el, k) for k in keys]
        ref = outs[0]
        for o in outs[1:]:
            worst = max(worst, float(np.max(np.abs(change_chart(d.target, o, ref.patch_id).fiber - ref.fiber))))
    assert worst < 1e-9


def test_compatibility_passes_for_differentials_and_single_patch():
    assert check_overlap_compatibility(differential(DBL), 128, 0).max_residual < 1e-12
    single = bundle_identity(trivial_bundle(S1, 2))
    rep = check_overlap_compatibility(single, 16, 0)
    assert rep.passed and rep.sample_count == 0


def test_compatibility_detects_planted_scaling():
    d = differential(DBL)
    bad = dict(d.locals)
    bad[(1, 1)] = lambda x: 2.0 * d.matrix((1, 1), x)
    rep = check_overlap_compatibility(BundleMorphism(TS1, TS1, DBL, bad), 128, 0)
    assert not rep.passed
    # ||A|| = 2 and the doubled copy is off by 2
    assert rep.max_residual == pytest.approx(2.0, abs=1e-9)
    with pytest.raises(IncompatibleLocals):
        morph_to_identity(BundleMorphism(TS1, TS1, DBL, bad))


def test_morph_to_identity_examples():
    z = morph_to_identity(zero_morphism(TS1, TS1, DBL))
    assert all(np.all(z.matrix(k, np.array([1.0, 0.0])) == 0) for k in z.locals)
    pb = pullback_bundle(mobius_bundle(), DBL)
    ident = morph_to_identity(shriek_morphism(pb))
    assert morphism_distance(ident, identity_section(pb), 64, 0) == 0.0
    two = morph_to_identity(differential(DBL))
    assert two.matrix((0, 0), np.array([0.0, 1.0]))[0, 0] == pytest.approx(2.0, abs=1e-12)
    assert two.base_map.name == "identity"


def test_identity_to_morph_of_identity_section_is_shriek():
    pb = pullback_bundle(mobius_bundle(), DBL)
    phi = identity_to_morph(identity_section(pb))
    for el in _elements(pb, 64, 3):
        a, b = evaluate(phi, el), phi_shriek(pb, el)
        np.testing.assert_array_equal(change_chart(pb.source_bundle, a, b.patch_id).fiber, b.fiber)


def test_bijection_is_exact_on_local_data():
    d = differential(DBL)
    psi = morph_to_identity(d)
    back = identity_to_morph(psi)
    assert back.locals is d.locals
    assert morph_to_identity(back, check_samples=0, pullback=psi.pullback).locals is psi.locals


def test_evaluation_through_pullback_matches():
    d = differential(sphere_rotation(sphere2(), [0, 1, 1], 1.1))
    psi = morph_to_identity(d)
    worst = 0.0
    for el in _elements(d.source, 256, 1):
        direct = evaluate(d, el)
        via = phi_shriek(psi.pullback, evaluate(psi, el))
        p = direct.patch_id
        worst = max(worst, float(np.max(np.abs(change_chart(d.target, via, p).fiber - direct.fiber))))
    assert worst < 1e-9


def test_vector_space_operations():
    d = differential(DBL)
    zero = zero_morphism(TS1, TS1, DBL)
    assert morphism_distance(morphism_add(d, zero), d, 64, 0) == 0.0
    two = morphism_scale(2.0, d)
    assert two.local_matrix(0, 0, np.array([1.0, 0.0]))[0, 0] == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(BaseMapMismatch):
        morphism_add(d, differential(circle_rotation(S1, 0.3)))


def test_morph_to_identity_is_linear():
    rng = np.random.default_rng(4)
    S2 = sphere2()
    base = [differential(sphere_rotation(S2, [0, 0, 1], 0.3))]
    m1, m2 = random_morphism(base, rng), random_morphism(base, rng)
    a, b = 2.5, -1.25
    lhs = morph_to_identity(linear_combination([a, b], [m1, m2]), check_samples=0)
    rhs = linear_combination([a, b], [morph_to_identity(m1, 0), morph_to_identity(m2, 0, pullback=None)])
    assert morphism_distance(lhs, rhs, 64, 0) < 1e-12


def test_missing_key_is_derived_or_rejected():
    E = trivial_bundle(sphere2(), 2)
    F = tangent_bundle(sphere2())
    only0 = matrix_morphism(E, F, identity_map(sphere2()), {(0, 0): "[[1, 0], [0, 1]]"})
    north = np.array([0.0, 0.0, 1.0])
    south = np.array([0.0, 0.0, -1.0])
    with pytest.raises(NoCoveringPatch):
        only0.local_matrix(0, 1, south)
    mid = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(only0.local_matrix(0, 1, mid), F.theta(0, 1, mid), atol=1e-15)
    assert only0.keys_at(north) == [(0, 0)]


def test_frame_morphism_projects_onto_tangent_space():
    S2 = sphere2()
    E = trivial_bundle(S2, 2)
    frame = ambient_frame_morphism(E, tangent_bundle(S2), identity_map(S2),
                                   lambda x: np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    assert check_overlap_compatibility(frame, 128, 0).max_residual < 1e-9


def test_invertibility_is_separate_from_being_a_morphism():
    z = zero_morphism(TS1, TS1, DBL)
    assert check_overlap_compatibility(z, 16, 0).passed
    assert not invertibility_report(z, 16, 0).passed
    assert invertibility_report(differential(DBL), 16, 0).passed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-10, 10), st.floats(-10, 10))
def test_evaluation_is_fibrewise_linear(seed, a, b):
    d = differential(sphere_rotation(sphere2(), [1, 0, 0], 0.8))
    x = sphere2().sample(1, seed)[0]
    rng = np.random.default_rng(seed)
    u, v = rng.uniform(-10, 10, (2, 2))
    p = d.source.canonical_patch(x)
    lhs = evaluate(d, BundleElement(p, x, a * u + b * v)).fiber
    rhs = a * evaluate(d, BundleElement(p, x, u)).fiber + b * evaluate(d, BundleElement(p, x, v)).fiber
    assert np.max(np.abs(lhs - rhs)) < 1e-9 * max(1.0, float(np.max(np.abs(rhs))))
