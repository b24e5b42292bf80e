import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bundlemorph.bundle import BundleElement, mobius_bundle, tangent_bundle, trivial_bundle
from bundlemorph.errors import NoEscapeScale
from bundlemorph.geometry import circle
from bundlemorph.mapping_space import ambient_section, ball_region, whole_region, zero_section
from bundlemorph.maps import identity_map
from bundlemorph.morph_bundle import (MorphElement, NonlinearPerturbation, PerturbedMorphism, VerticalRegion,
                                      attempt_compact_perturbation, detrivialize_T, element_combination,
                                      escape_scale, pair_combination, pair_distance, pair_from_coords, project,
                                      rigidity_check, transition_T, trivialize_T)
from bundlemorph.morphism import bundle_identity, differential, morph_to_identity, morphism_scale
from bundlemorph.transport import levi_civita

S1 = circle()
TS1 = tangent_bundle(S1)
CONN = levi_civita(TS1)
ID1 = identity_map(S1)
K1 = whole_region(S1)


def _wiggle(scale):
    """A small self-map of the circle: exp of the tangent field scale * cos(theta)."""
    from bundlemorph.mapping_space import chart_inverse
    return chart_inverse(ambient_section(ID1, lambda x: scale * x[0] * np.array([-x[1], x[0]]), K1))


def _fibre_residual(a, b, n=32):
    worst = 0.0
    for x in S1.sample(n, 0):
        y = a.base_map(x)
        for lam in a.source.patches_at(x):
            for al in a.target.patches_at(y):
                worst = max(worst, float(np.max(np.abs(a.local_matrix(lam, al, x, y) - b.local_matrix(lam, al, x, y)))))
    return worst


PSI = _wiggle(0.3)
D_PSI = differential(PSI)


def test_element_requires_matching_base_and_projects():
    el = MorphElement(PSI, D_PSI)
    assert project(el) is PSI
    with pytest.raises(ValueError):
        MorphElement(ID1, D_PSI)


def test_trivialize_at_own_centre_has_zero_coords():
    d = differential(ID1)
    pair = trivialize_T(ID1, CONN, MorphElement(ID1, d), K1)
    assert all(np.all(pair.coords.ambient(x) == 0) for x in S1.sample(16, 0))
    assert _fibre_residual(morph_to_identity(d, 0), pair.fibre_coords) < 1e-12


def test_trivialize_roundtrip_and_projection():
    pair = trivialize_T(ID1, CONN, MorphElement(PSI, D_PSI), K1)
    back = detrivialize_T(ID1, CONN, pair)
    assert back.base is PSI and pair.base is PSI
    assert _fibre_residual(D_PSI, back.fibre) < 1e-6


def test_trivialize_is_fibrewise_linear():
    other = morphism_scale(-0.5, D_PSI)
    a, b = 3.0, -2.0
    e1, e2 = MorphElement(PSI, D_PSI), MorphElement(PSI, other)
    combo = trivialize_T(ID1, CONN, element_combination([a, b], [e1, e2]), K1).fibre_coords
    p1 = trivialize_T(ID1, CONN, e1, K1)
    p2 = trivialize_T(ID1, CONN, e2, K1)
    assert _fibre_residual(combo, linear_combination_pairs([a, b], [p1, p2])) < 1e-6


def linear_combination_pairs(coeffs, pairs):
    from bundlemorph.checks import _share
    head = pairs[0]
    return pair_combination(coeffs, [head] + [_share(p, head) for p in pairs[1:]]).fibre_coords


def test_pair_combination_requires_shared_coords():
    p1 = trivialize_T(ID1, CONN, MorphElement(PSI, D_PSI), K1)
    p2 = trivialize_T(ID1, CONN, MorphElement(PSI, D_PSI), K1)
    with pytest.raises(ValueError):
        pair_combination([1.0, 1.0], [p1, p2])


def test_detrivialize_of_zero_coords_lies_over_centre():
    C = morph_to_identity(differential(ID1), 0)
    pair = pair_from_coords(ID1, CONN, zero_section(ID1), C, K1)
    el = detrivialize_T(ID1, CONN, pair)
    x = np.array([0.6, 0.8])
    np.testing.assert_allclose(el.base(x), x, atol=1e-15)
    assert _fibre_residual(differential(ID1), el.fibre) < 1e-12


def test_detrivialize_rejects_wrong_centre():
    pair = trivialize_T(ID1, CONN, MorphElement(PSI, D_PSI), K1)
    with pytest.raises(ValueError):
        detrivialize_T(_wiggle(0.1), CONN, pair)


def test_transition_identity_and_consistency():
    chi = _wiggle(0.1)
    pair = trivialize_T(chi, CONN, MorphElement(PSI, D_PSI), K1)
    same = transition_T(chi, chi, CONN, pair)
    d = pair_distance(pair, same, 32, 0)
    assert d["base"] < 1e-9 and d["fibre"] < 1e-9
    there = transition_T(ID1, chi, CONN, pair)
    back = transition_T(chi, ID1, CONN, there)
    d = pair_distance(pair, back, 32, 0)
    assert d["base"] < 1e-6 and d["fibre"] < 1e-6
    direct = trivialize_T(ID1, CONN, MorphElement(PSI, D_PSI), K1)
    d = pair_distance(there, direct, 32, 0)
    assert d["base"] < 1e-6 and d["fibre"] < 1e-6


# -- rigidity -----------------------------------------------------------------

MOB = mobius_bundle()
MOB_ID = bundle_identity(MOB)
KV = VerticalRegion(MOB, None, 1.0)


def test_escape_scale_examples():
    x = np.array([1.0, 0.0])
    assert escape_scale(KV, BundleElement(0, x, np.array([0.3]))) == 4
    assert escape_scale(KV, BundleElement(0, x, np.array([2.0]))) == 1
    with pytest.raises(NoEscapeScale):
        escape_scale(VerticalRegion(MOB, None, math.inf), BundleElement(0, x, np.array([0.3])))


def test_rigidity_of_equal_maps():
    v = rigidity_check(MOB_ID, MOB_ID, KV, 32, 0)
    assert v.passed and v.forced_equality and v.residuals["inside"] == 0.0


@pytest.mark.parametrize("magnitude", [0.0, 1.0, 10.0])
def test_perturbation_is_forced_to_vanish(magnitude):
    rep = attempt_compact_perturbation(MOB_ID, KV, magnitude, 32, 0)
    assert rep.forced_equality and rep.projected_norm < 1e-12
    if magnitude:
        # off K the unconstrained candidate moves |u| in (1.05 R, 3 R] by magnitude * |u|
        assert 1.05 * magnitude < rep.naive_off_k <= 3.0 * magnitude + 1e-9


def test_perturbation_over_tangent_bundle_rank_two():
    from bundlemorph.geometry import sphere2
    TS1_id = differential(ID1)
    rep = attempt_compact_perturbation(TS1_id, VerticalRegion(TS1, None, 2.0), 1.0, 16, 0)
    assert rep.forced_equality
    E = trivial_bundle(sphere2(), 2)
    rep2 = attempt_compact_perturbation(bundle_identity(E), VerticalRegion(E, None, 1.0), 5.0, 16, 0)
    assert rep2.forced_equality and rep2.verdict.max_escape_scale >= 2


def test_unbounded_region_reports_no_escape():
    rep = attempt_compact_perturbation(MOB_ID, VerticalRegion(MOB, None, math.inf), 1.0, 8, 0)
    assert rep.no_escape and rep.verdict is None and not rep.forced_equality


def test_nonlinear_fixture_violates_linearity():
    center = np.array([1.0, 0.0])
    fixture = NonlinearPerturbation(MOB_ID, center, 0.5, 1.0)
    K = VerticalRegion(MOB, ball_region(center, 0.5), 1.0)
    v = rigidity_check(MOB_ID, fixture, K, 64, 0)
    assert v.violated_hypothesis == "fibrewise linearity"
    assert v.residuals["off_k"] == 0.0 and not v.equal


def test_global_linear_perturbation_violates_agreement():
    psi = PerturbedMorphism(MOB_ID, lambda x: np.array([[0.5]]))
    v = rigidity_check(MOB_ID, psi, KV, 32, 0)
    assert v.violated_hypothesis == "agreement off the region"


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 50.0), st.floats(0.1, 5.0), st.integers(0, 10_000))
def test_rigidity_property(magnitude, radius, seed):
    rep = attempt_compact_perturbation(MOB_ID, VerticalRegion(MOB, None, radius), magnitude, 8, seed)
    assert rep.forced_equality


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 10.0), st.floats(0.1, 100.0))
def test_escape_scale_is_least(size, radius):
    K = VerticalRegion(MOB, None, radius)
    el = BundleElement(0, np.array([1.0, 0.0]), np.array([size]))
    n = escape_scale(K, el)
    assert n * size > radius
    assert n == 1 or (n - 1) * size <= radius
