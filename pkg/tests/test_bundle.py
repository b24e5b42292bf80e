import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bundlemorph.bundle import (BundleElement, CoverPatch, TransitionCocycle, VectorBundle, bundle_from_name,
                                canonical, change_chart, element, mobius_bundle, tangent_bundle, trivial_bundle,
                                trivialize, validate_cocycle)
from bundlemorph.common import central_jacobian
from bundlemorph.errors import EmptyOverlapSampling, NotInOverlap, NotInPatch
from bundlemorph.geometry import circle, sphere2, torus2
from bundlemorph.scenario import load_scenario, shipped_scenario

CATALOG = ["mobius", "ts1", "ts2", "tangent(torus2)", "trivial(sphere2,2)", "trivial(circle,3)"]


def _angle(t):
    return np.array([math.cos(t), math.sin(t)])


@pytest.mark.parametrize("name", CATALOG)
def test_catalog_cocycles_pass(name):
    rep = validate_cocycle(bundle_from_name(name), 64, 0)
    assert rep.passed
    assert rep.residuals["CC1"] < 1e-9 and rep.residuals["CC2"] < 1e-9


def test_mobius_residuals_zero():
    rep = validate_cocycle(mobius_bundle(), 256, 0)
    assert rep.passed and rep.max_residual == 0.0


def test_planted_defect_reports_its_magnitude():
    cfg = load_scenario(shipped_scenario("planted_defect"))
    rep = validate_cocycle(cfg.bundles["L"], 256, 0)
    assert not rep.passed
    # theta_12 theta_01 = 4 against a declared theta_02 = 4.5
    assert rep.residuals["CC1"] == pytest.approx(0.5, abs=1e-12)


def test_change_chart_mobius_lower_overlap_flips_sign():
    E = mobius_bundle()
    y = _angle(3 * math.pi / 2)
    moved = change_chart(E, BundleElement(0, y, np.array([2.0])), 1)
    assert moved.patch_id == 1 and moved.fiber[0] == -2.0
    upper = change_chart(E, BundleElement(0, _angle(math.pi / 2), np.array([2.0])), 1)
    assert upper.fiber[0] == 2.0


def test_change_chart_same_patch_and_roundtrip():
    E = tangent_bundle(sphere2())
    y = sphere2().parametrize(np.array([0.2, 0.5]))
    el = BundleElement(0, y, np.array([0.3, -1.2]))
    assert change_chart(E, el, 0) is el
    back = change_chart(E, change_chart(E, el, 1), 0)
    np.testing.assert_allclose(back.fiber, el.fiber, atol=1e-9)


def test_change_chart_outside_overlap():
    E = mobius_bundle()
    with pytest.raises(NotInOverlap):
        change_chart(E, BundleElement(0, _angle(0.0), np.array([1.0])), 1)


def test_trivialize():
    E = mobius_bundle()
    y = _angle(3 * math.pi / 2)
    el = element(E, y, [1.5])
    assert trivialize(E, el.patch_id, el)[1] == pytest.approx([1.5])
    assert trivialize(E, 1, el)[1][0] == -1.5
    z = element(E, y, [0.0])
    assert all(np.all(trivialize(E, p, z)[1] == 0) for p in (0, 1))
    with pytest.raises(NotInPatch):
        trivialize(E, 1, element(E, _angle(0.0), [1.0]))
    assert trivialize(E, 1, el)[0] is y


def test_canonical_patch_is_lowest():
    E = mobius_bundle()
    y = _angle(math.pi / 2)
    assert E.canonical_patch(y) == 0
    assert canonical(E, BundleElement(1, y, np.array([3.0]))).patch_id == 0


def test_ts2_transitions_match_finite_difference_jacobians():
    S2 = sphere2()
    E = tangent_bundle(S2)
    c0, c1 = S2.chart(0), S2.chart(1)
    for y in E.patch(0).sample(32, 0, where=E.patch(1).contains):
        fd = central_jacobian(lambda s: c1.to_local(c0.to_embedded(s)), c0.to_local(y), 1e-6)
        np.testing.assert_allclose(E.theta(0, 1, y), fd, atol=1e-5)


def test_declared_empty_overlap_raises():
    S1 = circle()
    p0 = CoverPatch(0, S1, lambda y: y[0] > 0.5)
    p1 = CoverPatch(1, S1, lambda y: y[0] < -0.5)
    one = lambda y: np.eye(1)
    E = VectorBundle("split", S1, 1, TransitionCocycle((p0, p1), {(0, 1): one, (1, 0): one}, 1))
    with pytest.raises(EmptyOverlapSampling):
        validate_cocycle(E, 16, 0)


def test_condition_guard_trips():
    S1 = circle()
    p0 = CoverPatch(0, S1, lambda y: y[0] > -0.5)
    p1 = CoverPatch(1, S1, lambda y: y[0] < 0.5)
    big, small = (lambda y: np.array([[1e9, 0.0], [0.0, 1.0]])), (lambda y: np.array([[1e-9, 0.0], [0.0, 1.0]]))
    E = VectorBundle("stiff", S1, 2, TransitionCocycle((p0, p1), {(0, 1): big, (1, 0): small}, 2))
    rep = validate_cocycle(E, 16, 0)
    assert not rep.passed and rep.residuals["condition"] >= 1e8


def test_trivial_bundle_single_patch():
    E = trivial_bundle(torus2(), 2)
    assert E.patch_ids == [0] and validate_cocycle(E, 32, 0).max_residual == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-10, 10), st.floats(-10, 10))
def test_change_chart_is_fibrewise_linear(seed, a, b):
    E = tangent_bundle(sphere2())
    y = E.patch(0).sample(1, seed, where=E.patch(1).contains)[0]
    rng = np.random.default_rng(seed)
    u, v = rng.uniform(-10, 10, (2, 2))
    lhs = change_chart(E, BundleElement(0, y, a * u + b * v), 1).fiber
    rhs = a * change_chart(E, BundleElement(0, y, u), 1).fiber + b * change_chart(E, BundleElement(0, y, v), 1).fiber
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.max(np.abs(rhs))))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CATALOG), st.integers(0, 10_000))
def test_inverse_consistency(name, seed):
    E = bundle_from_name(name)
    for a in E.patch_ids:
        for b in E.patch_ids:
            for y in E.patch(a).sample(2, seed, where=E.patch(b).contains):
                np.testing.assert_allclose(E.theta(b, a, y) @ E.theta(a, b, y), np.eye(E.rank), atol=1e-9)
