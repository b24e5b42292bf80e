"""The eight acceptance criteria, each at its stated tolerance and runtime budget.

Each test records one pass/fail line, printed in the "acceptance criteria"
section of the pytest terminal summary.
"""
import math
import time

import numpy as np
import pytest

from bundlemorph.bundle import (BundleElement, change_chart, mobius_bundle, tangent_bundle, trivial_bundle,
                                validate_cocycle)
from bundlemorph.checks import run_check, run_suite
from bundlemorph.errors import ExprError
from bundlemorph.exprlang import bump, dump, parse, to_source
from bundlemorph.geometry import circle, euclidean, sphere2, torus2
from bundlemorph.mapping_space import (ambient_section, ball_region, chart_change, chart_forward, chart_inverse,
                                       homotopy, map_distance, section_distance, whole_region, zero_section)
from bundlemorph.maps import (SmoothMapRep, circle_rotation, constant_map, double_cover, equator, identity_map,
                              sphere_rotation, torus_projection)
from bundlemorph.morph_bundle import NonlinearPerturbation, VerticalRegion, attempt_compact_perturbation, \
    rigidity_check
from bundlemorph.morphism import (bundle_identity, differential, evaluate, identity_to_morph, morph_to_identity,
                                  random_morphism, shriek_morphism)
from bundlemorph.pullback import phi_shriek, pullback_bundle
from bundlemorph.report import emit_report
from bundlemorph.scenario import load_scenario, shipped_scenario
from bundlemorph.transport import HomotopyIsomorphism, geodesic_path, levi_civita, parallel_transport, \
    reversed_path
from parser_corpus import INVALID, VALID

N = 256
NORTH = np.array([0.0, 0.0, 1.0])


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _max_abs(a):
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_cocycle_suite(acceptance_line):
    S1, S2, T2 = circle(), sphere2(), torus2()
    mob, ts1, ts2 = mobius_bundle(), tangent_bundle(S1), tangent_bundle(S2)
    catalog = [trivial_bundle(S1, 2), trivial_bundle(S2, 3), trivial_bundle(T2, 1), trivial_bundle(euclidean(3), 2),
               mob, ts1, ts2, tangent_bundle(T2), tangent_bundle(euclidean(2))]
    pulled = [pullback_bundle(mob, double_cover(S1)), pullback_bundle(mob, identity_map(S1)),
              pullback_bundle(mob, circle_rotation(S1, 0.7)), pullback_bundle(ts1, double_cover(S1)),
              pullback_bundle(ts2, equator(S1, S2)), pullback_bundle(ts2, sphere_rotation(S2, [1, 1, 0], 0.9)),
              pullback_bundle(mob, torus_projection(T2, S1)), pullback_bundle(ts2, constant_map(S1, S2, NORTH))]

    def run():
        reps = [validate_cocycle(E, N, 0) for E in catalog + pulled]
        defect = run_suite(load_scenario(shipped_scenario("planted_defect")))
        return reps, defect

    (reps, defect), elapsed = _timed(run)
    worst = max(r.max_residual for r in reps)
    ok = worst < 1e-9 and all(r.passed for r in reps) and not defect.passed and elapsed < 2.0
    acceptance_line(1, "cocycle suite", ok,
                    f"{len(reps)} bundles, max residual {worst:.2e}, planted defect "
                    f"{'fails' if not defect.passed else 'PASSES'} ({defect.records[0].max_residual:.2g}), "
                    f"{elapsed:.2f} s")
    assert worst < 1e-9
    assert not defect.passed
    assert elapsed < 2.0


# -- 2 ------------------------------------------------------------------------

def _pairings():
    S1, S2 = circle(), sphere2()
    mob = mobius_bundle()
    pb = pullback_bundle(mob, double_cover(S1))
    return {
        "TS1 double cover": differential(double_cover(S1)),
        "mobius shriek": shriek_morphism(pb),
        "mobius identity": bundle_identity(mob),
        "TS2 rotation": differential(sphere_rotation(S2, [0.3, -1.0, 0.5], 1.2)),
        "equator": differential(equator(S1, S2)),
    }


def test_criterion_2_morphism_roundtrip(acceptance_line):
    rng = np.random.default_rng(0)

    def run():
        ev = 0.0
        exact = True
        count = 0
        for base in _pairings().values():
            E, F = base.source, base.target
            pts = E.base.sample(N, 0)
            for _ in range(10):
                phi = random_morphism([base], rng)
                psi = morph_to_identity(phi, check_samples=16)
                back = identity_to_morph(psi)
                again = morph_to_identity(back, check_samples=0, pullback=psi.pullback)
                exact &= back.locals is phi.locals and again.locals is psi.locals
                for x in pts:
                    el = BundleElement(E.canonical_patch(x), x, rng.uniform(-10, 10, E.rank))
                    direct = evaluate(phi, el)
                    via = phi_shriek(psi.pullback, evaluate(psi, el))
                    c = direct.patch_id
                    ev = max(ev, _max_abs(change_chart(F, via, c).fiber - direct.fiber),
                             _max_abs(via.base_point - direct.base_point))
                    count += 1
        return ev, exact, count

    (ev, exact, count), elapsed = _timed(run)
    ok = ev < 1e-9 and exact and elapsed < 5.0
    acceptance_line(2, "morphism roundtrip", ok,
                    f"{count} evaluations, sup residual {ev:.2e}, local data exact {exact}, {elapsed:.2f} s")
    assert ev < 1e-9
    assert exact
    assert elapsed < 5.0


# -- 3 ------------------------------------------------------------------------

def _bump_section(M, scale=0.4):
    cap = ball_region(NORTH, 1.3)
    return ambient_section(identity_map(M), lambda x: scale * bump(x[2], 0.2, 1.2) * np.array([1.0, 0.5, 0.0]),
                           cap)


def test_criterion_3_mapping_space_charts(acceptance_line):
    def run():
        res = {}
        for label, M, n in (("ode", sphere2(closed_form=False), 64), ("closed", sphere2(), N)):
            s = _bump_section(M)
            psi = chart_inverse(s, check_samples=8)
            back = chart_forward(identity_map(M), psi, s.support, check_samples=8)
            res[label] = max(section_distance(s, back, n, 0),
                             map_distance(chart_inverse(back, check_samples=0), psi, n, 0))
        R2 = euclidean(2)
        e = ambient_section(identity_map(R2), lambda x: np.array([math.sin(x[0]), x[1] ** 2]), whole_region(R2, 3.0))
        eback = chart_forward(identity_map(R2), chart_inverse(e), e.support, check_samples=0)
        res["closed"] = max(res["closed"], section_distance(e, eback, N, 0))

        S2 = sphere2()
        phi, chi = identity_map(S2), sphere_rotation(S2, [0, 0, 1], 0.1)
        psi = sphere_rotation(S2, [1, 0, 0], 0.2)
        K = whole_region(S2)
        s = ambient_section(psi, lambda x: 0.3 * bump(x[2], 0.2, 1.2) * np.array([0.0, 1.0, 0.0]), K)
        direct = chart_change(phi, psi, s, K)
        via = chart_change(phi, chi, chart_change(chi, psi, s, K), K)
        res["cocycle"] = section_distance(direct, via, N, 0)

        s = _bump_section(S2)
        res["homotopy"] = max(map_distance(homotopy(s, 0.0), identity_map(S2), N, 0),
                              map_distance(homotopy(s, 1.0), chart_inverse(s), N, 0))
        return res

    res, elapsed = _timed(run)
    ok = (res["ode"] < 1e-6 and res["closed"] < 1e-9 and res["cocycle"] < 1e-6 and res["homotopy"] < 1e-6
          and elapsed < 10.0)
    acceptance_line(3, "mapping-space charts", ok,
                    ", ".join(f"{k} {v:.2e}" for k, v in res.items()) + f", {elapsed:.2f} s")
    assert res["ode"] < 1e-6
    assert res["closed"] < 1e-9
    assert res["cocycle"] < 1e-6
    assert res["homotopy"] < 1e-6
    assert elapsed < 10.0


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_transport(acceptance_line):
    S2 = sphere2()
    TS2 = tangent_bundle(S2)
    conn = levi_civita(TS2)

    def run():
        res = {}
        # quarter great circle N -> E: rotation about y by pi/2
        tr = parallel_transport(conn, geodesic_path(S2, NORTH, np.array([math.pi / 2, 0.0, 0.0]), 128))
        east = np.array([1.0, 0.0, 0.0])
        cs, ce = S2.chart(tr.start_patch), S2.chart(tr.end_patch)
        rot = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
        res["quarter"] = max(_max_abs(ce.d_embedded(ce.to_local(east)) @ tr.linear_map @ cs.d_local(NORTH) @ v
                                      - rot @ v) for v in np.eye(3)[:2])

        pts = S2.sample(64, 0)
        still = HomotopyIsomorphism(conn, zero_section(identity_map(S2)))
        res["identity"] = max(_max_abs(still.matrix(x) - np.eye(2)) for x in pts)

        s = _bump_section(S2, 0.8)
        iso = HomotopyIsomorphism(conn, s)
        rng = np.random.default_rng(0)
        lin = rev = 0.0
        for x in pts:
            r = iso.result(x)
            v1, v2 = rng.uniform(-10, 10, (2, 2))
            a, b = rng.uniform(-10, 10, 2)
            p = r.start_patch
            lhs = iso(BundleElement(p, x, a * v1 + b * v2)).fiber
            rhs = a * iso(BundleElement(p, x, v1)).fiber + b * iso(BundleElement(p, x, v2)).fiber
            lin = max(lin, _max_abs(lhs - rhs) / max(1.0, _max_abs(rhs)))
            w = s.ambient(x)
            if np.any(w):
                back = parallel_transport(conn, reversed_path(geodesic_path(S2, x, w, iso.steps)),
                                          start_patch=r.end_patch)
                m = back.linear_map @ r.linear_map
                if back.end_patch != r.start_patch:
                    m = TS2.theta(back.end_patch, r.start_patch, x) @ m
                rev = max(rev, _max_abs(m - np.eye(2)))
        res["linearity"], res["reversal"] = lin, rev
        return res

    res, elapsed = _timed(run)
    ok = (res["quarter"] < 1e-5 and res["identity"] == 0.0 and res["linearity"] < 1e-6 and res["reversal"] < 1e-6
          and elapsed < 10.0)
    acceptance_line(4, "transport", ok, ", ".join(f"{k} {v:.2e}" for k, v in res.items()) + f", {elapsed:.2f} s")
    assert res["quarter"] < 1e-5
    assert res["identity"] == 0.0
    assert res["linearity"] < 1e-6
    assert res["reversal"] < 1e-6
    assert elapsed < 10.0


# -- 5 ------------------------------------------------------------------------

def test_criterion_5_trivialization(acceptance_line):
    cfg = load_scenario(shipped_scenario("demo"))
    specs = {s.kind: s for s in cfg.suites if s.kind in ("trivialize", "transition")}

    def run():
        return {k: run_check(cfg, s) for k, s in specs.items()}

    recs, elapsed = _timed(run)
    t, tr = recs["trivialize"].residuals, recs["transition"].residuals
    ok = (t["roundtrip"] < 1e-6 and t["linearity"] < 1e-6 and t["projection"] == 0.0
          and tr["linearity"] < 1e-6 and tr["consistency_base"] < 1e-6 and tr["consistency_fibre"] < 1e-6
          and elapsed < 15.0)
    acceptance_line(5, "morphism-space trivialization", ok,
                    f"roundtrip {t['roundtrip']:.2e}, linearity {t['linearity']:.2e}, "
                    f"projection {t['projection']:.0f}, transition linearity {tr['linearity']:.2e}, "
                    f"consistency {max(tr['consistency_base'], tr['consistency_fibre']):.2e}, {elapsed:.2f} s")
    assert t["roundtrip"] < 1e-6 and t["linearity"] < 1e-6
    assert t["projection"] == 0.0
    assert tr["linearity"] < 1e-6
    assert tr["consistency_base"] < 1e-6 and tr["consistency_fibre"] < 1e-6
    assert elapsed < 15.0


# -- 6 ------------------------------------------------------------------------

def test_criterion_6_rigidity(acceptance_line):
    S1 = circle()
    mob = mobius_bundle()
    morphisms = {"mobius identity": bundle_identity(mob), "TS1 double cover": differential(double_cover(S1))}

    def run():
        scaling, forced = 0.0, True
        for m in morphisms.values():
            K = VerticalRegion(m.source, None, 1.0)
            for mag in (0.1, 1.0, 10.0):
                rep = attempt_compact_perturbation(m, K, mag, 64, 0)
                forced &= rep.forced_equality
                scaling = max(scaling, rep.verdict.residuals["scaling"] if rep.verdict else math.inf)
        center = np.array([1.0, 0.0])
        fixture = NonlinearPerturbation(morphisms["mobius identity"], center, 0.5, 1.0)
        v = rigidity_check(morphisms["mobius identity"], fixture, VerticalRegion(mob, ball_region(center, 0.5), 1.0),
                           64, 0)
        return scaling, forced, v.violated_hypothesis

    (scaling, forced, violated), elapsed = _timed(run)
    ok = forced and scaling < 1e-9 and violated == "fibrewise linearity" and elapsed < 5.0
    acceptance_line(6, "rigidity", ok,
                    f"forced equality {forced}, scaling residual {scaling:.2e}, nonlinear fixture violates "
                    f"{violated!r}, {elapsed:.2f} s")
    assert forced and scaling < 1e-9
    assert violated == "fibrewise linearity"
    assert elapsed < 5.0


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_parser_corpus(acceptance_line):
    import bundlemorph.errors as errs

    def run():
        bad = []
        for src, want in VALID:
            e = parse(src)
            if dump(e) != want or parse(to_source(e)) != e or to_source(parse(to_source(e))) != to_source(e):
                bad.append(src)
        for src, cls, offset in INVALID:
            try:
                parse(src)
                bad.append(src)
            except ExprError as exc:
                if not isinstance(exc, getattr(errs, cls)) or exc.offset != offset:
                    bad.append(src)
        zeros = all(bump(x, -1.0, 1.0) == 0.0 for x in (-1.0, 1.0, 1.5, -7.0, 1.0 + 1e-15, -1.0 - 1e-15))
        return bad, zeros

    (bad, zeros), elapsed = _timed(run)
    total = len(VALID) + len(INVALID)
    ok = total == 50 and not bad and zeros and elapsed < 1.0
    acceptance_line(7, "parser corpus", ok,
                    f"{total - len(bad)}/{total} fixtures, bump zero outside support {zeros}, {elapsed:.3f} s")
    assert total == 50 and not bad
    assert zeros
    assert elapsed < 1.0


# -- 8 ------------------------------------------------------------------------

def test_criterion_8_determinism(acceptance_line):
    outs = [emit_report(run_suite(load_scenario(shipped_scenario("demo"))), "structured") for _ in range(2)]
    same = outs[0].encode() == outs[1].encode()
    acceptance_line(8, "determinism", same, f"two structured demo reports byte-identical: {same}, "
                                            f"{len(outs[0])} bytes")
    assert same
