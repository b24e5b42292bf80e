"""Execution of scenario checks; each check delegates to the construction it exercises."""
from __future__ import annotations

import fnmatch
import math
import time

import numpy as np

from .bundle import BundleElement, change_chart, validate_cocycle
from .common import max_abs
from .errors import BundleMorphError
from .mapping_space import (chart_change, chart_forward, chart_inverse, homotopy, map_distance, section_distance,
                            whole_region, zero_section)
from .morph_bundle import (MorphElement, NonlinearPerturbation, VerticalRegion, attempt_compact_perturbation,
                           detrivialize_T, pair_combination, pair_distance, rigidity_check, transition_T, trivialize_T)
from .morphism import BundleMorphism, check_overlap_compatibility, evaluate, identity_to_morph, morph_to_identity
from .pullback import phi_shriek, pullback_bundle
from .report import CheckRecord, Report
from .scenario import CheckSpec, ScenarioConfig
from .transport import HomotopyIsomorphism, geodesic_path, parallel_transport, reversed_path, validate_connection

ANCHORS = {
    "cocycle": "transition cocycle identities",
    "pullback": "pullback bundle and its induced cocycle",
    "compatibility": "local matrix form of a bundle morphism",
    "connection": "gauge law of the chosen connection",
    "morph_roundtrip": "morphisms over a map versus morphisms over the identity",
    "chart_roundtrip": "exponential chart on the mapping space",
    "chart_change": "change of exponential charts",
    "homotopy": "geodesic homotopy between nearby maps",
    "transport": "homotopy isomorphism of pullback bundles",
    "trivialize": "trivialization of the morphism space",
    "transition": "transition maps of the morphism space",
    "rigidity": "rigidity of fibrewise-linear perturbations with vertically compact support",
}

# checks each CLI verb runs
VERB_KINDS = {
    "validate": ("cocycle", "pullback", "compatibility", "connection"),
    "pullback": ("pullback",),
    "roundtrip": ("morph_roundtrip",),
    "chart": ("chart_roundtrip", "chart_change", "homotopy"),
    "transport": ("transport",),
    "trivialize": ("trivialize",),
    "transition": ("transition",),
    "rigidity": ("rigidity",),
    "all": tuple(ANCHORS),
}


class _Ctx:
    def __init__(self, cfg: ScenarioConfig, spec: CheckSpec):
        self.cfg = cfg
        self.spec = spec
        self.n = int(spec.params.get("samples", cfg.sample_count))
        self.seed = cfg.seed
        self.rng = np.random.default_rng(cfg.seed)

    def tol(self, default: str) -> float:
        which = self.spec.params.get("tolerance", default)
        return self.cfg.tol_alg if which == "alg" else self.cfg.tol_ode

    def ref(self, name):
        if name not in self.spec.refs:
            raise BundleMorphError(f"check {self.spec.id} needs field {name!r}")
        return self.spec.refs[name]


def _result(residuals: dict, count: int, tol: float, notes=None, passed=None) -> tuple:
    worst = max(residuals.values(), default=0.0)
    ok = worst < tol if passed is None else passed
    return ok, worst, count, tol, residuals, list(notes or [])


def _random_elements(bundle, n: int, seed: int, rng) -> list:
    out = []
    for x in bundle.base.sample(n, seed):
        out.append(BundleElement(bundle.canonical_patch(x), x, rng.uniform(-10, 10, bundle.rank)))
    return out


def _fibre_in(F, elem, patch):
    return change_chart(F, elem, patch).fiber


# -- individual checks -------------------------------------------------------

def _check_cocycle(c: _Ctx):
    r = validate_cocycle(c.ref("bundle"), c.n, c.seed, c.cfg.tol_alg)
    return r.passed, r.max_residual, r.sample_count, r.tolerance, r.residuals, r.notes


def _check_pullback(c: _Ctx):
    pb = pullback_bundle(c.ref("bundle"), c.ref("map"))
    r = validate_cocycle(pb, c.n, c.seed, c.cfg.tol_alg)
    return r.passed, r.max_residual, r.sample_count, r.tolerance, r.residuals, [f"pullback {pb.name}"] + r.notes


def _check_compatibility(c: _Ctx):
    r = check_overlap_compatibility(c.ref("morphism"), c.n, c.seed, c.cfg.tol_alg)
    return r.passed, r.max_residual, r.sample_count, r.tolerance, r.residuals, r.notes


def _check_connection(c: _Ctx):
    r = validate_connection(c.ref("connection"), c.n, c.seed, c.tol("ode"))
    return r.passed, r.max_residual, r.sample_count, r.tolerance, r.residuals, r.notes


def _check_morph_roundtrip(c: _Ctx):
    phi: BundleMorphism = c.ref("morphism")
    psi = morph_to_identity(phi, check_samples=32, seed=c.seed, tol=c.cfg.tol_alg)
    back = identity_to_morph(psi)
    again = morph_to_identity(back, check_samples=0, pullback=psi.pullback)
    F = phi.target
    ev = exact = 0.0
    elems = _random_elements(phi.source, c.n, c.seed, c.rng)
    for e in elems:
        direct = evaluate(phi, e)
        via = phi_shriek(psi.pullback, evaluate(psi, e))
        patch = F.canonical_patch(direct.base_point)
        ev = max(ev, max_abs(_fibre_in(F, direct, patch) - _fibre_in(F, via, patch)),
                 max_abs(direct.base_point - via.base_point))
        for key in phi.keys_at(e.base_point):
            a = phi.matrix(key, e.base_point)
            if not (np.array_equal(a, back.matrix(key, e.base_point))
                    and np.array_equal(psi.matrix(key, e.base_point), again.matrix(key, e.base_point))):
                exact = max(exact, max_abs(a - back.matrix(key, e.base_point)), math.inf)
    ok = ev < c.cfg.tol_alg and exact == 0.0
    return _result({"evaluation": ev, "local_data": exact}, len(elems), c.cfg.tol_alg, passed=ok)


def _check_chart_roundtrip(c: _Ctx):
    center, section = c.ref("center"), c.ref("section")
    tol = c.tol("ode")
    psi = chart_inverse(section, seed=c.seed)
    coords = chart_forward(center, psi, section.support, seed=c.seed)
    psi2 = chart_inverse(coords, seed=c.seed)
    res = {"forward_inverse": section_distance(section, coords, c.n, c.seed),
           "inverse_forward": map_distance(psi, psi2, c.n, c.seed)}
    return _result(res, 2 * c.n, tol)


def _check_chart_change(c: _Ctx):
    phi, chi, psi = c.ref("centers")
    s = c.ref("section")
    K = c.spec.refs.get("region", s.support)
    direct = chart_change(phi, psi, s, K, seed=c.seed)
    via = chart_change(phi, chi, chart_change(chi, psi, s, K, seed=c.seed), K, seed=c.seed)
    same = chart_change(psi, psi, s, K, seed=c.seed)
    res = {"cocycle": section_distance(direct, via, c.n, c.seed),
           "identity": section_distance(same, s, c.n, c.seed)}
    return _result(res, 2 * c.n, c.tol("ode"))


def _check_homotopy(c: _Ctx):
    s = c.ref("section")
    phi = s.base_map
    psi = chart_inverse(s, seed=c.seed)
    res = {"start": map_distance(homotopy(s, 0.0, seed=c.seed), phi, c.n, c.seed),
           "end": map_distance(homotopy(s, 1.0, seed=c.seed), psi, c.n, c.seed)}
    return _result(res, 2 * c.n, c.tol("ode"))


def _check_transport(c: _Ctx):
    conn, s = c.ref("connection"), c.ref("section")
    F = conn.bundle
    iso = HomotopyIsomorphism(conn, s)
    still = HomotopyIsomorphism(conn, zero_section(s.base_map))
    lin = rev = ident = 0.0
    pts = s.base_map.source.sample(c.n, c.seed)
    eye = np.eye(F.rank)
    for x in pts:
        res = iso.result(x)
        v1, v2 = c.rng.uniform(-10, 10, (2, F.rank))
        a, b = c.rng.uniform(-10, 10, 2)
        p = res.start_patch
        out = iso(BundleElement(p, x, a * v1 + b * v2)).fiber
        combo = a * iso(BundleElement(p, x, v1)).fiber + b * iso(BundleElement(p, x, v2)).fiber
        lin = max(lin, max_abs(out - combo) / max(1.0, max_abs(combo)))
        y = s.base_map(x)
        w = s.ambient(x)
        if np.any(w):
            back = parallel_transport(conn, reversed_path(geodesic_path(F.base, y, w, iso.steps)),
                                      start_patch=res.end_patch)
            m = back.linear_map @ res.linear_map
            if back.end_patch != res.start_patch:
                m = F.theta(back.end_patch, res.start_patch, y) @ m
            rev = max(rev, max_abs(m - eye))
        ident = max(ident, max_abs(still.matrix(x) - eye))
    notes = [f"connection kind: {conn.kind}"]
    ok = lin < c.tol("ode") and rev < c.tol("ode") and ident == 0.0
    return _result({"linearity": lin, "reversal": rev, "identity": ident}, len(pts), c.tol("ode"), notes, ok)


def _element(morph: BundleMorphism) -> MorphElement:
    return MorphElement(morph.base_map, morph)


def _fibre_residual(a: BundleMorphism, b: BundleMorphism, n: int, seed: int) -> float:
    worst = 0.0
    for x in a.source.base.sample(n, seed):
        y = a.base_map(x)
        for lam in a.source.patches_at(x):
            for al in a.target.patches_at(y):
                worst = max(worst, max_abs(a.local_matrix(lam, al, x, y) - b.local_matrix(lam, al, x, y)))
    return worst


def _check_trivialize(c: _Ctx):
    conn, phi, morph = c.ref("connection"), c.ref("center"), c.ref("morphism")
    K = c.ref("region")
    pair = trivialize_T(phi, conn, _element(morph), K, seed=c.seed)
    back = detrivialize_T(phi, conn, pair)
    res = {"roundtrip": _fibre_residual(morph, back.fibre, c.n, c.seed),
           "projection": 0.0 if (pair.base is morph.base_map and back.base is morph.base_map) else math.inf}
    if "second" in c.spec.refs:
        other = c.ref("second")
        a, b = c.rng.uniform(-10, 10, 2)
        from .morph_bundle import element_combination
        combo = trivialize_T(phi, conn, element_combination([a, b], [_element(morph), _element(other)]), K,
                             seed=c.seed)
        p2 = trivialize_T(phi, conn, _element(other), K, seed=c.seed)
        lhs = combo.fibre_coords
        rhs = pair_combination([a, b], [pair, _share(p2, pair)]).fibre_coords
        res["linearity"] = _fibre_residual(lhs, rhs, c.n, c.seed) / max(1.0, abs(a) + abs(b))
    ok = all(v < c.tol("ode") for k, v in res.items() if k != "projection") and res["projection"] == 0.0
    return _result(res, c.n, c.tol("ode"), [f"connection kind: {conn.kind}"], ok)


def _share(pair, like):
    """Re-house ``pair`` on the base coordinates object of ``like`` (same base map and centre)."""
    from .morph_bundle import TrivializedPair
    return TrivializedPair(like.center, like.base, like.coords, pair.fibre_coords, like.transport, like.support)


def _check_transition(c: _Ctx):
    conn, morph = c.ref("connection"), c.ref("morphism")
    phi, psi = c.ref("centers")
    K = c.ref("region")
    pair = trivialize_T(psi, conn, _element(morph), K, seed=c.seed)
    there = transition_T(phi, psi, conn, pair, seed=c.seed)
    back = transition_T(psi, phi, conn, there, seed=c.seed)
    d = pair_distance(pair, back, c.n, c.seed)
    same = transition_T(psi, psi, conn, pair, seed=c.seed)
    d_id = pair_distance(pair, same, c.n, c.seed)
    res = {"consistency_base": d["base"], "consistency_fibre": d["fibre"],
           "identity_base": d_id["base"], "identity_fibre": d_id["fibre"]}
    if "second" in c.spec.refs:
        a, b = c.rng.uniform(-10, 10, 2)
        p2 = _share(trivialize_T(psi, conn, _element(c.ref("second")), K, seed=c.seed), pair)
        lhs = transition_T(phi, psi, conn, pair_combination([a, b], [pair, p2]), seed=c.seed).fibre_coords
        t2 = transition_T(phi, psi, conn, p2, seed=c.seed)
        rhs = pair_combination([a, b], [there, _share(t2, there)]).fibre_coords
        res["linearity"] = _fibre_residual(lhs, rhs, c.n, c.seed) / max(1.0, abs(a) + abs(b))
    return _result(res, c.n, c.tol("ode"), [f"connection kind: {conn.kind}"])


def _check_rigidity(c: _Ctx):
    phi = c.ref("morphism")
    E = phi.source
    base = c.spec.refs.get("region")
    radius = float(c.spec.params.get("radius", 1.0))
    K = VerticalRegion(E, base, radius)
    mode = c.spec.params.get("mode", "perturbation")
    tol = c.cfg.tol_alg
    if mode == "perturbation":
        res, notes, ok = {}, [], True
        for m in c.spec.params.get("magnitudes", [0.1, 1.0, 10.0]):
            rep = attempt_compact_perturbation(phi, K, float(m), c.n, c.seed, tol)
            if rep.verdict is None:
                ok = False
                res[f"scaling@{m:g}"] = math.inf
                notes.append(f"magnitude {m:g}: {rep.conclusion}")
                continue
            res[f"scaling@{m:g}"] = rep.verdict.residuals["scaling"]
            res[f"inside@{m:g}"] = rep.verdict.residuals["inside"]
            ok = ok and rep.forced_equality
            notes.append(f"magnitude {m:g}: {rep.conclusion}")
        return _result(res, c.n, tol, notes, ok and all(v < tol for v in res.values()))
    if mode == "nonlinear":
        center = np.asarray(c.spec.params["center"], float)
        fixture = NonlinearPerturbation(phi, center, float(c.spec.params["base_radius"]), radius,
                                        float(c.spec.params.get("magnitude", 1.0)))
        if base is None:
            base = _ball(center, float(c.spec.params["base_radius"]))
            K = VerticalRegion(E, base, radius)
        v = rigidity_check(phi, fixture, K, c.n, c.seed, tol)
        expected = c.spec.params.get("expect_violation", "fibrewise linearity")
        notes = [f"violated hypothesis: {v.violated_hypothesis}", f"expected: {expected}"]
        return _result(v.residuals, v.sample_count, tol, notes, v.violated_hypothesis == expected)
    if mode == "compare":
        v = rigidity_check(phi, c.ref("compare"), K, c.n, c.seed, tol)
        return _result(v.residuals, v.sample_count, tol, v.notes, v.passed)
    raise BundleMorphError(f"unknown rigidity mode {mode!r}")


def _ball(center, r):
    from .mapping_space import ball_region
    return ball_region(center, r)


RUNNERS = {
    "cocycle": _check_cocycle,
    "pullback": _check_pullback,
    "compatibility": _check_compatibility,
    "connection": _check_connection,
    "morph_roundtrip": _check_morph_roundtrip,
    "chart_roundtrip": _check_chart_roundtrip,
    "chart_change": _check_chart_change,
    "homotopy": _check_homotopy,
    "transport": _check_transport,
    "trivialize": _check_trivialize,
    "transition": _check_transition,
    "rigidity": _check_rigidity,
}


def run_check(cfg: ScenarioConfig, spec: CheckSpec) -> CheckRecord:
    start = time.perf_counter()
    try:
        ok, worst, count, tol, residuals, notes = RUNNERS[spec.kind](_Ctx(cfg, spec))
        status = "pass" if ok else "fail"
    except BundleMorphError as exc:
        status, worst, count, tol, residuals = "error", math.inf, 0, math.nan, {}
        notes = [f"{type(exc).__name__}: {exc}"]
    return CheckRecord(spec.id, spec.kind, ANCHORS[spec.kind], status, float(worst), int(count), float(tol),
                       {k: float(v) for k, v in residuals.items()}, notes, time.perf_counter() - start)


def select(cfg: ScenarioConfig, pattern: str | None = None, kinds=None) -> list:
    out = []
    for spec in cfg.suites:
        if kinds is not None and spec.kind not in kinds:
            continue
        if pattern and not (fnmatch.fnmatchcase(spec.id, pattern) or pattern in spec.id):
            continue
        out.append(spec)
    return out


def run_suite(cfg: ScenarioConfig, pattern: str | None = None, kinds=None) -> Report:
    """Run matching checks in declaration order; failures are recorded, not raised."""
    report = Report(cfg.name, cfg.seed, cfg.sample_count, cfg.tol_alg, cfg.tol_ode)
    for spec in select(cfg, pattern, kinds):
        report.records.append(run_check(cfg, spec))
    return report


__all__ = ["ANCHORS", "VERB_KINDS", "RUNNERS", "run_check", "run_suite", "select", "whole_region"]
