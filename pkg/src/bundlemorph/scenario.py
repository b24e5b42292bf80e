"""Scenario files: JSON declarations of manifolds, bundles, maps, sections, morphisms, connections and checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import bundle as bmod
from . import maps as mmod
from . import morphism as mor
from .common import DEFAULT_SAMPLES, DEFAULT_SEED, TOL_ALG, TOL_ODE
from .errors import ExprError, ScenarioParseError, UnresolvedReference
from .exprlang import Expression, evaluate, parse, point_bindings
from .geometry import ManifoldModel, manifold_from_name
from .mapping_space import SupportRegion, ambient_section, ball_region, chart_inverse, empty_region, whole_region
from .pullback import PullbackBundle, pullback_bundle
from .transport import Connection, default_connection, flat_connection, levi_civita

CATEGORIES = ("manifolds", "bundles", "maps", "regions", "sections", "morphisms", "connections")

# reference fields of each check kind: field -> category (a list value means a list of references)
CHECK_FIELDS = {
    "cocycle": {"bundle": "bundles"},
    "pullback": {"bundle": "bundles", "map": "maps"},
    "compatibility": {"morphism": "morphisms"},
    "connection": {"connection": "connections"},
    "morph_roundtrip": {"morphism": "morphisms"},
    "chart_roundtrip": {"center": "maps", "section": "sections"},
    "chart_change": {"centers": ["maps"], "section": "sections", "region": "regions"},
    "homotopy": {"section": "sections"},
    "transport": {"connection": "connections", "section": "sections"},
    "trivialize": {"connection": "connections", "center": "maps", "morphism": "morphisms",
                   "second": "morphisms", "region": "regions"},
    "transition": {"connection": "connections", "centers": ["maps"], "morphism": "morphisms",
                   "second": "morphisms", "region": "regions"},
    "rigidity": {"morphism": "morphisms", "region": "regions", "compare": "morphisms"},
}


@dataclass
class CheckSpec:
    id: str
    kind: str
    params: dict
    refs: dict
    location: str


@dataclass
class ScenarioConfig:
    name: str
    manifolds: dict = field(default_factory=dict)
    bundles: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)
    regions: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    morphisms: dict = field(default_factory=dict)
    connections: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)
    sample_count: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    tol_alg: float = TOL_ALG
    tol_ode: float = TOL_ODE
    source: str = "<memory>"


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ScenarioParseError(f"duplicate key {k!r}")
        out[k] = v
    return out


def shipped_scenario(name: str) -> Path:
    """Path of a scenario file shipped with the package (``demo``, ``minimal``, ``planted_defect``)."""
    ref = resources.files("bundlemorph") / "scenarios" / f"{name}.json"
    return Path(str(ref))


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(text, str(path))


def parse_scenario(text: str, source: str = "<memory>") -> ScenarioConfig:
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except ScenarioParseError as exc:
        raise ScenarioParseError(f"{source}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError(f"{source}: top level must be an object")
    return _Builder(doc, source).build()


def _compile(text, location: str) -> Expression:
    try:
        return parse(str(text))
    except ExprError as exc:
        raise ScenarioParseError(f"{location}: {exc}") from exc


def _point_fn(expr: Expression, location: str, name: str = "x") -> Callable:
    def fn(x):
        try:
            return evaluate(expr, point_bindings(name, x))
        except ExprError as exc:
            raise ScenarioParseError(f"{location}: {exc}") from exc
    return fn


class _Builder:
    def __init__(self, doc: dict, source: str):
        self.doc = doc
        self.source = source
        self.cfg = ScenarioConfig(name=str(doc.get("name", Path(source).stem)), source=source)
        self.specs = {}
        self.building = set()
        for cat in CATEGORIES:
            block = doc.get(cat, {})
            if not isinstance(block, dict):
                raise ScenarioParseError(f"{source}: {cat} must be an object of named declarations")
            self.specs[cat] = block
        seen = {}
        for cat in CATEGORIES:
            for name in self.specs[cat]:
                if name in seen:
                    raise ScenarioParseError(f"{source}: name {name!r} declared in both {seen[name]} and {cat}")
                seen[name] = cat
        unknown = set(doc) - set(CATEGORIES) - {"name", "description", "sampling", "tolerances", "suites"}
        if unknown:
            raise ScenarioParseError(f"{source}: unknown top-level keys {sorted(unknown)}")

    # -- generic reference resolution ---------------------------------------

    def ref(self, cat: str, name, location: str):
        if not isinstance(name, str):
            raise ScenarioParseError(f"{location}: expected a name, got {name!r}")
        store = getattr(self.cfg, cat)
        if name in store:
            return store[name]
        if name in self.specs[cat]:
            key = (cat, name)
            if key in self.building:
                raise ScenarioParseError(f"{location}: circular reference through {name!r}")
            self.building.add(key)
            obj = getattr(self, f"_build_{cat}")(name, self.specs[cat][name], f"{cat}.{name}")
            self.building.discard(key)
            store[name] = obj
            return obj
        catalog = self._catalog(cat, name)
        if catalog is not None:
            return catalog
        raise UnresolvedReference(name, location)

    def _catalog(self, cat, name):
        try:
            if cat == "manifolds":
                return manifold_from_name(name)
            if cat == "bundles":
                return bmod.bundle_from_name(name, self.cfg.manifolds)
        except (KeyError, ValueError):
            return None
        return None

    @staticmethod
    def need(spec: dict, key: str, location: str):
        if not isinstance(spec, dict) or key not in spec:
            raise ScenarioParseError(f"{location}: missing field {key!r}")
        return spec[key]

    # -- categories ---------------------------------------------------------

    def _build_manifolds(self, name, spec, loc) -> ManifoldModel:
        cat_name = spec if isinstance(spec, str) else self.need(spec, "catalog", loc)
        try:
            return manifold_from_name(cat_name)
        except KeyError as exc:
            raise UnresolvedReference(cat_name, loc) from exc

    def _build_bundles(self, name, spec, loc):
        if isinstance(spec, str):
            spec = {"catalog": spec}
        kind = spec.get("kind", "catalog" if "catalog" in spec else "inline")
        if kind == "catalog":
            cat_name = self.need(spec, "catalog", loc)
            try:
                return bmod.bundle_from_name(cat_name, self.cfg.manifolds)
            except (KeyError, ValueError) as exc:
                raise UnresolvedReference(cat_name, loc) from exc
        if kind == "tangent":
            return bmod.tangent_bundle(self.ref("manifolds", self.need(spec, "manifold", loc), f"{loc}.manifold"))
        if kind == "trivial":
            base = self.ref("manifolds", self.need(spec, "manifold", loc), f"{loc}.manifold")
            return bmod.trivial_bundle(base, int(self.need(spec, "rank", loc)), name)
        if kind == "pullback":
            F = self.ref("bundles", self.need(spec, "bundle", loc), f"{loc}.bundle")
            phi = self.ref("maps", self.need(spec, "map", loc), f"{loc}.map")
            return pullback_bundle(F, phi)
        if kind == "inline":
            return self._inline_bundle(name, spec, loc)
        raise ScenarioParseError(f"{loc}: unknown bundle kind {kind!r}")

    def _inline_bundle(self, name, spec, loc):
        base = self.ref("manifolds", self.need(spec, "base", loc), f"{loc}.base")
        rank = int(self.need(spec, "rank", loc))
        patches = []
        for i, p in enumerate(self.need(spec, "patches", loc)):
            ploc = f"{loc}.patches[{i}]"
            pid = int(self.need(p, "id", ploc))
            member = _point_fn(_compile(self.need(p, "membership", ploc), f"{ploc}.membership"), ploc)
            box = p.get("box")
            if box is not None:
                box = (np.asarray(box[0], float), np.asarray(box[1], float))
            patches.append(bmod.CoverPatch(pid, base, lambda y, m=member: float(m(y)) > 0, box))
        fns = {}
        for i, t in enumerate(spec.get("theta", [])):
            tloc = f"{loc}.theta[{i}]"
            a, b = (int(v) for v in self.need(t, "pair", tloc))
            if (a, b) in fns:
                raise ScenarioParseError(f"{tloc}: duplicate transition for pair {[a, b]}")
            fns[(a, b)] = _point_fn(_compile(self.need(t, "matrix", tloc), f"{tloc}.matrix"), tloc)
        try:
            cocycle = bmod.TransitionCocycle(tuple(patches), fns, rank)
        except ValueError as exc:
            raise ScenarioParseError(f"{loc}: {exc}") from exc
        return bmod.VectorBundle(spec.get("name", name), base, rank, cocycle)

    def _build_maps(self, name, spec, loc):
        kind = self.need(spec, "kind", loc)
        if kind == "catalog":
            return self._catalog_map(spec, loc)
        if kind == "expression":
            src = self.ref("manifolds", self.need(spec, "source", loc), f"{loc}.source")
            tgt = self.ref("manifolds", self.need(spec, "target", loc), f"{loc}.target")
            comps = [_compile(c, f"{loc}.components[{i}]") for i, c in enumerate(self.need(spec, "components", loc))]
            try:
                return mmod.expression_map(src, tgt, comps, name)
            except ValueError as exc:
                raise ScenarioParseError(f"{loc}: {exc}") from exc
        if kind == "compose":
            outer = self.ref("maps", self.need(spec, "outer", loc), f"{loc}.outer")
            inner = self.ref("maps", self.need(spec, "inner", loc), f"{loc}.inner")
            return mmod.compose(outer, inner)
        if kind == "chart_inverse":
            return chart_inverse(self.ref("sections", self.need(spec, "section", loc), f"{loc}.section"), name=name)
        raise ScenarioParseError(f"{loc}: unknown map kind {kind!r}")

    def _catalog_map(self, spec, loc):
        which = self.need(spec, "name", loc)
        src = self.ref("manifolds", self.need(spec, "source", loc), f"{loc}.source")
        tgt = self.ref("manifolds", spec["target"], f"{loc}.target") if "target" in spec else src
        if which == "identity":
            return mmod.identity_map(src)
        if which == "double_cover":
            return mmod.double_cover(src)
        if which == "rotation":
            return mmod.circle_rotation(src, float(self.need(spec, "angle", loc)))
        if which == "sphere_rotation":
            return mmod.sphere_rotation(src, self.need(spec, "axis", loc), float(self.need(spec, "angle", loc)))
        if which == "equator":
            return mmod.equator(src, tgt)
        if which == "torus_projection":
            return mmod.torus_projection(src, tgt, int(spec.get("factor", 0)))
        if which == "constant":
            return mmod.constant_map(src, tgt, self.need(spec, "point", loc))
        raise UnresolvedReference(which, f"{loc}.name")

    def _build_regions(self, name, spec, loc) -> SupportRegion:
        kind = self.need(spec, "kind", loc)
        if kind == "ball":
            return ball_region(self.need(spec, "center", loc), float(self.need(spec, "radius", loc)), name)
        if kind == "box":
            lo, hi = np.asarray(self.need(spec, "lo", loc), float), np.asarray(self.need(spec, "hi", loc), float)
            if "predicate" in spec:
                pred = _point_fn(_compile(spec["predicate"], f"{loc}.predicate"), loc)
                return SupportRegion(lambda x, p=pred: float(p(x)) > 0, (lo, hi), name)
            return SupportRegion(lambda x: True, (lo, hi), name)
        if kind in ("whole", "empty"):
            m = self.ref("manifolds", self.need(spec, "manifold", loc), f"{loc}.manifold")
            return whole_region(m) if kind == "whole" else empty_region(m)
        raise ScenarioParseError(f"{loc}: unknown region kind {kind!r}")

    def _build_sections(self, name, spec, loc):
        base = self.ref("maps", self.need(spec, "base_map", loc), f"{loc}.base_map")
        support = self.ref("regions", self.need(spec, "support", loc), f"{loc}.support")
        value = self.need(spec, "value", loc)
        exprs = [_compile(v, f"{loc}.value[{i}]") for i, v in enumerate(value)]
        if len(exprs) != base.target.embed_dim:
            raise ScenarioParseError(f"{loc}: value needs {base.target.embed_dim} ambient components")
        fns = [_point_fn(e, loc) for e in exprs]
        return ambient_section(base, lambda x: np.array([float(f(x)) for f in fns]), support)

    def _build_morphisms(self, name, spec, loc):
        kind = spec.get("kind", "matrix")
        if kind == "differential":
            return mor.differential(self.ref("maps", self.need(spec, "of", loc), f"{loc}.of"))
        if kind == "identity":
            return mor.bundle_identity(self.ref("bundles", self.need(spec, "bundle", loc), f"{loc}.bundle"))
        if kind == "shriek":
            pb = self.ref("bundles", self.need(spec, "bundle", loc), f"{loc}.bundle")
            if not isinstance(pb, PullbackBundle):
                raise ScenarioParseError(f"{loc}: {spec['bundle']!r} is not a pullback bundle")
            return mor.shriek_morphism(pb)
        if kind == "scale":
            of = self.ref("morphisms", self.need(spec, "of", loc), f"{loc}.of")
            factor = _point_fn(_compile(self.need(spec, "factor", loc), f"{loc}.factor"), loc)
            return mor.scale_by_function(of, lambda x: float(factor(x)))
        if kind == "combination":
            terms = self.need(spec, "terms", loc)
            coeffs = [float(self.need(t, "coeff", f"{loc}.terms[{i}]")) for i, t in enumerate(terms)]
            ms = [self.ref("morphisms", self.need(t, "morphism", f"{loc}.terms[{i}]"), f"{loc}.terms[{i}].morphism")
                  for i, t in enumerate(terms)]
            return mor.linear_combination(coeffs, ms)
        E = self.ref("bundles", self.need(spec, "source", loc), f"{loc}.source")
        F = self.ref("bundles", self.need(spec, "target", loc), f"{loc}.target")
        phi = self.ref("maps", self.need(spec, "base_map", loc), f"{loc}.base_map")
        if kind == "zero":
            return mor.zero_morphism(E, F, phi)
        if kind == "frame":
            frame = _point_fn(_compile(self.need(spec, "frame", loc), f"{loc}.frame"), loc)
            return mor.ambient_frame_morphism(E, F, phi, lambda x: np.asarray(frame(x), float))
        if kind == "matrix":
            entries = {}
            for i, item in enumerate(self.need(spec, "locals", loc)):
                iloc = f"{loc}.locals[{i}]"
                key = tuple(int(v) for v in self.need(item, "patch_pair", iloc))
                expr = _compile(self.need(item, "matrix", iloc), f"{iloc}.matrix")
                entries[key] = _point_fn(expr, iloc)
            return mor.matrix_morphism(E, F, phi, entries)
        raise ScenarioParseError(f"{loc}: unknown morphism kind {kind!r}")

    def _build_connections(self, name, spec, loc) -> Connection:
        F = self.ref("bundles", self.need(spec, "bundle", loc), f"{loc}.bundle")
        kind = spec.get("kind", "forms" if "forms" in spec else "default")
        if kind == "flat":
            return flat_connection(F)
        if kind == "levi-civita":
            return levi_civita(F)
        if kind == "default":
            return default_connection(F)
        if kind == "forms":
            forms = {}
            for pid, text in self.need(spec, "forms", loc).items():
                expr = _compile(text, f"{loc}.forms.{pid}")

                def form(y, w, expr=expr, floc=f"{loc}.forms.{pid}"):
                    ctx = point_bindings("y", y)
                    ctx.update(point_bindings("w", w))
                    try:
                        return np.asarray(evaluate(expr, ctx), float).reshape(F.rank, F.rank)
                    except ExprError as exc:
                        raise ScenarioParseError(f"{floc}: {exc}") from exc
                forms[int(pid)] = form
            return Connection(F, forms, "custom")
        raise ScenarioParseError(f"{loc}: unknown connection kind {kind!r}")

    # -- assembly -----------------------------------------------------------

    def build(self) -> ScenarioConfig:
        cfg = self.cfg
        sampling = self.doc.get("sampling", {})
        tols = self.doc.get("tolerances", {})
        cfg.sample_count = int(sampling.get("sample_count", DEFAULT_SAMPLES))
        cfg.seed = int(sampling.get("seed", DEFAULT_SEED))
        cfg.tol_alg = float(tols.get("tol_alg", TOL_ALG))
        cfg.tol_ode = float(tols.get("tol_ode", TOL_ODE))
        if cfg.sample_count < 1 or not (math.isfinite(cfg.tol_alg) and math.isfinite(cfg.tol_ode)):
            raise ScenarioParseError(f"{self.source}: invalid sampling or tolerances")
        for cat in CATEGORIES:
            for name in self.specs[cat]:
                self.ref(cat, name, f"{cat}.{name}")
        ids = set()
        suites = self.doc.get("suites", [])
        if not isinstance(suites, list):
            raise ScenarioParseError(f"{self.source}: suites must be a list")
        for i, item in enumerate(suites):
            loc = f"suites[{i}]"
            kind = self.need(item, "check", loc)
            if kind not in CHECK_FIELDS:
                raise ScenarioParseError(f"{loc}: unknown check kind {kind!r}")
            cid = str(item.get("id", f"{kind}-{i}"))
            if cid in ids:
                raise ScenarioParseError(f"{loc}: duplicate check id {cid!r}")
            ids.add(cid)
            refs = {}
            for fld, cat in CHECK_FIELDS[kind].items():
                if fld not in item:
                    continue
                if isinstance(cat, list):
                    refs[fld] = [self.ref(cat[0], n, f"{loc}.{fld}[{j}]") for j, n in enumerate(item[fld])]
                else:
                    refs[fld] = self.ref(cat, item[fld], f"{loc}.{fld}")
            params = {k: v for k, v in item.items() if k not in CHECK_FIELDS[kind] and k not in ("id", "check")}
            cfg.suites.append(CheckSpec(cid, kind, params, refs, loc))
        return cfg


__all__ = ["ScenarioConfig", "CheckSpec", "load_scenario", "parse_scenario", "shipped_scenario", "CHECK_FIELDS"]
