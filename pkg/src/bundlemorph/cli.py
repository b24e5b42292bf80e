"""Command-line entry point: ``bundlemorph <verb> [--scenario FILE] [options]``."""
from __future__ import annotations

import argparse
import os
import sys

from . import maps as mmod
from .checks import VERB_KINDS, run_check, run_suite
from .errors import BundleMorphError
from .exprlang import parse
from .report import Report, emit_report
from .scenario import CheckSpec, ScenarioConfig, load_scenario, shipped_scenario

ENV_OVERRIDES = {
    "tol_alg": ("BUNDLEMORPH_TOL_ALG", float),
    "tol_ode": ("BUNDLEMORPH_TOL_ODE", float),
    "samples": ("BUNDLEMORPH_SAMPLES", int),
    "seed": ("BUNDLEMORPH_SEED", int),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file (default: the shipped demo)")
    common.add_argument("--samples", type=int, help="sample count for every check")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--tol-alg", type=float, help="tolerance for algebraic identities")
    common.add_argument("--tol-ode", type=float, help="tolerance for ODE-based identities")
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--filter", help="check-id glob or substring")
    common.add_argument("--timing", action="store_true", help="include elapsed times in the report")

    parser = argparse.ArgumentParser(prog="bundlemorph", description="Verify bundle and morphism-space constructions.")
    sub = parser.add_subparsers(dest="verb", required=True)
    v = sub.add_parser("validate", parents=[common], help="cocycle, pullback, compatibility and connection checks")
    v.add_argument("bundles", nargs="*", help="bundle names (scenario or catalog) to check instead of the suite")
    p = sub.add_parser("pullback", parents=[common], help="pullback bundle checks")
    p.add_argument("bundle", nargs="?", help="bundle name (scenario or catalog)")
    p.add_argument("map", nargs="?",
                   help="map name from the scenario, a catalog self-map of the base (identity, double_cover), "
                        "or ';'-separated coordinate expressions in x")
    for verb, text in (("roundtrip", "morphisms over a map versus over the identity"),
                       ("chart", "mapping-space charts, chart changes and homotopies"),
                       ("transport", "homotopy isomorphisms of pullback bundles"),
                       ("trivialize", "trivializations of the morphism space"),
                       ("transition", "transition maps of the morphism space"),
                       ("rigidity", "rigidity of compactly supported perturbations"),
                       ("all", "every check in the scenario")):
        sub.add_parser(verb, parents=[common], help=text)
    return parser


def _settings(args) -> dict:
    out = {"tol_alg": args.tol_alg, "tol_ode": args.tol_ode, "samples": args.samples, "seed": args.seed}
    for key, (env, cast) in ENV_OVERRIDES.items():
        if out[key] is None and os.environ.get(env):
            out[key] = cast(os.environ[env])
    return out


def configure(cfg: ScenarioConfig, settings: dict) -> ScenarioConfig:
    """Apply flag / environment overrides; an explicit sample count overrides per-check counts too."""
    if settings.get("tol_alg") is not None:
        cfg.tol_alg = settings["tol_alg"]
    if settings.get("tol_ode") is not None:
        cfg.tol_ode = settings["tol_ode"]
    if settings.get("seed") is not None:
        cfg.seed = settings["seed"]
    if settings.get("samples") is not None:
        if settings["samples"] < 1:
            raise BundleMorphError("--samples must be >= 1")
        cfg.sample_count = settings["samples"]
        for spec in cfg.suites:
            spec.params.pop("samples", None)
    return cfg


def _lookup_bundle(cfg: ScenarioConfig, name: str):
    from .bundle import bundle_from_name

    if name in cfg.bundles:
        return cfg.bundles[name]
    try:
        return bundle_from_name(name, cfg.manifolds)
    except (KeyError, ValueError) as exc:
        raise BundleMorphError(f"unknown bundle {name!r}") from exc


def _lookup_map(cfg: ScenarioConfig, name: str, base):
    if name in cfg.maps:
        return cfg.maps[name]
    if name == "identity":
        return mmod.identity_map(base)
    if name == "double_cover":
        return mmod.double_cover(base)
    parts = [s for s in name.split(";") if s.strip()]
    try:
        return mmod.expression_map(base, base, [parse(s) for s in parts], name)
    except ValueError as exc:
        raise BundleMorphError(f"cannot build map {name!r}: {exc}") from exc


def _adhoc(cfg: ScenarioConfig, args) -> Report | None:
    specs = []
    if args.verb == "validate" and args.bundles:
        for name in args.bundles:
            specs.append(CheckSpec(f"cocycle-{name}", "cocycle", {}, {"bundle": _lookup_bundle(cfg, name)},
                                   "command line"))
    elif args.verb == "pullback" and args.bundle:
        if not args.map:
            raise BundleMorphError("pullback needs both a bundle and a map")
        F = _lookup_bundle(cfg, args.bundle)
        phi = _lookup_map(cfg, args.map, F.base)
        specs.append(CheckSpec(f"pullback-{args.bundle}", "pullback", {}, {"bundle": F, "map": phi}, "command line"))
    else:
        return None
    report = Report(cfg.name, cfg.seed, cfg.sample_count, cfg.tol_alg, cfg.tol_ode)
    report.records = [run_check(cfg, s) for s in specs]
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = args.scenario or shipped_scenario("demo")
        cfg = configure(load_scenario(path), _settings(args))
        report = _adhoc(cfg, args)
        if report is None:
            report = run_suite(cfg, args.filter, VERB_KINDS[args.verb])
    except BundleMorphError as exc:
        print(f"bundlemorph: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(emit_report(report, args.format, args.timing))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
