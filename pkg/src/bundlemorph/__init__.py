"""Vector bundles over embedded manifolds, morphisms over smooth maps, and the bundle of such morphisms."""
from .bundle import (BundleElement, VectorBundle, bundle_from_name, mobius_bundle, tangent_bundle, trivial_bundle,
                     validate_cocycle)
from .checks import run_suite
from .common import ValidationReport
from .errors import BundleMorphError
from .geometry import ManifoldModel, manifold_from_name
from .morph_bundle import MorphElement, detrivialize_T, rigidity_check, transition_T, trivialize_T
from .morphism import BundleMorphism, evaluate, identity_to_morph, morph_to_identity
from .pullback import phi_shriek, pullback_bundle
from .report import emit_report
from .scenario import load_scenario, parse_scenario, shipped_scenario
from .transport import HomotopyIsomorphism, parallel_transport

__version__ = "0.1.0"

__all__ = [
    "BundleElement", "VectorBundle", "bundle_from_name", "mobius_bundle", "tangent_bundle", "trivial_bundle",
    "validate_cocycle", "run_suite", "ValidationReport", "BundleMorphError", "ManifoldModel", "manifold_from_name",
    "MorphElement", "detrivialize_T", "rigidity_check", "transition_T", "trivialize_T", "BundleMorphism", "evaluate",
    "identity_to_morph", "morph_to_identity", "phi_shriek", "pullback_bundle", "emit_report", "load_scenario",
    "parse_scenario", "shipped_scenario", "HomotopyIsomorphism", "parallel_transport",
]
