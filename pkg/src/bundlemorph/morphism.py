"""Bundle morphisms stored as local matrix families, and their correspondence with morphisms over the identity."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .bundle import BundleElement, VectorBundle, change_chart, tangent_bundle
from .common import DEFAULT_SAMPLES, TOL_ALG, ValidationReport, max_abs
from .errors import BaseMapMismatch, BaseMismatch, IncompatibleLocals, NoCoveringPatch, NotInOverlap
from .exprlang import Expression, evaluate as eval_expr, parse, point_bindings
from .geometry import same_manifold
from .maps import SmoothMapRep, identity_map, maps_agree
from .pullback import PullbackBundle, pullback_bundle

Array = np.ndarray
MatrixFn = Callable[[Array], Array]


@dataclass(frozen=True, eq=False)
class BundleMorphism:
    """A fibrewise-linear map ``source -> target`` covering ``base_map``.

    ``locals[(lam, alpha)](x)`` is the (target.rank x source.rank) matrix
    taking patch-lam fibre coordinates at x to patch-alpha coordinates at
    base_map(x).  Keys not present are derived on demand from any present key
    through the two cocycles.
    """

    source: VectorBundle
    target: VectorBundle
    base_map: SmoothMapRep
    locals: Mapping

    def __post_init__(self):
        if not same_manifold(self.base_map.source, self.source.base):
            raise BaseMismatch(f"base map starts on {self.base_map.source.name}, not {self.source.base.name}")
        if not same_manifold(self.base_map.target, self.target.base):
            raise BaseMismatch(f"base map ends on {self.base_map.target.name}, not {self.target.base.name}")

    @property
    def shape(self) -> tuple:
        return (self.target.rank, self.source.rank)

    def keys_at(self, x, y=None) -> list:
        """Declared keys whose refined patch contains ``x``; ``y`` is base_map(x) if known."""
        y = self.base_map(x) if y is None else y
        return [(lam, a) for (lam, a) in self.locals
                if self.source.patch(lam).contains(x) and self.target.patch(a).contains(y)]

    def matrix(self, key, x) -> Array:
        return np.asarray(self.locals[key](np.asarray(x, float)), float).reshape(self.shape)

    def local_matrix(self, lam: int, alpha: int, x, y=None) -> Array:
        """The local matrix for any refined patch containing ``x``."""
        x = np.asarray(x, float)
        if (lam, alpha) in self.locals:
            return self.matrix((lam, alpha), x)
        y = self.base_map(x) if y is None else y
        if not (self.source.patch(lam).contains(x) and self.target.patch(alpha).contains(y)):
            raise NotInOverlap(f"x is not in the refined patch ({lam}, {alpha})")
        keys = self.keys_at(x, y)
        if not keys:
            raise NoCoveringPatch("no declared local matrix covers x")
        l0, a0 = keys[0]
        return self.target.theta(a0, alpha, y) @ self.matrix((l0, a0), x) @ self.source.theta(lam, l0, x)

    def __call__(self, elem: BundleElement, key=None) -> BundleElement:
        return evaluate(self, elem, key)


@dataclass(frozen=True, eq=False)
class MorphismOverIdentity(BundleMorphism):
    """A morphism ``E -> pullback`` over the identity of the base; a section of L(E, pullback)."""

    @property
    def pullback(self) -> PullbackBundle:
        return self.target


def evaluate(phi: BundleMorphism, elem: BundleElement, key=None) -> BundleElement:
    """Image of ``elem``, presented in the target patch of the chosen key."""
    x = elem.base_point
    y = phi.base_map(x)
    if key is None:
        keys = phi.keys_at(x, y)
        if not keys:
            raise NoCoveringPatch(f"no refined patch of {phi.source.name} -> {phi.target.name} covers x")
        same = [k for k in keys if k[0] == elem.patch_id]
        key = same[0] if same else keys[0]
    lam, alpha = key
    u = change_chart(phi.source, elem, lam).fiber
    return BundleElement(alpha, y, phi.local_matrix(lam, alpha, x, y) @ u)


def _ordered_key_pairs(phi: BundleMorphism) -> list:
    keys = sorted(phi.locals)
    return [(k1, k2) for k1, k2 in itertools.product(keys, repeat=2) if k1 != k2]


def check_overlap_compatibility(phi: BundleMorphism, sample_count: int = DEFAULT_SAMPLES, seed: int = 0,
                                tol: float = TOL_ALG) -> ValidationReport:
    """Sampled residual of A[mu, beta] = theta[alpha, beta](y) A[lam, alpha] T[mu, lam] on refined overlaps."""
    worst = 0.0
    total = 0
    pairs = _ordered_key_pairs(phi)
    for (lam, a), (mu, b) in pairs:
        def inside(x, mu=mu, a=a, b=b):
            if not phi.source.patch(mu).contains(x):
                return False
            y = phi.base_map(x)
            return phi.target.patch(a).contains(y) and phi.target.patch(b).contains(y)
        for x in phi.source.patch(lam).sample(sample_count, seed, where=inside):
            y = phi.base_map(x)
            want = phi.target.theta(a, b, y) @ phi.matrix((lam, a), x) @ phi.source.theta(mu, lam, x)
            worst = max(worst, max_abs(phi.matrix((mu, b), x) - want))
            total += 1
    notes = [] if pairs else ["single refined patch: nothing to compare"]
    return ValidationReport("compatibility", worst < tol, worst, total, tol, {"overlap": worst}, notes)


def morph_to_identity(phi: BundleMorphism, check_samples: int = 32, seed: int = 0, tol: float = TOL_ALG,
                      pullback: PullbackBundle | None = None) -> MorphismOverIdentity:
    """The morphism over the identity into the pullback with the same local matrices.

    ``check_samples = 0`` skips the compatibility check.
    """
    if check_samples:
        report = check_overlap_compatibility(phi, check_samples, seed, tol)
        if not report.passed:
            raise IncompatibleLocals(f"local matrices disagree on overlaps (residual {report.max_residual:.3g})")
    pb = pullback if pullback is not None else pullback_bundle(phi.target, phi.base_map)
    return MorphismOverIdentity(phi.source, pb, identity_map(phi.source.base), phi.locals)


def identity_to_morph(psi: MorphismOverIdentity) -> BundleMorphism:
    """Compose with the canonical morphism of the pullback; the local matrices are unchanged."""
    pb = psi.pullback
    return BundleMorphism(psi.source, pb.source_bundle, pb.map, psi.locals)


def _same_fibre(a: BundleMorphism, b: BundleMorphism):
    if a.source is not b.source and a.source.name != b.source.name:
        raise BaseMismatch(f"sources {a.source.name} and {b.source.name} differ")
    if a.target is not b.target and a.target.name != b.target.name:
        raise BaseMismatch(f"targets {a.target.name} and {b.target.name} differ")
    if not maps_agree(a.base_map, b.base_map):
        raise BaseMapMismatch(f"base maps {a.base_map.name} and {b.base_map.name} differ")


def _rebuild(template: BundleMorphism, locals_: dict) -> BundleMorphism:
    cls = type(template)
    return cls(template.source, template.target, template.base_map, locals_)


def linear_combination(coeffs: Sequence[float], morphs: Sequence[BundleMorphism]) -> BundleMorphism:
    """sum_i coeffs[i] * morphs[i] over the union of their keys."""
    if not morphs or len(coeffs) != len(morphs):
        raise ValueError("need matching nonempty coefficient and morphism lists")
    for m in morphs[1:]:
        _same_fibre(morphs[0], m)
    keys = sorted(set().union(*(m.locals for m in morphs)))

    def entry(key):
        def fn(x):
            total = 0.0
            for c, m in zip(coeffs, morphs):
                total = total + float(c) * m.local_matrix(key[0], key[1], x)
            return total
        return fn

    return _rebuild(morphs[0], {k: entry(k) for k in keys})


def morphism_add(a: BundleMorphism, b: BundleMorphism) -> BundleMorphism:
    return linear_combination([1.0, 1.0], [a, b])


def morphism_scale(c: float, a: BundleMorphism) -> BundleMorphism:
    return linear_combination([c], [a])


def morphism_distance(a: BundleMorphism, b: BundleMorphism, sample_count: int = DEFAULT_SAMPLES,
                      seed: int = 0) -> float:
    """Sup over sampled x and covering keys of the local matrix difference."""
    keys = sorted(set(a.locals) | set(b.locals))
    worst = 0.0
    for x in a.source.base.sample(sample_count, seed):
        y = a.base_map(x)
        for lam, al in keys:
            if a.source.patch(lam).contains(x) and a.target.patch(al).contains(y):
                worst = max(worst, max_abs(a.local_matrix(lam, al, x, y) - b.local_matrix(lam, al, x, y)))
    return worst


# ---------------------------------------------------------------------------
# catalog

def _constant(m: Array) -> MatrixFn:
    m = np.array(m, float)
    return lambda x: m


def zero_morphism(E: VectorBundle, F: VectorBundle, phi: SmoothMapRep) -> BundleMorphism:
    z = np.zeros((F.rank, E.rank))
    return BundleMorphism(E, F, phi, {(lam, a): _constant(z) for lam in E.patch_ids for a in F.patch_ids})


def differential(phi: SmoothMapRep, source: VectorBundle | None = None,
                 target: VectorBundle | None = None) -> BundleMorphism:
    """The tangent map; patches are the charts, so each local matrix is a chart Jacobian."""
    E = source or tangent_bundle(phi.source)
    F = target or tangent_bundle(phi.target)
    locals_ = {(lam, a): (lambda x, lam=lam, a=a: phi.local_differential(x, lam, a))
               for lam in E.patch_ids for a in F.patch_ids}
    return BundleMorphism(E, F, phi, locals_)


def bundle_identity(E: VectorBundle) -> BundleMorphism:
    eye = np.eye(E.rank)
    return BundleMorphism(E, E, identity_map(E.base), {(lam, lam): _constant(eye) for lam in E.patch_ids})


def identity_section(pb: PullbackBundle) -> MorphismOverIdentity:
    eye = np.eye(pb.rank)
    return MorphismOverIdentity(pb, pb, identity_map(pb.base), {(a, a): _constant(eye) for a in pb.patch_ids})


def shriek_morphism(pb: PullbackBundle) -> BundleMorphism:
    """The canonical morphism pullback -> source bundle as a local matrix family (identities)."""
    eye = np.eye(pb.rank)
    return BundleMorphism(pb, pb.source_bundle, pb.map, {(a, a): _constant(eye) for a in pb.patch_ids})


def ambient_frame_morphism(E: VectorBundle, F: VectorBundle, phi: SmoothMapRep,
                           frame: Callable[[Array], Array]) -> BundleMorphism:
    """Morphism from a single-patch bundle E into a tangent bundle F.

    ``frame(x)`` is a (k x rank E) matrix of ambient vectors at phi(x); its
    columns are projected onto the tangent space in each chart of F.
    """
    if len(E.patch_ids) != 1:
        raise ValueError("ambient_frame_morphism needs a single-patch source bundle")
    lam = E.patch_ids[0]
    N = F.base

    def make(a):
        chart = N.chart(a)

        def fn(x):
            y = phi(x)
            basis = chart.d_embedded(chart.to_local(y))
            return np.linalg.lstsq(basis, np.asarray(frame(x), float), rcond=None)[0]
        return fn

    return BundleMorphism(E, F, phi, {(lam, a): make(a) for a in F.patch_ids})


def scale_by_function(phi: BundleMorphism, g: Callable[[Array], float]) -> BundleMorphism:
    """x -> g(x) * Phi_x for a smooth scalar function g on the source base."""
    locals_ = {k: (lambda x, fn=fn: float(g(x)) * np.asarray(fn(x), float)) for k, fn in phi.locals.items()}
    return _rebuild(phi, locals_)


def matrix_morphism(E: VectorBundle, F: VectorBundle, phi: SmoothMapRep, entries: Mapping) -> BundleMorphism:
    """Morphism from explicit local matrices; values may be callables or expression-language matrices."""
    def compile_entry(spec):
        if callable(spec) and not isinstance(spec, Expression):
            return spec
        expr = spec if isinstance(spec, Expression) else parse(str(spec))

        def fn(x):
            return np.asarray(eval_expr(expr, point_bindings("x", x)), float)
        return fn

    return BundleMorphism(E, F, phi, {tuple(k): compile_entry(v) for k, v in entries.items()})


def random_smooth_function(embed_dim: int, rng: np.random.Generator, terms: int = 3) -> Callable[[Array], float]:
    """c0 + sum_j a_j sin(k_j . x + b_j) with random coefficients."""
    c0 = rng.uniform(-1, 1)
    a = rng.uniform(-1, 1, terms)
    k = rng.normal(size=(terms, embed_dim))
    b = rng.uniform(0, 2 * np.pi, terms)
    return lambda x: float(c0 + a @ np.sin(k @ np.asarray(x, float) + b))


def random_morphism(basis: Sequence[BundleMorphism], rng: np.random.Generator, terms: int = 3) -> BundleMorphism:
    """sum_i g_i * basis[i] with random smooth coefficient functions g_i."""
    dim = basis[0].source.base.embed_dim
    scaled = [scale_by_function(m, random_smooth_function(dim, rng, terms)) for m in basis]
    return linear_combination([1.0] * len(scaled), scaled)


def invertibility_report(phi: BundleMorphism, sample_count: int = DEFAULT_SAMPLES, seed: int = 0,
                         guard: float = 1e8) -> ValidationReport:
    """Whether the local matrices are square and invertible at samples (separate from being a morphism)."""
    if phi.source.rank != phi.target.rank:
        return ValidationReport("invertibility", False, float("inf"), 0, guard, {}, ["ranks differ"])
    worst = 1.0
    total = 0
    for x in phi.source.base.sample(sample_count, seed):
        for key in phi.keys_at(x):
            c = float(np.linalg.cond(phi.matrix(key, x)))
            worst = max(worst, c if np.isfinite(c) else float("inf"))
            total += 1
    return ValidationReport("invertibility", worst < guard, worst, total, guard, {"condition": worst}, [])


__all__ = [
    "BundleMorphism", "MorphismOverIdentity", "evaluate", "check_overlap_compatibility", "morph_to_identity",
    "identity_to_morph", "linear_combination", "morphism_add", "morphism_scale", "morphism_distance",
    "zero_morphism", "differential", "bundle_identity", "identity_section", "shriek_morphism",
    "ambient_frame_morphism", "scale_by_function", "matrix_morphism", "random_smooth_function", "random_morphism", "invertibility_report",
]
