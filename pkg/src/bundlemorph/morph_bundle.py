"""The space of bundle morphisms fibred over the space of base maps: local trivializations, transitions, rigidity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bundle import BundleElement, VectorBundle, change_chart
from .common import DEFAULT_SAMPLES, TOL_ALG, TOL_ODE, max_abs
from .errors import NoEscapeScale
from .mapping_space import CHECK_SAMPLES, SupportRegion, TangentSection, chart_change, chart_forward, chart_inverse
from .maps import SmoothMapRep, identity_map
from .morphism import (BundleMorphism, MorphismOverIdentity, linear_combination, morph_to_identity)
from .pullback import pullback_bundle
from .transport import Connection, HomotopyIsomorphism

Array = np.ndarray
MAX_ESCAPE_EXPONENT = 20


@dataclass(frozen=True, eq=False)
class MorphElement:
    """A point of the morphism space: a base map together with a morphism covering it."""

    base: SmoothMapRep
    fibre: BundleMorphism

    def __post_init__(self):
        if self.fibre.base_map is not self.base:
            raise ValueError("fibre morphism must cover the base map")


@dataclass(frozen=True, eq=False)
class TrivializedPair:
    """Coordinates of a morphism-space point in the trivialization centred at ``center``.

    ``coords`` is the chart section of ``base`` centred at ``center``;
    ``fibre_coords`` is a morphism over the identity into the pullback by
    ``center``.  ``transport`` is the homotopy isomorphism used to build the
    coordinates and is reused by inverse and transition computations.
    """

    center: SmoothMapRep
    base: SmoothMapRep
    coords: TangentSection
    fibre_coords: MorphismOverIdentity
    transport: HomotopyIsomorphism
    support: SupportRegion


def project(elem: MorphElement) -> SmoothMapRep:
    return elem.base


def _fibre_from_transport(iso: HomotopyIsomorphism, source: VectorBundle, locals_fn) -> dict:
    F = iso.conn.bundle
    return {(lam, a): (lambda x, lam=lam, a=a: locals_fn(lam, a, np.asarray(x, float)))
            for lam in source.patch_ids for a in F.patch_ids}


def trivialize_T(phi: SmoothMapRep, conn: Connection, elem: MorphElement, K: SupportRegion,
                 check_samples: int = CHECK_SAMPLES, seed: int = 0) -> TrivializedPair:
    """Chart coordinates of the base map, and the fibre morphism pulled back to phi by inverse transport.

    Fibre coordinates: C[lam, alpha](x) = H(x; alpha -> beta)^-1 A[lam, beta](x),
    where A are the local matrices of the morphism over the identity of the
    element and beta is the patch the transport ends in.
    """
    psi = elem.base
    section = chart_forward(phi, psi, K, check_samples, seed)
    F = conn.bundle
    iso = HomotopyIsomorphism(conn, section, target=pullback_bundle(F, psi))
    over_id = morph_to_identity(elem.fibre, check_samples=0, pullback=iso.target)

    def local(lam, a, x):
        end = iso.result(x).end_patch
        return np.linalg.solve(iso.matrix(x, a, end), over_id.local_matrix(lam, end, x))

    fibre = MorphismOverIdentity(elem.fibre.source, iso.source, identity_map(psi.source),
                                 _fibre_from_transport(iso, elem.fibre.source, local))
    return TrivializedPair(phi, psi, section, fibre, iso, K)


def detrivialize_T(phi: SmoothMapRep, conn: Connection, pair: TrivializedPair) -> MorphElement:
    """Inverse of :func:`trivialize_T`: A[lam, beta](x) = H(x; alpha0 -> beta) C[lam, alpha0](x)."""
    if pair.center is not phi and pair.center.name != phi.name:
        raise ValueError(f"pair is centred at {pair.center.name}, not {phi.name}")
    iso = pair.transport
    C = pair.fibre_coords

    def local(lam, b, x):
        start = iso.result(x).start_patch
        return iso.matrix(x, start, b) @ C.local_matrix(lam, start, x)

    E = C.source
    morph = BundleMorphism(E, conn.bundle, pair.base, _fibre_from_transport(iso, E, local))
    return MorphElement(pair.base, morph)


def pair_from_coords(phi: SmoothMapRep, conn: Connection, section: TangentSection,
                     fibre_coords: MorphismOverIdentity, K: SupportRegion | None = None) -> TrivializedPair:
    """A pair given directly by chart coordinates; the base map is the chart inverse of ``section``."""
    psi = chart_inverse(section)
    iso = HomotopyIsomorphism(conn, section, target=pullback_bundle(conn.bundle, psi))
    return TrivializedPair(phi, psi, section, fibre_coords, iso, K or section.support)


def transition_T(phi: SmoothMapRep, psi: SmoothMapRep, conn: Connection, pair: TrivializedPair,
                 check_samples: int = CHECK_SAMPLES, seed: int = 0) -> TrivializedPair:
    """Re-express a pair centred at psi in the trivialization centred at phi.

    Base coordinates change by the exponential chart change; fibre
    coordinates by C -> H(phi, chi)^-1 H(psi, chi) C with chi the base map.
    """
    if pair.center is not psi and pair.center.name != psi.name:
        raise ValueError(f"pair is centred at {pair.center.name}, not {psi.name}")
    coords = chart_change(phi, psi, pair.coords, pair.support, check_samples, seed)
    old = pair.transport
    new = HomotopyIsomorphism(conn, coords, target=old.target)
    C = pair.fibre_coords

    def local(lam, a, x):
        end = new.result(x).end_patch
        start = old.result(x).start_patch
        moved = old.matrix(x, start, end) @ C.local_matrix(lam, start, x)
        return np.linalg.solve(new.matrix(x, a, end), moved)

    fibre = MorphismOverIdentity(C.source, new.source, C.base_map, _fibre_from_transport(new, C.source, local))
    return TrivializedPair(phi, pair.base, coords, fibre, new, pair.support)


def pair_combination(coeffs: Sequence[float], pairs: Sequence[TrivializedPair]) -> TrivializedPair:
    """Linear combination of pairs over the same base coordinates (the fibre vector-space structure)."""
    head = pairs[0]
    for p in pairs[1:]:
        if p.coords is not head.coords:
            raise ValueError("pairs must share base coordinates")
    fibre = linear_combination(coeffs, [p.fibre_coords for p in pairs])
    return TrivializedPair(head.center, head.base, head.coords, fibre, head.transport, head.support)


def element_combination(coeffs: Sequence[float], elems: Sequence[MorphElement]) -> MorphElement:
    """Linear combination inside one fibre of the projection to base maps."""
    return MorphElement(elems[0].base, linear_combination(coeffs, [e.fibre for e in elems]))


def pair_distance(a: TrivializedPair, b: TrivializedPair, sample_count: int = DEFAULT_SAMPLES,
                  seed: int = 0) -> dict:
    """Sup residuals between two pairs: base coordinates (ambient) and fibre local matrices."""
    M = a.base.source
    base_res = fibre_res = 0.0
    A, B = a.fibre_coords, b.fibre_coords
    keys = sorted(set(A.locals) | set(B.locals))
    for x in M.sample(sample_count, seed):
        base_res = max(base_res, max_abs(a.coords.ambient(x) - b.coords.ambient(x)))
        for lam, al in keys:
            if A.source.patch(lam).contains(x) and A.target.patch(al).contains(x):
                fibre_res = max(fibre_res, max_abs(A.local_matrix(lam, al, x) - B.local_matrix(lam, al, x)))
    return {"base": base_res, "fibre": fibre_res}


# ---------------------------------------------------------------------------
# rigidity

@dataclass(frozen=True, eq=False)
class VerticalRegion:
    """A vertically compact region of a total space: base region x fibre ball of radius R.

    The fibre norm is the Euclidean norm in canonical-patch coordinates.  A
    ``base`` of None means the whole base; ``radius = inf`` gives a region
    that is not vertically bounded.
    """

    bundle: VectorBundle
    base: Optional[SupportRegion]
    radius: float

    def canonical_fiber(self, elem: BundleElement) -> Array:
        return change_chart(self.bundle, elem, self.bundle.canonical_patch(elem.base_point)).fiber

    def contains(self, elem: BundleElement) -> bool:
        if self.base is not None and not self.base.contains(elem.base_point):
            return False
        return float(np.linalg.norm(self.canonical_fiber(elem))) <= self.radius


def escape_scale(K: VerticalRegion, elem: BundleElement) -> int:
    """Least integer n >= 1 with n * elem outside K."""
    def out(n):
        return not K.contains(BundleElement(elem.patch_id, elem.base_point, n * elem.fiber))

    if out(1):
        return 1
    hi = 2
    while not out(hi):
        hi *= 2
        if hi > 2 ** MAX_ESCAPE_EXPONENT:
            raise NoEscapeScale(f"no n <= 2^{MAX_ESCAPE_EXPONENT} takes the element out of the region")
    lo = hi // 2  # inside
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if out(mid):
            hi = mid
        else:
            lo = mid
    return hi


FibreMap = Callable[[BundleElement], BundleElement]


@dataclass
class RigidityVerdict:
    forced_equality: bool
    equal: bool
    violated_hypothesis: Optional[str]
    residuals: dict
    sample_count: int
    max_escape_scale: int
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violated_hypothesis is None and self.equal


def _difference(E: VectorBundle, F: VectorBundle, base_map: SmoothMapRep, phi: FibreMap, psi: FibreMap,
                elem: BundleElement) -> Array:
    a, b = phi(elem), psi(elem)
    c = F.canonical_patch(base_map(elem.base_point))
    return change_chart(F, b, c).fiber - change_chart(F, a, c).fiber


def _sample_elements(K: VerticalRegion, sample_count: int, seed: int, inside: bool) -> list:
    """Canonical-patch elements; ``inside`` selects base points in K's base region and fibres in the ball."""
    E = K.bundle
    rng = np.random.default_rng(seed)
    if inside and K.base is not None:
        pts = E.base.sample(sample_count, seed, where=K.base.contains)
    else:
        pts = E.base.sample(sample_count, seed)
    out = []
    R = K.radius if math.isfinite(K.radius) else 1.0
    for x in pts:
        d = rng.normal(size=E.rank)
        d /= np.linalg.norm(d)
        if inside:
            r = R * rng.uniform(0.05, 0.95)
        else:
            r = R * rng.uniform(1.05, 3.0)
        out.append(BundleElement(E.canonical_patch(x), x, r * d))
    return out


def rigidity_check(phi: BundleMorphism, psi: FibreMap, K: VerticalRegion, sample_count: int = DEFAULT_SAMPLES,
                   seed: int = 0, tol: float = TOL_ALG) -> RigidityVerdict:
    """Run the scaling argument for a fibre map psi agreeing with the morphism phi off K.

    Residuals: ``off_k`` (agreement outside K), ``linearity`` (of psi, with
    coefficients in [-10, 10]), ``scaling`` (|psi - phi|(n u) / n at the
    escape scale n), ``ray`` (|(psi - phi)(u) - (psi - phi)(n u) / n|) and
    ``inside`` (|psi - phi| directly inside K).
    """
    E, F = phi.source, phi.target
    rng = np.random.default_rng(seed + 1)

    def diff(el):
        return _difference(E, F, phi.base_map, phi, psi, el)

    unbounded = not math.isfinite(K.radius)
    off = 0.0
    outside = [] if unbounded else _sample_elements(K, sample_count, seed, inside=False)
    if K.base is not None:
        outside += [el for el in _sample_elements(K, sample_count, seed + 2, inside=False)
                    if not K.base.contains(el.base_point)]
    for el in outside:
        off = max(off, max_abs(diff(el)))

    lin = 0.0
    for el in _sample_elements(K, sample_count, seed + 3, inside=True):
        u1 = el.fiber
        u2 = rng.normal(size=E.rank) * (K.radius if not unbounded else 1.0) / (2 * math.sqrt(E.rank))
        a, b = rng.uniform(-10, 10, 2)
        x, p = el.base_point, el.patch_id
        lhs = psi(BundleElement(p, x, a * u1 + b * u2))
        v1, v2 = psi(BundleElement(p, x, u1)), psi(BundleElement(p, x, u2))
        c = F.canonical_patch(phi.base_map(x))
        combo = a * change_chart(F, v1, c).fiber + b * change_chart(F, v2, c).fiber
        lin = max(lin, max_abs(change_chart(F, lhs, c).fiber - combo))

    scaling = ray = inside = 0.0
    max_n = 1
    inner = _sample_elements(K, sample_count, seed + 4, inside=True)
    for el in inner:
        n = escape_scale(K, el)
        max_n = max(max_n, n)
        d_u = diff(el)
        d_nu = diff(BundleElement(el.patch_id, el.base_point, n * el.fiber))
        scaling = max(scaling, max_abs(d_nu) / n)
        ray = max(ray, max_abs(d_u - d_nu / n))
        inside = max(inside, max_abs(d_u))

    residuals = {"off_k": off, "linearity": lin, "scaling": scaling, "ray": ray, "inside": inside}
    violated = None
    if lin >= tol:
        violated = "fibrewise linearity"
    elif off >= tol:
        violated = "agreement off the region"
    forced = violated is None and scaling < tol and ray < tol
    notes = []
    if forced:
        notes.append("fibrewise linearity and agreement off a vertically compact set force equality")
    return RigidityVerdict(forced, inside < tol, violated, residuals,
                           len(outside) + 2 * len(inner), max_n, notes)


@dataclass
class ConstructionReport:
    magnitude: float
    candidate_norm: float
    projected_norm: float
    conclusion: str
    verdict: Optional[RigidityVerdict]
    no_escape: bool = False
    naive_off_k: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def forced_equality(self) -> bool:
        return self.verdict is not None and self.verdict.forced_equality and self.verdict.equal


@dataclass(frozen=True, eq=False)
class PerturbedMorphism:
    """phi + D as a fibre map, with D(x) given in canonical frames."""

    phi: BundleMorphism
    delta: Callable[[Array], Array]

    def __call__(self, elem: BundleElement) -> BundleElement:
        E, F = self.phi.source, self.phi.target
        x = elem.base_point
        img = self.phi(elem)
        c = F.canonical_patch(self.phi.base_map(x))
        u = change_chart(E, elem, E.canonical_patch(x)).fiber
        return BundleElement(c, img.base_point, change_chart(F, img, c).fiber + self.delta(x) @ u)


def attempt_compact_perturbation(phi: BundleMorphism, K: VerticalRegion, magnitude: float,
                                 sample_count: int = DEFAULT_SAMPLES, seed: int = 0,
                                 tol: float = TOL_ALG) -> ConstructionReport:
    """Try to build a fibrewise-linear psi != phi agreeing with phi off K.

    The candidate perturbation D(x) = magnitude * ones is forced to vanish on
    every escape vector n u (those lie off K, where psi must equal phi); the
    escape vectors of the coordinate directions span the fibre, so the
    projected perturbation is zero and the rigidity check reports equality.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be >= 0")
    E, F = phi.source, phi.target
    candidate = magnitude * np.ones((F.rank, E.rank))
    if magnitude == 0:
        verdict = rigidity_check(phi, phi, K, sample_count, seed, tol)
        return ConstructionReport(0.0, 0.0, 0.0, "magnitude 0: psi = phi trivially", verdict)

    def constrained(x):
        c = E.canonical_patch(x)
        cols = [escape_scale(K, BundleElement(c, x, e)) * e for e in np.eye(E.rank)]
        U = np.column_stack(cols)
        return candidate - candidate @ U @ np.linalg.pinv(U)

    try:
        projected = max((max_abs(constrained(x)) for x in E.base.sample(sample_count, seed)), default=0.0)
    except NoEscapeScale as exc:
        return ConstructionReport(float(magnitude), max_abs(candidate), float("nan"),
                                  "no escape scale: the region is not vertically bounded", None, True,
                                  notes=[str(exc)])
    naive = rigidity_check(phi, PerturbedMorphism(phi, lambda x: candidate), K, sample_count, seed, tol)
    psi = PerturbedMorphism(phi, constrained)
    verdict = rigidity_check(phi, psi, K, sample_count, seed, tol)
    conclusion = "forced equality" if verdict.forced_equality and verdict.equal else "construction inconclusive"
    notes = [f"unconstrained candidate disagrees off the region by {naive.residuals['off_k']:.6g}"]
    return ConstructionReport(float(magnitude), max_abs(candidate), projected, conclusion, verdict,
                              naive_off_k=naive.residuals["off_k"], notes=notes)


@dataclass(frozen=True, eq=False)
class NonlinearPerturbation:
    """phi plus a compactly supported perturbation that is not linear on fibres.

    D(x, u) = magnitude * bump(|x - center|) * rho(|u|) * u with rho a radial
    bump supported in the open fibre ball of radius ``fibre_radius``.
    """

    phi: BundleMorphism
    center: Array
    base_radius: float
    fibre_radius: float
    magnitude: float = 1.0

    def __call__(self, elem: BundleElement) -> BundleElement:
        from .exprlang import bump

        E, F = self.phi.source, self.phi.target
        x = elem.base_point
        img = self.phi(elem)
        c = F.canonical_patch(self.phi.base_map(x))
        u = change_chart(E, elem, E.canonical_patch(x)).fiber
        w = (self.magnitude * bump(float(np.linalg.norm(x - self.center)), -self.base_radius, self.base_radius)
             * bump(float(np.linalg.norm(u)), -self.fibre_radius, self.fibre_radius))
        out = change_chart(F, img, c).fiber.copy()
        k = min(F.rank, E.rank)
        out[:k] += w * u[:k]
        return BundleElement(c, img.base_point, out)


__all__ = [
    "MorphElement", "TrivializedPair", "project", "trivialize_T", "detrivialize_T", "pair_from_coords",
    "transition_T", "pair_combination", "element_combination", "pair_distance", "VerticalRegion",
    "escape_scale", "RigidityVerdict", "rigidity_check", "ConstructionReport", "PerturbedMorphism",
    "attempt_compact_perturbation", "NonlinearPerturbation",
]
