"""Pullback bundles, the canonical morphism onto the pulled-back bundle, and refined covers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import BundleElement, CoverPatch, TransitionCocycle, VectorBundle, trivialize
from .common import TOL_ALG
from .errors import BaseMismatch, BasePointMismatch, NotInPatch
from .geometry import same_manifold
from .maps import SmoothMapRep

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class PullbackBundle(VectorBundle):
    """The bundle over ``map.source`` whose fibre at x is the fibre of ``source_bundle`` at map(x).

    Patch ``a`` is the preimage of patch ``a`` of the source bundle and the
    transition functions are ``theta[a, b] o map``.
    """

    source_bundle: VectorBundle = None
    map: SmoothMapRep = None


def _composed(fn, phi):
    return lambda x: fn(phi(x))


def _preimage(patch: CoverPatch, phi: SmoothMapRep) -> CoverPatch:
    return CoverPatch(patch.id, phi.source, lambda x: patch.contains(phi(x)))


def pullback_bundle(F: VectorBundle, phi: SmoothMapRep) -> PullbackBundle:
    if not same_manifold(phi.target, F.base):
        raise BaseMismatch(f"map {phi.name} targets {phi.target.name}, bundle {F.name} lives over {F.base.name}")
    patches = tuple(_preimage(p, phi) for p in F.patches)
    fns = {k: _composed(fn, phi) for k, fn in F.cocycle.theta_fns.items()}
    cocycle = TransitionCocycle(patches, fns, F.rank, overlaps_nonempty=False)
    return PullbackBundle(f"{phi.name}^*{F.name}", phi.source, F.rank, cocycle, source_bundle=F, map=phi)


def phi_shriek(pb: PullbackBundle, elem: BundleElement) -> BundleElement:
    """The canonical morphism (x, v) -> (map(x), v); fibre coordinates are kept verbatim."""
    if not pb.patch(elem.patch_id).contains(elem.base_point):
        raise NotInPatch(f"base point not in patch {elem.patch_id} of {pb.name}")
    return BundleElement(elem.patch_id, pb.map(elem.base_point), np.array(elem.fiber, float))


def phi_shriek_fibre_inverse(pb: PullbackBundle, x, w: BundleElement, tol: float = TOL_ALG) -> BundleElement:
    """The unique element over ``x`` that the canonical morphism sends to ``w``."""
    x = np.asarray(x, float)
    y = pb.map(x)
    gap = float(np.max(np.abs(y - np.asarray(w.base_point, float))))
    if gap >= tol:
        raise BasePointMismatch(f"element lies over a point at distance {gap:.3g} from map(x)")
    if not pb.patch(w.patch_id).contains(x):
        raise NotInPatch(f"x not in patch {w.patch_id} of {pb.name}")
    return BundleElement(w.patch_id, x, np.array(w.fiber, float))


@dataclass(frozen=True, eq=False)
class RefinedPatch:
    """The set of x in source patch ``lam`` whose image lies in target patch ``alpha``."""

    lam: int
    alpha: int
    source: VectorBundle
    pullback: PullbackBundle

    @property
    def id(self) -> tuple:
        return (self.lam, self.alpha)

    def contains(self, x) -> bool:
        return self.source.patch(self.lam).contains(x) and self.pullback.patch(self.alpha).contains(x)

    def sample(self, n: int, seed: int = 0, where=None) -> list:
        tgt = self.pullback.patch(self.alpha)

        def pred(x):
            return tgt.contains(x) and (where is None or where(x))
        return self.source.patch(self.lam).sample(n, seed, where=pred)


def refined_cover(E: VectorBundle, pb: PullbackBundle) -> list:
    """All pairs (lam, alpha); emptiness is left to sampling."""
    if not same_manifold(E.base, pb.base):
        raise BaseMismatch(f"{E.name} and {pb.name} live over different manifolds")
    return [RefinedPatch(lam, a, E, pb) for lam in E.patch_ids for a in pb.patch_ids]


def pullback_trivialization(pb: PullbackBundle, key, elem: BundleElement,
                            source: VectorBundle | None = None) -> tuple:
    """(x, fibre coordinates of the image in target patch alpha); ``key`` is alpha or (lam, alpha)."""
    if isinstance(key, tuple):
        lam, alpha = key
        if source is not None and not source.patch(lam).contains(elem.base_point):
            raise NotInPatch(f"base point not in source patch {lam}")
    else:
        alpha = key
    return trivialize(pb, alpha, elem)


__all__ = [
    "PullbackBundle", "pullback_bundle", "phi_shriek", "phi_shriek_fibre_inverse", "RefinedPatch",
    "refined_cover", "pullback_trivialization",
]
