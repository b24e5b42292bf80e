"""Vector bundles given by finite covers and transition cocycles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .common import CONDITION_GUARD, DEFAULT_SAMPLES, TOL_ALG, ValidationReport, guarded_inv, max_abs
from .errors import EmptyOverlapSampling, NotInOverlap, NotInPatch
from .geometry import ManifoldModel, circle as _circle

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class CoverPatch:
    """An open set of the base given by a membership predicate.

    ``parameter_box`` optionally restricts sampling to a sub-box of the base
    manifold's unit-cube parametrisation.
    """

    id: int
    base: ManifoldModel
    membership: Callable[[Array], bool]
    parameter_box: Optional[tuple] = None

    def contains(self, y) -> bool:
        return bool(self.membership(np.asarray(y, float)))

    def sample(self, n: int, seed: int = 0, where=None) -> list:
        if where is None:
            pred = self.contains
        else:
            def pred(y):
                return self.contains(y) and where(y)
        return self.base.sample(n, seed, where=pred, box=self.parameter_box)


@dataclass(frozen=True, eq=False)
class TransitionCocycle:
    """Transition functions ``theta[(a, b)](y)`` mapping patch-a fibre coordinates to patch-b.

    Undeclared diagonal entries are the identity and an undeclared
    ``(b, a)`` is the inverse of a declared ``(a, b)``.  Every declared
    off-diagonal pair is taken to have a nonempty overlap unless
    ``overlaps_nonempty`` is false (pullback covers, whose preimage overlaps
    may legitimately be empty).
    """

    patches: tuple
    theta_fns: Mapping
    rank: int
    overlaps_nonempty: bool = True

    def __post_init__(self):
        ids = [p.id for p in self.patches]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate patch ids {ids}")

    @property
    def declared_overlaps(self) -> list:
        return sorted(k for k in self.theta_fns if k[0] != k[1])

    def theta(self, a: int, b: int, y) -> Array:
        fn = self.theta_fns.get((a, b))
        if fn is not None:
            return np.asarray(fn(np.asarray(y, float)), float).reshape(self.rank, self.rank)
        if a == b:
            return np.eye(self.rank)
        inv = self.theta_fns.get((b, a))
        if inv is not None:
            m = np.asarray(inv(np.asarray(y, float)), float).reshape(self.rank, self.rank)
            return guarded_inv(m, f"theta[{b},{a}]")
        raise NotInOverlap(f"no transition function declared between patches {a} and {b}")


@dataclass(frozen=True, eq=False)
class VectorBundle:
    name: str
    base: ManifoldModel
    rank: int
    cocycle: TransitionCocycle

    def __post_init__(self):
        if self.cocycle.rank != self.rank:
            raise ValueError("cocycle rank differs from bundle rank")

    @property
    def patches(self) -> tuple:
        return self.cocycle.patches

    @property
    def patch_ids(self) -> list:
        return [p.id for p in self.cocycle.patches]

    def patch(self, pid: int) -> CoverPatch:
        for p in self.cocycle.patches:
            if p.id == pid:
                return p
        raise NotInPatch(f"{self.name} has no patch {pid}")

    def patches_at(self, y) -> list:
        return [p.id for p in self.cocycle.patches if p.contains(y)]

    def canonical_patch(self, y) -> int:
        """Lowest patch index whose membership holds at ``y``."""
        ids = self.patches_at(y)
        if not ids:
            raise NotInPatch(f"point {np.asarray(y).tolist()} lies in no patch of {self.name}")
        return min(ids)

    def theta(self, a: int, b: int, y) -> Array:
        return self.cocycle.theta(a, b, y)


@dataclass(frozen=True, eq=False)
class BundleElement:
    """A point of the total space presented through the trivialisation of one patch."""

    patch_id: int
    base_point: Array
    fiber: Array


def element(bundle: VectorBundle, y, fiber, patch_id: int | None = None) -> BundleElement:
    y = np.asarray(y, float)
    pid = bundle.canonical_patch(y) if patch_id is None else patch_id
    if not bundle.patch(pid).contains(y):
        raise NotInPatch(f"base point not in patch {pid} of {bundle.name}")
    fiber = np.atleast_1d(np.asarray(fiber, float))
    if fiber.shape != (bundle.rank,):
        raise ValueError(f"fiber must have length {bundle.rank}")
    return BundleElement(pid, y, fiber)


def change_chart(bundle: VectorBundle, elem: BundleElement, target_patch: int) -> BundleElement:
    """Re-express ``elem`` in ``target_patch`` via theta[source, target]."""
    y = elem.base_point
    if not (bundle.patch(elem.patch_id).contains(y) and bundle.patch(target_patch).contains(y)):
        raise NotInOverlap(f"base point not in both patches {elem.patch_id} and {target_patch}")
    if target_patch == elem.patch_id:
        return elem
    return BundleElement(target_patch, y, bundle.theta(elem.patch_id, target_patch, y) @ elem.fiber)


def trivialize(bundle: VectorBundle, patch: int, elem: BundleElement) -> tuple:
    """The pair (base point, fibre coordinates in ``patch``)."""
    if not bundle.patch(patch).contains(elem.base_point):
        raise NotInPatch(f"base point not in patch {patch} of {bundle.name}")
    moved = change_chart(bundle, elem, patch)
    return moved.base_point, moved.fiber


def canonical(bundle: VectorBundle, elem: BundleElement) -> BundleElement:
    return change_chart(bundle, elem, bundle.canonical_patch(elem.base_point))


def _membership_pool(bundle: VectorBundle, n: int, seed: int) -> tuple:
    """Base sample points with a membership flag per patch, grown until every triple overlap has ``n`` points.

    Halton prefixes are stable, so the first ``n`` flagged points of an
    overlap are the points a filtered sample of that overlap would return.
    A triple overlap with no point among the first ``16 n`` draws is treated
    as empty; the pool never exceeds the sampler's draw budget.
    """
    ids = bundle.patch_ids
    size = max(2 * n, 64)
    cap = 64 * n + 4096
    pts: list = []
    flags = np.zeros((len(ids), 0), bool)
    while True:
        new = bundle.base.sample(size, seed)[len(pts):]
        flags = np.hstack([flags, np.array([[bundle.patch(a).contains(y) for y in new] for a in ids],
                                           bool).reshape(len(ids), len(new))])
        pts += new
        counts = [int(np.count_nonzero(flags[i] & flags[j] & flags[k]))
                  for i in range(len(ids)) for j in range(len(ids)) for k in range(len(ids))]
        done = all(c >= n or (c == 0 and len(pts) >= 16 * n) for c in counts)
        if done or not new or size >= cap:
            return pts, {a: flags[i] for i, a in enumerate(ids)}
        size = min(2 * size, cap)


def validate_cocycle(bundle: VectorBundle, sample_count: int = DEFAULT_SAMPLES, seed: int = 0,
                     tol: float = TOL_ALG) -> ValidationReport:
    """Sampled check of the identity and composition laws of the transition functions.

    CC2 is theta[a, a] = I on every patch; CC1 is
    theta[b, c] theta[a, b] = theta[a, c] on every sampled triple overlap
    (repeated indices included, which covers inverse consistency).
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    ids = bundle.patch_ids
    eye = np.eye(bundle.rank)
    cc1 = cc2 = 0.0
    worst_cond = 1.0
    total = 0
    notes = []

    def cond_of(m):
        c = np.linalg.cond(m)
        return float(c) if np.isfinite(c) else math.inf

    for a in ids:
        for y in bundle.patch(a).sample(sample_count, seed):
            cc2 = max(cc2, max_abs(bundle.theta(a, a, y) - eye))
            total += 1
    for a, b in (bundle.cocycle.declared_overlaps if bundle.cocycle.overlaps_nonempty else []):
        pb = bundle.patch(b)
        if not bundle.patch(a).sample(1, seed, where=pb.contains):
            raise EmptyOverlapSampling(f"overlap of patches {a} and {b} of {bundle.name} yielded no sample")
    thetas: dict = {}

    def theta_at(a, b, y):
        key = (a, b, y.tobytes())
        if key not in thetas:
            m = bundle.theta(a, b, y)
            thetas[key] = m
            nonlocal worst_cond
            worst_cond = max(worst_cond, cond_of(m))
        return thetas[key]

    pts, member = _membership_pool(bundle, sample_count, seed)
    for a, b, c in itertools.product(ids, repeat=3):
        for i in np.flatnonzero(member[a] & member[b] & member[c])[:sample_count]:
            y = pts[i]
            cc1 = max(cc1, max_abs(theta_at(b, c, y) @ theta_at(a, b, y) - theta_at(a, c, y)))
            total += 1
    if worst_cond >= CONDITION_GUARD:
        notes.append(f"transition condition number {worst_cond:.3g} exceeds guard")
    worst = max(cc1, cc2)
    return ValidationReport(
        check="cocycle",
        passed=worst < tol and worst_cond < CONDITION_GUARD,
        max_residual=worst,
        sample_count=total,
        tolerance=tol,
        residuals={"CC1": cc1, "CC2": cc2, "condition": worst_cond},
        notes=notes,
    )


# ---------------------------------------------------------------------------
# catalog

def _everywhere(y) -> bool:
    return True


def trivial_bundle(base: ManifoldModel, rank: int, name: str | None = None) -> VectorBundle:
    """M x R^rank with a single global patch."""
    patch = CoverPatch(0, base, _everywhere)
    return VectorBundle(name or f"trivial({base.name},{rank})", base, rank, TransitionCocycle((patch,), {}, rank))


def mobius_bundle(base: ManifoldModel | None = None) -> VectorBundle:
    """The Moebius line bundle over S^1.

    Patch 0 is the arc x > -0.5 and patch 1 the arc x < 0.5; the transition
    is +1 on the upper overlap component (y > 0) and -1 on the lower one.
    """
    base = base or _circle()
    p0 = CoverPatch(0, base, lambda y: y[0] > -0.5)
    p1 = CoverPatch(1, base, lambda y: y[0] < 0.5)

    def sign(y):
        return np.array([[1.0 if y[1] > 0 else -1.0]])

    return VectorBundle("mobius", base, 1, TransitionCocycle((p0, p1), {(0, 1): sign, (1, 0): sign}, 1))


def chart_transition_jacobian(manifold: ManifoldModel, a: int, b: int, y) -> Array:
    """Jacobian of the chart change from chart a to chart b at the embedded point ``y``."""
    ca, cb = manifold.chart(a), manifold.chart(b)
    return cb.d_local(y) @ ca.d_embedded(ca.to_local(y))


def _inversion_jacobian(s):
    r2 = float(s @ s)
    return (r2 * np.eye(2) - 2.0 * np.outer(s, s)) / r2**2


def tangent_bundle(manifold: ManifoldModel, name: str | None = None) -> VectorBundle:
    """TM with one patch per chart; fibre coordinates are chart components.

    For the stereographic pair of ``sphere2`` the transitions are the closed
    form Jacobian of the inversion s -> s / |s|^2; otherwise they are products
    of chart Jacobians.
    """
    patches = tuple(CoverPatch(c.id, manifold, c.domain_test) for c in manifold.charts)
    fns = {}
    stereo = manifold.name.startswith("sphere2")
    for ca in manifold.charts:
        for cb in manifold.charts:
            if ca.id == cb.id:
                continue
            if stereo:
                fns[(ca.id, cb.id)] = lambda y, ca=ca: _inversion_jacobian(np.asarray(ca.to_local(y), float))
            else:
                fns[(ca.id, cb.id)] = lambda y, a=ca.id, b=cb.id: chart_transition_jacobian(manifold, a, b, y)
    return VectorBundle(name or f"tangent({manifold.name})", manifold, manifold.dim,
                        TransitionCocycle(patches, fns, manifold.dim))


def bundle_from_name(name: str, manifolds: Mapping | None = None) -> VectorBundle:
    """Catalog bundles: ``mobius``, ``ts1``, ``ts2``, ``tangent(<manifold>)``, ``trivial(<manifold>,<rank>)``."""
    from .geometry import manifold_from_name, sphere2

    def resolve(mname):
        if manifolds and mname in manifolds:
            return manifolds[mname]
        return manifold_from_name(mname)

    key = name.strip().replace(" ", "")
    if key == "mobius":
        return mobius_bundle()
    if key == "ts1":
        return tangent_bundle(_circle())
    if key == "ts2":
        return tangent_bundle(sphere2())
    if key.startswith("tangent(") and key.endswith(")"):
        return tangent_bundle(resolve(key[len("tangent("):-1]))
    if key.startswith("trivial(") and key.endswith(")"):
        inner = key[len("trivial("):-1]
        mname, _, rank = inner.rpartition(",")
        return trivial_bundle(resolve(mname), int(rank))
    raise KeyError(f"unknown catalog bundle {name!r}")


__all__ = [
    "CoverPatch", "TransitionCocycle", "VectorBundle", "BundleElement", "element", "change_chart",
    "trivialize", "canonical", "validate_cocycle", "trivial_bundle", "mobius_bundle", "tangent_bundle",
    "chart_transition_jacobian", "bundle_from_name",
]
