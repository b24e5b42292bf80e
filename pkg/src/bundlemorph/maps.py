"""Smooth maps between catalog manifolds, evaluated pointwise on embedded points."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .common import central_jacobian
from .exprlang import Expression, evaluate, parse, point_bindings
from .geometry import ManifoldModel, TangentVector

Array = np.ndarray
MAP_FD_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class SmoothMapRep:
    """A smooth map ``source -> target`` on embedded points.

    ``jacobian(x)`` is the ambient Jacobian (target.embed_dim x
    source.embed_dim); when absent the differential is taken by central
    differences in chart coordinates.
    """

    source: ManifoldModel
    target: ManifoldModel
    eval: Callable[[Array], Array]
    name: str = "map"
    params: dict = field(default_factory=dict)
    jacobian: Optional[Callable[[Array], Array]] = None

    def __call__(self, x) -> Array:
        return np.asarray(self.eval(np.asarray(x, float)), float)

    def local_differential(self, x, source_chart: int, target_chart: int) -> Array:
        """Matrix of the differential at ``x`` between the given source and target charts."""
        x = np.asarray(x, float)
        cs = self.source.chart(source_chart)
        ct = self.target.chart(target_chart)
        s = np.atleast_1d(cs.to_local(x))
        if self.jacobian is not None:
            return ct.d_local(self(x)) @ np.asarray(self.jacobian(x), float) @ cs.d_embedded(s)
        return np.atleast_2d(central_jacobian(
            lambda u: np.atleast_1d(ct.to_local(self(cs.to_embedded(u)))), s, MAP_FD_STEP))

    def push(self, v: TangentVector, target_chart: int | None = None) -> TangentVector:
        y = self(v.base)
        cid = self.target.chart_at(y).id if target_chart is None else target_chart
        return TangentVector(y, self.local_differential(v.base, v.chart_id, cid) @ v.components, cid)

    def probe(self, sample_count: int = 32, seed: int = 0) -> bool:
        """True if values and finite-difference differentials are finite at sampled points."""
        for x in self.source.sample(sample_count, seed):
            y = self(x)
            if not np.all(np.isfinite(y)) or not self.target.contains(y):
                return False
            c = self.source.chart_at(x).id
            t = self.target.chart_at(y).id
            if not np.all(np.isfinite(self.local_differential(x, c, t))):
                return False
        return True


def identity_map(manifold: ManifoldModel) -> SmoothMapRep:
    eye = np.eye(manifold.embed_dim)
    return SmoothMapRep(manifold, manifold, lambda x: x, "identity", {}, lambda x: eye)


def constant_map(source: ManifoldModel, target: ManifoldModel, point) -> SmoothMapRep:
    y0 = np.asarray(point, float)
    zero = np.zeros((target.embed_dim, source.embed_dim))
    return SmoothMapRep(source, target, lambda x: y0.copy(), "constant", {"point": y0.tolist()}, lambda x: zero)


def double_cover(circle: ManifoldModel) -> SmoothMapRep:
    """theta -> 2 theta on S^1, i.e. z -> z^2 on the unit complex numbers."""

    def ev(x):
        return np.array([x[0] ** 2 - x[1] ** 2, 2 * x[0] * x[1]])

    def jac(x):
        return np.array([[2 * x[0], -2 * x[1]], [2 * x[1], 2 * x[0]]])

    return SmoothMapRep(circle, circle, ev, "double_cover", {}, jac)


def circle_rotation(circle: ManifoldModel, angle: float) -> SmoothMapRep:
    c, s = math.cos(angle), math.sin(angle)
    r = np.array([[c, -s], [s, c]])
    return SmoothMapRep(circle, circle, lambda x: r @ x, "rotation", {"angle": angle}, lambda x: r)


def rotation_matrix(axis: Sequence[float], angle: float) -> Array:
    k = np.asarray(axis, float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * (kx @ kx)


def sphere_rotation(sphere: ManifoldModel, axis: Sequence[float], angle: float) -> SmoothMapRep:
    r = rotation_matrix(axis, angle)
    return SmoothMapRep(sphere, sphere, lambda x: r @ x, "sphere_rotation",
                        {"axis": list(map(float, axis)), "angle": angle}, lambda x: r)


def equator(circle: ManifoldModel, sphere: ManifoldModel) -> SmoothMapRep:
    j = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    return SmoothMapRep(circle, sphere, lambda x: np.array([x[0], x[1], 0.0]), "equator", {}, lambda x: j)


def torus_projection(torus: ManifoldModel, circle: ManifoldModel, factor: int = 0) -> SmoothMapRep:
    sl = slice(0, 2) if factor == 0 else slice(2, 4)
    j = np.zeros((2, 4))
    j[:, sl] = np.eye(2)
    return SmoothMapRep(torus, circle, lambda x: np.asarray(x[sl], float).copy(), "torus_projection",
                        {"factor": factor}, lambda x: j)


def compose(outer: SmoothMapRep, inner: SmoothMapRep) -> SmoothMapRep:
    """``outer o inner``."""
    jac = None
    if outer.jacobian is not None and inner.jacobian is not None:
        def jac(x):
            return outer.jacobian(inner(x)) @ inner.jacobian(x)
    return SmoothMapRep(inner.source, outer.target, lambda x: outer(inner(x)),
                        f"{outer.name}o{inner.name}", {}, jac)


def expression_map(source: ManifoldModel, target: ManifoldModel, components: Sequence,
                   name: str = "expression") -> SmoothMapRep:
    """Map whose embedded target coordinates are expression-language formulas.

    Bindings: ``x`` (embedded source point) and ``x0, x1, ...``.  The value is
    projected onto the target manifold.
    """
    exprs = [c if isinstance(c, Expression) else parse(str(c)) for c in components]
    if len(exprs) != target.embed_dim:
        raise ValueError(f"expected {target.embed_dim} components, got {len(exprs)}")

    def ev(x):
        ctx = point_bindings("x", x)
        return target.project(np.array([float(evaluate(e, ctx)) for e in exprs]))

    return SmoothMapRep(source, target, ev, name, {"components": [e.source for e in exprs]})


def maps_agree(a: SmoothMapRep, b: SmoothMapRep, sample_count: int = 32, seed: int = 0,
               tol: float = 1e-9) -> bool:
    if a is b:
        return True
    if a.source.name != b.source.name or a.target.name != b.target.name:
        return False
    return all(float(np.max(np.abs(a(x) - b(x)))) < tol for x in a.source.sample(sample_count, seed))


__all__ = [
    "SmoothMapRep", "identity_map", "constant_map", "double_cover", "circle_rotation", "sphere_rotation",
    "rotation_matrix", "equator", "torus_projection", "compose", "expression_map", "maps_agree",
]
