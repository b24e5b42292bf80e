"""Linear connections, parallel transport with patch handoff, and the homotopy isomorphism between pullbacks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .bundle import BundleElement, VectorBundle
from .common import CONDITION_GUARD, DEFAULT_SAMPLES, TOL_ODE, ValidationReport, max_abs
from .errors import PatchGap, SingularTransport
from .geometry import DEFAULT_STEPS, GeodesicCurve, ManifoldModel, sample_tangent
from .mapping_space import TangentSection, chart_inverse
from .pullback import PullbackBundle, pullback_bundle

Array = np.ndarray
THETA_FD_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class Connection:
    """Local connection forms: ``local_forms[a](y, w)`` is the rank x rank matrix for ambient direction w at y."""

    bundle: VectorBundle
    local_forms: Mapping
    kind: str = "custom"

    def form(self, patch: int, y, w) -> Array:
        return np.asarray(self.local_forms[patch](np.asarray(y, float), np.asarray(w, float)), float)


def flat_connection(bundle: VectorBundle) -> Connection:
    """Zero forms in every patch; valid whenever the cocycle is locally constant."""
    z = np.zeros((bundle.rank, bundle.rank))
    return Connection(bundle, {a: (lambda y, w: z) for a in bundle.patch_ids}, "flat")


def levi_civita(bundle: VectorBundle) -> Connection:
    """Levi-Civita connection of a tangent bundle whose patches are the charts of its base."""
    M = bundle.base

    def make(a):
        chart = M.chart(a)

        def form(y, w):
            s = chart.to_local(y)
            ds = chart.d_local(y) @ w
            return np.einsum("kij,i->kj", M.christoffel_at(a, s), ds)
        return form

    return Connection(bundle, {a: make(a) for a in bundle.patch_ids}, "levi-civita")


def default_connection(bundle: VectorBundle) -> Connection:
    """Levi-Civita for tangent bundles, flat otherwise."""
    if bundle.name.startswith("tangent("):
        return levi_civita(bundle)
    return flat_connection(bundle)


def theta_derivative(bundle: VectorBundle, a: int, b: int, y, w) -> Array:
    """Directional derivative of theta[a, b] at y along the ambient tangent vector w.

    Five-point central stencil in the coordinates of the first chart containing y.
    """
    M = bundle.base
    y = np.asarray(y, float)
    chart = M.chart_at(y)
    s = chart.to_local(y)
    ds = chart.d_local(y) @ np.asarray(w, float)
    h = THETA_FD_STEP

    def at(k):
        return bundle.theta(a, b, chart.to_embedded(s + k * h * ds))
    return (at(-2) - 8 * at(-1) + 8 * at(1) - at(2)) / (12 * h)


def validate_connection(conn: Connection, sample_count: int = DEFAULT_SAMPLES, seed: int = 0,
                        tol: float = TOL_ODE) -> ValidationReport:
    """Sampled residual of the gauge law omega_b = theta omega_a theta^-1 - d(theta) theta^-1 on overlaps."""
    E = conn.bundle
    rng = np.random.default_rng(seed)
    worst = 0.0
    total = 0
    for a in E.patch_ids:
        for b in E.patch_ids:
            if a == b:
                continue
            pb = E.patch(b)
            for y in E.patch(a).sample(sample_count, seed, where=pb.contains):
                w = E.base.ambient(sample_tangent(E.base, y, rng))
                th = E.theta(a, b, y)
                th_inv = E.theta(b, a, y)
                want = th @ conn.form(a, y, w) @ th_inv - theta_derivative(E, a, b, y, w) @ th_inv
                worst = max(worst, max_abs(conn.form(b, y, w) - want))
                total += 1
    return ValidationReport("connection", worst < tol, worst, total, tol, {"gauge": worst},
                            [f"connection kind: {conn.kind}"])


@dataclass(frozen=True)
class TransportResult:
    """Fibre map from ``start_patch`` coordinates at the start to ``end_patch`` coordinates at the end."""

    linear_map: Array
    path_patches: list
    step_count: int
    start_patch: int
    end_patch: int
    vector: Array | None = None


@dataclass(frozen=True, eq=False)
class PathCurve:
    """A parametrised base curve on [0, 1] with ambient velocity."""

    point: Callable[[float], Array]
    velocity: Callable[[float], Array]
    steps: int = DEFAULT_STEPS
    constant: bool = False


def geodesic_path(manifold: ManifoldModel, p, w, steps: int = DEFAULT_STEPS) -> PathCurve:
    """t -> exp(p, t w) for an ambient initial velocity w."""
    w = np.asarray(w, float)
    curve = GeodesicCurve(manifold, np.asarray(p, float), w, steps)
    return PathCurve(curve.point, curve.velocity, steps, constant=not np.any(w))


def reversed_path(path: PathCurve) -> PathCurve:
    return PathCurve(lambda t: path.point(1.0 - t), lambda t: -path.velocity(1.0 - t), path.steps, path.constant)


def polyline_path(manifold: ManifoldModel, points: Sequence, substeps: int = 1) -> list:
    """Per-segment curves through consecutive points, linear in a shared chart when one exists."""
    segs = []
    for p0, p1 in zip(points[:-1], points[1:]):
        p0 = np.asarray(p0, float)
        p1 = np.asarray(p1, float)
        common = [c for c in manifold.charts if c.contains(p0) and c.contains(p1)]
        if np.array_equal(p0, p1):
            segs.append(PathCurve(lambda t, p=p0: p, lambda t, p=p0: np.zeros_like(p), substeps, True))
        elif common:
            c = common[0]
            s0, s1 = c.to_local(p0), c.to_local(p1)
            segs.append(PathCurve(
                lambda t, c=c, s0=s0, s1=s1: c.to_embedded((1 - t) * s0 + t * s1),
                lambda t, c=c, s0=s0, s1=s1: c.d_embedded((1 - t) * s0 + t * s1) @ (s1 - s0),
                substeps))
        else:
            def pt(t, p0=p0, p1=p1):
                return manifold.project((1 - t) * p0 + t * p1)

            def vel(t, pt=pt):
                h = 1e-6
                return (pt(min(t + h, 1.0)) - pt(max(t - h, 0.0))) / (min(t + h, 1.0) - max(t - h, 0.0))
            segs.append(PathCurve(pt, vel, substeps))
    return segs


def _first_patch(bundle: VectorBundle, pts) -> int | None:
    for pid in bundle.patch_ids:
        patch = bundle.patch(pid)
        if all(patch.contains(p) for p in pts):
            return pid
    return None


def _transport_segments(conn: Connection, segments: list, start_patch: int | None) -> TransportResult:
    E = conn.bundle
    first = segments[0].point(0.0)
    patch = E.canonical_patch(first) if start_patch is None else start_patch
    start = patch
    mat = np.eye(E.rank)
    visited = [patch]
    steps = 0
    for seg in segments:
        if seg.constant:
            continue
        n = seg.steps
        h = 1.0 / n
        for i in range(n):
            t = i * h
            pts = [seg.point(t), seg.point(t + h / 2), seg.point(t + h)]
            if not all(E.patch(patch).contains(p) for p in pts):
                nxt = _first_patch(E, pts)
                if nxt is None:
                    raise PatchGap(f"no patch of {E.name} contains a path step near {pts[0].tolist()}")
                mat = E.theta(patch, nxt, pts[0]) @ mat
                patch = nxt
                visited.append(patch)

            w0, w1, w2 = (-conn.form(patch, p, seg.velocity(tt)) for p, tt in zip(pts, (t, t + h / 2, t + h)))
            k1 = w0 @ mat
            k2 = w1 @ (mat + h / 2 * k1)
            k3 = w1 @ (mat + h / 2 * k2)
            k4 = w2 @ (mat + h * k3)
            mat = mat + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            steps += 1
    cond = float(np.linalg.cond(mat))
    if not math.isfinite(cond) or cond >= CONDITION_GUARD:
        raise SingularTransport(f"transport map condition number {cond:.3g}")
    return TransportResult(mat, visited, steps, start, patch)


def parallel_transport(conn: Connection, path, v0=None, start_patch: int | None = None,
                       substeps: int = 1) -> TransportResult:
    """Solve V' = -omega(gamma') V along ``path``.

    ``path`` is a :class:`PathCurve` (or a list of them) or a list of base
    points joined by chart-linear segments.  The returned map sends
    ``start_patch`` coordinates (canonical by default) to the coordinates of
    the patch the path ends in.
    """
    if isinstance(path, PathCurve):
        segments = [path]
    elif len(path) and isinstance(path[0], PathCurve):
        segments = list(path)
    else:
        pts = [np.asarray(p, float) for p in path]
        if not pts:
            raise ValueError("empty path")
        if len(pts) == 1:
            pts = pts * 2
        segments = polyline_path(conn.bundle.base, pts, substeps)
    res = _transport_segments(conn, segments, start_patch)
    if v0 is not None:
        res = TransportResult(res.linear_map, res.path_patches, res.step_count, res.start_patch, res.end_patch,
                              res.linear_map @ np.asarray(v0, float))
    return res


@dataclass(eq=False)
class HomotopyIsomorphism:
    """Fibrewise transport from the pullback by phi to the pullback by psi = exp(phi, section).

    The fibre over x is transported along t -> exp(phi(x), t section(x)).
    Results are memoised per base point.
    """

    conn: Connection
    section: TangentSection
    steps: int = DEFAULT_STEPS
    source: PullbackBundle = None
    target: PullbackBundle = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        phi = self.section.base_map
        if self.source is None:
            self.source = pullback_bundle(self.conn.bundle, phi)
        if self.target is None:
            self.target = pullback_bundle(self.conn.bundle, chart_inverse(self.section, check_samples=0))

    @property
    def phi(self):
        return self.section.base_map

    @property
    def psi(self):
        return self.target.map

    def result(self, x) -> TransportResult:
        x = np.asarray(x, float)
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        F = self.conn.bundle
        y = self.phi(x)
        w = self.section.ambient(x)
        start = F.canonical_patch(y)
        if not np.any(w):
            res = TransportResult(np.eye(F.rank), [start], 0, start, start)
        else:
            res = parallel_transport(self.conn, geodesic_path(F.base, y, w, self.steps), start_patch=start)
        self._cache[key] = res
        return res

    def matrix(self, x, a: int | None = None, b: int | None = None) -> Array:
        """Fibre map at x from source patch ``a`` to target patch ``b`` coordinates (transport patches by default)."""
        x = np.asarray(x, float)
        res = self.result(x)
        F = self.conn.bundle
        m = res.linear_map
        if a is not None and a != res.start_patch:
            m = m @ F.theta(a, res.start_patch, self.phi(x))
        if b is not None and b != res.end_patch:
            m = F.theta(res.end_patch, b, self.psi(x)) @ m
        return m

    def __call__(self, elem: BundleElement) -> BundleElement:
        res = self.result(elem.base_point)
        return BundleElement(res.end_patch, elem.base_point, self.matrix(elem.base_point, elem.patch_id) @ elem.fiber)

    def inverse(self, elem: BundleElement) -> BundleElement:
        res = self.result(elem.base_point)
        m = self.matrix(elem.base_point, res.start_patch, elem.patch_id)
        return BundleElement(res.start_patch, elem.base_point, np.linalg.solve(m, elem.fiber))


def homotopy_transport(conn: Connection, section: TangentSection, x, v, patch: int | None = None,
                       iso: HomotopyIsomorphism | None = None) -> BundleElement:
    """Transport the fibre vector v (coordinates in ``patch`` over phi(x)) to the fibre over psi(x)."""
    iso = iso or HomotopyIsomorphism(conn, section)
    x = np.asarray(x, float)
    if patch is None:
        patch = conn.bundle.canonical_patch(section.base_map(x))
    return iso(BundleElement(patch, x, np.atleast_1d(np.asarray(v, float))))


__all__ = [
    "Connection", "flat_connection", "levi_civita", "default_connection", "theta_derivative",
    "validate_connection", "TransportResult", "PathCurve", "geodesic_path", "reversed_path", "polyline_path",
    "parallel_transport", "HomotopyIsomorphism", "homotopy_transport",
]
