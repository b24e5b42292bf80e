"""Embedded manifolds with finite chart atlases, metrics, exponential and logarithm maps.

Points are numpy arrays in the embedding space R^k.  Tangent vectors carry
their components in a named chart; :meth:`ManifoldModel.ambient` and
:meth:`ManifoldModel.tangent` convert to and from ambient vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from scipy.stats import qmc

from .common import central_jacobian
from .errors import ChartEscape, OutsideDiagonalNeighborhood, ShootingDiverged, VelocityTooLarge

DEFAULT_STEPS = 128
METRIC_FD_STEP = 1e-5
CHART_FD_STEP = 1e-6
SHOOTING_MAX_ITER = 50
SHOOTING_TOL = 1e-10
SHOOTING_FD_STEP = 1e-7

Array = np.ndarray


def _as_point(p) -> Array:
    return np.asarray(p, float)


@dataclass(frozen=True, eq=False)
class Chart:
    """A coordinate chart on an embedded manifold.

    ``local_jacobian(p)`` is d(to_local) at an embedded point (dim x k) and
    ``embedded_jacobian(s)`` is d(to_embedded) at local coordinates (k x dim);
    both fall back to central finite differences when omitted.
    """

    id: int
    domain_test: Callable[[Array], bool]
    to_local: Callable[[Array], Array]
    to_embedded: Callable[[Array], Array]
    local_jacobian: Optional[Callable[[Array], Array]] = None
    embedded_jacobian: Optional[Callable[[Array], Array]] = None

    def contains(self, p) -> bool:
        return bool(self.domain_test(np.asarray(p, float)))

    def d_local(self, p) -> Array:
        p = np.asarray(p, float)
        if self.local_jacobian is not None:
            return np.asarray(self.local_jacobian(p), float)
        return np.atleast_2d(central_jacobian(self.to_local, p, CHART_FD_STEP))

    def d_embedded(self, s) -> Array:
        s = np.atleast_1d(np.asarray(s, float))
        if self.embedded_jacobian is not None:
            return np.asarray(self.embedded_jacobian(s), float)
        return central_jacobian(self.to_embedded, s, CHART_FD_STEP)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: Array
    components: Array
    chart_id: int

    def scaled(self, t: float) -> "TangentVector":
        return TangentVector(self.base, t * self.components, self.chart_id)


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """A finite-dimensional manifold embedded in R^k with a finite atlas.

    ``metric(chart_id, s)`` returns the metric matrix in chart coordinates.
    The optional ``geodesic_closed(p, w, t)`` returns the point and ambient
    velocity at time ``t`` of the geodesic with initial ambient velocity
    ``w``; together with ``log_closed`` it lets catalog entries bypass the
    geodesic ODE.  ``distance`` is the geodesic distance used to decide
    membership in the diagonal neighbourhood.  ``parametrize`` maps the unit
    cube onto the manifold and drives all sampling.
    """

    name: str
    dim: int
    embed_dim: int
    charts: tuple
    metric: Callable[[int, Array], Array]
    injectivity_bound: float
    parametrize: Callable[[Array], Array]
    christoffel: Optional[Callable[[int, Array], Array]] = None
    geodesic_closed: Optional[Callable[[Array, Array, float], tuple]] = None
    log_closed: Optional[Callable[[Array, Array], Array]] = None
    distance: Optional[Callable[[Array, Array], float]] = None
    project: Callable[[Array], Array] = None

    def __post_init__(self):
        if self.project is None:
            object.__setattr__(self, "project", _as_point)

    def chart(self, chart_id: int) -> Chart:
        for c in self.charts:
            if c.id == chart_id:
                return c
        raise KeyError(f"{self.name} has no chart {chart_id}")

    def chart_ids_at(self, p) -> list:
        return [c.id for c in self.charts if c.contains(p)]

    def chart_at(self, p) -> Chart:
        for c in self.charts:
            if c.contains(p):
                return c
        raise ChartEscape(f"point {np.asarray(p).tolist()} lies in no chart of {self.name}")

    def contains(self, p) -> bool:
        return any(c.contains(p) for c in self.charts)

    def tangent(self, p, ambient, chart_id: int | None = None) -> TangentVector:
        """Express an ambient tangent vector at ``p`` in a chart (first containing chart by default)."""
        p = np.asarray(p, float)
        chart = self.chart_at(p) if chart_id is None else self.chart(chart_id)
        comps = chart.d_local(p) @ np.asarray(ambient, float)
        return TangentVector(p, np.atleast_1d(comps), chart.id)

    def ambient(self, v: TangentVector) -> Array:
        chart = self.chart(v.chart_id)
        return chart.d_embedded(chart.to_local(v.base)) @ v.components

    def express(self, v: TangentVector, chart_id: int) -> TangentVector:
        if chart_id == v.chart_id:
            return v
        return self.tangent(v.base, self.ambient(v), chart_id)

    def zero(self, p) -> TangentVector:
        chart = self.chart_at(p)
        return TangentVector(np.asarray(p, float), np.zeros(self.dim), chart.id)

    def norm(self, v: TangentVector) -> float:
        chart = self.chart(v.chart_id)
        g = self.metric(v.chart_id, chart.to_local(v.base))
        c = v.components
        return math.sqrt(max(float(c @ g @ c), 0.0))

    def christoffel_at(self, chart_id: int, s) -> Array:
        """Christoffel symbols ``G[k, i, j]`` in chart coordinates."""
        s = np.atleast_1d(np.asarray(s, float))
        if self.christoffel is not None:
            return self.christoffel(chart_id, s)
        return christoffel_from_metric(lambda y: self.metric(chart_id, y), s, METRIC_FD_STEP)

    def sample(self, n: int, seed: int = 0, where=None, box=None, max_draws: int | None = None) -> list:
        """Up to ``n`` Halton-distributed points satisfying ``where``.

        ``box`` is a pair (lo, hi) restricting the unit-cube parameters.
        """
        if n <= 0:
            return []
        out = []
        budget = max_draws if max_draws is not None else 64 * n + 4096
        drawn = 0
        batch = max(2 * n, 64)
        lo = hi = None
        if box is not None:
            lo, hi = (np.asarray(b, float) for b in box)
        engine = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        while len(out) < n and drawn < budget:
            engine_pts = engine.random(batch)
            drawn += batch
            if lo is not None:
                engine_pts = lo + (hi - lo) * engine_pts
            for u in engine_pts:
                p = self.parametrize(u)
                if where is None or where(p):
                    out.append(p)
                    if len(out) == n:
                        break
            batch *= 2
        return out

    @property
    def has_closed_forms(self) -> bool:
        return self.geodesic_closed is not None and self.log_closed is not None


def christoffel_from_metric(metric: Callable[[Array], Array], s: Array, h: float) -> Array:
    """Christoffel symbols of the second kind from central differences of the metric."""
    d = s.size
    g = np.asarray(metric(s), float)
    ginv = np.linalg.inv(g)
    dg = np.empty((d, d, d))  # dg[l, i, j] = d_l g_ij
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        dg[l] = (np.asarray(metric(s + e), float) - np.asarray(metric(s - e), float)) / (2 * h)
    # first kind: G_lij = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    first = 0.5 * (np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg)
    return np.einsum("kl,lij->kij", ginv, first)


# ---------------------------------------------------------------------------
# geodesics

def _geodesic_rhs(manifold, chart_id, x, xd):
    gam = manifold.christoffel_at(chart_id, x)
    return xd, -np.einsum("kij,i,j->k", gam, xd, xd)


@dataclass
class GeodesicSolution:
    points: list
    velocities: list  # ambient velocities at the nodes
    speeds: list  # metric speed at the nodes
    charts: list


def _integrate(manifold: ManifoldModel, p, v: TangentVector, steps: int, record: bool = True) -> GeodesicSolution:
    p = np.asarray(p, float)
    chart = manifold.chart(v.chart_id)
    if not chart.contains(p):
        raise ChartEscape(f"velocity chart {v.chart_id} does not contain the base point")
    x = np.atleast_1d(chart.to_local(p)).astype(float)
    xd = np.asarray(v.components, float).copy()
    sol = GeodesicSolution([p], [chart.d_embedded(x) @ xd], [_speed(manifold, chart.id, x, xd)], [chart.id])
    if not np.any(xd):
        for _ in range(steps):
            sol.points.append(p)
            sol.velocities.append(np.zeros(manifold.embed_dim))
            sol.speeds.append(0.0)
            sol.charts.append(chart.id)
        return sol
    h = 1.0 / steps
    for _ in range(steps):
        cid = chart.id
        k1x, k1v = _geodesic_rhs(manifold, cid, x, xd)
        k2x, k2v = _geodesic_rhs(manifold, cid, x + 0.5 * h * k1x, xd + 0.5 * h * k1v)
        k3x, k3v = _geodesic_rhs(manifold, cid, x + 0.5 * h * k2x, xd + 0.5 * h * k2v)
        k4x, k4v = _geodesic_rhs(manifold, cid, x + h * k3x, xd + h * k3v)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        xd = xd + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        q = np.asarray(chart.to_embedded(x), float)
        if not chart.contains(q):
            ids = manifold.chart_ids_at(q)
            if not ids:
                raise ChartEscape(f"geodesic left every chart of {manifold.name}")
            new = manifold.chart(ids[0])
            xd = new.d_local(q) @ (chart.d_embedded(x) @ xd)
            x = np.atleast_1d(new.to_local(q)).astype(float)
            chart = new
        if record:
            sol.points.append(q)
            sol.velocities.append(chart.d_embedded(x) @ xd)
            sol.speeds.append(_speed(manifold, chart.id, x, xd))
            sol.charts.append(chart.id)
        else:
            sol.points[-1:] = [q]
    return sol


def _speed(manifold, chart_id, x, xd) -> float:
    g = manifold.metric(chart_id, x)
    return math.sqrt(max(float(xd @ g @ xd), 0.0))


def geodesic_integrate(manifold: ManifoldModel, p, v: TangentVector, steps: int = DEFAULT_STEPS) -> list:
    """RK4 solution of the geodesic equation; returns ``steps + 1`` embedded points."""
    return _integrate(manifold, p, v, steps).points


def geodesic_length(manifold: ManifoldModel, p, v: TangentVector, steps: int = DEFAULT_STEPS) -> float:
    """Length of the integrated geodesic (Simpson's rule on the metric speed when ``steps`` is even)."""
    speeds = np.asarray(_integrate(manifold, p, v, steps).speeds)
    h = 1.0 / steps
    if steps % 2 == 0:
        return float(h / 3 * (speeds[0] + speeds[-1] + 4 * speeds[1:-1:2].sum() + 2 * speeds[2:-1:2].sum()))
    return float(h * (speeds[0] / 2 + speeds[1:-1].sum() + speeds[-1] / 2))


def exp(manifold: ManifoldModel, p, v: TangentVector, *, method: str = "auto", steps: int = DEFAULT_STEPS) -> Array:
    """Riemannian exponential: the point at parameter 1 along the geodesic with initial velocity ``v``."""
    p = np.asarray(p, float)
    if manifold.norm(v) >= manifold.injectivity_bound:
        raise VelocityTooLarge(f"|v| = {manifold.norm(v):.6g} >= r_inj = {manifold.injectivity_bound:.6g}")
    if not np.any(v.components):
        return p.copy()
    if method == "auto" and manifold.geodesic_closed is not None:
        return manifold.geodesic_closed(p, manifold.ambient(v), 1.0)[0]
    return _integrate(manifold, p, v, steps, record=False).points[-1]


def distance(manifold: ManifoldModel, p, q) -> float:
    if manifold.distance is not None:
        return float(manifold.distance(np.asarray(p, float), np.asarray(q, float)))
    try:
        return manifold.norm(_shoot(manifold, p, q, DEFAULT_STEPS, SHOOTING_TOL))
    except (ShootingDiverged, ChartEscape):
        return math.inf


def in_injectivity_domain(manifold: ManifoldModel, p, q) -> bool:
    """Membership of (p, q) in the neighbourhood V of the diagonal."""
    if math.isinf(manifold.injectivity_bound):
        return True
    return distance(manifold, p, q) < manifold.injectivity_bound


def log(manifold: ManifoldModel, p, q, *, method: str = "auto", steps: int = DEFAULT_STEPS,
        tol: float = SHOOTING_TOL) -> TangentVector:
    """Inverse of :func:`exp` on V: the tangent vector at ``p`` pointing to ``q``."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if not in_injectivity_domain(manifold, p, q):
        raise OutsideDiagonalNeighborhood(f"({p.tolist()}, {q.tolist()}) is outside V for {manifold.name}")
    if method == "auto" and manifold.log_closed is not None:
        return manifold.tangent(p, manifold.log_closed(p, q))
    return _shoot(manifold, p, q, steps, tol)


def _shoot(manifold: ManifoldModel, p, q, steps: int, tol: float) -> TangentVector:
    """Damped Gauss-Newton on the initial velocity, forward-difference Jacobian."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    chart = manifold.chart_at(p)
    cid = chart.id

    def endpoint(c):
        return _integrate(manifold, p, TangentVector(p, c, cid), steps, record=False).points[-1]

    v = np.atleast_1d(chart.d_local(p) @ (q - p)).astype(float)
    r = endpoint(v) - q
    nr = float(np.linalg.norm(r))
    for _ in range(SHOOTING_MAX_ITER):
        if nr < tol:
            return TangentVector(p, v, cid)
        jac = np.empty((manifold.embed_dim, manifold.dim))
        for j in range(manifold.dim):
            dv = v.copy()
            dv[j] += SHOOTING_FD_STEP
            jac[:, j] = (endpoint(dv) - q - r) / SHOOTING_FD_STEP
        delta = np.linalg.lstsq(jac, -r, rcond=None)[0]
        step = 1.0
        for _halving in range(30):
            cand = v + step * delta
            rc = endpoint(cand) - q
            nc = float(np.linalg.norm(rc))
            if nc < nr:
                v, r, nr = cand, rc, nc
                break
            step *= 0.5
        else:
            if nr < 1e3 * tol:
                return TangentVector(p, v, cid)
            raise ShootingDiverged(f"no descent step from residual {nr:.3g}")
    if nr < tol:
        return TangentVector(p, v, cid)
    raise ShootingDiverged(f"residual {nr:.3g} after {SHOOTING_MAX_ITER} iterations")


@dataclass(frozen=True, eq=False)
class GeodesicCurve:
    """The curve t -> exp(p, t w) on [0, 1] with its ambient velocity."""

    manifold: ManifoldModel
    base: Array
    velocity0: Array  # ambient
    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if self.manifold.geodesic_closed is None:
            v = self.manifold.tangent(self.base, self.velocity0)
            sol = _integrate(self.manifold, self.base, v, 2 * self.steps)
            object.__setattr__(self, "_nodes", sol)

    def _node(self, t):
        sol = self._nodes
        n = len(sol.points) - 1
        k = t * n
        i = int(round(k))
        if abs(k - i) < 1e-9:
            return sol.points[i], sol.velocities[i]
        # cubic Hermite between nodes, reprojected onto the manifold
        i = min(int(math.floor(k)), n - 1)
        s = k - i
        h = 1.0 / n
        p0, p1 = sol.points[i], sol.points[i + 1]
        m0, m1 = sol.velocities[i] * h, sol.velocities[i + 1] * h
        h00, h10, h01, h11 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2
        pt = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1
        dpt = ((6 * s**2 - 6 * s) * p0 + (3 * s**2 - 4 * s + 1) * m0 + (-6 * s**2 + 6 * s) * p1
               + (3 * s**2 - 2 * s) * m1) / h
        return self.manifold.project(pt), dpt

    def point(self, t: float) -> Array:
        if not np.any(self.velocity0):
            return self.base
        if self.manifold.geodesic_closed is not None:
            return self.manifold.geodesic_closed(self.base, self.velocity0, t)[0]
        return self._node(t)[0]

    def velocity(self, t: float) -> Array:
        if not np.any(self.velocity0):
            return np.zeros_like(self.velocity0)
        if self.manifold.geodesic_closed is not None:
            return self.manifold.geodesic_closed(self.base, self.velocity0, t)[1]
        return self._node(t)[1]


# ---------------------------------------------------------------------------
# catalog

def euclidean(n: int, box: float = 2.0) -> ManifoldModel:
    """R^n with the identity chart; sampling covers the cube [-box, box]^n."""
    eye = np.eye(n)
    chart = Chart(
        0,
        lambda p: True,
        lambda p: np.asarray(p, float).copy(),
        lambda s: np.asarray(s, float).copy(),
        lambda p: eye,
        lambda s: eye,
    )
    return ManifoldModel(
        name=f"euclidean({n})",
        dim=n,
        embed_dim=n,
        charts=(chart,),
        metric=lambda cid, s: eye,
        injectivity_bound=math.inf,
        parametrize=lambda u: box * (2 * np.asarray(u, float) - 1),
        christoffel=lambda cid, s: np.zeros((n, n, n)),
        geodesic_closed=lambda p, w, t: (p + t * w, np.asarray(w, float).copy()),
        log_closed=lambda p, q: q - p,
        distance=lambda p, q: float(np.linalg.norm(q - p)),
    )


def _circle_geodesic(p, w, t):
    omega = p[0] * w[1] - p[1] * w[0]
    a = t * omega
    c, s = math.cos(a), math.sin(a)
    q = np.array([c * p[0] - s * p[1], s * p[0] + c * p[1]])
    return q, omega * np.array([-q[1], q[0]])


def _circle_angle(p, q) -> float:
    return math.atan2(p[0] * q[1] - p[1] * q[0], p[0] * q[0] + p[1] * q[1])


def _circle_charts(offset: int = 0, slot: slice = slice(0, 2)):
    """Two angle charts; chart 0 takes values in (-pi, pi), chart 1 in (0, 2 pi)."""

    def c0_local(p):
        return np.array([math.atan2(p[1], p[0])])

    def c1_local(p):
        return np.array([math.atan2(-p[1], -p[0]) + math.pi])

    def emb(s):
        return np.array([math.cos(s[0]), math.sin(s[0])])

    def d_emb(s):
        return np.array([[-math.sin(s[0])], [math.cos(s[0])]])

    def d_local(p):
        r2 = p[0] ** 2 + p[1] ** 2
        return np.array([[-p[1] / r2, p[0] / r2]])

    return (
        Chart(0, lambda p: p[0] > -0.5, c0_local, emb, d_local, d_emb),
        Chart(1, lambda p: p[0] < 0.5, c1_local, emb, d_local, d_emb),
    )


def _normalize(p):
    p = np.asarray(p, float)
    return p / np.linalg.norm(p)


def circle() -> ManifoldModel:
    """The unit circle S^1 in R^2 with two angle charts."""
    one = np.eye(1)
    return ManifoldModel(
        name="circle",
        dim=1,
        embed_dim=2,
        charts=_circle_charts(),
        metric=lambda cid, s: one,
        injectivity_bound=math.pi - 0.1,
        parametrize=lambda u: np.array([math.cos(2 * math.pi * u[0]), math.sin(2 * math.pi * u[0])]),
        christoffel=lambda cid, s: np.zeros((1, 1, 1)),
        geodesic_closed=_circle_geodesic,
        log_closed=lambda p, q: _circle_angle(p, q) * np.array([-p[1], p[0]]),
        distance=lambda p, q: abs(_circle_angle(p, q)),
        project=_normalize,
    )


def _stereo_charts():
    """Chart 0 projects from the south pole (domain z > -0.8), chart 1 from the north pole (z < 0.8)."""

    def make(sign):
        # sign = +1: s = (x, y) / (1 + z); sign = -1: s = (x, y) / (1 - z)
        def to_local(p):
            return np.array([p[0], p[1]]) / (1 + sign * p[2])

        def to_embedded(s):
            r2 = s[0] ** 2 + s[1] ** 2
            return np.array([2 * s[0], 2 * s[1], sign * (1 - r2)]) / (1 + r2)

        def d_local(p):
            d = 1 + sign * p[2]
            return np.array([[1 / d, 0.0, -sign * p[0] / d**2], [0.0, 1 / d, -sign * p[1] / d**2]])

        def d_embedded(s):
            r2 = s[0] ** 2 + s[1] ** 2
            q = 1 + r2
            top = 2 * np.eye(2) / q - 4 * np.outer(s, s) / q**2
            bottom = -sign * 4 * np.asarray(s) / q**2
            return np.vstack([top, bottom])

        return to_local, to_embedded, d_local, d_embedded

    c0 = make(+1)
    c1 = make(-1)
    return (
        Chart(0, lambda p: p[2] > -0.8, c0[0], c0[1], c0[2], c0[3]),
        Chart(1, lambda p: p[2] < 0.8, c1[0], c1[1], c1[2], c1[3]),
    )


def _stereo_metric(cid, s):
    r2 = float(s @ s)
    return (4.0 / (1 + r2) ** 2) * np.eye(2)


def _stereo_christoffel(cid, s):
    # conformal metric exp(2f) I with f = log 2 - log(1 + |s|^2)
    df = -2.0 * np.asarray(s, float) / (1 + float(s @ s))
    eye = np.eye(2)
    return np.einsum("ki,j->kij", eye, df) + np.einsum("kj,i->kij", eye, df) - np.einsum("ij,k->kij", eye, df)


def _sphere_geodesic(p, w, t):
    nrm = float(np.linalg.norm(w))
    if nrm == 0.0:
        return np.asarray(p, float).copy(), np.zeros(3)
    a = t * nrm
    c, s = math.cos(a), math.sin(a)
    return c * p + (s / nrm) * w, -nrm * s * p + c * w


def _sphere_log(p, q):
    c = float(p @ q)
    u = q - c * p
    s = float(np.linalg.norm(u))
    if s == 0.0:
        return np.zeros(3)
    return (math.atan2(s, c) / s) * u


def _sphere_distance(p, q):
    return math.atan2(float(np.linalg.norm(np.cross(p, q))), float(p @ q))


def _sphere_param(u):
    z = 1 - 2 * u[1]
    r = math.sqrt(max(0.0, 1 - z * z))
    a = 2 * math.pi * u[0]
    return np.array([r * math.cos(a), r * math.sin(a), z])


def sphere2(closed_form: bool = True) -> ManifoldModel:
    """The unit sphere S^2 in R^3 with two stereographic charts.

    With ``closed_form=False`` exp and log go through the geodesic ODE and
    shooting; the closed-form distance is kept to decide membership in V.
    """
    return ManifoldModel(
        name="sphere2" if closed_form else "sphere2-ode",
        dim=2,
        embed_dim=3,
        charts=_stereo_charts(),
        metric=_stereo_metric,
        injectivity_bound=math.pi - 0.1,
        parametrize=_sphere_param,
        christoffel=_stereo_christoffel,
        geodesic_closed=_sphere_geodesic if closed_form else None,
        log_closed=_sphere_log if closed_form else None,
        distance=_sphere_distance,
        project=_normalize,
    )


def _torus_charts():
    base = _circle_charts()
    charts = []
    for a in base:
        for b in base:
            cid = 2 * a.id + b.id

            def domain(p, a=a, b=b):
                return a.contains(p[:2]) and b.contains(p[2:])

            def to_local(p, a=a, b=b):
                return np.concatenate([a.to_local(p[:2]), b.to_local(p[2:])])

            def to_embedded(s, a=a, b=b):
                return np.concatenate([a.to_embedded(s[:1]), b.to_embedded(s[1:])])

            def d_local(p, a=a, b=b):
                out = np.zeros((2, 4))
                out[0, :2] = a.d_local(p[:2])[0]
                out[1, 2:] = b.d_local(p[2:])[0]
                return out

            def d_embedded(s, a=a, b=b):
                out = np.zeros((4, 2))
                out[:2, 0] = a.d_embedded(s[:1])[:, 0]
                out[2:, 1] = b.d_embedded(s[1:])[:, 0]
                return out

            charts.append(Chart(cid, domain, to_local, to_embedded, d_local, d_embedded))
    return tuple(charts)


def _torus_geodesic(p, w, t):
    q1, v1 = _circle_geodesic(p[:2], w[:2], t)
    q2, v2 = _circle_geodesic(p[2:], w[2:], t)
    return np.concatenate([q1, q2]), np.concatenate([v1, v2])


def _torus_log(p, q):
    a = _circle_angle(p[:2], q[:2])
    b = _circle_angle(p[2:], q[2:])
    return np.array([-a * p[1], a * p[0], -b * p[3], b * p[2]])


def _torus_distance(p, q):
    return math.hypot(_circle_angle(p[:2], q[:2]), _circle_angle(p[2:], q[2:]))


def torus2() -> ManifoldModel:
    """The flat torus S^1 x S^1 in R^4; shortest closed geodesic has length 2 pi."""
    eye = np.eye(2)
    return ManifoldModel(
        name="torus2",
        dim=2,
        embed_dim=4,
        charts=_torus_charts(),
        metric=lambda cid, s: eye,
        injectivity_bound=math.pi - 0.1,
        parametrize=lambda u: np.array([
            math.cos(2 * math.pi * u[0]), math.sin(2 * math.pi * u[0]),
            math.cos(2 * math.pi * u[1]), math.sin(2 * math.pi * u[1]),
        ]),
        christoffel=lambda cid, s: np.zeros((2, 2, 2)),
        geodesic_closed=_torus_geodesic,
        log_closed=_torus_log,
        distance=_torus_distance,
        project=lambda p: np.concatenate([_normalize(p[:2]), _normalize(p[2:])]),
    )


def manifold_from_name(name: str) -> ManifoldModel:
    """Resolve catalog names: ``euclidean(n)``, ``circle``, ``sphere2``, ``sphere2-ode``, ``torus2``."""
    key = name.strip().replace(" ", "")
    if key == "circle":
        return circle()
    if key == "sphere2":
        return sphere2()
    if key == "sphere2-ode":
        return sphere2(closed_form=False)
    if key == "torus2":
        return torus2()
    if key.startswith("euclidean(") and key.endswith(")"):
        try:
            n = int(key[len("euclidean("):-1])
        except ValueError:
            raise KeyError(f"bad dimension in {name!r}") from None
        if n < 1:
            raise KeyError(f"bad dimension in {name!r}")
        return euclidean(n)
    raise KeyError(f"unknown catalog manifold {name!r}")


def same_manifold(a: ManifoldModel, b: ManifoldModel) -> bool:
    return a is b or (a.name == b.name and a.dim == b.dim and a.embed_dim == b.embed_dim)


def sample_tangent(manifold: ManifoldModel, p, rng: np.random.Generator, scale: float = 1.0) -> TangentVector:
    chart = manifold.chart_at(p)
    comps = rng.normal(size=manifold.dim) * scale
    return TangentVector(np.asarray(p, float), comps, chart.id)


__all__ = [
    "Chart", "TangentVector", "ManifoldModel", "GeodesicCurve", "exp", "log", "distance",
    "in_injectivity_domain", "geodesic_integrate", "geodesic_length", "euclidean", "circle",
    "sphere2", "torus2", "manifold_from_name", "same_manifold", "christoffel_from_metric",
    "sample_tangent",
]

