"""Exponential charts on spaces of smooth maps, compact-support equivalence, chart changes and the geodesic homotopy."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .common import DEFAULT_SAMPLES, TOL_ALG
from .errors import OutsideChartDomain, OutsideDiagonalNeighborhood, ParameterOutOfRange, VelocityTooLarge
from .geometry import ManifoldModel, TangentVector, distance, exp, in_injectivity_domain, log, same_manifold
from .maps import SmoothMapRep

Array = np.ndarray
CHECK_SAMPLES = 64


@dataclass(frozen=True, eq=False)
class SupportRegion:
    """A compact region of the source: ``predicate`` intersected with the embedded box ``(lo, hi)``."""

    predicate: Callable[[Array], bool]
    box: tuple
    name: str = "K"

    def __post_init__(self):
        lo, hi = (np.asarray(b, float) for b in self.box)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
            raise ValueError("support box must be bounded and ordered")
        object.__setattr__(self, "box", (lo, hi))

    def contains(self, x) -> bool:
        x = np.asarray(x, float)
        lo, hi = self.box
        return bool(np.all(x >= lo) and np.all(x <= hi) and self.predicate(x))

    def __contains__(self, x) -> bool:
        return self.contains(x)


def empty_region(manifold: ManifoldModel) -> SupportRegion:
    k = manifold.embed_dim
    return SupportRegion(lambda x: False, (np.zeros(k), np.zeros(k)), "empty")


def whole_region(manifold: ManifoldModel, radius: float = 1.0) -> SupportRegion:
    """All of a compact catalog manifold sitting inside the cube [-radius, radius]^k."""
    k = manifold.embed_dim
    return SupportRegion(lambda x: True, (-radius * np.ones(k), radius * np.ones(k)), "whole")


def ball_region(center, radius: float, name: str = "ball") -> SupportRegion:
    """Closed embedded ball around ``center``."""
    c = np.asarray(center, float)
    return SupportRegion(lambda x: float(np.linalg.norm(x - c)) <= radius, (c - radius, c + radius), name)


@dataclass(frozen=True, eq=False)
class TangentSection:
    """x -> a tangent vector of the target at base_map(x), vanishing off ``support``."""

    base_map: SmoothMapRep
    values: Callable[[Array], TangentVector]
    support: SupportRegion

    def __call__(self, x) -> TangentVector:
        return self.values(np.asarray(x, float))

    def ambient(self, x) -> Array:
        return self.base_map.target.ambient(self(x))

    def norm(self, x) -> float:
        return self.base_map.target.norm(self(x))

    def scaled(self, t: float) -> "TangentSection":
        return TangentSection(self.base_map, lambda x: self.values(x).scaled(t), self.support)


def tangent_projection(manifold: ManifoldModel, p, ambient) -> TangentVector:
    """Euclidean-orthogonal projection of an ambient vector onto the tangent space at ``p``."""
    p = np.asarray(p, float)
    chart = manifold.chart_at(p)
    basis = chart.d_embedded(chart.to_local(p))
    comps = np.linalg.lstsq(basis, np.asarray(ambient, float), rcond=None)[0]
    return TangentVector(p, comps, chart.id)


def ambient_section(base_map: SmoothMapRep, field: Callable[[Array], Array], support: SupportRegion) -> TangentSection:
    """Section from an ambient vector field ``field(x)`` projected onto the tangent spaces along base_map."""
    target = base_map.target
    return TangentSection(base_map, lambda x: tangent_projection(target, base_map(x), field(x)), support)


def zero_section(base_map: SmoothMapRep, support: SupportRegion | None = None) -> TangentSection:
    target = base_map.target
    return TangentSection(base_map, lambda x: target.zero(base_map(x)), support or empty_region(base_map.source))


def _outside(manifold: ManifoldModel, K: SupportRegion, n: int, seed: int) -> list:
    return manifold.sample(n, seed, where=lambda x: not K.contains(x))


def _check_maps(phi: SmoothMapRep, psi: SmoothMapRep):
    if not (same_manifold(phi.source, psi.source) and same_manifold(phi.target, psi.target)):
        raise ValueError(f"maps {phi.name} and {psi.name} have different source or target")


def equivalent_off_compact(phi: SmoothMapRep, psi: SmoothMapRep, K: SupportRegion,
                           sample_count: int = DEFAULT_SAMPLES, seed: int = 0, tol: float = TOL_ALG) -> bool:
    """Sampled check that phi and psi agree outside K."""
    _check_maps(phi, psi)
    if phi is psi:
        return True
    N = phi.target
    return all(distance(N, phi(x), psi(x)) < tol for x in _outside(phi.source, K, sample_count, seed))


def in_chart_domain(phi: SmoothMapRep, psi: SmoothMapRep, K: SupportRegion,
                    sample_count: int = DEFAULT_SAMPLES, seed: int = 0, tol: float = TOL_ALG) -> bool:
    """Sampled membership of psi in the chart domain centred at phi."""
    if not equivalent_off_compact(phi, psi, K, sample_count, seed, tol):
        return False
    N = phi.target
    return all(in_injectivity_domain(N, phi(x), psi(x)) for x in phi.source.sample(sample_count, seed))


def chart_forward(phi: SmoothMapRep, psi: SmoothMapRep, K: SupportRegion,
                  check_samples: int = CHECK_SAMPLES, seed: int = 0) -> TangentSection:
    """Chart coordinates of psi centred at phi: x -> log(phi(x), psi(x))."""
    if check_samples and not in_chart_domain(phi, psi, K, check_samples, seed):
        raise OutsideChartDomain(f"{psi.name} is not in the chart domain centred at {phi.name}")
    N = phi.target

    def values(x):
        try:
            return log(N, phi(x), psi(x))
        except OutsideDiagonalNeighborhood as exc:
            raise OutsideChartDomain(str(exc)) from exc

    return TangentSection(phi, values, K)


def chart_inverse(section: TangentSection, check_samples: int = CHECK_SAMPLES, seed: int = 0,
                  name: Optional[str] = None) -> SmoothMapRep:
    """The map x -> exp(phi(x), section(x))."""
    phi = section.base_map
    N = phi.target
    if check_samples:
        for x in phi.source.sample(check_samples, seed):
            nrm = section.norm(x)
            if nrm >= N.injectivity_bound:
                raise VelocityTooLarge(f"section norm {nrm:.6g} >= r_inj = {N.injectivity_bound:.6g}")
    return SmoothMapRep(phi.source, N, lambda x: exp(N, phi(x), section(x)), name or f"exp_{phi.name}", {})


def homotopy(section: TangentSection, t: float, check_samples: int = CHECK_SAMPLES, seed: int = 0) -> SmoothMapRep:
    """psi_t = x -> exp(phi(x), t * section(x)); psi_0 is phi and psi_1 the chart inverse."""
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"homotopy parameter {t} outside [0, 1]")
    return chart_inverse(section.scaled(t), check_samples, seed, name=f"homotopy_{section.base_map.name}({t:g})")


def chart_change(phi: SmoothMapRep, psi: SmoothMapRep, section: TangentSection,
                 support: SupportRegion | None = None, check_samples: int = CHECK_SAMPLES,
                 seed: int = 0) -> TangentSection:
    """Re-express chart coordinates centred at psi as coordinates centred at phi.

    ``support`` is the compact set off which the represented map agrees with
    phi; it defaults to the section's own support.
    """
    if section.base_map is not psi:
        _check_maps(section.base_map, psi)
    mapped = chart_inverse(section, check_samples, seed)
    return chart_forward(phi, mapped, support or section.support, check_samples, seed)


def section_distance(a: TangentSection, b: TangentSection, sample_count: int = DEFAULT_SAMPLES,
                     seed: int = 0) -> float:
    """Sup over samples of the ambient difference of two sections over the same base map."""
    worst = 0.0
    for x in a.base_map.source.sample(sample_count, seed):
        worst = max(worst, float(np.max(np.abs(a.ambient(x) - b.ambient(x)))))
    return worst


def map_distance(a: SmoothMapRep, b: SmoothMapRep, sample_count: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Sup over samples of the geodesic distance between a(x) and b(x)."""
    N = a.target
    return max((distance(N, a(x), b(x)) for x in a.source.sample(sample_count, seed)), default=0.0)


__all__ = [
    "SupportRegion", "TangentSection", "empty_region", "whole_region", "ball_region", "tangent_projection",
    "ambient_section", "zero_section", "equivalent_off_compact", "in_chart_domain", "chart_forward",
    "chart_inverse", "homotopy", "chart_change", "section_distance", "map_distance",
]
