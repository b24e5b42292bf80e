"""Tolerances, validation reports and small numerical helpers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import SingularTransition

TOL_ALG = 1e-9
TOL_ODE = 1e-6
DEFAULT_SAMPLES = 256
DEFAULT_SEED = 0
CONDITION_GUARD = 1e8


@dataclass
class ValidationReport:
    """Outcome of a sampled identity check.

    ``residuals`` maps a named sub-identity to its maximum residual over the
    samples; ``max_residual`` is the largest of them.
    """

    check: str
    passed: bool
    max_residual: float
    sample_count: int
    tolerance: float
    residuals: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def max_abs(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))


def halton(dim: int, n: int, seed: int) -> np.ndarray:
    """``n`` points of a scrambled Halton sequence in ``[0, 1)^dim``."""
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(n)


def guarded_inv(m, what: str = "matrix", error=SingularTransition) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond >= CONDITION_GUARD:
        raise error(f"{what} is near-singular (condition number {cond:.3g})")
    return np.linalg.inv(m)


def central_jacobian(f, x, h: float) -> np.ndarray:
    """Central finite-difference Jacobian of ``f`` at ``x``; shape (len(f(x)), len(x))."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(f(x + e), float) - np.asarray(f(x - e), float)) / (2 * h))
    return np.stack(cols, axis=-1)
