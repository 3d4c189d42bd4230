"""Computable ingredients of the moving-spheres comparison argument.

Everything revolves around the Kelvin difference W - W^lam of an extended
profile, the coefficients b and q of the boundary identity it satisfies,
and a correction term A built from a Green potential.  The sweep locates
the largest inversion radius at which the corrected difference stays
nonnegative on a sample set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bubbles import KelvinMap
from .fields import ScalarField
from .params import Params

Array = np.ndarray


@dataclass
class ComparisonState:
    """One inversion radius worth of comparison data.

    ``extension`` evaluates W at half-space points (n+1 coordinates);
    ``trace`` is its boundary trace w; ``k_field`` the curvature factor K;
    ``L`` the peak scale; ``c4`` the correction amplitude; ``phi`` an
    optional Green potential entering the correction; ``exponent`` the
    power used in the algebraic part of the correction (default 2s - n).
    """

    params: Params
    trace: ScalarField
    extension: Callable[[Array], float]
    kelvin_radius: float
    k_field: ScalarField
    L: float = 1.0
    c4: float = 0.0
    phi: Optional[Callable[[Array], float]] = None
    exponent: Optional[float] = None

    def __post_init__(self):
        if not 0.5 <= self.kelvin_radius <= 2.0:
            raise ValueError("kelvin_radius must lie in [1/2, 2]")
        if self.L <= 0.0:
            raise ValueError("L must be positive")
        if self.c4 < 0.0:
            raise ValueError("c4 must be nonnegative")
        if self.exponent is None:
            self.exponent = 2.0 * self.params.sigma - self.params.n


def kelvin_difference(state: ComparisonState, Y: Array) -> float:
    """W(Y) - (lam/|Y|)^{n-2s} W(lam^2 Y / |Y|^2); domain error inside B_lam."""
    Y = np.asarray(Y, dtype=float).reshape(-1)
    r = float(np.linalg.norm(Y))
    lam = state.kelvin_radius
    if r < lam * (1.0 - 1e-12):
        raise ValueError("Y must lie outside B_lam")
    image = lam ** 2 * Y / r ** 2
    return (state.extension(Y)
            - (lam / r) ** state.params.kelvin_exp * state.extension(image))


def b_from_values(k_val: float, w_val: float, w_lam_val: float, p: float) -> float:
    """K (w^p - (w^lam)^p) / (w - w^lam), continuously extended across w = w^lam."""
    if w_val < 0 or w_lam_val < 0:
        raise ValueError("profile values must be nonnegative")
    diff = w_val - w_lam_val
    scale = max(w_val, w_lam_val, 1.0)
    if abs(diff) < 1e-12 * scale:
        return p * k_val * w_val ** (p - 1.0)
    return k_val * (w_val ** p - w_lam_val ** p) / diff


def b_coefficient(state: ComparisonState, y: Array) -> float:
    """The difference-quotient coefficient at a boundary point."""
    y = np.asarray(y, dtype=float).reshape(-1)
    lam = state.kelvin_radius
    if np.linalg.norm(y) < lam * (1.0 - 1e-12):
        raise ValueError("y must lie outside B_lam")
    k = KelvinMap(state.params, lam=lam)
    w_val = state.trace.at(y)
    w_lam = float(k.weight(y[None, :])[0]) * state.trace.at(k.point(y[None, :])[0])
    return b_from_values(state.k_field.at(y), w_val, w_lam, state.params.p)


def q_coefficient(state: ComparisonState, y: Array) -> float:
    """(K(y^lam) - K(y)) * (w^lam(y))^p at a boundary point."""
    y = np.asarray(y, dtype=float).reshape(-1)
    lam = state.kelvin_radius
    if np.linalg.norm(y) < lam * (1.0 - 1e-12):
        raise ValueError("y must lie outside B_lam")
    k = KelvinMap(state.params, lam=lam)
    y_im = k.point(y[None, :])[0]
    w_lam = float(k.weight(y[None, :])[0]) * state.trace.at(y_im)
    return (state.k_field.at(y_im) - state.k_field.at(y)) * w_lam ** state.params.p


def a_correction(state: ComparisonState, Y: Array) -> float:
    """-c4 L^{-1} (lam^e - |Y|^e) + Phi(Y), the comparison correction."""
    Y = np.asarray(Y, dtype=float).reshape(-1)
    r = float(np.linalg.norm(Y))
    lam = state.kelvin_radius
    e = state.exponent
    val = -state.c4 / state.L * (lam ** e - r ** e)
    if state.phi is not None:
        val += state.phi(Y)
    return val


def comparison_min(state: ComparisonState, samples: Array,
                   excluded: Optional[Array] = None) -> float:
    """min over samples of W_lam + A_lam, skipping B_lam and the excluded point."""
    lam = state.kelvin_radius
    worst = math.inf
    for Y in np.atleast_2d(samples):
        if np.linalg.norm(Y) < lam * (1.0 + 1e-12):
            continue
        if excluded is not None and np.linalg.norm(Y[:-1] - excluded) < 1e-2:
            continue
        worst = min(worst, kelvin_difference(state, Y) + a_correction(state, Y))
    return worst


def lambda_star_sweep(state_factory: Callable[[float], ComparisonState],
                      lambda_grid: Sequence[float], samples: Array,
                      excluded: Optional[Array] = None,
                      refine_to: float = 1e-3) -> dict:
    """Bracket the largest lam with nonnegative corrected difference.

    Scans the ascending grid for the first sign change of the sample
    minimum, then bisects the bracketing interval down to ``refine_to``.
    Returns ``lambda_star = None`` when the minimum never goes negative.
    """
    grid = list(lambda_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda_grid must be ascending")

    def min_at(lam: float) -> float:
        return comparison_min(state_factory(lam), samples, excluded)

    mins = [min_at(lam) for lam in grid]
    first_neg = next((i for i, m in enumerate(mins) if m < 0.0), None)
    if first_neg is None:
        return {"lambda_star": None, "grid": grid, "minima": mins}
    if first_neg == 0:
        return {"lambda_star": grid[0], "bracket": (grid[0], grid[0]),
                "grid": grid, "minima": mins}

    lo, hi = grid[first_neg - 1], grid[first_neg]
    while hi - lo > refine_to:
        mid = 0.5 * (lo + hi)
        if min_at(mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return {"lambda_star": lo, "bracket": (lo, hi), "grid": grid, "minima": mins}
