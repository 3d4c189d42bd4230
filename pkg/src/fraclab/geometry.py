"""Sphere means, spherical-cap fractions, and radial quadrature panels.

Everything here is plain geometry on spheres in R^n; the singular-integral
operators in :mod:`fraclab.fracops` are built on top of these pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy.special import betainc, roots_jacobi

Array = np.ndarray


# --- spherical-mean quadrature rules -------------------------------------

@lru_cache(maxsize=None)
def sphere_rule(n: int, m: int) -> Tuple[Array, Array]:
    """Quadrature rule (points, weights) averaging over the unit sphere S^{n-1}.

    Weights sum to one.  n = 1 is the two-point rule, n = 2 uses m uniform
    angles (exact on trigonometric polynomials of degree < m), n = 3 uses a
    Gauss-Legendre grid in the polar cosine crossed with uniform azimuths.
    """
    if n == 1:
        pts = np.array([[1.0], [-1.0]])
        wts = np.array([0.5, 0.5])
    elif n == 2:
        theta = 2.0 * math.pi * (np.arange(m) + 0.5) / m
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        wts = np.full(m, 1.0 / m)
    elif n == 3:
        m_pol = max(2, int(round(math.sqrt(m / 2.0))))
        m_az = max(4, 2 * m_pol)
        ct, cw = np.polynomial.legendre.leggauss(m_pol)
        phi = 2.0 * math.pi * (np.arange(m_az) + 0.5) / m_az
        st = np.sqrt(1.0 - ct ** 2)
        pts = np.empty((m_pol * m_az, 3))
        wts = np.empty(m_pol * m_az)
        k = 0
        for i in range(m_pol):
            for j in range(m_az):
                pts[k] = (st[i] * math.cos(phi[j]), st[i] * math.sin(phi[j]), ct[i])
                wts[k] = cw[i] / (2.0 * m_az)
                k += 1
    else:
        raise ValueError(f"sphere_rule supports n <= 3, got n={n}")
    return pts, wts


def sphere_mean(f: Callable[[Array], Array], center: Array, radius: float,
                n: int, m: int = 32) -> float:
    """Mean of f over the sphere of given radius about center."""
    pts, wts = sphere_rule(n, m)
    x = center[None, :] + radius * pts
    return float(np.dot(np.asarray(f(x), dtype=float), wts))


@lru_cache(maxsize=None)
def radial_sphere_rule(n: int, m: int) -> Tuple[Array, Array]:
    """Gauss-Jacobi rule for sphere means of radial functions, any n >= 2.

    For radial g, the mean of g(|x0 + s theta|) over theta in S^{n-1}
    equals the integral of g(sqrt(d^2 + s^2 + 2 d s t)) against the
    normalized weight (1-t^2)^{(n-3)/2} on t in (-1, 1), d = |x0|.
    Returns (t_nodes, weights) with weights summing to one.
    """
    alpha = (n - 3) / 2.0
    t, w = roots_jacobi(m, alpha, alpha)
    return t, w / w.sum()


def radial_sphere_mean(g: Callable[[Array], Array], d: float, s: float,
                       n: int, m: int = 32) -> float:
    """Mean of the radial profile g(|x|) over the sphere |x - x0| = s, |x0| = d."""
    if n == 1:
        vals = np.asarray(g(np.abs(np.array([d + s, d - s]))), dtype=float)
        return 0.5 * float(vals.sum())
    t, w = radial_sphere_rule(n, m)
    rr = np.sqrt(np.maximum(d * d + s * s + 2.0 * d * s * t, 0.0))
    return float(np.dot(np.asarray(g(rr), dtype=float), w))


# --- spherical caps -------------------------------------------------------

def cap_fraction(d: float, s: float, radius: float, n: int) -> float:
    """Fraction of the sphere |x - x0| = s lying inside the ball |x| <= radius.

    ``d`` is |x0|.  The boundary polar cosine is
    t0 = (radius^2 - d^2 - s^2) / (2 d s); the fraction is the normalized
    surface measure of {theta : <x0/d, theta> <= t0} ... computed through
    the regularized incomplete beta function.
    """
    if s <= 0.0:
        return 1.0 if d <= radius else 0.0
    if d + s <= radius:
        return 1.0
    if abs(d - s) >= radius:
        return 0.0 if d > radius or d >= s else 1.0
    if n == 1:
        # two points d - s and d + s; here exactly one is inside
        return 0.5
    t0 = (radius * radius - d * d - s * s) / (2.0 * d * s)
    t0 = min(1.0, max(-1.0, t0))
    a = (n - 1) / 2.0
    return float(betainc(a, a, (1.0 + t0) / 2.0))


# --- composite radial panels ----------------------------------------------

_GL8 = np.polynomial.legendre.leggauss(8)
_GL4 = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class PanelRule:
    """Composite Gauss-Legendre rule with an embedded lower-order estimate."""

    nodes: Array
    weights: Array
    nodes_coarse: Array
    weights_coarse: Array


def geometric_panels(s_min: float, s_max: float, per_decade: int = 4) -> Array:
    """Panel breakpoints growing geometrically from s_min to s_max."""
    if not (0.0 < s_min < s_max):
        raise ValueError("need 0 < s_min < s_max")
    decades = math.log10(s_max / s_min)
    k = max(1, int(math.ceil(decades * per_decade)))
    return s_min * (s_max / s_min) ** (np.arange(k + 1) / k)


def panel_rule(breaks: Array) -> PanelRule:
    """Gauss-Legendre(8) on each panel, with embedded GL(4) for error estimates."""
    lo = breaks[:-1]
    hi = breaks[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)

    x8, w8 = _GL8
    nodes = (mid[:, None] + half[:, None] * x8[None, :]).ravel()
    weights = (half[:, None] * w8[None, :]).ravel()

    x4, w4 = _GL4
    nodes_c = (mid[:, None] + half[:, None] * x4[None, :]).ravel()
    weights_c = (half[:, None] * w4[None, :]).ravel()
    return PanelRule(nodes, weights, nodes_c, weights_c)


def integrate_panels(g: Callable[[Array], Array], rule: PanelRule) -> Tuple[float, float]:
    """Integral of g over the panels and a coarse-vs-fine error estimate."""
    fine = float(np.dot(np.asarray(g(rule.nodes), dtype=float), rule.weights))
    coarse = float(np.dot(np.asarray(g(rule.nodes_coarse), dtype=float),
                          rule.weights_coarse))
    return fine, abs(fine - coarse)
