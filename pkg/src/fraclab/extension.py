"""Degenerate-elliptic extension of fields to the upper half space.

The extension of u is

    U(y, t) = gamma * int_{R^n} t^{2s} (|y - z|^2 + t^2)^{-(n+2s)/2} u(z) dz,

which after the substitution z = y + t r theta collapses to a radial
integral of sphere means:

    U(y, t) = gamma * omega * int_0^inf r^{n-1} (1+r^2)^{-(n+2s)/2} S_u(y, t r) dr.

U solves div(t^{1-2s} grad U) = 0 for t > 0 with trace u, and its conormal
derivative -lim t^{1-2s} dU/dt recovers d_sigma * (-Lap)^s u.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from . import constants, geometry
from .fields import QuadratureSpec, ScalarField
from .fracops import _sphere_means
from .params import Params

Array = np.ndarray


def extend(field: ScalarField, y: Array, t: float, params: Params,
           spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Value of the extension U(y, t) for t > 0."""
    if t <= 0.0:
        raise ValueError("the extension is evaluated at t > 0")
    y = np.asarray(y, dtype=float).reshape(-1)
    cset = constants.constant_set(params)
    n, s2 = params.n, 2.0 * params.sigma

    outer = 1e4
    breaks = geometry.geometric_panels(1e-8, outer, spec.panels_per_decade)
    rule = geometry.panel_rule(breaks)
    means = _sphere_means(field, y, t * rule.nodes, spec.angular_points)
    kern = rule.nodes ** (n - 1) * (1.0 + rule.nodes ** 2) ** (-(n + s2) / 2.0)
    val = float(np.dot(means * kern, rule.weights))

    # tail: the kernel decays like r^{-1-2s}; treat u as frozen past outer
    s_tail = _sphere_means(field, y, np.array([t * outer]), spec.angular_points)[0]
    val += s_tail * outer ** (-s2) / s2
    return cset.gamma_poisson * cset.sphere_area * val


def conormal_derivative(field: ScalarField, y: Array, params: Params,
                        spec: QuadratureSpec = QuadratureSpec(),
                        t_scale: float = 1.0) -> float:
    """-lim_{t->0} t^{1-2s} dU/dt, by Richardson extrapolation along t_k = 2^{-k}.

    The extension satisfies t^{1-2s} dU/dt = -conormal + O(t^{2-2s}), so
    successive halvings of t are combined with that exponent; the pair
    whose extrapolants agree best is returned.
    """
    s = params.sigma
    q = 0.05
    e = 2.0 - 2.0 * s
    rho = 2.0 ** (-e)

    def g(t: float) -> float:
        du = (extend(field, y, t * (1 + q), params, spec)
              - extend(field, y, t * (1 - q), params, spec)) / (2 * q * t)
        return -t ** (1.0 - 2.0 * s) * du

    ladder = [g(t_scale * 2.0 ** (-k)) for k in range(3, 13)]
    extrap = [(ladder[i + 1] - rho * ladder[i]) / (1.0 - rho)
              for i in range(len(ladder) - 1)]
    diffs = [abs(extrap[i + 1] - extrap[i]) for i in range(len(extrap) - 1)]
    best = int(np.argmin(diffs))
    return extrap[best + 1]


def degenerate_residual(field: ScalarField, y: Array, t: float, params: Params,
                        h: float = None,
                        spec: QuadratureSpec = QuadratureSpec()) -> float:
    """t^{1-2s} * (Lap_y U + U_tt + (1-2s)/t * U_t) by central differences.

    Zero (up to quadrature and stencil error) exactly when U solves the
    degenerate extension equation.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    s = params.sigma
    if h is None:
        h = 0.02 * t

    u0 = extend(field, y, t, params, spec)
    lap = 0.0
    for i in range(params.n):
        e_i = np.zeros(params.n)
        e_i[i] = h
        lap += (extend(field, y + e_i, t, params, spec)
                + extend(field, y - e_i, t, params, spec) - 2.0 * u0) / h ** 2
    up = extend(field, y, t + h, params, spec)
    um = extend(field, y, t - h, params, spec)
    u_tt = (up + um - 2.0 * u0) / h ** 2
    u_t = (up - um) / (2.0 * h)
    return t ** (1.0 - 2.0 * s) * (lap + u_tt + (1.0 - 2.0 * s) / t * u_t)


def model_bubble_extension_halforder(y: Array, t: float, params: Params) -> float:
    """Closed-form extension of (1+|y|^2)^{-(n-1)/2} at sigma = 1/2.

    For sigma = 1/2 the extension operator is the classical harmonic
    Poisson kernel of the half space, and the model bubble extends to
    ((1+t)^2 + |y|^2)^{-(n-1)/2}.
    """
    if abs(params.sigma - 0.5) > 1e-12:
        raise ValueError("closed form only at sigma = 1/2")
    y = np.asarray(y, dtype=float).reshape(-1)
    r2 = float(np.dot(y, y))
    return ((1.0 + t) ** 2 + r2) ** (-params.half_exp)
