"""Constraint-driven multi-bubble construction of large singular solutions.

The assembled object is u = u0 + sum of bubbles psi_{lambda_i}(x - x_i),
with every sequence (k_i, M_i, rho_i, lambda_i, eps_i) selected so that a
long list of pointwise inequalities holds.  The selected scales are
extreme (M_1 ~ 2^217 forces 1 - k_1 ~ 1e-131 and lambda_1 ~ 1e-135 in the
reference run), so the plan stores 1 - k_i instead of k_i and all bubble
powers are evaluated in log space.

Points near the ring of bubble centers must be described relative to a
center (``(anchor_index, offset)``): the centers are separated by ~1e-66
while sitting on a sphere of radius ~1e-2, so absolute coordinates cannot
resolve the local geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import constants, fracops
from .fields import ScalarField
from .params import Params

Array = np.ndarray
Point = Union[Array, Tuple[int, Array]]

LOG2 = math.log(2.0)


# --- envelope functions ----------------------------------------------------

def f_val(z1: float, z2: float, z3: float, params: Params) -> float:
    """z2 (z1 + z3)^p - z1^p, evaluated stably for very large z1.

    For z1 large the two terms nearly cancel against the scale z1^p, so
    the value is computed as z1^p * expm1(log z2 + p log1p(z3/z1)).
    """
    p = params.p
    if z1 < 0 or z2 <= 0 or z3 <= 0:
        raise ValueError("need z1 >= 0, z2 > 0, z3 > 0")
    if z1 == 0.0:
        return z2 * z3 ** p
    ratio = z3 / z1
    if not math.isfinite(ratio) or ratio > 1e12:
        # z1^p is negligible against z2 (z1 + z3)^p: no cancellation
        return z2 * (z1 + z3) ** p - z1 ** p
    term = math.expm1(math.log(z2) + p * math.log1p(ratio))
    if term == 0.0:
        return 0.0
    return math.copysign(math.exp(p * math.log(z1) + math.log(abs(term))), term)


def _one_minus_power(z2: float, q: float, one_minus_z2: Optional[float]) -> float:
    """1 - z2^q without cancellation, using 1 - z2 when provided."""
    if one_minus_z2 is not None:
        return -math.expm1(q * math.log1p(-one_minus_z2))
    return -math.expm1(q * math.log(z2))


def m_val(z2: float, z3: float, params: Params,
          one_minus_z2: Optional[float] = None) -> float:
    """Envelope maximum z2 z3^p / (1 - z2^{(n-2s)/4s})^{4s/(n-2s)}."""
    if not (0.0 < z2 < 1.0) and one_minus_z2 is None:
        raise ValueError("m_val requires z2 in (0, 1)")
    q = params.kelvin_exp / (4.0 * params.sigma)
    gap = _one_minus_power(z2, q, one_minus_z2)
    lz2 = math.log1p(-one_minus_z2) if one_minus_z2 is not None else math.log(z2)
    return math.exp(lz2 + params.p * math.log(z3) - math.log(gap) / q)


def z_val(z2: float, z3: float, params: Params,
          one_minus_z2: Optional[float] = None) -> float:
    """Envelope argmax z3 z2^{(n-2s)/4s} / (1 - z2^{(n-2s)/4s})."""
    if not (0.0 < z2 < 1.0) and one_minus_z2 is None:
        raise ValueError("z_val requires z2 in (0, 1)")
    q = params.kelvin_exp / (4.0 * params.sigma)
    gap = _one_minus_power(z2, q, one_minus_z2)
    lz2 = math.log1p(-one_minus_z2) if one_minus_z2 is not None else math.log(z2)
    return math.exp(math.log(z3) + q * lz2 - math.log(gap))


def big_f_val(z1: float, z2: float, z3: float, params: Params,
              one_minus_z2: Optional[float] = None) -> float:
    """Monotone envelope F: f below the argmax, frozen at the max beyond it."""
    z2_eff = 1.0 - one_minus_z2 if one_minus_z2 is not None else z2
    if z2_eff >= 1.0 and (one_minus_z2 is None or one_minus_z2 <= 0.0):
        return f_val(z1, z2, z3, params)
    if z1 <= z_val(z2, z3, params, one_minus_z2):
        return f_val(z1, z2, z3, params)
    return m_val(z2, z3, params, one_minus_z2)


def talia_ratio(a_list: Sequence[float], p: float) -> Tuple[float, float]:
    """Power-sum ratio and its two-term bound: ratio <= bound < 1.

    The first entry must be maximal; the bound uses the second entry.
    """
    a = np.asarray(a_list, dtype=float)
    if a.size < 2 or np.any(a <= 0):
        raise ValueError("need >= 2 positive entries")
    if np.any(a[1:] > a[0]):
        raise ValueError("first entry must be maximal")
    if p <= 1.0:
        raise ValueError("need p > 1")
    scaled = a / a[0]
    ratio = float(np.sum(scaled ** p) / np.sum(scaled) ** p)
    t = a[1] / a[0]
    bound = (1.0 + t) / (1.0 + p * t)
    if not ratio <= bound < 1.0:
        raise AssertionError("power-sum bound violated")
    return ratio, bound


# --- smooth cutoff ---------------------------------------------------------

def _phi_bump(s: float) -> float:
    return math.exp(-1.0 / s) if s > 0.0 else 0.0


def eta_cutoff(t: float) -> float:
    """Smooth bump: 1 on [0, 1], 0 on [3/2, oo)."""
    if t <= 1.0:
        return 1.0
    if t >= 1.5:
        return 0.0
    s = (1.5 - t) / 0.5
    return _phi_bump(s) / (_phi_bump(s) + _phi_bump(1.0 - s))


def eta_cutoff_prime(t: float) -> float:
    """Derivative of the cutoff, by the quotient rule on the bump ratio."""
    if t <= 1.0 or t >= 1.5:
        return 0.0
    s = (1.5 - t) / 0.5
    a, b = _phi_bump(s), _phi_bump(1.0 - s)
    da = a / s ** 2
    db = -b / (1.0 - s) ** 2
    g_prime = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return -2.0 * g_prime


ETA_PRIME_SUP = max(abs(eta_cutoff_prime(1.0 + 0.5 * i / 400)) for i in range(401))


# --- the sequence plan -----------------------------------------------------

@dataclass
class SequencePlan:
    """Full record of one construction run (possibly reduced to N bubbles)."""

    params: Params
    a: float
    b: float
    delta: float
    delta1: float
    delta2: float
    i0: int
    beta: float
    n_mat: int                 # materialized bubble count N
    reduced: bool
    eps: Array                 # per materialized index
    one_minus_k: Array
    m_big: Array               # M_i
    rho: Array
    lam: Array
    r_small: Array
    centers: Array             # (N, n) absolute coordinates
    ring_radius: float         # circumradius of the i0-gon
    amplitude: float           # c_{n, sigma}
    w0: float                  # w(0)
    margins: dict = field(default_factory=dict)

    @property
    def tail_coeff(self) -> float:
        return 2.0 ** (-self.n_mat)

    def k_value(self, i: int) -> float:
        return 1.0 - self.one_minus_k[i]

    def w_profile(self, r) -> np.ndarray:
        """w(x) = c (2b)^{-n/2s} (1 + |x|^2)^{-(n-2s)/2}."""
        pref = self.amplitude * (2.0 * self.b) ** (-self.params.n / (2.0 * self.params.sigma))
        return pref * (1.0 + np.asarray(r, dtype=float) ** 2) ** (-self.params.half_exp)

    def center_difference(self, i: int, j: int) -> Array:
        """x_i - x_j to full relative precision (exact ring trigonometry)."""
        n = self.params.n
        out = np.zeros(n)
        ring = min(self.n_mat, self.i0)
        if i < ring and j < ring:
            ti = 2.0 * math.pi * i / self.i0
            tj = 2.0 * math.pi * j / self.i0
            half_sum = 0.5 * (ti + tj)
            half_diff = 0.5 * (ti - tj)
            out[0] = -2.0 * self.ring_radius * math.sin(half_sum) * math.sin(half_diff)
            out[1] = 2.0 * self.ring_radius * math.cos(half_sum) * math.sin(half_diff)
            return out
        return self.centers[i] - self.centers[j]

    def distances_to_centers(self, pt: Point) -> Tuple[Array, float]:
        """(|x - x_i| for all materialized i, |x|) for absolute or anchored points."""
        if isinstance(pt, tuple):
            anchor, offset = pt
            offset = np.asarray(offset, dtype=float)
            dists = np.empty(self.n_mat)
            for j in range(self.n_mat):
                dists[j] = float(np.linalg.norm(
                    offset + self.center_difference(anchor, j)))
            base = self.centers[anchor]
            radius = float(np.linalg.norm(base + offset))
            return dists, radius
        x = np.asarray(pt, dtype=float)
        dists = np.linalg.norm(x[None, :] - self.centers, axis=1)
        return dists, float(np.linalg.norm(x))


# --- bubble evaluation in log space ---------------------------------------

def bubble_log_profile(lam: float, s, amplitude: float, params: Params):
    """log psi_lambda at distance s from the center (vectorized)."""
    s = np.asarray(s, dtype=float)
    return (math.log(amplitude)
            + params.half_exp * (math.log(lam) - np.log(lam * lam + s * s)))


def bubble_logs(plan: SequencePlan, pt: Point) -> Array:
    """log u_i(x) for every materialized bubble."""
    dists, _ = plan.distances_to_centers(pt)
    out = np.empty(plan.n_mat)
    for i in range(plan.n_mat):
        out[i] = bubble_log_profile(plan.lam[i], dists[i], plan.amplitude,
                                    plan.params)
    return out


def _sum_exp(logs: Array) -> Tuple[float, float]:
    """(log of max term, sum of exp(logs - max))."""
    top = float(np.max(logs))
    return top, float(np.sum(np.exp(logs - top)))


def bubble_sum(plan: SequencePlan, pt: Point) -> float:
    top, s = _sum_exp(bubble_logs(plan, pt))
    return math.exp(top) * s if top > -700 else 0.0


# --- plan construction -----------------------------------------------------

def i0_from_formula(params: Params, a: float) -> int:
    """Smallest integer > 2 whose power beats the crowding threshold."""
    n, s = params.n, params.sigma
    rhs = (2.0 ** ((3 * n + 2 * s) / (n - 2 * s))
           / (2.0 * a) ** ((n + 2 * s) / (4 * s)))
    i0 = max(3, int(math.floor(rhs ** ((n - 2 * s) / (4 * s)))) + 1)
    while i0 ** (4 * s / (n - 2 * s)) <= rhs:
        i0 += 1
    return i0


def beta_from_formula(params: Params) -> float:
    """(n - 2s - 3) s / (3 (s + 1) (n - 2s - 1)), positive when n > 2s + 3."""
    n, s = params.n, params.sigma
    if n <= 2 * s + 3:
        raise ValueError("beta formula requires n > 2 sigma + 3")
    return (n - 2 * s - 3) * s / (3.0 * (s + 1.0) * (n - 2 * s - 1.0))


def m_from_one_minus_k(m1k: float, params: Params) -> float:
    """M_i = k_i / (1 - k_i^{(n-2s)/4s})^{4s/(n-2s)} from the stored 1 - k_i."""
    q = params.kelvin_exp / (4.0 * params.sigma)
    gap = -math.expm1(q * math.log1p(-m1k))
    return math.exp(math.log1p(-m1k) - math.log(gap) / q)


def one_minus_k_for_m(m_target: float, params: Params) -> float:
    """Invert m_from_one_minus_k by bisection in log(1 - k)."""
    lo, hi = -740.0, math.log(0.5)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if m_from_one_minus_k(math.exp(mid), params) > m_target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def _ratio_cond_ok(delta: float, delta1: float, delta2: float, params: Params,
                   rng: np.random.Generator, samples: int = 1000) -> bool:
    """Sampled check of the two-center comparability condition.

    For |x| <= delta2 or |x| >= delta, any centers on the sphere of radius
    delta1 and any lam <= delta2, the two shifted bubbles must agree
    within a factor 2.
    """
    n, he = params.n, params.half_exp
    for trial in range(samples):
        lam = delta2 * rng.random()
        x1 = rng.normal(size=n)
        x1 *= delta1 / np.linalg.norm(x1)
        x2 = rng.normal(size=n)
        x2 *= delta1 / np.linalg.norm(x2)
        inner = trial % 2 == 0
        x = rng.normal(size=n)
        if inner:
            x *= delta2 * rng.random() / np.linalg.norm(x)
        else:
            x *= delta * (1.0 + 3.0 * rng.random()) / np.linalg.norm(x)
        s1 = np.linalg.norm(x - x1)
        s2 = np.linalg.norm(x - x2)
        ratio = ((lam ** 2 + s2 ** 2) / (lam ** 2 + s1 ** 2)) ** he
        if not 0.5 < ratio < 2.0:
            return "inner" if inner else "outer"
    return ""


def choose_deltas(params: Params, delta: float, seed: int = 5) -> Tuple[float, float]:
    """delta1, delta2 from the documented defaults, shrunk until feasible.

    The nominal delta1 = delta/4.01 fails the comparability sweep for
    n = 5, sigma = 1/2 (far-sample ratios reach ~7.7), so both radii are
    shrunk geometrically until the sweep passes.
    """
    rng = np.random.default_rng(seed)
    delta1 = delta / 4.01
    delta2 = delta1 / 2.01
    for _ in range(60):
        bad = _ratio_cond_ok(delta, delta1, delta2, params, rng)
        if not bad:
            return delta1, delta2
        if bad == "outer":
            delta1 *= 0.5
        delta2 = min(delta2 * 0.5, delta1 / 2.01)
    raise RuntimeError("could not satisfy the two-center ratio condition")


def rho_from_constraint(plan_like: dict, i: int, params: Params) -> float:
    """Largest rho with I_{2s}(indicator of B_{2 rho}(x_i)) under its budget.

    Feasibility of the pointwise bound is certified at the center, on a
    radial ladder, and by far-field coefficient comparison in logs; the
    bisection runs in log rho.
    """
    n, s2 = params.n, 2.0 * params.sigma
    cset = constants.constant_set(params)
    d_center = plan_like["center_radius"]
    m_i = plan_like["m_big"]
    w0 = plan_like["w0"]
    w_pref = math.log(plan_like["amplitude"]) \
        - (n / s2) * math.log(2.0 * plan_like["b"])
    log_budget_const = (-(i + 2) * LOG2 - params.p * math.log(2.0 * w0)
                        - math.log(m_i))

    def log_rhs(dist: float) -> float:
        # smallest w on the sphere of radius dist about x_i
        r_far = d_center + dist
        return w_pref - params.half_exp * math.log1p(r_far ** 2) + log_budget_const \
            + LOG2  # budget uses 2^{i+1}; log_budget_const carries 2^{i+2}

    def feasible(log_rho: float) -> bool:
        rho = math.exp(log_rho)
        # center: I(0) = r omega (2 rho)^{2s} / (2s)
        log_lhs0 = (math.log(cset.riesz_constant * cset.sphere_area / s2)
                    + s2 * (log_rho + LOG2))
        if log_lhs0 > log_rhs(0.0):
            return False
        # radial ladder out to 10^3
        for dist in np.geomspace(rho, 1e3, 24):
            lhs = fracops.riesz_ball_indicator(dist, 2.0 * rho, params)
            if lhs <= 0.0:
                continue
            if math.log(lhs) > log_rhs(dist):
                return False
        # far field: r vol(B_{2rho}) dist^{2s-n} vs coefficient of w-side
        log_far_lhs = (math.log(cset.riesz_constant * cset.sphere_area / n)
                       + n * (log_rho + LOG2))
        log_far_rhs = w_pref + log_budget_const + LOG2
        return log_far_lhs <= log_far_rhs

    lo, hi = -740.0, math.log(plan_like["r_small"])
    if feasible(hi):
        return math.exp(hi)
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def lambda_from_constraint(plan_like: dict, i: int, params: Params) -> float:
    """Largest lam with psi_lam <= eps a^{(n-2s)/4s} w outside B_rho(x_i).

    Certified on the binding sphere |x - x_i| = rho, a radial ladder, and
    the far-field coefficient comparison; bisection in log lam.
    """
    he = params.half_exp
    rho = plan_like["rho"]
    eps = plan_like["eps"]
    a = plan_like["a"]
    d_center = plan_like["center_radius"]
    amp = plan_like["amplitude"]
    q = params.kelvin_exp / (4.0 * params.sigma)
    w_pref = math.log(amp) - (params.n / (2.0 * params.sigma)) \
        * math.log(2.0 * plan_like["b"])
    log_eps_aw = math.log(eps) + q * math.log(a) + w_pref

    def log_rhs(dist: float) -> float:
        r_far = d_center + dist
        return log_eps_aw - he * math.log1p(r_far ** 2)

    def feasible(log_lam: float) -> bool:
        lam = math.exp(log_lam)
        if lam >= rho:
            return False
        for dist in np.geomspace(rho, 1e3, 32):
            log_psi = (math.log(amp)
                       + he * (log_lam - math.log(lam * lam + dist * dist)))
            if log_psi > log_rhs(dist):
                return False
        # far field coefficient: amp lam^{he} vs eps a^q amp (2b)^{-n/2s}
        return math.log(amp) + he * log_lam <= log_eps_aw

    lo, hi = -740.0, math.log(rho) - 1e-9
    if not feasible(lo + 1.0):
        raise RuntimeError("lambda constraint infeasible even at the floor")
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


class InfeasiblePlanError(RuntimeError):
    """Raised when the search budget cannot satisfy a named constraint."""


def plan_sequences(params: Params, k: ScalarField,
                   phi: Callable[[float], float], N: int,
                   delta: float = 0.5, search_budget: int = 60,
                   seed: int = 5) -> SequencePlan:
    """Select every sequence of the construction for N materialized bubbles.

    Reduced mode (N < i0) materializes N consecutive ring vertices of the
    regular polygon; eps is shared on the ring while k, M, rho, lambda
    follow their per-index budgets, so every materialized index satisfies
    its own constraints and the geometric scaling laws across indices.
    """
    n, s = params.n, params.sigma
    if n <= 2 * s + 3:
        raise InfeasiblePlanError("requires n > 2 sigma + 3")
    cset = constants.constant_set(params)
    amp = cset.bubble_constant

    # sampled bounds of k; the construction assumes k == 1 near the origin
    rng = np.random.default_rng(seed)
    probe = rng.normal(size=(4000, n))
    probe *= (10.0 ** rng.uniform(-2, 2, size=4000) / np.linalg.norm(probe, axis=1))[:, None]
    kv = k(probe)
    if np.any(kv <= 0.0):
        raise InfeasiblePlanError("k must be positive")
    near = kv[np.linalg.norm(probe, axis=1) <= delta]
    if near.size and np.max(np.abs(near - 1.0)) > 1e-12:
        raise InfeasiblePlanError("k must equal 1 on the core ball")
    a = 0.5 * float(np.min(kv))
    b = float(np.max(kv))

    i0 = i0_from_formula(params, a)
    beta = beta_from_formula(params)
    reduced = N < i0
    if N < 1:
        raise InfeasiblePlanError("N must be >= 1")
    delta1, delta2 = choose_deltas(params, delta, seed=seed)
    w0 = amp * (2.0 * b) ** (-n / (2.0 * s))
    p = params.p
    q = params.kelvin_exp / (4.0 * s)

    ring = min(N, i0)
    eps_ring = 2.0 ** (-ring)
    r_ring = delta2 / 2.0

    def m_formula(i: int) -> float:
        return max(9.0 ** i, max(eps_ring ** (-4 * s / params.kelvin_exp),
                                 2.0 ** i) ** (1.0 / beta)) * 2.0

    # worst ring index first: escalate M until every ring constraint passes
    worst_i = ring
    m_target = m_formula(worst_i)
    k_floor = ((1.0 + 3.0 ** (-params.kelvin_exp))
               / (1.0 + p * 3.0 ** (-params.kelvin_exp))) ** (4 * s / (n + 2 * s))

    plan = None
    failure = "k escalation budget exhausted"
    for attempt in range(search_budget):
        m1k = one_minus_k_for_m(m_target, params)
        if 1.0 - m1k <= max(0.5 + 1e-9, k_floor):
            m_target *= 4.0
            failure = "k_i floor violated"
            continue
        m_big_ring = m_from_one_minus_k(m1k, params)
        partial = {
            "center_radius": delta1, "m_big": m_big_ring, "w0": w0,
            "amplitude": amp, "b": b, "r_small": r_ring,
        }
        rho_ring = rho_from_constraint(partial, worst_i, params)
        if not rho_ring < r_ring:
            m_target *= 4.0
            failure = "rho_i < r_i"
            continue
        partial.update({"rho": rho_ring, "eps": eps_ring, "a": a})
        lam_ring = lambda_from_constraint(partial, worst_i, params)
        checks = _ring_checks(params, a, b, w0, amp, phi, i0, beta, ring,
                              eps_ring, m1k, m_big_ring, rho_ring, lam_ring,
                              delta, delta1, delta2)
        bad = [name for name, ok, _ in checks if not ok]
        if bad:
            m_target *= 4.0
            failure = bad[0]
            continue
        plan = (m1k, m_big_ring, rho_ring, lam_ring, checks)
        break
    if plan is None:
        raise InfeasiblePlanError(f"constraint not satisfied in budget: {failure}")
    m1k, m_big_ring, rho_ring, lam_ring, checks = plan
    esc = m_target / m_formula(worst_i)

    # per-index ring sequences on the geometric schedule: M_i grows by at
    # least 4 per step so rho_i^{2s} ~ 2^{-i}/M_i and the collar slope
    # (1 - k_i)/rho_i ~ 2^i/M_i both follow their scaling laws while the
    # slope stays decreasing
    eps = np.full(N, eps_ring)
    one_minus_k = np.empty(N)
    m_big = np.empty(N)
    rho = np.empty(N)
    lam = np.empty(N)
    r_small = np.full(N, r_ring)
    for idx in range(ring):
        i = idx + 1
        m_t = m_formula(i) * esc
        if idx > 0:
            m_t = max(m_t, 4.0 * m_big[idx - 1])
        one_minus_k[idx] = one_minus_k_for_m(m_t, params)
        m_big[idx] = m_from_one_minus_k(one_minus_k[idx], params)
        if 1.0 - one_minus_k[idx] <= max(0.5 + 1e-9, k_floor):
            raise InfeasiblePlanError("k_i floor violated on the ring schedule")
        part = {"center_radius": delta1, "m_big": m_big[idx], "w0": w0,
                "amplitude": amp, "b": b, "r_small": r_ring}
        rho[idx] = rho_from_constraint(part, i, params)
        if not rho[idx] < r_ring:
            raise InfeasiblePlanError("rho_i < r_i failed on the ring schedule")
        part.update({"rho": rho[idx], "eps": eps_ring, "a": a})
        lam[idx] = lambda_from_constraint(part, i, params)

    # ring geometry: regular i0-gon of side 4 rho_1 on the sphere |x| = delta1
    ring_radius = 2.0 * rho[0] / math.sin(math.pi / i0)
    if ring_radius >= delta1:
        raise InfeasiblePlanError("polygon circumradius exceeds delta1")
    height = math.sqrt(delta1 ** 2 - ring_radius ** 2)
    centers = np.zeros((N, n))
    for j in range(ring):
        th = 2.0 * math.pi * j / i0
        centers[j, 0] = ring_radius * math.cos(th)
        centers[j, 1] = ring_radius * math.sin(th)
        centers[j, 2] = height

    if N > i0:
        # inner schedule: x_i = delta2 2^{-(i - i0)} e_1, r_i = |x_i| / 8
        for idx in range(i0, N):
            i = idx + 1
            ci = delta2 * 2.0 ** (-(i - i0))
            centers[idx] = 0.0
            centers[idx, 0] = ci
            r_small[idx] = ci / 8.0
            eps[idx] = 2.0 ** (-i)
            m_t = max(9.0 ** i, max(eps[idx] ** (-4 * s / params.kelvin_exp),
                                    2.0 ** i) ** (1.0 / beta)) * 2.0
            one_minus_k[idx] = one_minus_k_for_m(m_t, params)
            m_big[idx] = m_from_one_minus_k(one_minus_k[idx], params)
            part = {"center_radius": ci, "m_big": m_big[idx], "w0": w0,
                    "amplitude": amp, "b": b, "r_small": r_small[idx]}
            rho[idx] = rho_from_constraint(part, i, params)
            part.update({"rho": rho[idx], "eps": eps[idx], "a": a})
            lam[idx] = lambda_from_constraint(part, i, params)

    margins = {name: margin for name, ok, margin in checks}
    out = SequencePlan(params=params, a=a, b=b, delta=delta, delta1=delta1,
                       delta2=delta2, i0=i0, beta=beta, n_mat=N,
                       reduced=reduced, eps=eps, one_minus_k=one_minus_k,
                       m_big=m_big, rho=rho, lam=lam, r_small=r_small,
                       centers=centers, ring_radius=ring_radius,
                       amplitude=amp, w0=w0, margins=margins)
    out.margins["min_bj"] = _min_bj_margin(out)
    return out


def _ring_checks(params, a, b, w0, amp, phi, i0, beta, ring, eps_ring, m1k,
                 m_big, rho, lam, delta, delta1, delta2):
    """(name, ok, margin) for each shared-ring constraint."""
    n, s = params.n, params.sigma
    p = params.p
    q = params.kelvin_exp / (4.0 * s)
    out = []
    log_m = math.log(m_big)
    out.append(("M_i > 9^i", log_m > ring * math.log(9.0),
                log_m - ring * math.log(9.0)))
    need = math.log(max(eps_ring ** (-4 * s / params.kelvin_exp), 2.0 ** ring))
    out.append(("M_i^beta > max(eps^{-4s/(n-2s)}, 2^i)", beta * log_m > need,
                beta * log_m - need))
    lhs = beta * math.log(lam)
    rhs = (2 * s / params.kelvin_exp) * math.log(eps_ring) - ring * LOG2
    out.append(("lambda_i^beta < eps^{2s/(n-2s)}/2^i", lhs < rhs, rhs - lhs))
    kpow = math.expm1((n + 2 * s) / (4 * s) * math.log1p(-m1k)) + 1.0
    thr = (1.0 + 3.0 ** (-params.kelvin_exp)) / (1.0 + p * 3.0 ** (-params.kelvin_exp))
    out.append(("k_i^{(n+2s)/4s} threshold", kpow > thr, kpow - thr))
    out.append(("lambda_i < delta_2", lam < delta2, delta2 - lam))
    out.append(("rho_i < r_i", rho < delta2 / 2.0, delta2 / 2.0 - rho))
    # blow-up at the center: u_i(x_i) = amp lam^{-he} > i phi(delta1)
    log_peak = math.log(amp) - params.half_exp * math.log(lam)
    log_need = math.log(ring * phi(delta1))
    out.append(("u_i(x_i) > i phi(|x_i|)", log_peak > log_need,
                log_peak - log_need))
    # cross smallness off B_{2 r_i}: psi_lam at distance delta2 plus gradient
    s_out = delta2
    u_out = math.exp(math.log(amp) + params.half_exp
                     * (math.log(lam) - math.log(lam ** 2 + s_out ** 2)))
    grad_out = u_out * params.kelvin_exp * s_out / (lam ** 2 + s_out ** 2)
    out.append(("u_i + |grad u_i| < 2^{-i} off B_{2 r_i}",
                u_out + grad_out < 2.0 ** (-ring),
                2.0 ** (-ring) - (u_out + grad_out)))
    # ring envelope condition: Z(k^{(n+2s)/4s}, sum_{i != j} u_i) > w(0)
    # minimized over B_{2 rho_j}; the off-ring sum is the full i0-gon sum
    chord = lambda sep: 2.0 * (2.0 * rho / math.sin(math.pi / i0)) \
        * math.sin(math.pi * sep / i0)
    z3_logs = [math.log(amp) + params.half_exp
               * (math.log(lam) - math.log(lam ** 2 + (chord(sep) + 2 * rho) ** 2))
               for sep in range(1, i0)]
    top = max(z3_logs)
    z3 = math.exp(top) * sum(math.exp(v - top) for v in z3_logs)
    z2_gap = -math.expm1((n + 2 * s) / (4 * s) * q * math.log1p(-m1k))
    log_z = math.log(z3) + q * (n + 2 * s) / (4 * s) * math.log1p(-m1k) \
        - math.log(z2_gap)
    out.append(("Z(k^{(n+2s)/4s}, ring sum) > w(0)", log_z > math.log(w0),
                log_z - math.log(w0)))
    return out


def _min_bj_margin(plan: SequencePlan) -> float:
    """Reported margin of the neighbor-ratio condition on the ring.

    The analytic margin is ~ lambda^2 / rho^2 ~ 1e-137 for the reference
    plan — positive but far below float resolution, so it is reported
    rather than asserted.
    """
    if min(plan.n_mat, plan.i0) < 3:
        return math.inf
    lam, rho = plan.lam[1], plan.rho[1]
    d = plan.center_difference(2, 1)
    side = float(np.linalg.norm(d))
    near = side - 2.0 * plan.rho[1]
    far = side + 2.0 * plan.rho[1]
    ratio = ((lam ** 2 + near ** 2) / (lam ** 2 + far ** 2)) ** plan.params.half_exp
    return ratio - 3.0 ** (-plan.params.kelvin_exp)


# --- assembled fields -------------------------------------------------------

def kappa_eval(plan: SequencePlan, pt: Point,
               k: Optional[ScalarField] = None) -> float:
    """kappa(x) = k(x) + sum (k_i - k(x)) eta(|x - x_i| / rho_i)."""
    dists, radius = plan.distances_to_centers(pt)
    kx = 1.0 if k is None else (
        k.at(_absolute(plan, pt)) if radius > plan.delta else 1.0)
    val = kx
    for i in range(plan.n_mat):
        t = dists[i] / plan.rho[i]
        if t < 1.5:
            val += ((1.0 - plan.one_minus_k[i]) - kx) * eta_cutoff(t)
    return val


def _absolute(plan: SequencePlan, pt: Point) -> Array:
    if isinstance(pt, tuple):
        return plan.centers[pt[0]] + np.asarray(pt[1], dtype=float)
    return np.asarray(pt, dtype=float)


def grad_kappa(plan: SequencePlan, pt: Point) -> Array:
    """Gradient of kappa inside the core ball (where k == 1)."""
    dists, _ = plan.distances_to_centers(pt)
    out = np.zeros(plan.params.n)
    for i in range(plan.n_mat):
        t = dists[i] / plan.rho[i]
        if 1.0 < t < 1.5 and dists[i] > 0.0:
            if isinstance(pt, tuple):
                direction = (np.asarray(pt[1], dtype=float)
                             + plan.center_difference(pt[0], i)) / dists[i]
            else:
                direction = (_absolute(plan, pt) - plan.centers[i]) / dists[i]
            out += (-plan.one_minus_k[i] / plan.rho[i]) \
                * eta_cutoff_prime(t) * direction
    return out


def vbar_eval(plan: SequencePlan, pt: Point, tent_nodes: int = 24) -> float:
    """Barrier w/(2b) + Riesz potential of the tent profile over the balls."""
    dists, radius = plan.distances_to_centers(pt)
    val = float(plan.w_profile(radius)) / (2.0 * plan.b)
    p = plan.params.p
    for i in range(plan.n_mat):
        amp_i = (2.0 * plan.w0) ** p * plan.m_big[i]
        val += amp_i * _tent_riesz(dists[i], plan.rho[i], plan.params,
                                   tent_nodes)
    return val


def _tent_riesz(d: float, rho: float, params: Params, nodes: int) -> float:
    """Riesz potential at distance d of the unit tent on B_rho .. B_{2 rho}.

    The tent is an average of ball indicators: tent = int_rho^{2rho}
    indicator(B_s) ds / rho.
    """
    if d > 2e3 * rho:
        return 0.0 if d == math.inf else fracops.riesz_ball_indicator(
            d, 2.0 * rho, params)
    x, w = np.polynomial.legendre.leggauss(nodes)
    ss = rho * (1.5 + 0.5 * x)
    ww = 0.5 * w  # d s / rho
    total = fracops.riesz_ball_indicator(d, rho, params)
    for sv, wv in zip(ss, ww):
        total += wv * fracops.riesz_ball_indicator(d, sv, params)
    return total


def u_tilde_terms(plan: SequencePlan, pt: Point,
                  v: float) -> Tuple[float, float, float]:
    """(log max bubble, u_tilde / u_max, p(x, v) i.e. v + sum u - u_tilde).

    The cancellation in sum - u_tilde is computed from the subdominant
    terms only, so it survives a dominant bubble of size 1e267.
    """
    logs = bubble_logs(plan, pt)
    top = float(np.max(logs))
    r = np.exp(logs - top)
    jmax = int(np.argmax(logs))
    p = plan.params.p
    e1 = float(np.sum(np.delete(r, jmax)))
    ep = float(np.sum(np.delete(r, jmax) ** p))
    t = math.expm1(math.log1p(ep) / p)
    u_max = math.exp(top) if top > -700 else 0.0
    return top, math.exp(math.log1p(ep) / p), v + u_max * (e1 - t)


def h_log(plan: SequencePlan, pt: Point, v: float,
          envelope: str = "middle", k: Optional[ScalarField] = None) -> float:
    """log H(x, v) (or of the lower/upper envelope) evaluated stably.

    ``envelope``: "lower" uses f with kappa, "middle" uses F with kappa,
    "upper" uses F with k.  The lower envelope can be negative; its log
    is returned as log|value| with the sign in h_sign (see h_eval).
    """
    val, _ = _h_signed_log(plan, pt, v, envelope, k)
    return val


def _h_signed_log(plan: SequencePlan, pt: Point, v: float, envelope: str,
                  k: Optional[ScalarField]) -> Tuple[float, float]:
    params = plan.params
    p = params.p
    top, ut_rel, p0 = u_tilde_terms(plan, pt, v)
    if p0 <= 0.0:
        p0 = max(p0, 1e-300)
    if envelope == "upper":
        kap = 1.0 if k is None else k.at(_absolute(plan, pt))
        omk = None if kap < 1.0 else 0.0
    else:
        kap = kappa_eval(plan, pt, k)
        # inside a cutoff plateau kappa = k_i, with 1 - k_i stored exactly
        omk = None
        dists, _ = plan.distances_to_centers(pt)
        for i in range(plan.n_mat):
            if dists[i] <= plan.rho[i]:
                omk = plan.one_minus_k[i]
                break
        if omk is None and kap >= 1.0:
            omk = 0.0
    log_ut = top + math.log(ut_rel) if top > -745 else -math.inf
    lz2 = math.log1p(-omk) if omk is not None else math.log(kap)

    if envelope in ("middle", "upper"):
        eff_omk = omk if omk is not None else (1.0 - kap if kap < 1.0 else 0.0)
        if eff_omk > 0.0:
            q = params.kelvin_exp / (4.0 * params.sigma)
            gap = -math.expm1(q * math.log1p(-eff_omk))
            log_z_argmax = math.log(p0) + q * math.log1p(-eff_omk) - math.log(gap)
            if log_ut > log_z_argmax:
                log_m = lz2 + p * math.log(p0) - math.log(gap) / q
                return log_m, 1.0
    # f branch: z1^p * expm1(log z2 + p log1p(z3/z1))
    if log_ut == -math.inf:
        return lz2 + p * math.log(p0), 1.0
    ratio = math.exp(min(math.log(p0) - log_ut, 700.0))
    inner = lz2 + p * math.log1p(ratio)
    if inner > 40.0:  # z1^p negligible against z2 (z1 + z3)^p
        return p * log_ut + inner, 1.0
    term = math.expm1(inner)
    if term == 0.0:
        return -math.inf, 1.0
    return p * log_ut + math.log(abs(term)), math.copysign(1.0, term)


def h_eval(plan: SequencePlan, pt: Point, v: float,
           k: Optional[ScalarField] = None) -> float:
    lg, sign = _h_signed_log(plan, pt, v, "middle", k)
    return sign * math.exp(min(lg, 709.0)) if lg > -745 else 0.0


def h_under(plan: SequencePlan, pt: Point, v: float,
            k: Optional[ScalarField] = None) -> float:
    lg, sign = _h_signed_log(plan, pt, v, "lower", k)
    return sign * math.exp(min(lg, 709.0)) if lg > -745 else 0.0


def h_over(plan: SequencePlan, pt: Point, v: float,
           k: Optional[ScalarField] = None) -> float:
    lg, sign = _h_signed_log(plan, pt, v, "upper", k)
    return sign * math.exp(min(lg, 709.0)) if lg > -745 else 0.0


def assemble_u(plan: SequencePlan, u0_mode, pt: Point) -> float:
    """u = u0 + truncated bubble sum; u0 per mode {zero, supersolution, callable}."""
    if u0_mode == "zero":
        u0 = 0.0
    elif u0_mode == "supersolution":
        u0 = vbar_eval(plan, pt)
    elif callable(u0_mode):
        u0 = float(u0_mode(_absolute(plan, pt)))
    else:
        raise ValueError("u0_mode must be 'zero', 'supersolution', or callable")
    return u0 + bubble_sum(plan, pt)


def k_assemble(plan: SequencePlan, u0_mode, pt: Point,
               k: Optional[ScalarField] = None) -> float:
    """K = (source term + sum u_i^p) / (u0 + sum u_i)^p, in log space.

    With u0 == 0 the source term is zero (u0 solves the trivial
    equation), giving the pure power-sum quotient; with the
    supersolution mode the source is its closed-form fractional
    Laplacian (2b)^p w^p + tent profile.
    """
    params = plan.params
    p = params.p
    logs = bubble_logs(plan, pt)
    top = float(np.max(logs))
    r = np.exp(logs - top)
    dists, radius = plan.distances_to_centers(pt)

    if u0_mode == "zero":
        u0 = 0.0
        log_src = -math.inf
    elif u0_mode == "supersolution":
        u0 = vbar_eval(plan, pt)
        src = (2.0 * plan.b) ** p * float(plan.w_profile(radius)) ** p
        for i in range(plan.n_mat):
            t = dists[i] / plan.rho[i]
            if t < 2.0:
                src += (2.0 * plan.w0) ** p * plan.m_big[i] * min(1.0, 2.0 - t)
        log_src = math.log(src)
    else:
        raise ValueError("u0_mode must be 'zero' or 'supersolution'")

    log_u0 = math.log(u0) if u0 > 0.0 else -math.inf
    base = max(top, log_u0)
    r = np.exp(logs - base)
    num_rel = float(np.sum(r ** p)) + (math.exp(log_src - p * base)
                                       if log_src - p * base > -700 else 0.0)
    den_rel = (math.exp(log_u0 - base) if u0 > 0.0 else 0.0) + float(np.sum(r))
    return math.exp(math.log(num_rel) - p * math.log(den_rel))


def grad_k_bound(plan: SequencePlan, j: int, constant: float = 1.0) -> float:
    """Pinned-constant bound C (M_j^{-e_M} + lambda_j^{e_lam}) on |grad K|."""
    n, s = plan.params.n, plan.params.sigma
    e_m = (3.0 * (n - 2 * s - 1.0) - 2.0 * s * (n - 2 * s - 6.0)) \
        / (12.0 * s * (s + 1.0) * (n - 2 * s - 1.0))
    e_l = (n - 2 * s - 3.0) / 6.0
    return constant * (plan.m_big[j] ** (-e_m) + plan.lam[j] ** e_l)


# --- standalone validator ----------------------------------------------------

def validate_plan(plan: SequencePlan, samples: int = 2000,
                  seed: int = 13) -> dict:
    """Re-check every plan invariant with no access to the builder.

    Returns {check name: (pass, margin-or-note)}; the neighbor-ratio
    margin is reported without being asserted (it is positive
    analytically but below float resolution for extreme plans).
    """
    p = plan.params
    rng = np.random.default_rng(seed)
    rep = {}
    rep["delta ordering"] = (0.0 < plan.delta2 < plan.delta1 / 2.0 < plan.delta / 4.0,
                             plan.delta / 4.0 - plan.delta1 / 2.0)
    ring = min(plan.n_mat, plan.i0)
    eps_ok = all(plan.eps[i] <= 2.0 ** (-(i + 1)) or i + 1 <= ring
                 for i in range(plan.n_mat))
    eps_ok = eps_ok and all(plan.eps[i] == plan.eps[0] for i in range(ring))
    eps_ok = eps_ok and all(plan.eps[i] <= 2.0 ** (-min(i + 1, ring))
                            for i in range(plan.n_mat))
    rep["eps rules"] = (eps_ok, None)
    k_ok = all(0.0 < plan.one_minus_k[i] < 0.5 for i in range(plan.n_mat))
    rep["k_i in (1/2, 1)"] = (k_ok, float(np.max(plan.one_minus_k)))
    m_ok = all(abs(plan.m_big[i] - m_from_one_minus_k(plan.one_minus_k[i], p))
               <= 1e-12 * plan.m_big[i] for i in range(plan.n_mat))
    rep["M_i from k_i exactly"] = (m_ok, None)
    rep["M_i > 9^i"] = (all(math.log(plan.m_big[i]) > (i + 1) * math.log(9.0)
                            for i in range(plan.n_mat)), None)
    rep["rho_i < r_i"] = (bool(np.all(plan.rho < plan.r_small)), None)
    rep["lambda_i < delta_2"] = (bool(np.all(plan.lam < plan.delta2)), None)
    radii = np.linalg.norm(plan.centers[:ring], axis=1)
    rep["|x_i| = delta_1 on ring"] = (
        bool(np.all(np.abs(radii - plan.delta1) < 1e-12 * plan.delta1)),
        float(np.max(np.abs(radii - plan.delta1))))
    # regular polygon with side 4 rho_1
    side_ok = True
    worst = 0.0
    for i in range(ring - 1):
        side = float(np.linalg.norm(plan.center_difference(i + 1, i)))
        worst = max(worst, abs(side - 4.0 * plan.rho[0]) / (4.0 * plan.rho[0]))
        side_ok = side_ok and worst < 1e-9
    rep["polygon side = 4 rho_1"] = (side_ok, worst)
    # separation: dist(B_rho_i, B_rho_j) >= rho_i + rho_j
    sep_ok = True
    for i in range(plan.n_mat):
        for j in range(i + 1, plan.n_mat):
            gap = float(np.linalg.norm(plan.center_difference(i, j))) \
                - plan.rho[i] - plan.rho[j]
            sep_ok = sep_ok and gap >= plan.rho[i] + plan.rho[j] - 1e-12 * plan.rho[i]
    rep["ball separation"] = (sep_ok, None)
    rep["beta formula"] = (abs(plan.beta - beta_from_formula(p)) < 1e-15,
                           plan.beta)
    rep["i0 formula"] = (plan.i0 == i0_from_formula(p, plan.a), plan.i0)
    # defining feasibility spot checks (anchored near a ball + global)
    ok_rho = True
    for _ in range(64):
        i = int(rng.integers(plan.n_mat))
        dist = plan.rho[i] * 10.0 ** rng.uniform(0, 3)
        lhs = fracops.riesz_ball_indicator(dist, 2.0 * plan.rho[i], p)
        budget = 2.0 ** (min(i + 1, ring) + 1) * (2.0 * plan.w0) ** p.p \
            * plan.m_big[i]
        rhs = float(plan.w_profile(np.linalg.norm(plan.centers[i]) + dist)) \
            / budget
        ok_rho = ok_rho and lhs <= rhs * (1.0 + 1e-9)
    rep["rho defining inequality"] = (ok_rho, None)
    ok_lam = True
    for _ in range(64):
        i = int(rng.integers(plan.n_mat))
        dist = plan.rho[i] * 10.0 ** rng.uniform(0, 3)
        log_psi = bubble_log_profile(plan.lam[i], dist, plan.amplitude, p)
        rhs = math.log(plan.eps[i]) \
            + (p.kelvin_exp / (4 * p.sigma)) * math.log(plan.a) \
            + math.log(plan.w_profile(np.linalg.norm(plan.centers[i]) + dist))
        ok_lam = ok_lam and log_psi <= rhs + 1e-9
    rep["lambda defining inequality"] = (ok_lam, None)
    rep["neighbor ratio margin (reported)"] = (True, _min_bj_margin(plan))
    rep["all_pass"] = (all(v[0] for kk, v in rep.items()), None)
    return rep
