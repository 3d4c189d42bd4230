import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab import construction as cn
from fraclab.fields import ScalarField
from fraclab.params import Params

PR = Params(5, 0.5)


def _unit_k():
    return ScalarField(lambda x: np.ones(np.atleast_2d(x).shape[0]), n=5,
                       decay="integrable_against_kernel")


@pytest.fixture(scope="module")
def plan():
    return cn.plan_sequences(PR, _unit_k(), lambda r: r ** -10.0, N=8)


# --- envelopes ---------------------------------------------------------------

def test_envelope_worked_example():
    # n=5, sigma=1/2: argmax of z -> z2 (z + z3)^p - z^p at z2=1/2, z3=1
    z = cn.z_val(0.5, 1.0, PR)
    assert z == pytest.approx(1.0 / 3.0, rel=1e-12)
    m = cn.m_val(0.5, 1.0, PR)
    assert m == pytest.approx(0.5 / math.sqrt(0.75), rel=1e-12)
    assert cn.f_val(z, 0.5, 1.0, PR) == pytest.approx(m, rel=1e-12)


@given(st.floats(min_value=0.05, max_value=0.95),
       st.floats(min_value=0.1, max_value=5.0),
       st.floats(min_value=0.0, max_value=50.0))
@settings(max_examples=150, deadline=None)
def test_envelope_dominates_f(z2, z3, z1):
    # F equals f up to the argmax and caps it at the maximum beyond
    f = cn.f_val(z1, z2, z3, PR)
    big = cn.big_f_val(z1, z2, z3, PR)
    assert f <= big * (1.0 + 1e-12) + 1e-12
    assert big <= cn.m_val(z2, z3, PR) * (1.0 + 1e-12)


def test_envelope_extreme_scale_stability():
    # 1 - z2 ~ 1e-131 must flow through expm1/log1p without rounding to 0
    omz = 1e-131
    m = cn.m_val(1.0, 1.0, PR, one_minus_z2=omz)
    assert m == pytest.approx((2.0 * omz) ** -0.5, rel=1e-6)


@given(st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=2,
                max_size=8),
       st.floats(min_value=1.1, max_value=4.0))
@settings(max_examples=150, deadline=None)
def test_talia_bound(values, p):
    values = sorted(values, reverse=True)
    ratio, bound = cn.talia_ratio(values, p)
    assert ratio <= bound < 1.0


def test_cutoff_shape():
    assert cn.eta_cutoff(0.5) == 1.0
    assert cn.eta_cutoff(2.0) == 0.0
    mid = cn.eta_cutoff(1.25)
    assert 0.0 < mid < 1.0
    # derivative is zero on the plateaus and negative in the transition
    assert cn.eta_cutoff_prime(0.7) == 0.0
    assert cn.eta_cutoff_prime(1.6) == 0.0
    assert cn.eta_cutoff_prime(1.25) < 0.0


# --- plan selection ----------------------------------------------------------

def test_ring_count_and_exponent_formulas():
    assert cn.i0_from_formula(PR, 0.5) == 257
    assert cn.beta_from_formula(PR) == pytest.approx(1.0 / 27.0, rel=1e-14)


def test_beta_needs_high_dimension():
    with pytest.raises(ValueError):
        cn.beta_from_formula(Params(3, 0.5))


def test_plan_validator(plan):
    rep = cn.validate_plan(plan)
    failures = [k for k, v in rep.items() if not v[0]]
    assert not failures
    assert rep["all_pass"][0]


def test_plan_reduced_mode_shape(plan):
    assert plan.reduced and plan.n_mat == 8
    assert plan.i0 == 257
    # eps is shared on the ring; the other sequences follow their budgets
    assert np.all(plan.eps == plan.eps[0])
    assert np.all(np.diff(plan.m_big) > 0.0)
    assert np.all(np.diff(plan.rho) < 0.0)
    assert np.all(np.diff(plan.lam) < 0.0)
    assert np.all(np.diff(plan.one_minus_k) < 0.0)


def test_scaling_laws_within_factor_four(plan):
    # M_i ~ (1 - k_i)^{-4s/(n-2s)}, rho_i^{2s} ~ 1/(2^i M_i),
    # lambda_i ~ eps_i^{2/(n-2s)} rho_i^2 -- ratios stable across i <= 8
    q = 4.0 * PR.sigma / PR.kelvin_exp
    r1 = [plan.m_big[i] * plan.one_minus_k[i] ** q for i in range(8)]
    r2 = [plan.rho[i] ** (2 * PR.sigma) * 2.0 ** (i + 1) * plan.m_big[i]
          for i in range(8)]
    r3 = [plan.lam[i] / (plan.eps[i] ** (2.0 / PR.kelvin_exp)
                         * plan.rho[i] ** 2) for i in range(8)]
    for ratios in (r1, r2, r3):
        assert max(ratios) / min(ratios) < 4.0


def test_blowup_beats_prescribed_rate(plan):
    phi = lambda r: r ** -10.0
    for i in range(8):
        peak = cn.assemble_u(plan, "zero", (i, np.zeros(5)))
        assert peak > (i + 1) * phi(float(np.linalg.norm(plan.centers[i])))


def test_off_ball_sum_bound(plan):
    rng = np.random.default_rng(11)
    qe = PR.kelvin_exp / (4.0 * PR.sigma)
    for _ in range(2000):
        x = rng.normal(size=5)
        x *= 10.0 ** rng.uniform(-2, 2) / np.linalg.norm(x)
        assert cn.bubble_sum(plan, x) <= plan.a ** qe * float(
            plan.w_profile(np.linalg.norm(x)))


def test_center_difference_precision(plan):
    # adjacent ring centers are 4 rho_1 apart even though |x_i| ~ 1e-2
    side = np.linalg.norm(plan.center_difference(1, 0))
    assert side == pytest.approx(4.0 * plan.rho[0], rel=1e-12)


# --- assembled fields --------------------------------------------------------

def test_kappa_values(plan):
    assert cn.kappa_eval(plan, np.array([0.2, 0.1, 0.0, 0.0, 0.0])) == 1.0
    on_plateau = cn.kappa_eval(plan, (3, np.zeros(5)))
    assert on_plateau == 1.0 - plan.one_minus_k[3]


def test_grad_kappa_envelope(plan):
    # |grad kappa| <= sup|eta'| (1 - k_i)/rho_i, nonzero only in the collar
    i = 2
    collar = (i, np.array([1.25 * plan.rho[i], 0.0, 0.0, 0.0, 0.0]))
    g = np.linalg.norm(cn.grad_kappa(plan, collar))
    cap = cn.ETA_PRIME_SUP * plan.one_minus_k[i] / plan.rho[i]
    assert 0.0 < g <= cap * (1.0 + 1e-12)
    assert np.linalg.norm(cn.grad_kappa(plan, (i, np.zeros(5)))) == 0.0


def test_grad_kappa_schedule_envelope(plan):
    # the collar slopes respect the geometric envelope along the schedule
    slopes = [plan.one_minus_k[i] / plan.rho[i] for i in range(8)]
    env = [(2.0 / 3.0) ** ((i + 1) / (2.0 * PR.sigma)) for i in range(8)]
    const = max(s / e for s, e in zip(slopes, env))
    assert all(s <= const * e * (1.0 + 1e-12)
               for s, e in zip(slopes, env))
    assert all(a >= b - 1e-15 for a, b in zip(slopes, slopes[1:]))


def test_vbar_sandwich(plan):
    rng = np.random.default_rng(5)
    for _ in range(200):
        x = rng.normal(size=5)
        x *= 10.0 ** rng.uniform(-2, 1.5) / np.linalg.norm(x)
        w = float(plan.w_profile(np.linalg.norm(x)))
        v = cn.vbar_eval(plan, x)
        assert w / (2.0 * plan.b) <= v < w
        assert v < plan.amplitude
    for t in (0.0, 1.0, 3.0):
        pt = (0, np.array([t * plan.rho[0], 0.0, 0.0, 0.0, 0.0]))
        _, rad = plan.distances_to_centers(pt)
        w = float(plan.w_profile(rad))
        assert w / (2.0 * plan.b) < cn.vbar_eval(plan, pt) < w


def test_h_ordering(plan):
    rng = np.random.default_rng(9)
    for _ in range(300):
        x = rng.normal(size=5)
        x *= 10.0 ** rng.uniform(-2, 1) / np.linalg.norm(x)
        v = 10.0 ** rng.uniform(-6, 0)
        hl = cn.h_under(plan, x, v)
        hm = cn.h_eval(plan, x, v)
        ho = cn.h_over(plan, x, v)
        assert hl <= hm * (1.0 + 1e-12) + 1e-300
        assert hm <= ho * (1.0 + 1e-12) + 1e-300
    # anchored at a bubble core, where the scales are ~1e270
    deep = (0, np.zeros(5))
    assert cn.h_under(plan, deep, 0.1) <= cn.h_eval(plan, deep, 0.1) \
        <= cn.h_over(plan, deep, 0.1)


def test_h_below_barrier_source(plan):
    # H(x, v) <= (-lap)^s vbar for 0 <= v <= w(x), off the cores
    rng = np.random.default_rng(21)
    p = PR.p
    for _ in range(200):
        x = rng.normal(size=5)
        x *= 10.0 ** rng.uniform(-2, 1) / np.linalg.norm(x)
        w = float(plan.w_profile(np.linalg.norm(x)))
        v = w * rng.random()
        assert cn.h_eval(plan, x, v) <= (2.0 * plan.b) ** p * w ** p * (1 + 1e-10)


def test_k_assemble_bounds(plan):
    rng = np.random.default_rng(17)
    for _ in range(500):
        x = rng.normal(size=5)
        x *= 10.0 ** rng.uniform(-2, 2) / np.linalg.norm(x)
        k0 = cn.k_assemble(plan, "zero", x)
        assert 0.0 < k0 <= 1.0 + 1e-6
    assert cn.k_assemble(plan, "zero", (2, np.zeros(5))) <= 1.0 + 1e-12


def test_grad_k_bound_monotone(plan):
    vals = [cn.grad_k_bound(plan, j) for j in range(8)]
    assert all(v > 0.0 for v in vals)
    assert all(a >= b - 1e-15 * abs(a) for a, b in zip(vals, vals[1:]))


def test_assemble_u_modes(plan):
    pt = np.array([0.3, 0.0, 0.0, 0.0, 0.0])
    zero = cn.assemble_u(plan, "zero", pt)
    sup = cn.assemble_u(plan, "supersolution", pt)
    assert sup > zero
    custom = cn.assemble_u(plan, lambda x: 0.5, pt)
    assert custom == pytest.approx(zero + 0.5)
    with pytest.raises(ValueError):
        cn.assemble_u(plan, "bogus", pt)


def test_infeasible_plan_reporting():
    with pytest.raises(cn.InfeasiblePlanError):
        cn.plan_sequences(PR, _unit_k(), lambda r: r ** -10.0, N=0)
