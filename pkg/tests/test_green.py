import numpy as np
import pytest

from fraclab import green
from fraclab.params import Params


@pytest.fixture(scope="module")
def ctx3():
    return green.GreenContext(1.0, Params(3, 0.5))


def test_green_vanishes_on_sphere(ctx3):
    # Y on the half sphere |Y| = lam, eta anywhere on the boundary annulus
    rng = np.random.default_rng(0)
    for _ in range(20):
        Y = rng.normal(size=4)
        Y[-1] = abs(Y[-1])
        Y /= np.linalg.norm(Y)
        eta = rng.normal(size=3)
        eta *= 1.7 / np.linalg.norm(eta)
        assert green.green_eval(ctx3, Y, eta) == pytest.approx(0.0, abs=1e-14)


def test_green_positive_outside(ctx3):
    Y = np.array([1.5, 0.0, 0.0, 0.2])
    eta = np.array([0.0, 2.0, 0.0])
    assert green.green_eval(ctx3, Y, eta) > 0.0


def test_green_domain_errors(ctx3):
    inside = np.array([0.2, 0.0, 0.0, 0.1])
    outside = np.array([2.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        green.green_eval(ctx3, inside, outside)


def test_phi_vanishes_on_sphere(ctx3):
    q = green.AnnulusDensity(4.0, lambda y: np.exp(
        -np.linalg.norm(np.atleast_2d(y), axis=1) ** 2))
    Y = np.array([0.0, 1.0, 0.0, 0.0])
    assert abs(green.phi_potential(ctx3, q, Y)) < 1e-12


@pytest.mark.parametrize("n,target_scale", [(2, None), (3, None)])
def test_conormal_recovers_density(n, target_scale):
    pr = Params(n, 0.5)
    ctx = green.GreenContext(1.0, pr)
    q = green.AnnulusDensity(4.0, lambda y: 1.0 / (
        1.0 + np.linalg.norm(np.atleast_2d(y), axis=1) ** 2))
    y = np.zeros(n)
    y[0] = 1.6
    got = green.phi_conormal(ctx, q, y)
    want = 1.0 / (1.0 + 1.6 ** 2)
    assert got == pytest.approx(want, rel=5e-2)


def test_bbl_inequalities():
    rep = green.check_bbl_inequalities(Params(3, 0.5))
    assert rep["bbl1_pass"] and rep["bbl1_c"] > 0.0
    assert rep["bbl2_pass"] and rep["bbl2_min_derivative"] > 0.0
    assert rep["bbl3_pass"] and rep["bbl3_max_outside"] < 0.0
    assert rep["far_field_pass"]


def test_g3_ratio_stable_under_doubling(ctx3):
    rep = green.check_g3_bound(ctx3)
    assert rep["stable"]
    assert rep["ratio"] < 1.5
