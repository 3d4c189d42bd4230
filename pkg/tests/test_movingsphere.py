import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab import bubbles, constants, extension, movingsphere
from fraclab.fields import ScalarField
from fraclab.params import Params


def _bubble_state(pr, lam=1.0, **kwargs):
    w = bubbles.model_bubble(pr)
    kf = ScalarField(lambda x: np.full(np.atleast_2d(x).shape[0],
                                       constants.bubble_eigenvalue(pr)),
                     n=pr.n, decay="integrable_against_kernel")
    ext = lambda Y: extension.model_bubble_extension_halforder(
        Y[:pr.n], Y[pr.n], Params(pr.n, 0.5))
    return movingsphere.ComparisonState(params=pr, trace=w, extension=ext,
                                        kelvin_radius=lam, k_field=kf,
                                        **kwargs)


def test_b_from_values_arithmetic():
    # k (w^p - wl^p) / (w - wl): k=1, w=2, wl=1, p=3 -> (8-1)/1 = 7
    assert movingsphere.b_from_values(1.0, 2.0, 1.0, 3.0) == pytest.approx(7.0)
    assert movingsphere.b_from_values(1.0, 1.0, 2.0, 3.0) == pytest.approx(7.0)
    # coincidence limit: p k w^{p-1} = 3 * 1 * 1
    assert movingsphere.b_from_values(1.0, 1.0, 1.0, 3.0) == pytest.approx(3.0)


@given(st.floats(min_value=0.1, max_value=5.0),
       st.floats(min_value=0.1, max_value=5.0),
       st.floats(min_value=0.2, max_value=3.0),
       st.floats(min_value=1.1, max_value=4.0))
@settings(max_examples=200, deadline=None)
def test_b_from_values_nonnegative(w, wl, k, p):
    assert movingsphere.b_from_values(k, w, wl, p) >= 0.0


def test_b_from_values_continuous_at_coincidence():
    near = movingsphere.b_from_values(2.0, 1.0, 1.0 + 1e-13, 3.0)
    exact = movingsphere.b_from_values(2.0, 1.0, 1.0, 3.0)
    assert near == pytest.approx(exact, rel=1e-6)


def test_q_vanishes_for_constant_coefficient():
    pr = Params(3, 0.5)
    state = _bubble_state(pr)
    rng = np.random.default_rng(1)
    for _ in range(50):
        y = rng.normal(size=3)
        y *= (1.0 + 2.0 * rng.random()) / np.linalg.norm(y)
        assert abs(movingsphere.q_coefficient(state, y)) < 1e-14


def test_kelvin_difference_domain_guard():
    state = _bubble_state(Params(3, 0.5))
    inside = np.array([0.2, 0.0, 0.0, 0.1])
    with pytest.raises(ValueError):
        movingsphere.kelvin_difference(state, inside)


def test_correction_with_zero_strength_reduces_to_phi():
    pr = Params(3, 0.5)
    state = _bubble_state(pr, phi=lambda Y: 0.25)
    Y = np.array([1.4, 0.0, 0.0, 0.3])
    assert movingsphere.a_correction(state, Y) == pytest.approx(0.25)


def test_kelvin_radius_guard():
    with pytest.raises(ValueError):
        _bubble_state(Params(3, 0.5), lam=3.0)


@pytest.fixture(scope="module")
def sweep_result():
    pr = Params(3, 0.5)
    rng = np.random.default_rng(7)
    samples = rng.normal(size=(400, 4))
    samples[:, -1] = np.abs(samples[:, -1]) + 1e-3
    samples[:, :3] *= (1.0 + 2.0 * rng.random((400, 1)))
    grid = np.linspace(0.6, 1.4, 11)
    return movingsphere.lambda_star_sweep(
        lambda lam: _bubble_state(Params(3, 0.5), lam), grid, samples)


def test_lambda_star_inside_open_interval(sweep_result):
    assert sweep_result is not None
    assert 0.5 < sweep_result["lambda_star"] < 2.0


def test_lambda_star_bracket_refined(sweep_result):
    lo, hi = sweep_result["bracket"]
    assert hi - lo <= 2e-3
    assert lo <= sweep_result["lambda_star"] <= hi


def test_sweep_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        movingsphere.lambda_star_sweep(lambda lam: None, [1.0, 0.9],
                                       np.zeros((1, 4)))
