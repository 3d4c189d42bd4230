import numpy as np
import pytest

from fraclab import bubbles, constants, extension
from fraclab.fields import ScalarField
from fraclab.params import Params


def _const_one(n):
    return ScalarField(lambda x: np.ones(x.shape[0]), n=n,
                       decay="integrable_against_kernel")


@pytest.mark.parametrize("n,s", [(2, 0.5), (3, 0.5), (3, 0.25)])
def test_poisson_mass(n, s):
    pr = Params(n, s)
    val = extension.extend(_const_one(n), np.zeros(n), 0.7, pr)
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("n", [2, 3])
def test_half_order_closed_form_matches_quadrature(n):
    pr = Params(n, 0.5)
    w = bubbles.model_bubble(pr)
    for d, t in ((0.0, 0.5), (0.8, 0.3), (1.5, 2.0)):
        y = d * np.eye(n)[0]
        direct = extension.model_bubble_extension_halforder(y, t, pr)
        quad = extension.extend(w, y, t, pr)
        assert quad == pytest.approx(direct, rel=1e-3)


def test_half_order_closed_form_guard():
    with pytest.raises(ValueError):
        extension.model_bubble_extension_halforder(np.zeros(2), 1.0,
                                                   Params(2, 0.75))


@pytest.mark.parametrize("n,s", [(2, 0.5), (3, 0.5), (3, 0.75)])
def test_conormal_reproduces_critical_power(n, s):
    pr = Params(n, s)
    w = bubbles.model_bubble(pr)
    cset = constants.constant_set(pr)
    for d in (0.0, 0.5, 1.2):
        y = d * np.eye(n)[0]
        der = extension.conormal_derivative(w, y, pr)
        ref = cset.c_tilde * w.at(y) ** pr.p
        assert der == pytest.approx(ref, rel=1e-2)


def test_degenerate_equation_residual():
    pr = Params(2, 0.5)
    w = bubbles.model_bubble(pr)
    res = extension.degenerate_residual(w, np.array([0.4, 0.1]), 0.6, pr)
    assert abs(res) < 1e-3
