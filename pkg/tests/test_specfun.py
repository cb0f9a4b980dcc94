import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from arcmusic import specfun
from arcmusic.errors import DomainError
from arcmusic.msr import build_directions


XS = np.concatenate([np.linspace(1e-6, 12, 3001), np.linspace(12, 200, 3001)])


@pytest.mark.parametrize("order", [0, 1])
def test_j_matches_scipy(order):
    assert np.max(np.abs(specfun.bessel_j(order, XS) - sp.jv(order, XS))) <= 1e-10


@pytest.mark.parametrize("order", [0, 1])
def test_y_matches_scipy(order):
    ref = sp.yv(order, XS)
    # absolute accuracy away from the pole, relative near it
    assert np.max(np.abs(specfun.bessel_y(order, XS) - ref) / np.maximum(1.0, np.abs(ref))) <= 1e-10


def test_values_at_zero():
    assert specfun.bessel_j(0, 0.0) == 1.0
    assert specfun.bessel_j(1, 0.0) == 0.0


def test_j1_anchor():
    assert abs(specfun.bessel_j(1, 1.8412) - 0.5819) <= 5e-5


def test_j1_maximum_on_0_4():
    x = np.linspace(0, 4, 400001)
    j = specfun.bessel_j(1, x)
    i = np.argmax(j)
    assert abs(x[i] - 1.8412) <= 1e-3
    assert abs(j[i] - 0.5819) <= 5e-5


def test_y0_small_argument():
    x = 1e-6
    lead = (2 / np.pi) * (np.log(x / 2) + specfun.EULER_GAMMA)
    assert abs(specfun.bessel_y(0, x) - lead) <= 1e-6 * abs(lead)


def test_wronskian_at_2_5():
    x = 2.5
    w = specfun.bessel_j(1, x) * specfun.bessel_y(0, x) - specfun.bessel_j(0, x) * specfun.bessel_y(1, x)
    assert abs(w - 2 / (np.pi * x)) <= 1e-10


def test_wronskian_log_grid():
    x = np.logspace(-1, 2, 1000)
    w = specfun.bessel_j(1, x) * specfun.bessel_y(0, x) - specfun.bessel_j(0, x) * specfun.bessel_y(1, x)
    assert np.max(np.abs(w - 2 / (np.pi * x))) <= 1e-10


def test_large_argument_forms():
    x = 50.0
    assert abs(specfun.bessel_y(0, x) - np.sqrt(2 / (np.pi * x)) * np.sin(x - np.pi / 4)) <= 1e-3
    assert abs(abs(specfun.hankel1(0, x)) - np.sqrt(2 / (np.pi * x))) <= 1e-3


def test_hankel_definition():
    h = specfun.hankel1(1, 2.5)
    assert isinstance(h, complex)
    assert h.real == specfun.bessel_j(1, 2.5)
    assert h.imag == specfun.bessel_y(1, 2.5)
    x = np.linspace(0.1, 30, 50)
    assert np.array_equal(specfun.hankel1(0, x).real, specfun.bessel_j(0, x))


@pytest.mark.parametrize("func, bad", [(specfun.bessel_j, -1e-3), (specfun.bessel_y, 0.0),
                                       (specfun.hankel1, 0.0)])
def test_domain_errors(func, bad):
    with pytest.raises(DomainError):
        func(0, bad)


def test_unsupported_order():
    with pytest.raises(DomainError):
        specfun.bessel_j(2, 1.0)


def test_scalar_and_array_shapes():
    assert isinstance(specfun.bessel_j(0, 1.0), float)
    assert specfun.bessel_j(1, np.ones((3, 4))).shape == (3, 4)


def test_lemma_at_origin():
    theta = build_directions(32).vectors
    xi = np.array([0.6, 0.8])
    assert abs(specfun.lemma_average(theta, xi, np.zeros(2), 5.0)) <= 1e-15
    assert specfun.lemma_closed_form(xi, np.zeros(2), 5.0) == 0


def test_lemma_high_n_anchor():
    theta = build_directions(256).vectors
    x = np.array([1.8412, 0.0])
    avg = specfun.lemma_average(theta, np.array([1.0, 0.0]), x, 1.0)
    assert abs(avg - 1j * specfun.bessel_j(1, 1.8412)) <= 1e-8
    assert abs(avg.imag - 0.5819) <= 5e-5


def test_lemma_orthogonal_xi():
    x = np.array([0.0, 0.3])
    xi = np.array([1.0, 0.0])
    assert specfun.lemma_closed_form(xi, x, 10.0) == 0
    theta = build_directions(64).vectors
    assert abs(specfun.lemma_average(theta, xi, x, 10.0)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 10), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_lemma_n64_all_kx(kx, ax, axi):
    theta = build_directions(64).vectors
    x = kx * np.array([np.cos(ax), np.sin(ax)])
    xi = np.array([np.cos(axi), np.sin(axi)])
    err = abs(specfun.lemma_average(theta, xi, x, 1.0) - specfun.lemma_closed_form(xi, x, 1.0))
    assert err <= 1e-8
