import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypmesh.errors import DomainError, SingularityError
from hypmesh.lobachevsky import lob, lob_deriv, lob_second
from oracles import CATALAN, lob_quad

PI = np.pi
# three times this equals 3L(pi/3) = 1.0149416064096536...
LOB_PI_3 = 0.33831386880321786

angles = st.floats(min_value=-PI + 1e-3, max_value=PI - 1e-3, allow_nan=False)


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (PI / 2, 0.0), (PI, 0.0)])
def test_lob_zeros(x, expected):
    assert abs(lob(x) - expected) <= 1e-15


def test_lob_pi_over_3():
    assert lob(PI / 3) == pytest.approx(LOB_PI_3, abs=1e-13)
    assert lob_quad(PI / 3) == pytest.approx(LOB_PI_3, abs=1e-13)
    assert 3 * lob(PI / 3) == pytest.approx(1.0149416064, abs=1e-10)


def test_lob_pi_over_4_is_half_catalan():
    assert abs(lob(PI / 4) - CATALAN / 2) <= 1e-13
    assert lob(PI / 4) == pytest.approx(0.4579827971, abs=1e-10)


def test_lob_matches_oracle_on_grid():
    xs = np.linspace(0.0, PI, 201)[1:-1]
    err = np.abs(lob(xs) - np.array([lob_quad(x) for x in xs]))
    assert err.max() <= 1e-12


def test_lob_accepts_arrays_and_scalars():
    xs = np.array([[0.1, 0.2], [0.3, 0.4]])
    out = lob(xs)
    assert out.shape == (2, 2)
    assert isinstance(lob(0.3), float)
    assert out[1, 0] == lob(0.3)


@pytest.mark.parametrize("x", [np.inf, -np.inf, np.nan])
def test_lob_rejects_non_finite(x):
    with pytest.raises(DomainError):
        lob(x)
    with pytest.raises(DomainError):
        lob(np.array([0.1, x]))


@pytest.mark.parametrize("x, expected", [
    (PI / 6, 0.0),
    (PI / 2, -np.log(2.0)),
    (PI / 3, -0.5493061443),
])
def test_lob_deriv_values(x, expected):
    assert lob_deriv(x) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("x, expected", [
    (PI / 2, 0.0),
    (PI / 4, -1.0),
    (PI / 3, -0.5773502692),
])
def test_lob_second_values(x, expected):
    assert lob_second(x) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("fn", [lob_deriv, lob_second])
@pytest.mark.parametrize("x", [0.0, PI, -PI, 3 * PI])
def test_derivatives_singular_at_multiples_of_pi(fn, x):
    with pytest.raises(SingularityError):
        fn(x)


@settings(max_examples=300, deadline=None)
@given(angles)
def test_oddness(x):
    assert abs(lob(-x) + lob(x)) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-20.0, max_value=20.0, allow_nan=False))
def test_periodicity(x):
    assert abs(lob(x + PI) - lob(x)) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-10.0, max_value=10.0, allow_nan=False))
def test_duplication_identity(x):
    assert abs(lob(2 * x) - 2 * lob(x) - 2 * lob(x + PI / 2)) <= 1e-11


def test_oddness_and_periodicity_on_1000_points():
    rng = np.random.default_rng(0)
    x = rng.uniform(-PI, PI, 1000)
    assert np.max(np.abs(lob(-x) + lob(x))) <= 1e-12
    assert np.max(np.abs(lob(x + PI) - lob(x))) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.05, max_value=PI - 0.05))
def test_finite_difference_consistency(x):
    h = 1e-6
    fd1 = (lob(x + h) - lob(x - h)) / (2 * h)
    d1 = lob_deriv(x)
    assert abs(fd1 - d1) <= 1e-6 * max(abs(d1), 1.0)
    fd2 = (lob_deriv(x + h) - lob_deriv(x - h)) / (2 * h)
    d2 = lob_second(x)
    assert abs(fd2 - d2) <= 1e-6 * max(abs(d2), 1.0)


def test_maximum_at_pi_over_6():
    # L' vanishes at pi/6, where L attains its maximum on (0, pi)
    xs = np.linspace(0.01, PI - 0.01, 2001)
    assert np.all(lob(xs) <= lob(PI / 6) + 1e-15)
