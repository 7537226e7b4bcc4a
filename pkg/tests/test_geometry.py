import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppfit import geometry
from dppfit.errors import EmptyErosion
from dppfit.geometry import RectWindow


def test_area_examples():
    assert geometry.area(RectWindow.square(5.0)) == 25.0
    assert geometry.area(RectWindow.square(10.0)) == 100.0
    assert geometry.area(RectWindow((0, 0), (5, 10))) == 50.0


def test_degenerate_window_rejected():
    with pytest.raises(ValueError):
        RectWindow((0, 0), (0, 5))
    with pytest.raises(ValueError):
        RectWindow((0, 0, 0), (1, 1))


def test_set_covariance_examples():
    w = RectWindow.square(5.0)
    assert geometry.set_covariance(w, (0.0, 0.0)) == 25.0
    assert geometry.set_covariance(w, (1.0, 2.0)) == 12.0
    assert geometry.set_covariance(w, (6.0, 0.0)) == 0.0


def test_set_covariance_monte_carlo_oracle():
    # |D cap (D - u)| by indicator Monte Carlo on a grid
    w = RectWindow.square(5.0)
    u = np.array([1.0, 2.0])
    rng = np.random.default_rng(42)
    x = rng.uniform(0, 5, size=(200_000, 2))
    inside = np.all((x + u >= 0) & (x + u < 5), axis=1)
    mc = 25.0 * inside.mean()
    assert geometry.set_covariance(w, u) == pytest.approx(mc, rel=0.01)


@settings(max_examples=60, deadline=None)
@given(
    u1=st.floats(-12.0, 12.0),
    u2=st.floats(-12.0, 12.0),
)
def test_set_covariance_symmetry_and_support(u1, u2):
    w = RectWindow((0, 0), (5, 10))
    u = (u1, u2)
    val = geometry.set_covariance(w, u)
    assert val == geometry.set_covariance(w, (-u1, -u2))
    assert val >= 0
    if abs(u1) >= 5 or abs(u2) >= 10:
        assert val == 0.0


def test_set_covariance_integrates_to_area_squared():
    # gamma has a kink along the axes; integrate one quadrant (polynomial
    # there, so the rule is exact) and use the fourfold symmetry
    w = RectWindow((0, 0), (5, 10))
    from dppfit.quadrature import gauss_legendre

    x, wx = gauss_legendre(0.0, 5.0, 32)
    y, wy = gauss_legendre(0.0, 10.0, 32)
    grid = np.array([[geometry.set_covariance(w, (a, b)) for b in y] for a in x])
    total = 4.0 * float(wx @ grid @ wy)
    assert total == pytest.approx(geometry.area(w) ** 2, rel=1e-6)


def test_erode_examples():
    w = RectWindow.square(5.0)
    e = geometry.erode(w, 0.625)
    assert e.lower == (0.625, 0.625)
    assert e.upper == (4.375, 4.375)
    assert geometry.area(e) == pytest.approx(14.0625)
    assert geometry.erode(w, 0.0) is w
    with pytest.raises(EmptyErosion):
        geometry.erode(w, 2.5)


def test_erode_area_nonincreasing():
    w = RectWindow.square(5.0)
    areas = [geometry.area(geometry.erode(w, r)) for r in np.linspace(0, 2.4, 20)]
    assert all(a >= b for a, b in zip(areas, areas[1:]))


def test_contains_half_open():
    w = RectWindow.square(5.0)
    assert geometry.contains(w, (0.0, 0.0))
    assert not geometry.contains(w, (5.0, 1.0))
    assert geometry.contains(w, (2.5, 2.5))
    assert not geometry.contains(w, (-1e-9, 2.0))


def test_contains_points_vectorized():
    w = RectWindow.square(2.0)
    pts = np.array([[0.0, 0.0], [1.9, 1.9], [2.0, 1.0], [-0.1, 0.5]])
    np.testing.assert_array_equal(
        geometry.contains_points(w, pts), [True, True, False, False]
    )
