import math

import numpy as np
import pytest
from scipy.special import sici

from embedspec.numerics import (
    BracketError,
    FitError,
    IntegrationError,
    cumulative_panels,
    find_root_bracketed,
    fit_line,
    integrate_function,
    integrate_ivp,
)


def oscillator(E):
    return lambda x, y: np.array([y[1], -E * y[0]])


def test_exponential():
    tr = integrate_ivp(lambda x, y: y, 0.0, 1.0, [1.0], rel_tol=1e-10)
    assert tr(1.0)[0] == pytest.approx(math.e, abs=1e-8)


def test_cosine_period():
    tr = integrate_ivp(oscillator(math.pi**2), 0.0, 1.0, [1.0, 0.0], rel_tol=1e-10)
    assert tr(1.0)[0] == pytest.approx(-1.0, abs=1e-8)


def test_zero_field_constant():
    tr = integrate_ivp(lambda x, y: np.zeros_like(y), 0.0, 5.0, [3.0, -1.0])
    assert np.allclose(tr(np.linspace(0, 5, 11)), [3.0, -1.0])


@pytest.mark.parametrize("E,x1", [(1.0, 100.0), (100.0, 100.0), (1e4, 100.0), (1e6, 10.0)])
def test_linear_oscillator_error_budget(E, x1):
    rtol = 1e-10
    tr = integrate_ivp(oscillator(E), 0.0, x1, [1.0, 0.0], rel_tol=rtol, abs_tol=1e-12)
    tr2 = integrate_ivp(oscillator(E), 0.0, x1, [0.0, 1.0], rel_tol=rtol, abs_tol=1e-12)
    xs = np.linspace(0.0, x1, 2001)
    w = math.sqrt(E)
    err_c = np.abs(tr(xs)[:, 0] - np.cos(w * xs))
    err_s = np.abs(tr2(xs)[:, 0] - np.sin(w * xs) / w)
    budget = 10 * rtol * w * np.maximum(xs, 1.0)
    assert np.all(err_c <= budget)
    assert np.all(err_s <= budget)


def test_knots_exact_and_cover():
    tr = integrate_ivp(lambda x, y: -y, 0.0, 2.0, [1.0], breakpoints=[0.5, 1.5])
    assert tr.knots[0] == 0.0 and tr.knots[-1] >= 2.0
    assert np.all(np.diff(tr.knots) > 0)
    for i in (0, 3, len(tr.knots) - 1):
        assert np.array_equal(tr(tr.knots[i]), tr.states[i])
    assert 0.5 in tr.knots and 1.5 in tr.knots


def test_breakpoint_jump_field():
    # y' = 1 on [0,1), 0 afterwards: restart keeps the kink exact
    tr = integrate_ivp(lambda x, y: np.array([1.0 if x < 1.0 else 0.0]), 0.0, 2.0, [0.0],
                       breakpoints=[1.0])
    assert tr(2.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_nonfinite_field_reports_position():
    with pytest.raises(IntegrationError) as exc:
        integrate_ivp(lambda x, y: np.array([np.nan if x > 0.3 else 1.0]), 0.0, 1.0, [0.0])
    assert exc.value.position >= 0.0


def test_bad_interval():
    with pytest.raises(ValueError):
        integrate_ivp(lambda x, y: y, 1.0, 0.0, [1.0])


def test_root_sqrt2():
    assert find_root_bracketed(lambda x: x * x - 2, 1.0, 2.0, 1e-12) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_root_identity():
    assert find_root_bracketed(lambda x: x, -1.0, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_root_free_discriminant():
    r = find_root_bracketed(lambda e: 2 * math.cos(math.sqrt(e)) - 2 * math.cos(1.0), 0.5, 2.0)
    assert r == pytest.approx(1.0, abs=1e-10)


def test_root_inside_bracket_and_errors():
    r = find_root_bracketed(lambda x: math.tanh(50 * (x - 0.999)), 0.0, 1.0)
    assert 0.0 <= r <= 1.0
    with pytest.raises(BracketError):
        find_root_bracketed(lambda x: x * x + 1, -1.0, 1.0)


@pytest.mark.parametrize("deg", range(0, 8))
def test_quadrature_polynomials(deg):
    val = integrate_function(lambda t: (deg + 1) * t**deg, 0.0, 2.0, tol=1e-12)
    assert val == pytest.approx(2.0 ** (deg + 1), rel=1e-11)


def test_quadrature_breakpoints():
    val = integrate_function(lambda t: abs(t - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert val == pytest.approx(0.5 * (0.3**2 + 0.7**2), abs=1e-12)


def test_cumulative_panels_matches_sine_integral():
    xs = np.array([20.0, 55.5, 140.0])
    got = cumulative_panels(lambda t: np.sin(t) / t, 10.0, xs, 0.5)
    want = sici(xs)[0] - sici(10.0)[0]
    assert np.allclose(got, want, atol=1e-12)


def test_fit_exact_line():
    s, b, r = fit_line([(1, 2), (2, 4), (3, 6)])
    assert (s, b, r) == pytest.approx((2.0, 0.0, 0.0), abs=1e-12)


def test_fit_flat():
    s, b, _ = fit_line([(0, 1), (1, 1)])
    assert s == pytest.approx(0.0, abs=1e-14) and b == pytest.approx(1.0)


def test_fit_noisy_regression():
    rng = np.random.default_rng(7)
    u = np.linspace(0, 5, 200)
    v = -3 * u + rng.normal(0, 0.01, u.size)
    s, _, r = fit_line(np.column_stack([u, v]))
    assert abs(s + 3) < 0.05
    assert r == pytest.approx(0.01, rel=0.3)


def test_fit_degenerate():
    with pytest.raises(FitError):
        fit_line([(1, 2), (1, 3)])
    with pytest.raises(FitError):
        fit_line([(1, 2)])
