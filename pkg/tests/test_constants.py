import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from logplab.constants import (EULER_GAMMA, ProblemParams, digamma_fn, frac_constant, g_map,
                               gamma_fn, kernel_constant, rho_constant, special_constants,
                               sphere_measure, unit_ball_volume)
from logplab.errors import DomainError


def mp_frac_constant(N, s, p):
    """Independent evaluation of both branches of C_{N,s,p}."""
    N, s, p = mp.mpf(N), mp.mpf(s), mp.mpf(p)
    if s <= mp.mpf(1) / 2:
        return s * p * 2 ** (2 * s - 1) * mp.gamma((N + s * p) / 2) / (mp.pi ** (N / 2) * mp.gamma(1 - s))
    return (s * p * 2 ** (2 * s - 2) * mp.gamma((N + s * p) / 2)
            / (mp.pi ** ((N - 1) / 2) * mp.gamma(1 - s) * mp.gamma((p + 1) / 2)))


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)),
                                         (1.5, math.sqrt(math.pi) / 2)])
def test_gamma_examples(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("x, expected", [
    (1.0, -EULER_GAMMA),
    (0.5, -EULER_GAMMA - 2 * math.log(2)),
    (2.0, 1 - EULER_GAMMA),
])
def test_digamma_examples(x, expected):
    assert digamma_fn(x) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-3, max_value=60.0))
def test_digamma_matches_mpmath(x):
    assert digamma_fn(x) == pytest.approx(float(mp.digamma(x)), rel=1e-11, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-2, max_value=50.0))
def test_gamma_matches_mpmath(x):
    assert gamma_fn(x) == pytest.approx(float(mp.gamma(x)), rel=1e-12)


@pytest.mark.parametrize("fn", [gamma_fn, digamma_fn])
@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_special_functions_reject_nonpositive(fn, x):
    with pytest.raises(DomainError):
        fn(x)


def test_euler_gamma_literal():
    assert EULER_GAMMA == float(mp.euler)


@pytest.mark.parametrize("N", range(1, 11))
@pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 5.0])
def test_kernel_constant_times_sphere_is_p(N, p):
    prm = ProblemParams(N, p)
    assert kernel_constant(prm) * sphere_measure(N) == pytest.approx(p, rel=1e-12)
    sc = special_constants(prm)
    assert sc.c_np * sc.omega_n == pytest.approx(p, rel=1e-12)


def test_kernel_constant_examples():
    assert kernel_constant(ProblemParams(1, 2.0)) == pytest.approx(1.0, rel=1e-15)
    assert kernel_constant(ProblemParams(2, 2.0)) == pytest.approx(1 / math.pi, rel=1e-15)


def test_sphere_and_ball():
    assert sphere_measure(2) == pytest.approx(2 * math.pi)
    assert sphere_measure(3) == pytest.approx(4 * math.pi)
    assert unit_ball_volume(2) == pytest.approx(math.pi)


def test_rho_examples():
    g, l2 = EULER_GAMMA, math.log(2)
    assert rho_constant(ProblemParams(2, 2.0)) == pytest.approx(2 * l2 - 2 * g, rel=1e-12)
    assert rho_constant(ProblemParams(1, 2.0)) == pytest.approx(-2 * g, rel=1e-12)
    for p in (1.5, 3.0, 4.2):
        assert rho_constant(ProblemParams(2, p)) == pytest.approx(2 * l2 - g - p / 2 * g, rel=1e-12)


@pytest.mark.parametrize("N", range(1, 11))
def test_rho_linear_case(N):
    expected = 2 * math.log(2) - EULER_GAMMA + float(mp.digamma(N / 2))
    assert rho_constant(ProblemParams(N, 2.0)) == pytest.approx(expected, rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("N, s, p", [(1, 0.25, 2.0), (2, 0.1, 3.0), (1, 0.7, 1.5),
                                     (2, 0.9, 2.0), (3, 0.5, 2.0)])
def test_frac_constant_against_mpmath(N, s, p):
    assert frac_constant(ProblemParams(N, p, s)) == pytest.approx(float(mp_frac_constant(N, s, p)),
                                                                  rel=1e-12)


@pytest.mark.parametrize("N, p", [(1, 2.0), (2, 2.0), (1, 3.0), (2, 1.5)])
def test_frac_constant_small_s_limits(N, p):
    prm = ProblemParams(N, p)
    c, rho = kernel_constant(prm), rho_constant(prm)
    for s in (1e-3, 1e-4):
        assert frac_constant(prm.with_s(s)) / s == pytest.approx(c, rel=1e-2)
    # second-order one-sided difference of d(s) = C_{N,s,p}/s at 0, d(0) = C_{N,p}
    h = 1e-3
    d = [c] + [frac_constant(prm.with_s(k * h)) / (k * h) for k in (1, 2)]
    slope = (-3 * d[0] + 4 * d[1] - d[2]) / (2 * h)
    assert slope == pytest.approx(c * rho, rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.floats(0.01, 0.99), st.floats(1.1, 6.0))
def test_frac_constant_positive(N, s, p):
    assert frac_constant(ProblemParams(N, p, s)) > 0


def test_frac_constant_branches_at_half():
    prm = ProblemParams(1, 2.0, 0.5)
    left = frac_constant(ProblemParams(1, 2.0, 0.5 - 1e-12))
    right = frac_constant(ProblemParams(1, 2.0, 0.5 + 1e-12))
    assert left == pytest.approx(frac_constant(prm), rel=1e-10)
    assert right == pytest.approx(frac_constant(prm), rel=1e-10)


def test_params_validation():
    with pytest.raises(DomainError):
        ProblemParams(0, 2.0)
    with pytest.raises(DomainError):
        ProblemParams(1, 1.0)
    with pytest.raises(DomainError):
        ProblemParams(1, 2.0, 1.0)
    with pytest.raises(DomainError):
        frac_constant(ProblemParams(1, 2.0))


@pytest.mark.parametrize("a, p, expected", [(0.0, 3.0, 0.0), (1.7, 2.0, 1.7), (-2.0, 3.0, -4.0),
                                            (0.0, 1.5, 0.0)])
def test_g_map(a, p, expected):
    assert g_map(a, p) == expected
