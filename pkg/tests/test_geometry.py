import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logplab.constants import ProblemParams, kernel_constant
from logplab.errors import DomainError
from logplab.geometry import (Ball, Box, BoxUnion, domain_from_dict, h_lower_bound, h_omega,
                              h_omega_grid, interval)
from logplab.grid import Grid

P2_1 = ProblemParams(1, 2.0)
P2_2 = ProblemParams(2, 2.0)


def star_h(ray_length, p, N, breaks=()):
    """h(x) = -(p/omega_N) * integral of ln R(theta) over directions, for a
    domain star-shaped about x with ray length R(theta)."""
    if N == 1:
        return -p / 2 * (math.log(ray_length(0.0)) + math.log(ray_length(math.pi)))
    pts = sorted({0.0, 2 * math.pi, *[b % (2 * math.pi) for b in breaks]})
    val = mp.quad(lambda t: mp.log(ray_length(float(t))), pts)
    return float(-p / (2 * math.pi) * val)


def box_ray(lo, hi, x):
    def R(t):
        d = (math.cos(t), math.sin(t))
        best = math.inf
        for k in range(2):
            if d[k] > 1e-300:
                best = min(best, (hi[k] - x[k]) / d[k])
            elif d[k] < -1e-300:
                best = min(best, (lo[k] - x[k]) / d[k])
        return best
    corners = [math.atan2(cy - x[1], cx - x[0]) for cx in (lo[0], hi[0]) for cy in (lo[1], hi[1])]
    return R, corners


def ball_ray(c, rad, x):
    dx, dy = x[0] - c[0], x[1] - c[1]

    def R(t):
        b = dx * math.cos(t) + dy * math.sin(t)
        return -b + math.sqrt(b * b - (dx * dx + dy * dy - rad * rad))
    return R


# ---------------------------------------------------------------------------
# basic shape operations

def test_contains_examples():
    assert Ball([0.0, 0.0], 1.0).contains([0.0, 0.0])
    assert not interval(0, 1).contains([0.0])
    assert not Box([0, 0], [1, 1]).contains([0.5, 1.5])


def test_contains_dimension_mismatch():
    with pytest.raises(DomainError):
        interval(0, 1).contains([0.5, 0.5])


def test_boundary_distance_examples():
    assert interval(0, 1).boundary_distance([0.3]) == pytest.approx(0.3)
    assert Ball([1.0, -1.0], 2.0).boundary_distance([1.6, -1.8]) == pytest.approx(2.0 - 1.0)
    assert Box([0, 0], [1, 1]).boundary_distance([0.2, 0.9]) == pytest.approx(0.1)


def test_volume_examples():
    assert interval(0, 2).volume() == 2
    assert Ball([0, 0], 1.0).volume() == pytest.approx(math.pi)
    u = BoxUnion([Box([0, 0], [1, 1]), Box([2, 0], [3, 1])])
    assert u.volume() == pytest.approx(2.0)


def test_union_distance_ignores_shared_faces():
    u = BoxUnion([Box([0, 0], [1, 1]), Box([1, 0], [2, 1])])
    assert u.boundary_distance([1.0, 0.5]) == pytest.approx(0.5)
    assert u.contains([1.0, 0.5])


@pytest.mark.parametrize("dom", [interval(0.2, 1.7), Box([0, -1], [2, 0.5]), Ball([0.3, 0.1], 0.8),
                                 BoxUnion([Box([0, 0], [1, 1]), Box([1, 0], [2, 0.5])])])
@pytest.mark.parametrize("r", [0.5, 2.0, 3.0])
def test_dilation_properties(dom, r):
    d = dom.dilate(r)
    assert d.volume() == pytest.approx(r ** dom.dim * dom.volume(), rel=1e-12)
    blo, bhi = dom.bounding_box()
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = blo + rng.random(dom.dim) * (bhi - blo)
        if dom.contains(x):
            assert d.boundary_distance(r * x) == pytest.approx(r * dom.boundary_distance(x), rel=1e-12)


def test_dilate_ball_and_errors():
    assert Ball([0, 0], 1.0).dilate(2.0) == Ball([0, 0], 2.0)
    with pytest.raises(DomainError):
        Ball([0, 0], 1.0).dilate(0.0)
    with pytest.raises(DomainError):
        interval(0, 1).dilate(-1.0)


def test_translate():
    b = Box([0, 0], [1, 2]).translate([1.0, -1.0])
    assert b == Box([1, -1], [2, 1])


@pytest.mark.parametrize("dom", [interval(0, 1), Box([0, 0], [1, 2]), Ball([0, 1], 2.0),
                                 BoxUnion([Box([0, 0], [1, 1]), Box([2, 0], [3, 1])])])
def test_domain_dict_round_trip(dom):
    assert domain_from_dict(dom.to_dict()) == dom


def test_domain_from_dict_unknown():
    with pytest.raises(DomainError):
        domain_from_dict({"type": "triangle"})


# ---------------------------------------------------------------------------
# boundary weight

def test_h_ball_centre_examples():
    assert h_omega(Ball([0.3, 0.2], 1.0), [0.3, 0.2], P2_2).h_value == pytest.approx(0.0, abs=1e-12)
    for eps in (0.5, 0.1):
        for p in (1.5, 3.0):
            val = h_omega(Ball([0, 0], eps), [0, 0], ProblemParams(2, p)).h_value
            assert val == pytest.approx(-p * math.log(eps), abs=1e-10)
    assert h_omega(interval(-0.2, 0.2), [0.0], P2_1).h_value == pytest.approx(-2 * math.log(0.2))


@pytest.mark.parametrize("x", [0.5, 0.1, 0.9, 0.37])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_h_interval_against_star_formula(x, p):
    R = lambda t: x if t > 1 else 1 - x      # noqa: E731 (t = pi points left)
    want = star_h(R, p, 1)
    assert h_omega(interval(0, 1), [x], ProblemParams(1, p)).h_value == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("x", [(0.3, 0.4), (0.5, 0.5), (0.05, 0.9), (0.999, 0.001)])
def test_h_box_against_star_formula(x):
    lo, hi = (0.0, 0.0), (1.0, 1.0)
    R, br = box_ray(lo, hi, x)
    want = star_h(R, 2.0, 2, br)
    assert h_omega(Box(lo, hi), x, P2_2).h_value == pytest.approx(want, abs=5e-9)


@pytest.mark.parametrize("x", [(0.0, 0.0), (0.5, 0.1), (-0.7, 0.6), (0.0, 0.999)])
def test_h_ball_against_star_formula(x):
    R = ball_ray((0.0, 0.0), 1.3, x)
    want = star_h(R, 3.0, 2)
    assert h_omega(Ball([0, 0], 1.3), x, ProblemParams(2, 3.0)).h_value == pytest.approx(want, abs=5e-9)


def test_h_union_1d_against_direct_integral():
    # Omega = (0,1) u (1.5, 4): h = p ln(1/eps) - C * int_{Omega, |y-x|>eps} dy/|x-y|
    dom = BoxUnion([interval(0, 1), interval(1.5, 4)])
    x, eps = 0.6, 0.4
    inner = (math.log(0.6) - math.log(eps)) + (math.log(3.4) - math.log(0.9))
    want = 2 * math.log(1 / eps) - kernel_constant(P2_1) * inner
    assert h_omega(dom, [x], P2_1).h_value == pytest.approx(want, abs=1e-12)


def test_h_union_2d_additivity():
    # the integral over a union splits over the components
    a, b = Box([0, 0], [1, 1]), Box([1, 0], [2, 1])
    u = BoxUnion([a, b])
    x = np.array([0.4, 0.5])
    eps = 0.4
    c = kernel_constant(P2_2)
    ma, _ = a.radial_moment(x, eps, a.far_radius(x))
    mb, _ = b.radial_moment(x, eps, b.far_radius(x))
    want = 2 * math.log(1 / eps) - c * (ma + mb)
    assert h_omega(u, x, P2_2).h_value == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("r", [0.25, 0.5, 2.0, 4.0])
def test_h_scaling(r):
    dom, x = Box([0, 0], [1, 1]), np.array([0.3, 0.4])
    for p in (1.5, 2.0):
        prm = ProblemParams(2, p)
        lhs = h_omega(dom.dilate(r), r * x, prm).h_value
        assert lhs - h_omega(dom, x, prm).h_value + p * math.log(r) == pytest.approx(0.0, abs=2e-8)


@pytest.mark.parametrize("dom, x", [(Box([0, 0], [1, 1]), (0.3, 0.4)), (Ball([0, 0], 1.0), (0.2, -0.5)),
                                    (interval(0, 1), (0.25,))])
def test_h_epsilon_independence(dom, x):
    prm = ProblemParams(dom.dim, 2.0)
    delta = dom.boundary_distance(x)
    vals = [h_omega(dom, x, prm, eps=e).h_value for e in (delta, 0.5 * delta, 0.01 * delta)]
    assert max(vals) - min(vals) <= 2e-8


def test_h_translation_exact():
    dom, x, v = Box([0, 0], [1, 1]), np.array([0.3, 0.4]), np.array([0.25, -0.5])
    assert h_omega(dom.translate(v), x + v, P2_2).h_value == pytest.approx(
        h_omega(dom, x, P2_2).h_value, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.sampled_from([1.5, 2.0, 3.0]))
def test_h_lower_bound(u, v, p):
    for dom in (Box([0, 0], [1, 2]), Ball([0, 0], 0.7)):
        blo, bhi = dom.bounding_box()
        x = blo + np.array([u, v]) * (bhi - blo)
        if dom.contains(x):
            prm = ProblemParams(2, p)
            assert h_omega(dom, x, prm).h_value >= h_lower_bound(dom, prm) - 1e-9


def test_h_errors():
    with pytest.raises(DomainError):
        h_omega(interval(0, 1), [1.5], P2_1)
    with pytest.raises(DomainError):
        h_omega(interval(0, 1), [0.5], P2_2)
    with pytest.raises(DomainError):
        h_omega(interval(0, 1), [0.2], P2_1, eps=0.5)


def test_h_grid():
    ball = Ball([0, 0], 1.0)
    g = Grid(ball, [[-0.1, -0.1]], [[0.1, 0.1]], [0.04])
    assert h_omega_grid(ball, g, P2_2)[0] == pytest.approx(h_omega(ball, [0, 0], P2_2).h_value)
    box = Box([0, 0], [1, 1])
    g8 = Grid.uniform(box, 8)
    vals, errs = h_omega_grid(box, g8, P2_2, return_errors=True)
    assert np.all(vals >= h_lower_bound(box, P2_2))
    assert np.all(errs <= 1e-8)
    # pointwise values do not depend on the rest of the grid
    sub = g8.subset([0, 9, 27])
    assert np.allclose(h_omega_grid(box, sub, P2_2), vals[[0, 9, 27]], atol=0, rtol=0)
