"""Bounded domains in dimension 1 and 2 and the boundary weight h_Omega.

Supported shapes are axis-aligned boxes (intervals when N = 1), balls and
finite unions of boxes with disjoint interiors.  Every shape exposes

* ``contains`` / ``inside`` (vectorised), ``boundary_distance``, ``volume``;
* ``dilate`` / ``translate`` returning new immutable domains;
* ``angular_measure(x, r)``: the measure sigma(r) of the directions theta
  on the unit sphere with ``x + r theta`` inside the domain;
* ``radial_moment(x, r_lo, r_hi, a)``: the integral of
  ``r^(-1-a) sigma(r)`` over ``[r_lo, r_hi]``, closed form when N = 1 and
  adaptive Gauss-Kronrod (QUADPACK) between geometric breakpoints when N = 2.

``h_omega`` evaluates the boundary weight through the inner-ball
representation ``p ln(1/eps) - C_{N,p} int_{Omega minus B_eps(x)} |x-y|^-N dy``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .constants import ProblemParams, kernel_constant, unit_ball_volume
from .errors import DomainError, QuadratureError

TWO_PI = 2.0 * math.pi

DEFAULT_H_TOL = 1e-8


def _as_point(x, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (dim,):
        raise DomainError(f"expected a point of dimension {dim}, got shape {arr.shape}")
    return arr


def _power_integral(alpha: float, beta: float, a: float) -> float:
    """int_alpha^beta r^(-1-a) dr for 0 < alpha <= beta."""
    if beta <= alpha:
        return 0.0
    if a == 0.0:
        return math.log(beta / alpha)
    return (alpha ** (-a) - beta ** (-a)) / a


class Domain(ABC):
    """Bounded open subset of R^N (N in {1, 2})."""

    dim: int

    @abstractmethod
    def inside(self, pts: np.ndarray) -> np.ndarray:
        """Vectorised membership test for points of shape (..., N)."""

    @abstractmethod
    def boundary_distance(self, x) -> float:
        ...

    @abstractmethod
    def volume(self) -> float:
        ...

    @abstractmethod
    def dilate(self, r: float) -> "Domain":
        ...

    @abstractmethod
    def translate(self, v) -> "Domain":
        ...

    @abstractmethod
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def angular_measure(self, x: np.ndarray, r: float) -> float:
        ...

    @abstractmethod
    def radial_breakpoints(self, x: np.ndarray) -> list[float]:
        """Radii at which sigma(r) may fail to be smooth."""

    @abstractmethod
    def circle_crossings(self, x: np.ndarray, r: float) -> list[float]:
        """Angles where the circle |y - x| = r meets the boundary (N = 2)."""

    @abstractmethod
    def intervals_1d(self) -> list[tuple[float, float]]:
        """Component intervals (N = 1 only)."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def contains(self, x) -> bool:
        return bool(self.inside(_as_point(x, self.dim)[None, :])[0])

    def far_radius(self, x) -> float:
        """Largest distance from ``x`` to a point of the closure."""
        lo, hi = self.bounding_box()
        x = _as_point(x, self.dim)
        return float(np.sqrt(np.sum(np.maximum(np.abs(x - lo), np.abs(hi - x)) ** 2)))

    def radial_moment(self, x, r_lo: float, r_hi: float, a: float = 0.0,
                      tol: float = 1e-10) -> tuple[float, float]:
        """Return (int_{r_lo}^{r_hi} r^(-1-a) sigma(r) dr, error estimate)."""
        x = _as_point(x, self.dim)
        if r_hi <= r_lo:
            return 0.0, 0.0
        if self.dim == 1:
            total = 0.0
            for c, d in self.intervals_1d():
                # x + r in (c, d) and x - r in (c, d)
                for lo_r, hi_r in ((c - x[0], d - x[0]), (x[0] - d, x[0] - c)):
                    lo_r = max(lo_r, r_lo, 0.0)
                    hi_r = min(hi_r, r_hi)
                    if hi_r > lo_r:
                        total += _power_integral(lo_r, hi_r, a)
            return total, 0.0
        knots = [r_lo]
        for b in sorted(b for b in self.radial_breakpoints(x) if r_lo < b < r_hi):
            # breakpoints that coincide up to rounding (symmetric points) merge
            if b - knots[-1] > 1e-12 * b:
                knots.append(b)
        if r_hi - knots[-1] <= 1e-12 * r_hi and len(knots) > 1:
            knots.pop()
        knots.append(r_hi)
        total = 0.0
        err = 0.0
        n_pieces = len(knots) - 1
        for r0, r1 in zip(knots[:-1], knots[1:]):

            def f(t):
                r = math.exp(t)
                return math.exp(-a * t) * self.angular_measure(x, r)

            val, e = integrate.quad(f, math.log(r0), math.log(r1),
                                    epsabs=tol / n_pieces, epsrel=1e-13, limit=200)
            total += val
            err += e
        return total, err


class Box(Domain):
    """Open axis-aligned box ``prod (lo_i, hi_i)``; an interval when N = 1."""

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box corners must be 1-d arrays of equal length")
        if not np.all(hi > lo):
            raise DomainError("box must have hi > lo in every axis")
        if lo.size not in (1, 2):
            raise DomainError("only N in {1, 2} is supported")
        self.lo = lo
        self.hi = hi
        self.dim = lo.size
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def __eq__(self, other):
        return (isinstance(other, Box) and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))

    def __hash__(self):
        return hash(("box", tuple(self.lo), tuple(self.hi)))

    def inside(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.all((pts > self.lo) & (pts < self.hi), axis=-1)

    def boundary_distance(self, x):
        x = _as_point(x, self.dim)
        if not self.contains(x):
            # distance to the closed box boundary from outside or on it
            gap = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
            return float(np.sqrt(np.sum(gap ** 2)))
        return float(min(np.min(x - self.lo), np.min(self.hi - x)))

    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def dilate(self, r):
        if not r > 0:
            raise DomainError(f"dilation factor must be positive, got {r!r}")
        return Box(r * self.lo, r * self.hi)

    def translate(self, v):
        v = _as_point(v, self.dim)
        return Box(self.lo + v, self.hi + v)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def intervals_1d(self):
        if self.dim != 1:
            raise DomainError("intervals_1d is defined for N = 1 only")
        return [(float(self.lo[0]), float(self.hi[0]))]

    def angular_measure(self, x, r):
        if self.dim == 1:
            return float(self.lo[0] < x[0] + r < self.hi[0]) + float(self.lo[0] < x[0] - r < self.hi[0])
        return _box_arc_measure(self.lo, self.hi, x, r)

    def radial_breakpoints(self, x):
        out = []
        for k in range(self.dim):
            out += [abs(self.lo[k] - x[k]), abs(self.hi[k] - x[k])]
        if self.dim == 2:
            for cx in (self.lo[0], self.hi[0]):
                for cy in (self.lo[1], self.hi[1]):
                    out.append(math.hypot(cx - x[0], cy - x[1]))
        return sorted(float(b) for b in out if b > 0)

    def circle_crossings(self, x, r):
        return _box_line_angles(self.lo, self.hi, x, r)

    def to_dict(self):
        if self.dim == 1:
            return {"type": "interval", "a": float(self.lo[0]), "b": float(self.hi[0])}
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def interval(a: float, b: float) -> Box:
    return Box([a], [b])


class Ball(Domain):
    """Open ball of given centre and radius (an interval when N = 1)."""

    def __init__(self, center: Sequence[float], radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.ndim != 1 or center.size not in (1, 2):
            raise DomainError("only N in {1, 2} is supported")
        if not radius > 0:
            raise DomainError("ball radius must be positive")
        self.center = center
        self.center.setflags(write=False)
        self.radius = float(radius)
        self.dim = center.size

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"

    def __eq__(self, other):
        return (isinstance(other, Ball) and np.array_equal(self.center, other.center)
                and self.radius == other.radius)

    def __hash__(self):
        return hash(("ball", tuple(self.center), self.radius))

    def inside(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.sum((pts - self.center) ** 2, axis=-1) < self.radius ** 2

    def boundary_distance(self, x):
        x = _as_point(x, self.dim)
        return float(abs(self.radius - np.linalg.norm(x - self.center)))

    def volume(self):
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def dilate(self, r):
        if not r > 0:
            raise DomainError(f"dilation factor must be positive, got {r!r}")
        return Ball(r * self.center, r * self.radius)

    def translate(self, v):
        return Ball(self.center + _as_point(v, self.dim), self.radius)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def intervals_1d(self):
        if self.dim != 1:
            raise DomainError("intervals_1d is defined for N = 1 only")
        c = float(self.center[0])
        return [(c - self.radius, c + self.radius)]

    def angular_measure(self, x, r):
        if self.dim == 1:
            c, R = float(self.center[0]), self.radius
            return float(abs(x[0] + r - c) < R) + float(abs(x[0] - r - c) < R)
        d = math.hypot(x[0] - self.center[0], x[1] - self.center[1])
        R = self.radius
        if d == 0.0:
            return TWO_PI if r < R else 0.0
        if r <= R - d:
            return TWO_PI
        if r >= R + d or r <= d - R:
            return 0.0
        # law of cosines: |x - c + r theta| < R  <=>  cos(angle) < (R^2 - d^2 - r^2) / (2 r d)
        c = (R * R - d * d - r * r) / (2.0 * r * d)
        c = min(1.0, max(-1.0, c))
        return 2.0 * (math.pi - math.acos(c))

    def radial_breakpoints(self, x):
        d = float(np.linalg.norm(x - self.center))
        return sorted(b for b in (abs(self.radius - d), self.radius + d) if b > 0)

    def circle_crossings(self, x, r):
        dv = x - self.center
        d = math.hypot(dv[0], dv[1])
        if d == 0.0 or r == 0.0:
            return []
        c = (self.radius ** 2 - d * d - r * r) / (2.0 * r * d)
        if abs(c) >= 1.0:
            return []
        base = math.atan2(dv[1], dv[0])
        w = math.acos(c)
        return [(base + w) % TWO_PI, (base - w) % TWO_PI]

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class BoxUnion(Domain):
    """Interior of the closure of a finite union of boxes with disjoint interiors.

    Boxes may be separated or share (parts of) faces; shared faces belong to
    the open set.  The boundary is the set of exposed face pieces.
    """

    def __init__(self, boxes: Sequence[Box]):
        boxes = list(boxes)
        if not boxes:
            raise DomainError("a union needs at least one box")
        dims = {b.dim for b in boxes}
        if len(dims) != 1:
            raise DomainError("all boxes of a union must have the same dimension")
        self.boxes = tuple(boxes)
        self.dim = dims.pop()
        for i, a in enumerate(self.boxes):
            for b in self.boxes[i + 1:]:
                ov = np.minimum(a.hi, b.hi) - np.maximum(a.lo, b.lo)
                if np.all(ov > 0):
                    raise DomainError("boxes of a union must have disjoint interiors")
        self._faces = self._exposed_faces()

    def __repr__(self):
        return f"BoxUnion({list(self.boxes)!r})"

    def __eq__(self, other):
        return isinstance(other, BoxUnion) and self.boxes == other.boxes

    def __hash__(self):
        return hash(("union", self.boxes))

    def _exposed_faces(self):
        """Boundary pieces as (axis, coordinate, lo, hi) with lo/hi along the
        other axis (N = 2) or as points (N = 1)."""
        faces = []
        if self.dim == 1:
            for b in self.boxes:
                for end, side in ((b.lo[0], "lo"), (b.hi[0], "hi")):
                    shared = any((side == "lo" and o.hi[0] == end) or (side == "hi" and o.lo[0] == end)
                                 for o in self.boxes if o is not b)
                    if not shared:
                        faces.append((0, float(end), 0.0, 0.0))
            return faces
        for b in self.boxes:
            for axis in (0, 1):
                other = 1 - axis
                for side in ("lo", "hi"):
                    coord = b.lo[axis] if side == "lo" else b.hi[axis]
                    pieces = [(float(b.lo[other]), float(b.hi[other]))]
                    for o in self.boxes:
                        if o is b:
                            continue
                        ocoord = o.hi[axis] if side == "lo" else o.lo[axis]
                        if ocoord != coord:
                            continue
                        cut = (float(o.lo[other]), float(o.hi[other]))
                        pieces = _subtract_interval(pieces, cut)
                    for lo_, hi_ in pieces:
                        faces.append((axis, float(coord), lo_, hi_))
        return faces

    def exposed_faces(self):
        return list(self._faces)

    def inside(self, pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, self.dim)
        closed = np.zeros(flat.shape[0], dtype=bool)
        for b in self.boxes:
            closed |= np.all((flat >= b.lo) & (flat <= b.hi), axis=-1)
        out = closed.copy()
        idx = np.nonzero(closed)[0]
        if idx.size:
            out[idx] = self._face_distance(flat[idx]) > 0.0
        return out.reshape(pts.shape[:-1])

    def _face_distance(self, pts):
        pts = np.atleast_2d(pts)
        best = np.full(pts.shape[0], np.inf)
        for axis, coord, lo_, hi_ in self._faces:
            if self.dim == 1:
                d = np.abs(pts[:, 0] - coord)
            else:
                other = 1 - axis
                t = np.clip(pts[:, other], lo_, hi_)
                d = np.hypot(pts[:, axis] - coord, pts[:, other] - t)
            best = np.minimum(best, d)
        return best

    def boundary_distance(self, x):
        x = _as_point(x, self.dim)
        return float(self._face_distance(x[None, :])[0])

    def volume(self):
        return float(sum(b.volume() for b in self.boxes))

    def dilate(self, r):
        if not r > 0:
            raise DomainError(f"dilation factor must be positive, got {r!r}")
        return BoxUnion([b.dilate(r) for b in self.boxes])

    def translate(self, v):
        return BoxUnion([b.translate(v) for b in self.boxes])

    def bounding_box(self):
        lo = np.min([b.lo for b in self.boxes], axis=0)
        hi = np.max([b.hi for b in self.boxes], axis=0)
        return lo, hi

    def intervals_1d(self):
        if self.dim != 1:
            raise DomainError("intervals_1d is defined for N = 1 only")
        return [iv for b in self.boxes for iv in b.intervals_1d()]

    def angular_measure(self, x, r):
        return float(sum(b.angular_measure(x, r) for b in self.boxes))

    def radial_breakpoints(self, x):
        return sorted({bp for b in self.boxes for bp in b.radial_breakpoints(x)})

    def circle_crossings(self, x, r):
        return sorted({a for b in self.boxes for a in b.circle_crossings(x, r)})

    def to_dict(self):
        return {"type": "union", "boxes": [b.to_dict() for b in self.boxes]}


def _subtract_interval(pieces, cut):
    out = []
    c0, c1 = cut
    for a, b in pieces:
        if c1 <= a or c0 >= b:
            out.append((a, b))
            continue
        if c0 > a:
            out.append((a, c0))
        if c1 < b:
            out.append((c1, b))
    return out


def _box_line_angles(lo, hi, x, r):
    """Angles at which the circle of radius r about x crosses the four
    supporting lines of the box."""
    if len(lo) != 2 or r <= 0.0:
        return []
    angles = []
    for val in (lo[0], hi[0]):
        c = (val - x[0]) / r
        if -1.0 < c < 1.0:
            a = math.acos(c)
            angles += [a, TWO_PI - a]
    for val in (lo[1], hi[1]):
        c = (val - x[1]) / r
        if -1.0 < c < 1.0:
            a = math.asin(c)
            angles += [a % TWO_PI, (math.pi - a) % TWO_PI]
    return sorted(angles)


def _box_arc_measure(lo, hi, x, r):
    angles = _box_line_angles(lo, hi, x, r)
    x0, x1 = x[0], x[1]
    l0, l1, h0, h1 = lo[0], lo[1], hi[0], hi[1]

    def inside(theta):
        y0 = x0 + r * math.cos(theta)
        y1 = x1 + r * math.sin(theta)
        return l0 < y0 < h0 and l1 < y1 < h1

    if not angles:
        return TWO_PI if inside(0.0) else 0.0
    total = 0.0
    n = len(angles)
    for i in range(n):
        a = angles[i]
        b = angles[i + 1] if i + 1 < n else angles[0] + TWO_PI
        if b - a <= 0.0:
            continue
        if inside(0.5 * (a + b)):
            total += b - a
    return total


def domain_from_dict(data: dict) -> Domain:
    """Build a domain from a tagged record ``{type, ...parameters}``."""
    kind = data.get("type")
    if kind == "interval":
        return interval(data["a"], data["b"])
    if kind == "box":
        return Box(data["lo"], data["hi"])
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "union":
        return BoxUnion([domain_from_dict(b) for b in data["boxes"]])
    raise DomainError(f"unknown domain type {kind!r}")


@dataclass(frozen=True)
class BoundaryWeightReport:
    x: np.ndarray
    h_value: float
    epsilon_used: float
    quadrature_error_estimate: float


def h_omega(domain: Domain, x, params: ProblemParams, tol: float = DEFAULT_H_TOL,
            eps: float | None = None) -> BoundaryWeightReport:
    """Boundary weight h_Omega(x) via the inner-ball representation.

    ``eps`` defaults to the boundary distance; any value in (0, delta_x]
    gives the same result up to quadrature error.
    """
    x = _as_point(x, domain.dim)
    if params.N != domain.dim:
        raise DomainError("dimension of params and domain differ")
    if not domain.contains(x):
        raise DomainError(f"h_omega requires x in the domain, got {x.tolist()}")
    delta = domain.boundary_distance(x)
    if eps is None:
        eps = delta
    if not 0.0 < eps <= delta * (1.0 + 1e-12):
        raise DomainError(f"eps must lie in (0, {delta}], got {eps}")
    c_np = kernel_constant(params)
    r_far = domain.far_radius(x)
    moment, err = domain.radial_moment(x, eps, r_far, 0.0, tol=0.5 * tol / c_np)
    err *= c_np
    if err > tol:
        raise QuadratureError(f"h_omega error estimate {err:.3g} exceeds tol {tol:.3g}",
                              estimate=params.p * math.log(1.0 / eps) - c_np * moment, error=err)
    value = params.p * math.log(1.0 / eps) - c_np * moment
    return BoundaryWeightReport(x=x, h_value=value, epsilon_used=float(eps),
                                quadrature_error_estimate=err)


def h_omega_grid(domain: Domain, grid, params: ProblemParams, tol: float = DEFAULT_H_TOL,
                 return_errors: bool = False):
    """h_Omega at every cell centre of ``grid`` (midpoint rule for cell averages)."""
    values = np.empty(grid.n)
    errors = np.empty(grid.n)
    for i, c in enumerate(grid.centers):
        rep = h_omega(domain, c, params, tol)
        values[i] = rep.h_value
        errors[i] = rep.quadrature_error_estimate
    if return_errors:
        return values, errors
    return values


def h_lower_bound(domain: Domain, params: ProblemParams) -> float:
    """(p/N) ln(|B_1| / |Omega|), a pointwise lower bound for h_Omega."""
    return params.p / params.N * math.log(unit_ball_volume(params.N) / domain.volume())
