"""Pointwise evaluation of the logarithmic and fractional p-Laplacians.

All evaluations go through the spherical mean

    A(r) = ∫_{S^{N-1}} g(u(x) - u(x + r theta)) dtheta,

so that

    L u(x)      = C_{N,p} [∫_0^1 A(r)/r dr + ∫_1^R (A(r) - omega_N g(u(x)))/r dr]
                  + rho_N g(u(x)),
    (-Δ_p)^s u  = C_{N,s,p} [∫_0^R A(r) r^(-1-sp) dr + g(u(x)) omega_N R^(-sp)/(sp)],

with supp u ⊂ B_R(x).  For N = 1 the sphere is {-1, +1}.  For N = 2 the
circle is cut at the angles where it meets the support circle and the level
circle |y - c| = |x - c| (where g(u(x) - u(y)) stops being smooth when
p != 2); each arc is integrated with a tanh-sinh rule.  The radial integral
is split at the radii where those crossings appear or disappear; the piece
touching r = 0 uses a graded Gauss rule, the others tanh-sinh.  Error
estimates compare two refinement levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import (ProblemParams, frac_constant, g_map, kernel_constant, rho_constant,
                        sphere_measure)
from .errors import DomainError, QuadratureError
from .geometry import Domain, h_omega
from .quadrature import RadialRule, graded_rule, radial_rule, tanh_sinh

__all__ = [
    "ScalarField", "OperatorSample", "DerivativeReport", "g_map", "log_p_laplacian",
    "log_p_laplacian_domain", "frac_p_laplacian", "frac_p_laplacian_sample", "derivative_check",
]

KINDS = ("smooth_bump", "tent", "cos_bump", "polynomial_bump")
DEFAULT_TOL = 1e-8
_MAX_LEVEL = 7
_RULE_FRACTION = 0.25


def _profile(kind: str, s: np.ndarray, k: int) -> np.ndarray:
    inside = s < 1.0
    out = np.zeros_like(s)
    si = s[inside]
    if kind == "smooth_bump":
        out[inside] = np.exp(-1.0 / (1.0 - si * si))
    elif kind == "tent":
        out[inside] = 1.0 - si
    elif kind == "cos_bump":
        out[inside] = np.cos(0.5 * math.pi * si) ** 2
    elif kind == "polynomial_bump":
        out[inside] = (1.0 - si * si) ** k
    return out


def _profile_slope(kind: str, k: int) -> float:
    """max |f'(s)| on [0, 1)."""
    if kind == "tent":
        return 1.0
    if kind == "cos_bump":
        return 0.5 * math.pi
    s = np.linspace(0.0, 1.0, 200001)[:-1]
    if kind == "smooth_bump":
        d = 2.0 * s / (1.0 - s * s) ** 2 * np.exp(-1.0 / (1.0 - s * s))
    else:
        d = 2.0 * k * s * (1.0 - s * s) ** (k - 1)
    return float(d.max())


@dataclass(frozen=True)
class ScalarField:
    """Radial compactly supported test field ``amplitude * f(|x - center| / scale)``."""

    kind: str
    center: tuple
    scale: float
    amplitude: float = 1.0
    holder_exponent: float = 1.0
    power: int = 3
    lipschitz: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown field kind {self.kind!r}")
        c = tuple(float(v) for v in np.atleast_1d(np.asarray(self.center, dtype=float)))
        if len(c) not in (1, 2):
            raise DomainError("fields are supported in N in {1, 2}")
        if not self.scale > 0:
            raise DomainError("scale must be positive")
        if not 0.0 < self.holder_exponent <= 1.0:
            raise DomainError("holder exponent must lie in (0, 1]")
        object.__setattr__(self, "center", c)
        lip = abs(self.amplitude) * _profile_slope(self.kind, self.power) / self.scale
        object.__setattr__(self, "lipschitz", lip)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def support_radius(self) -> float:
        return self.scale

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        diff = pts - np.asarray(self.center)
        s = np.sqrt(np.sum(diff * diff, axis=-1)) / self.scale
        return self.amplitude * _profile(self.kind, s, self.power)

    def increment(self, x, w) -> np.ndarray:
        """u(x) - u(x + w) for offsets ``w`` of shape (..., N).

        Written in terms of D = s_x^2 - s_y^2 (s = |. - center| / scale), which
        is formed from w directly, so small increments keep full relative
        accuracy.
        """
        x = np.asarray(x, float)
        w = np.asarray(w, float)
        xc = x - np.asarray(self.center)
        t1 = float(xc @ xc) / self.scale ** 2
        D = -(2.0 * (w @ xc) + np.sum(w * w, axis=-1)) / self.scale ** 2
        yc = xc + w
        t2 = np.sum(yc * yc, axis=-1) / self.scale ** 2
        in1 = t1 < 1.0
        in2 = t2 < 1.0
        kind = self.kind
        out = np.zeros_like(D)
        both = in2 & in1
        if kind == "smooth_bump":
            f2 = np.where(in2, np.exp(-1.0 / np.where(in2, 1.0 - t2, 1.0)), 0.0)
            if in1:
                f1 = math.exp(-1.0 / (1.0 - t1))
                # E = a1 - a2 with a = -1/(1 - t); expand around the larger value
                E = -D / ((1.0 - t1) * np.where(in2, 1.0 - t2, 1.0))
                Eneg = np.minimum(E, 0.0)
                Epos = np.maximum(E, 0.0)
                diff = np.where(E <= 0.0, f2 * np.expm1(Eneg), -f1 * np.expm1(-Epos))
                out = np.where(both, diff, f1)
            else:
                out = -f2
        elif kind == "polynomial_bump":
            k = self.power
            a = 1.0 - t1
            b = np.where(in2, 1.0 - t2, 0.0)
            if in1:
                geo = sum(a ** (k - 1 - j) * b ** j for j in range(k))
                out = np.where(both, -D * geo, a ** k)
            else:
                out = -(b ** k)
        else:
            s1 = math.sqrt(t1)
            s2 = np.sqrt(t2)
            ssum = s1 + s2
            ds = np.where(ssum > 0, D / np.where(ssum > 0, ssum, 1.0), 0.0)   # s1 - s2
            if kind == "tent":
                f2 = np.where(in2, 1.0 - s2, 0.0)
                out = np.where(both, -ds, 1.0 - s1) if in1 else -f2
            else:
                f2 = np.where(in2, np.cos(0.5 * math.pi * s2) ** 2, 0.0)
                if in1:
                    out = np.where(both, -np.sin(0.5 * math.pi * ssum) * np.sin(0.5 * math.pi * ds),
                                   math.cos(0.5 * math.pi * s1) ** 2)
                else:
                    out = -f2
        return self.amplitude * out

    def at(self, x) -> float:
        return float(self(np.atleast_1d(np.asarray(x, float))[None, :])[0])

    def rescaled(self, r: float) -> "ScalarField":
        """The field x -> u(r x)."""
        if not r > 0:
            raise DomainError("r must be positive")
        return replace(self, center=tuple(np.asarray(self.center) / r), scale=self.scale / r)

    def moved(self, rotation, shift) -> "ScalarField":
        """The field x -> u(O x + x0) for an orthogonal O."""
        O = np.atleast_2d(np.asarray(rotation, float))
        x0 = np.atleast_1d(np.asarray(shift, float))
        if not np.allclose(O.T @ O, np.eye(self.dim), atol=1e-12):
            raise DomainError("rotation must be orthogonal")
        return replace(self, center=tuple(O.T @ (np.asarray(self.center) - x0)))

    def negated(self) -> "ScalarField":
        return replace(self, amplitude=-self.amplitude)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "scale": self.scale,
                "amplitude": self.amplitude, "holder_exponent": self.holder_exponent,
                "power": self.power}


@dataclass(frozen=True)
class OperatorSample:
    x: np.ndarray
    value: float
    split: tuple          # (near, far, zero_order)
    error_estimate: float


@dataclass(frozen=True)
class DerivativeReport:
    s: np.ndarray
    quotients: np.ndarray
    extrapolated: float
    L_value: float
    discrepancy: float
    slope: float


class _SphericalMean:
    """A(r) at two angular refinement levels for a fixed field and point."""

    def __init__(self, u: ScalarField, x: np.ndarray, p: float):
        self.u = u
        self.x = x
        self.p = p
        self.N = u.dim
        self.ux = u.at(x)
        c = np.asarray(u.center)
        self.dvec = c - x
        self.d = float(np.linalg.norm(self.dvec))
        self.phi0 = math.atan2(self.dvec[1], self.dvec[0]) if self.N == 2 else 0.0
        self.circles = [u.scale] + ([self.d] if self.d > 0 else [])

    def breakpoints(self) -> list[float]:
        d, rho = self.d, self.u.scale
        pts = [abs(rho - d), rho + d]
        if d > 0:
            pts += [d, 2.0 * d]
        return [b for b in pts if b > 0]

    @property
    def far_radius(self) -> float:
        return self.d + self.u.scale

    def __call__(self, r: np.ndarray, level: int):
        r = np.asarray(r, float)
        if self.N == 1:
            ws = np.stack([r, -r], axis=-1)[..., None]
            vals = g_map(self.u.increment(self.x, ws), self.p)
            a = np.sum(vals, axis=-1)
            return a, a
        nr = r.size
        cuts = [np.zeros(nr), np.full(nr, 2.0 * math.pi)]
        if self.d > 0:
            # near-tangency with the level or support circle happens on the
            # line through x and the centre
            cuts.append(np.full(nr, np.mod(self.phi0, 2.0 * math.pi)))
            cuts.append(np.full(nr, np.mod(self.phi0 + math.pi, 2.0 * math.pi)))
            for q in self.circles:
                with np.errstate(divide="ignore", invalid="ignore"):
                    cosd = (r * r + self.d * self.d - q * q) / (2.0 * r * self.d)
                ok = np.abs(cosd) < 1.0
                delta = np.arccos(np.clip(cosd, -1.0, 1.0))
                for sgn in (1.0, -1.0):
                    ang = np.mod(self.phi0 + sgn * delta, 2.0 * math.pi)
                    cuts.append(np.where(ok, ang, 2.0 * math.pi))
        cuts = np.sort(np.stack(cuts, axis=-1), axis=-1)
        lo, hi = cuts[:, :-1], cuts[:, 1:]
        span = hi - lo
        y, w = tanh_sinh(level + 1)
        theta = lo[..., None] + span[..., None] * y
        ws = np.empty(theta.shape + (2,))
        ws[..., 0] = r[:, None, None] * np.cos(theta)
        ws[..., 1] = r[:, None, None] * np.sin(theta)
        vals = g_map(self.u.increment(self.x, ws), self.p)
        fine = np.einsum("ijk,ij,k->i", vals, span, w)
        coarse = np.einsum("ijk,ij,k->i", vals[..., ::2], span, 2.0 * w[::2])
        return fine, coarse


def _ts_segment(fun, a: float, b: float, tol: float, level0: int = 3):
    """tanh-sinh on [a, b] for fun(r, level) -> (fine, coarse) arrays,
    raising the level until the two-level difference is below ``tol``."""
    best = None
    for level in range(level0, _MAX_LEVEL + 1):
        y, w = tanh_sinh(level + 1)
        r = a + (b - a) * y
        fine, coarse = fun(r, level)
        i_fine = (b - a) * float(np.dot(w, fine))
        i_rad = (b - a) * float(np.dot(2.0 * w[::2], fine[::2]))
        i_ang = (b - a) * float(np.dot(w, coarse))
        err = abs(i_fine - i_rad) + abs(i_fine - i_ang)
        best = (i_fine, err)
        if err <= tol:
            break
    return best


def _rule_segment(fun, rule: RadialRule, b: float, level: int = 4):
    """Graded rule on (0, b]; the error compares against a refined rule."""
    base = rule.scaled(b)
    fine_rule = graded_rule(b, rule.q, rule.M + 8, rule.order + 4)
    f_b, c_b = fun(base.radii, level)
    f_f, c_f = fun(fine_rule.radii, level)
    i_base = float(np.dot(base.weights, f_b))
    i_fine = float(np.dot(fine_rule.weights, f_f))
    i_ang = float(np.dot(fine_rule.weights, c_f))
    return i_fine, abs(i_fine - i_base) + abs(i_fine - i_ang)


def _radial_integral(fun, knots: list[float], rule: RadialRule | None, tol: float,
                     start_at_zero: bool):
    knots = sorted(set(knots))
    total, err = 0.0, 0.0
    nseg = max(1, len(knots) - 1)
    for i, (a, b) in enumerate(zip(knots[:-1], knots[1:])):
        if b - a <= 1e-14 * max(1.0, b):
            continue
        if i == 0 and start_at_zero and a == 0.0:
            # graded rule near the origin only; the far end of the segment may
            # carry an algebraic singularity that tanh-sinh resolves better
            v, e = _rule_segment(fun, rule, _RULE_FRACTION * b)
            v2, e2 = _ts_segment(fun, _RULE_FRACTION * b, b, tol / nseg)
            v, e = v + v2, e + e2
        else:
            v, e = _ts_segment(fun, a, b, tol / nseg)
        total += v
        err += e
    return total, err


def _check_field(u: ScalarField, x, params: ProblemParams) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, float))
    if x.shape != (u.dim,) or params.N != u.dim:
        raise DomainError("dimension mismatch between field, point and params")
    return x


def _default_rule(u: ScalarField, params: ProblemParams, s: float = 0.0) -> RadialRule:
    return radial_rule(1.0, u.holder_exponent, params.p, 1e-12, s=s)


def log_p_laplacian(u: ScalarField, x, params: ProblemParams, rule: RadialRule | None = None,
                    tol: float = DEFAULT_TOL) -> OperatorSample:
    """L_{Δp} u(x) through the representation with the kernel split at radius 1."""
    x = _check_field(u, x, params)
    if not u.holder_exponent * (params.p - 1.0) > 0:
        raise DomainError("alpha (p - 1) must be positive")
    rule = rule or _default_rule(u, params)
    sm = _SphericalMean(u, x, params.p)
    c_np = kernel_constant(params)
    omega = sphere_measure(params.N)
    gux = g_map(sm.ux, params.p)
    inner_tol = 0.25 * tol / c_np

    def near_fun(r, level):
        f, c = sm(r, level)
        return f / r, c / r

    def far_fun(r, level):
        f, c = sm(r, level)
        return (f - omega * gux) / r, (c - omega * gux) / r

    bps = sm.breakpoints()
    near, e_near = _radial_integral(near_fun, [0.0, 1.0] + [b for b in bps if b < 1.0],
                                    rule, inner_tol, True)
    R = sm.far_radius
    far, e_far = 0.0, 0.0
    if R > 1.0:
        far, e_far = _radial_integral(far_fun, [1.0, R] + [b for b in bps if 1.0 < b < R],
                                      rule, inner_tol, False)
    zero = rho_constant(params) * gux
    err = c_np * (e_near + e_far)
    value = c_np * (near + far) + zero
    if err > tol:
        raise QuadratureError(f"operator error estimate {err:.3g} exceeds tol {tol:.3g}",
                              estimate=value, error=err)
    return OperatorSample(x=x, value=value, split=(near, far, zero), error_estimate=err)


def log_p_laplacian_domain(u: ScalarField, x, omega_dom: Domain, params: ProblemParams,
                           tol: float = DEFAULT_TOL, rule: RadialRule | None = None,
                           ) -> OperatorSample:
    """L_{Δp} u(x) through the Ω-split representation with weight h_Ω."""
    x = _check_field(u, x, params)
    if omega_dom.dim != u.dim:
        raise DomainError("domain dimension mismatch")
    if not omega_dom.contains(x):
        raise DomainError("x must lie in the domain")
    rule = rule or _default_rule(u, params)
    sm = _SphericalMean(u, x, params.p)
    c_np = kernel_constant(params)
    omega = sphere_measure(params.N)
    gux = g_map(sm.ux, params.p)
    inner_tol = 0.2 * tol / c_np

    def fun(r, level):
        f, c = sm(r, level)
        sig = np.fromiter((omega_dom.angular_measure(x, float(ri)) for ri in r), float, r.size)
        ext = gux * (omega - sig)
        return (f - ext) / r, (c - ext) / r

    R = max(sm.far_radius, omega_dom.far_radius(x))
    bps = sm.breakpoints() + omega_dom.radial_breakpoints(x)
    delta = omega_dom.boundary_distance(x)
    bps = [b for b in bps if 0 < b < R] + [delta]
    top = min(1.0, R)
    near, e_near = _radial_integral(fun, [0.0, top] + [b for b in bps if b < top],
                                    rule, inner_tol, True)
    far, e_far = (0.0, 0.0)
    if R > 1.0:
        far, e_far = _radial_integral(fun, [1.0, R] + [b for b in bps if 1.0 < b < R],
                                      rule, inner_tol, False)
    hrep = h_omega(omega_dom, x, params, tol=0.2 * tol)
    zero = (rho_constant(params) + hrep.h_value) * gux
    err = c_np * (e_near + e_far) + abs(gux) * hrep.quadrature_error_estimate
    value = c_np * (near + far) + zero
    if err > tol:
        raise QuadratureError(f"operator error estimate {err:.3g} exceeds tol {tol:.3g}",
                              estimate=value, error=err)
    return OperatorSample(x=x, value=value, split=(near, far, zero), error_estimate=err)


def frac_p_laplacian_sample(u: ScalarField, x, params: ProblemParams,
                            tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """(-Δ_p)^s u(x) and its error estimate."""
    x = _check_field(u, x, params)
    s = params.s
    if s is None:
        raise DomainError("frac_p_laplacian needs s")
    sp = s * params.p
    if not u.holder_exponent * (params.p - 1.0) > sp:
        raise DomainError(f"need alpha (p - 1) > sp, got {u.holder_exponent * (params.p - 1.0):.4g}"
                          f" <= {sp:.4g}")
    sm = _SphericalMean(u, x, params.p)
    c_s = frac_constant(params)
    omega = sphere_measure(params.N)
    gux = g_map(sm.ux, params.p)
    R = sm.far_radius
    rule = _default_rule(u, params, s)

    def fun(r, level):
        f, c = sm(r, level)
        wgt = r ** (-1.0 - sp)
        return f * wgt, c * wgt

    knots = [0.0, R] + [b for b in sm.breakpoints() if b < R]
    val, err = _radial_integral(fun, knots, rule, 0.25 * tol / c_s, True)
    tail = gux * omega * R ** (-sp) / sp
    value = c_s * (val + tail)
    err *= c_s
    if err > tol:
        raise QuadratureError(f"fractional error estimate {err:.3g} exceeds tol {tol:.3g}",
                              estimate=value, error=err)
    return value, err


def frac_p_laplacian(u: ScalarField, x, params: ProblemParams, tol: float = DEFAULT_TOL) -> float:
    return frac_p_laplacian_sample(u, x, params, tol)[0]


def derivative_check(u: ScalarField, x, s_list, params: ProblemParams,
                     tol: float = 1e-10) -> DerivativeReport:
    """Difference quotients ((-Δ_p)^s u - g(u)) / s against L_{Δp} u(x).

    The limit s -> 0 is extrapolated by the polynomial through all
    (s, quotient) pairs (Neville/Richardson); the slope is the least-squares
    log-log slope of |quotient - L value| against s.
    """
    s_arr = np.asarray(s_list, dtype=float)
    if s_arr.ndim != 1 or s_arr.size < 2 or np.any(np.diff(s_arr) >= 0) or np.any(s_arr <= 0):
        raise DomainError("s_list must be a decreasing list of positive reals")
    x = _check_field(u, x, params)
    gux = g_map(u.at(x), params.p)
    q = np.array([(frac_p_laplacian(u, x, params.with_s(float(s)), tol) - gux) / s
                  for s in s_arr])
    deg = min(s_arr.size - 1, 3)
    extrap = float(np.polyval(np.polyfit(s_arr, q, deg), 0.0))
    L = log_p_laplacian(u, x, params.with_s(None), tol=tol).value
    gap = np.abs(q - L)
    slope = float(np.polyfit(np.log(s_arr), np.log(gap), 1)[0]) if np.all(gap > 0) else float("nan")
    disc = abs(extrap - L) / max(abs(L), 1e-300)
    return DerivativeReport(s=s_arr, quotients=q, extrapolated=extrap, L_value=L,
                            discrepancy=disc, slope=slope)
