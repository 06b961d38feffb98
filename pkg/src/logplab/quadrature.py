"""Quadrature building blocks for weakly singular kernels.

* ``radial_rule``: geometrically graded Gauss-Legendre rules on (0, R] for
  integrands behaving like r^(beta-1) near the origin.
* ``tanh_sinh``: double-exponential rule on [0, 1], used for arcs and radial
  segments whose end points carry algebraic singularities.
* ``kernel_mass``: the exact-up-to-rounding double integral
  ``∬_{A×B} |x-y|^-beta dx dy`` for axis-aligned cells A, B.  It is written
  as ``∫ |z|^-beta phi(z) dz`` with ``phi(z) = |A ∩ (B + z)|``; phi is a
  product of one-dimensional trapezoids, hence piecewise (bi)linear, and each
  piece is integrated analytically in r after a polar change of variables.
  In two dimensions the remaining angular integral is smooth on the pieces and
  is done with Gauss-Legendre.
* ``PairWeightTable`` / ``weight_table`` / binary cache.
* ``exterior_killing``: ``∫_{R^N minus Ω} |x-y|^(-N-sp) dy``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .constants import ProblemParams, sphere_measure
from .errors import DomainError, QuadratureError
from .geometry import Domain

LOG_TOL = 1e-8
FRAC_TOL = 1e-6

_CACHE_MAGIC = b"LOGPWT01"


# ---------------------------------------------------------------------------
# radial rules

@dataclass(frozen=True)
class RadialRule:
    """Nodes/weights on (0, R] graded geometrically toward 0.

    Panels are [R q^(k+1), R q^k] for k < M-1 plus the innermost [0, R q^(M-1)],
    each with ``order`` Gauss-Legendre points.
    """

    radii: np.ndarray
    weights: np.ndarray
    R: float
    q: float
    M: int
    order: int

    @property
    def nodes(self) -> np.ndarray:
        return np.column_stack([self.radii, self.weights])

    @property
    def smallest_panel(self) -> float:
        return self.R * self.q ** (self.M - 1)

    def scaled(self, R: float) -> "RadialRule":
        f = R / self.R
        return RadialRule(self.radii * f, self.weights * f, R, self.q, self.M, self.order)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.radii)))


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def graded_rule(R: float, q: float, M: int, order: int) -> RadialRule:
    if not (R > 0 and 0 < q < 1 and M >= 1 and order >= 1):
        raise DomainError("invalid graded rule parameters")
    x, w = _gauss_legendre(order)
    edges = R * q ** np.arange(M, dtype=float)
    edges = np.append(edges, 0.0)[::-1]      # 0, Rq^(M-1), ..., R
    a, b = edges[:-1, None], edges[1:, None]
    radii = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return RadialRule(radii, weights, float(R), float(q), int(M), int(order))


def radial_rule(R: float, holder_exponent: float, p: float, target_error: float = 1e-10,
                s: float = 0.0, q: float = 0.15) -> RadialRule:
    """Graded rule integrating r^(beta-1), beta = alpha(p-1) - s p, on (0, R]
    to relative error ``target_error`` against the closed form R^beta/beta."""
    beta = holder_exponent * (p - 1.0) - s * p
    if not beta > 0:
        raise DomainError(f"divergent radial integral: alpha(p-1) - sp = {beta:.6g} <= 0")
    if not R > 0:
        raise DomainError("R must be positive")
    exact = R ** beta / beta
    for order in (8, 12, 16, 24):
        err_prev = None
        for M in range(2, 2000):
            rule = graded_rule(R, q, M, order)
            err = abs(rule.integrate(lambda r: r ** (beta - 1.0)) - exact) / exact
            if err <= target_error:
                return rule
            if err_prev is not None and err >= 0.9 * err_prev:
                break        # panel error dominates: raise the order
            err_prev = err
    raise QuadratureError(f"radial rule cannot reach {target_error:g}", error=err)


@lru_cache(maxsize=None)
def tanh_sinh(level: int, t_max: float = 3.6):
    """Double-exponential nodes y in (0, 1) and weights with step 2^-level.

    Nodes of ``level`` are a subset of those of ``level + 1``.
    """
    h = 2.0 ** (-level)
    k = np.arange(-int(round(t_max / h)), int(round(t_max / h)) + 1)
    t = k * h
    u = 0.5 * math.pi * np.sinh(t)
    e = np.exp(-2.0 * np.abs(u))
    # y = (1 + tanh u) / 2, written to stay accurate near both ends
    y = np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    sech2 = 4.0 * e / (1.0 + e) ** 2
    w = 0.5 * h * 0.5 * math.pi * np.cosh(t) * sech2
    keep = w > 1e-300
    y, w = y[keep], w[keep]
    y.setflags(write=False)
    w.setflags(write=False)
    return y, w


# ---------------------------------------------------------------------------
# cell-pair kernel masses

def _cell(c):
    if hasattr(c, "lo") and hasattr(c, "hi"):
        return np.atleast_1d(np.asarray(c.lo, float)), np.atleast_1d(np.asarray(c.hi, float))
    lo, hi = c
    return np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))


def _overlap_pieces(a, b, c, d):
    """Linear pieces (t0, t1, intercept, slope) of t -> |[a,b] ∩ [c+t, d+t]|,
    split at t = 0.  Intercepts are differences of the inputs, so a piece
    adjacent to 0 has an exactly-zero intercept when the cells touch."""
    knots = sorted({a - d, b - d, a - c, b - c, 0.0})
    lo_t, hi_t = a - d, b - c
    out = []
    for t0, t1 in zip(knots[:-1], knots[1:]):
        if t1 <= t0 or t1 <= lo_t or t0 >= hi_t:
            continue
        tm = 0.5 * (t0 + t1)
        top, top_s = (b, 0.0) if b <= d + tm else (d, 1.0)
        bot, bot_s = (a, 0.0) if a >= c + tm else (c, 1.0)
        if top + top_s * tm - bot - bot_s * tm <= 0.0:
            continue
        out.append((t0, t1, top - bot, top_s - bot_s))
    return out


def _pow_int(r0, r1, q):
    """∫_{r0}^{r1} r^q dr, elementwise, 0 <= r0 <= r1 (r0 > 0 when q <= -1)."""
    r0 = np.asarray(r0, float)
    r1 = np.asarray(r1, float)
    e = q + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if e == 0.0:
            return np.log(r1 / r0)
        l0 = np.log(np.where(r0 > 0, r0, 1.0))
        l1 = np.log(r1)
        # r0^e * expm1(e (l1 - l0)) / e, stable for small e
        gen = np.exp(e * l0) * np.expm1(e * (l1 - l0)) / e
        return np.where(r0 > 0, gen, r1 ** e / e if e > 0 else np.inf)


def _mass_1d(pieces, beta, cut, part):
    total = 0.0
    for t0, t1, alpha, gamma in pieces:
        sgn = 1.0 if t0 >= 0.0 else -1.0
        r0, r1 = sorted((abs(t0), abs(t1)))
        spans = [(r0, r1)]
        if cut is not None:
            if part == "inside":
                spans = [(r0, min(r1, cut))]
            else:
                spans = [(max(r0, cut), r1)]
        for s0, s1 in spans:
            if s1 <= s0:
                continue
            if s0 == 0.0 and alpha != 0.0:
                raise DomainError("cells overlap: kernel mass diverges")
            val = gamma * sgn * float(_pow_int(s0, s1, 1.0 - beta))
            if alpha != 0.0:
                val += alpha * float(_pow_int(s0, s1, -beta))
            total += val
    return total


def _rect_polar(u0, u1, v0, v1, c0, c1, c2, c3, beta, cut, part, tol):
    """∫ over [u0,u1]x[v0,v1] (first quadrant) of |z|^-beta (c0 + c1 z1 + c2 z2 + c3 z1 z2)."""
    at_origin = u0 == 0.0 and v0 == 0.0
    if at_origin and c0 != 0.0:
        raise DomainError("cells overlap: kernel mass diverges")
    th_lo = math.atan2(v0, u1)
    th_hi = math.atan2(v1, u0)
    knots = {th_lo, th_hi, math.atan2(v1, u1)}
    if not at_origin:
        knots.add(math.atan2(v0, u0))
    if cut is not None:
        for w in (u0, u1):
            if 0.0 < w < cut:
                knots.add(math.acos(w / cut))
        for w in (v0, v1):
            if 0.0 < w < cut:
                knots.add(math.asin(w / cut))
    knots = sorted(k for k in knots if th_lo <= k <= th_hi)

    def piece(th):
        ct, st = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore"):
            r_in = np.maximum(np.where(u0 > 0, u0 / ct, 0.0), np.where(v0 > 0, v0 / st, 0.0))
            r_out = np.minimum(np.where(ct > 0, u1 / ct, np.inf), np.where(st > 0, v1 / st, np.inf))
        if cut is not None:
            if part == "inside":
                r_out = np.minimum(r_out, cut)
            else:
                r_in = np.maximum(r_in, cut)
        ok = r_out > r_in
        r_in = np.where(ok, r_in, 1.0)
        r_out = np.where(ok, r_out, 1.0)
        val = (c1 * ct + c2 * st) * _pow_int(r_in, r_out, 2.0 - beta)
        val = val + c3 * ct * st * _pow_int(r_in, r_out, 3.0 - beta)
        if c0 != 0.0:
            val = val + c0 * _pow_int(r_in, r_out, 1.0 - beta)
        return np.where(ok, val, 0.0)

    total = 0.0
    err_total = 0.0
    stack = [(a, b) for a, b in zip(knots[:-1], knots[1:]) if b > a]
    budget = 4000
    while stack:
        a, b = stack.pop()
        x, w = _gauss_legendre(12)
        x2, w2 = _gauss_legendre(24)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        i1 = half * float(np.dot(w, piece(mid + half * x)))
        i2 = half * float(np.dot(w2, piece(mid + half * x2)))
        err = abs(i2 - i1)
        budget -= 1
        if err <= max(tol * (b - a), 1e-15 * abs(i2)) or budget <= 0:
            total += i2
            err_total += err
        else:
            stack += [(a, mid), (mid, b)]
    return total, err_total


def kernel_mass(cell_a, cell_b, beta: float, cutoff: float | None = None,
                part: str = "all", tol: float = 1e-12, return_error: bool = False):
    """∬_{A×B} |x-y|^-beta dx dy for axis-aligned cells with disjoint interiors.

    ``part`` restricts the pair set: "all", "inside" (|x-y| < cutoff) or
    "outside" (|x-y| >= cutoff).  Supported for N in {1, 2} and beta < N + 1.
    """
    alo, ahi = _cell(cell_a)
    blo, bhi = _cell(cell_b)
    N = alo.size
    if part not in ("all", "inside", "outside"):
        raise DomainError(f"unknown part {part!r}")
    cut = None if part == "all" else float(cutoff)
    if cut is not None and not cut > 0:
        raise DomainError("cutoff must be positive")
    if not beta < N + 1:
        raise DomainError("kernel exponent too large for touching cells")
    if np.all(np.minimum(ahi, bhi) > np.maximum(alo, blo)):
        raise DomainError("cells overlap: kernel mass diverges")
    pieces = [_overlap_pieces(alo[k], ahi[k], blo[k], bhi[k]) for k in range(N)]
    if N == 1:
        val, err = _mass_1d(pieces[0], beta, cut, part), 0.0
    elif N == 2:
        val, err = 0.0, 0.0
        for s0, s1, a1, g1 in pieces[0]:
            for r0, r1, a2, g2 in pieces[1]:
                sx = 1.0 if s0 >= 0.0 else -1.0
                sy = 1.0 if r0 >= 0.0 else -1.0
                u0, u1 = sorted((abs(s0), abs(s1)))
                v0, v1 = sorted((abs(r0), abs(r1)))
                v, e = _rect_polar(u0, u1, v0, v1, a1 * a2, sx * g1 * a2, sy * a1 * g2,
                                   sx * sy * g1 * g2, beta, cut, part, tol)
                val += v
                err += e
    else:
        raise DomainError("kernel masses are implemented for N in {1, 2}")
    val = max(val, 0.0)      # empty pieces can leave -0 level rounding
    if return_error:
        return val, err
    return val


def pair_weight_log(cell_a, cell_b, N: int | None = None, tol: float = LOG_TOL) -> float:
    """∬_{A×B} |x-y|^-N."""
    lo, _ = _cell(cell_a)
    N = lo.size if N is None else N
    if N != lo.size:
        raise DomainError("cell dimension does not match N")
    val, err = kernel_mass(cell_a, cell_b, float(N), tol=min(tol, 1e-12) * 1e-2, return_error=True)
    if err > tol * max(1.0, abs(val)):
        raise QuadratureError("pair weight did not converge", estimate=val, error=err)
    return val


def pair_weight_frac(cell_a, cell_b, N: int | None, s: float, p: float,
                     tol: float = FRAC_TOL) -> float:
    """∬_{A×B} |x-y|^(-N-sp)."""
    lo, _ = _cell(cell_a)
    N = lo.size if N is None else N
    if not 0.0 < s < 1.0:
        raise DomainError("s must lie in (0, 1)")
    if s * p >= 1.0:
        raise DomainError("touching-cell weights need sp < 1")
    val, err = kernel_mass(cell_a, cell_b, N + s * p, tol=min(tol, 1e-12) * 1e-2, return_error=True)
    if err > tol * max(1.0, abs(val)):
        raise QuadratureError("pair weight did not converge", estimate=val, error=err)
    return val


# ---------------------------------------------------------------------------
# weight tables

@dataclass(frozen=True, eq=False)
class PairWeightTable:
    """Symmetric table of cell-pair kernel masses with zero diagonal."""

    w: np.ndarray
    kernel: str
    tol: float

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def save(self, path, grid_hash: str = "") -> None:
        header = json.dumps({"n": self.n, "kernel": self.kernel, "tol": self.tol,
                             "grid": grid_hash}, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_CACHE_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(np.ascontiguousarray(self.w, dtype="<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path, grid_hash: str | None = None, kernel: str | None = None):
        """Read a cached table; returns None if the key does not match."""
        data = Path(path).read_bytes()
        if data[:8] != _CACHE_MAGIC:
            raise DomainError(f"{path} is not a weight-table cache")
        (hlen,) = struct.unpack("<I", data[8:12])
        header = json.loads(data[12:12 + hlen])
        if grid_hash is not None and header["grid"] != grid_hash:
            return None
        if kernel is not None and header["kernel"] != kernel:
            return None
        n = header["n"]
        w = np.frombuffer(data[12 + hlen:], dtype="<f8").reshape(n, n).copy()
        return cls(w, header["kernel"], header["tol"])


def kernel_tag(beta_kind: str, params: ProblemParams | None = None, part: str = "all",
               cutoff: float | None = None) -> str:
    tag = "log" if beta_kind == "log" else f"frac(s={params.s!r},p={params.p!r})"
    if part != "all":
        tag += f"[{part}<{cutoff!r}]"
    return tag


def weight_table(grid, beta: float, tag: str, tol: float = LOG_TOL,
                 cutoff: float | None = None, part: str = "all",
                 cache_path=None) -> PairWeightTable:
    """Pair masses for all cell pairs of ``grid``.

    Uniform grids reuse one computation per absolute lattice offset (the
    kernel is radial, so reflecting both cells leaves the mass unchanged).
    """
    ghash = grid.fingerprint() if cache_path is not None else ""
    if cache_path is not None and Path(cache_path).exists():
        hit = PairWeightTable.load(cache_path, ghash, tag)
        if hit is not None:
            return hit
    n = grid.n
    w = np.zeros((n, n))
    inner_tol = min(tol, 1e-12) * 1e-2
    if grid.spacing is not None:
        h = np.asarray(grid.spacing)
        idx = np.rint((grid.lo - grid.lo.min(axis=0)) / h).astype(np.int64)
        off = np.abs(idx[:, None, :] - idx[None, :, :])
        base = off.max() + 1
        keys = np.zeros((n, n), dtype=np.int64)
        for k in range(grid.dim):
            keys = keys * base + off[:, :, k]
        uniq, inv = np.unique(keys, return_inverse=True)
        vals = np.zeros(uniq.size)
        cell0 = (np.zeros(grid.dim), h)
        for u_i, key in enumerate(uniq):
            if key == 0:
                continue
            o = []
            rem = int(key)
            for _ in range(grid.dim):
                o.append(rem % base)
                rem //= base
            o = np.array(o[::-1], dtype=float) * h
            v, e = kernel_mass(cell0, (o, o + h), beta, cutoff, part, inner_tol, True)
            if e > tol * max(1.0, abs(v)):
                raise QuadratureError("pair weight did not converge", estimate=v, error=e)
            vals[u_i] = v
        w = vals[inv.reshape(n, n)]
    else:
        for i in range(n):
            for j in range(i + 1, n):
                v, e = kernel_mass((grid.lo[i], grid.hi[i]), (grid.lo[j], grid.hi[j]),
                                   beta, cutoff, part, inner_tol, True)
                if e > tol * max(1.0, abs(v)):
                    raise QuadratureError("pair weight did not converge", estimate=v, error=e)
                w[i, j] = w[j, i] = v
    np.fill_diagonal(w, 0.0)
    w.setflags(write=False)
    table = PairWeightTable(w, tag, tol)
    if cache_path is not None:
        table.save(cache_path, ghash)
    return table


def log_weight_table(grid, tol: float = LOG_TOL, cache_path=None) -> PairWeightTable:
    return weight_table(grid, float(grid.dim), "log", tol, cache_path=cache_path)


def frac_weight_table(grid, params: ProblemParams, tol: float = FRAC_TOL,
                      cache_path=None) -> PairWeightTable:
    if params.s is None:
        raise DomainError("fractional table needs s")
    if params.s * params.p >= 1.0:
        raise DomainError("touching-cell weights need sp < 1")
    return weight_table(grid, grid.dim + params.s * params.p, kernel_tag("frac", params), tol,
                        cache_path=cache_path)


# ---------------------------------------------------------------------------
# exterior killing

def exterior_killing(x, domain: Domain, params: ProblemParams, tol: float = 1e-10) -> float:
    """∫_{R^N minus Ω} |x-y|^(-N-sp) dy for x in Ω.

    Written as omega_N delta^(-sp)/(sp) - ∫_delta^R r^(-1-sp) sigma(r) dr, which
    is the polar form ∫ r^(-1-sp) (omega_N - sigma(r)) dr with the exact tail.
    """
    if params.s is None:
        raise DomainError("exterior_killing needs s")
    x = np.atleast_1d(np.asarray(x, float))
    if not domain.contains(x):
        raise DomainError("exterior_killing requires x in the domain")
    a = params.s * params.p
    omega = sphere_measure(domain.dim)
    delta = domain.boundary_distance(x)
    R = domain.far_radius(x)
    moment, err = domain.radial_moment(x, delta, R, a, tol=tol)
    if err > tol * max(1.0, moment):
        raise QuadratureError("exterior killing did not converge", estimate=None, error=err)
    return omega * delta ** (-a) / a - moment
