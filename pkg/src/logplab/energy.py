"""Discrete energies on cell grids and first-eigenvalue computations.

For piecewise-constant u on a grid with masses m_i, the logarithmic energy is

    E(u) = (C_{N,p}/2) sum_ij w_ij |u_i - u_j|^p + sum_i (h_i + rho_N) m_i |u_i|^p,

with w_ij the kernel mass |x-y|^-N of the cell pair and h_i = h_Omega at the
cell centre.  The fractional energy has the same shape, with coupling
C_{N,s,p}, kernel |x-y|^(-N-sp) and potential C_{N,s,p} kappa_i, kappa the
exterior killing integral.  Both are handled through ``Assembly``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import (ProblemParams, frac_constant, g_map, kernel_constant, rho_constant,
                        unit_ball_volume)
from .errors import ConvergenceError, DomainError, NonconvexError
from .geometry import Ball, Box, Domain, h_omega_grid
from .grid import Grid, GridFunction
from .quadrature import (FRAC_TOL, LOG_TOL, PairWeightTable, exterior_killing,
                         frac_weight_table, log_weight_table)


@dataclass(frozen=True, eq=False)
class Assembly:
    """Weights, per-cell potential and masses of a discrete energy.

    ``potential`` is the zero-order coefficient per unit mass (h + rho for the
    logarithmic energy); ``coupling`` multiplies the pair sum.
    """

    weights: PairWeightTable
    potential: np.ndarray
    masses: np.ndarray
    params: ProblemParams
    coupling: float
    grid: Grid | None = None

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def p(self) -> float:
        return self.params.p


@dataclass(frozen=True, eq=False)
class FracAssembly(Assembly):
    killing: np.ndarray = field(default=None)

    @property
    def constant(self) -> float:
        return self.coupling


@dataclass(frozen=True)
class EigenResult:
    eigenvalue: float
    u: GridFunction
    iterations: int
    gradient_residual: float
    restarts_agreeing: int
    restart_values: tuple = ()


@dataclass(frozen=True)
class RayleighOptions:
    max_iter: int = 2000
    tol: float = 1e-8
    restarts: int = 4
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    seed: int = 0
    agree_tol: float = 1e-6


def assemble_log(domain: Domain, grid: Grid, params: ProblemParams, tol: float = LOG_TOL,
                 cache_path=None) -> Assembly:
    _check_grid(domain, grid, params)
    table = _clip_weights(log_weight_table(grid, tol, cache_path=cache_path), grid)
    h = h_omega_grid(domain, grid, params.with_s(None), tol=tol)
    pot = h + rho_constant(params)
    return Assembly(table, _frozen(pot), grid.masses, params.with_s(None),
                    kernel_constant(params), grid)


def assemble_frac(domain: Domain, grid: Grid, params: ProblemParams, tol: float = FRAC_TOL,
                  cache_path=None) -> FracAssembly:
    _check_grid(domain, grid, params)
    if params.s is None or not 0.0 < params.s <= 0.5:
        raise DomainError("fractional assembly needs s in (0, 1/2]")
    table = _clip_weights(frac_weight_table(grid, params, tol, cache_path=cache_path), grid)
    kappa = np.array([exterior_killing(c, domain, params, tol=min(tol, 1e-10))
                      for c in grid.centers])
    c_s = frac_constant(params)
    return FracAssembly(table, _frozen(c_s * kappa), grid.masses, params, c_s, grid,
                        killing=_frozen(kappa))


def _clip_weights(table: PairWeightTable, grid: Grid) -> PairWeightTable:
    """On clipped grids scale w_ij by the inside fractions f_i f_j, the
    first-order model of the pair integral over the clipped cells."""
    if not grid.clipped:
        return table
    f = grid.masses / np.prod(grid.sizes, axis=1)
    return PairWeightTable(table.w * f[:, None] * f[None, :], table.kernel, table.tol)


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_grid(domain, grid, params):
    if params.N != domain.dim or grid.dim != domain.dim:
        raise DomainError("dimension mismatch between params, domain and grid")
    if grid.domain != domain:
        raise DomainError("grid was built for a different domain")


def _values(u):
    return np.asarray(u.values if isinstance(u, GridFunction) else u, dtype=float)


def energy_value(asm: Assembly, u) -> float:
    v = _values(u)
    p = asm.p
    diff = np.abs(v[:, None] - v[None, :]) ** p
    pair = 0.5 * asm.coupling * float(np.sum(asm.weights.w * diff))
    return pair + float(np.sum(asm.potential * asm.masses * np.abs(v) ** p))


def energy_gradient(asm: Assembly, u) -> np.ndarray:
    v = _values(u)
    p = asm.p
    gd = g_map(v[:, None] - v[None, :], p)
    pair = asm.coupling * np.sum(asm.weights.w * gd, axis=1)
    return p * (pair + asm.potential * asm.masses * g_map(v, p))


def _pow_change(b: np.ndarray, e: np.ndarray, p: float) -> np.ndarray:
    """|b + e|^p - |b|^p without cancellation when |e| << |b|."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = e / b
        small = np.abs(ratio) < 0.5
        rel = np.abs(b) ** p * np.expm1(p * np.log1p(np.where(small, ratio, 0.0)))
    return np.where(small, rel, np.abs(b + e) ** p - np.abs(b) ** p)


def energy_change(asm: Assembly, u, v) -> float:
    """E(v) - E(u), accumulated termwise from v - u so that small changes are
    resolved far below the rounding level of E itself."""
    a, b = _values(u), _values(v)
    p = asm.p
    e = b - a
    pair = _pow_change(a[:, None] - a[None, :], e[:, None] - e[None, :], p)
    own = _pow_change(a, e, p)
    return (0.5 * asm.coupling * float(np.sum(asm.weights.w * pair))
            + float(np.sum(asm.potential * asm.masses * own)))


def _quotient_change(asm: Assembly, u, v) -> float:
    """R(v) - R(u) for the Rayleigh quotient R = E / sum m |.|^p."""
    a, b = _values(u), _values(v)
    p, m = asm.p, asm.masses
    Nu = float(np.sum(m * np.abs(a) ** p))
    Nv = float(np.sum(m * np.abs(b) ** p))
    dN = float(np.sum(m * _pow_change(a, b - a, p)))
    return (energy_change(asm, a, b) - energy_value(asm, a) / Nu * dN) / Nv


def _lp(v, m, p):
    return float(np.sum(m * np.abs(v) ** p) ** (1.0 / p))


def _normalize(v, m, p):
    return v / _lp(v, m, p)


def _residual(asm: Assembly, u: np.ndarray, E: float) -> np.ndarray:
    p = asm.p
    return energy_gradient(asm, u) / (p * asm.masses) - E * g_map(u, p)


_TIE_FLOOR = 1e-8


def _roundoff_floor(asm: Assembly, u: np.ndarray) -> float:
    """Dual-norm size of the residual error caused by rounding u.

    A perturbation delta ~ eps max|u| of a difference u_i - u_j changes
    g(u_i - u_j) by up to delta^(p-1) when p < 2 (the map is only Hoelder
    there) and by (p-1)(2 max|u|)^(p-2) delta otherwise.
    """
    p, m = asm.p, asm.masses
    scale = float(np.max(np.abs(u)))
    if scale == 0.0:
        return 0.0
    delta = 4.0 * np.finfo(float).eps * scale
    dg = max(delta ** (p - 1.0), (p - 1.0) * (2.0 * scale) ** (p - 2.0) * delta)
    row = asm.coupling * asm.weights.w.sum(axis=1) + np.abs(asm.potential) * m
    return float(np.max(row / m)) * dg * float(np.sum(m)) ** ((p - 1.0) / p)


def _metric(asm: Assembly, u: np.ndarray) -> np.ndarray:
    """Positive definite local Hessian model of the energy at u.

    (p-1)[c (D - W∘a) + diag((pot + shift) m b)] with a_ij = |u_i-u_j|^(p-2),
    b_i = |u_i|^(p-2), both floored away from ties so that p < 2 stays finite;
    the shift lifts the potential to be positive, which makes the matrix
    positive definite.  Used as the metric for descent directions: at ties the
    energy behaves like |u_i-u_j|^p and plain gradient steps stall there.
    """
    p, m = asm.p, asm.masses
    scale = float(np.max(np.abs(u)))
    floor = _TIE_FLOOR * (scale if scale > 0 else 1.0)
    a = np.maximum(np.abs(u[:, None] - u[None, :]), floor) ** (p - 2.0)
    K = asm.weights.w * a
    pot = asm.potential
    shift = max(0.0, -float(np.min(pot))) + 1e-3 * max(1.0, float(np.max(np.abs(pot))))
    b = np.maximum(np.abs(u), floor) ** (p - 2.0)
    P = asm.coupling * (np.diag(K.sum(axis=1)) - K)
    P[np.diag_indices_from(P)] += (pot + shift) * m * b
    return (p - 1.0) * P


def _direction(asm: Assembly, u: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve metric · d = -m r; fall back to -r if the factorisation fails."""
    from scipy.linalg import LinAlgError, cho_factor, cho_solve

    try:
        return -cho_solve(cho_factor(_metric(asm, u)), asm.masses * r)
    except LinAlgError:
        return -r


def _descend(u, value, change, residual, direction, trial, m, q, slope_factor, tol, max_iter,
             armijo_c, backtrack, floor=lambda v: 0.0):
    """Descent along metric directions with a warm-started Armijo search.

    ``change(u, v)`` returns value(v) - value(u) accumulated accurately, which
    keeps the Armijo test meaningful below the rounding level of the value;
    ``direction(u, r)`` returns a descent direction for residual r and
    ``trial(u, d, t)`` the (projected) trial point.  The run stops once the
    residual is below ``tol`` or below ``floor(u)``, the rounding limit of the
    residual itself (which exceeds tol for p < 2 on some grids).
    Returns (u, value, iterations, residual norm, converged).
    """
    J = value(u)
    r = residual(u, J)
    rn = _lp(r, m, q)
    step = None
    for it in range(1, max_iter + 1):
        if rn <= max(tol, floor(u)):
            return u, J, it, rn, True
        d = direction(u, r)
        slope = -slope_factor * float(np.sum(m * r * d))
        if not slope > 0.0:
            d = -r
            slope = slope_factor * float(np.sum(m * r * r))
        t = min(1.0, 2.0 * step) if step is not None else 1.0
        while True:
            v = trial(u, d, t)
            if change(u, v) <= -armijo_c * t * slope:
                break
            t *= backtrack
            if t < 1e-30:
                return u, J, it, rn, False
        u, step = v, t
        J = value(u)
        r = residual(u, J)
        rn = _lp(r, m, q)
    return u, J, max_iter, rn, False


def _rayleigh_run(asm: Assembly, u0: np.ndarray, opts: RayleighOptions):
    p, m = asm.p, asm.masses
    return _descend(
        _normalize(np.abs(u0), m, p),
        lambda v: energy_value(asm, v),
        lambda a, b: _quotient_change(asm, a, b),
        lambda v, E: _residual(asm, v, E),
        lambda v, r: _direction(asm, v, r),
        lambda u, d, t: _normalize(np.abs(u + t * d), m, p),
        m, p / (p - 1.0), p, opts.tol, opts.max_iter, opts.armijo_c, opts.backtrack,
        lambda v: _roundoff_floor(asm, v))


def min_rayleigh(asm: Assembly, opts: RayleighOptions | None = None, rng=None) -> EigenResult:
    """First eigenpair by projected descent on the L^p sphere.

    Each step moves along the metric direction (local Hessian model), takes
    absolute values, renormalises and is accepted by Armijo backtracking on
    the Rayleigh quotient.  Restart 0 starts from a positive constant, the others from random
    positive vectors drawn from ``rng`` (or a generator seeded by opts.seed).
    """
    opts = opts or RayleighOptions()
    rng = rng if rng is not None else np.random.default_rng(opts.seed)
    starts = [np.ones(asm.n)] + [rng.uniform(0.1, 1.0, asm.n) for _ in range(opts.restarts - 1)]
    runs = []
    for u0 in starts:
        runs.append(_rayleigh_run(asm, u0, opts))
    best = min(range(len(runs)), key=lambda k: runs[k][1])
    u, E, it, res, ok = runs[best]
    if not ok:
        raise ConvergenceError(f"Rayleigh descent stopped with residual {res:.3g} > {opts.tol:.3g}",
                               best=(E, u))
    vals = tuple(r[1] for r in runs)
    agree = sum(1 for v in vals if abs(v - E) <= opts.agree_tol)
    grid = asm.grid
    uf = GridFunction(grid, u) if grid is not None else u
    return EigenResult(E, uf, it, res, agree, vals)


min_rayleigh_frac = min_rayleigh


def generalized_eigh(asm: Assembly):
    """Dense generalized eigenproblem for p = 2: K u = lambda M u."""
    if asm.p != 2.0:
        raise DomainError("the linear eigenproblem exists for p = 2 only")
    from scipy.linalg import eigh

    W = asm.weights.w
    K = asm.coupling * (np.diag(W.sum(axis=1)) - W) + np.diag(asm.potential * asm.masses)
    return eigh(K, np.diag(asm.masses))


# ---------------------------------------------------------------------------
# experiments

def sandwich_bounds(domain: Domain, asm: Assembly) -> tuple[float, float]:
    """(p/N) ln(|B_1|/|Ω|) + rho_N and the mass-weighted mean of the potential."""
    p, N = asm.params.p, asm.params.N
    lo = p / N * math.log(unit_ball_volume(N) / domain.volume()) + rho_constant(asm.params)
    hi = float(np.sum(asm.potential * asm.masses) / np.sum(asm.masses))
    return lo, hi


@dataclass(frozen=True)
class EigenDerivativeReport:
    s: np.ndarray
    eigenvalues: np.ndarray
    quotients: np.ndarray
    extrapolated: float
    lambda_log: float
    discrepancy: float
    distances: np.ndarray


def eigen_derivative(domain: Domain, grid: Grid, params: ProblemParams, s_list: Sequence[float],
                     opts: RayleighOptions | None = None, log_asm: Assembly | None = None,
                     ) -> EigenDerivativeReport:
    """(lambda_s - 1)/s against the logarithmic eigenvalue on the same grid."""
    s_arr = np.asarray(s_list, dtype=float)
    if s_arr.ndim != 1 or s_arr.size < 1 or np.any(np.diff(s_arr) >= 0):
        raise DomainError("s_list must be decreasing")
    if np.any(s_arr <= 0) or np.any(s_arr > 0.5):
        raise DomainError("s values must lie in (0, 1/2]")
    opts = opts or RayleighOptions()
    asm = log_asm or assemble_log(domain, grid, params.with_s(None))
    base = min_rayleigh(asm, opts)
    lams, dists = [], []
    for s in s_arr:
        fr = min_rayleigh(assemble_frac(domain, grid, params.with_s(float(s))), opts)
        lams.append(fr.eigenvalue)
        dists.append(fr.u.lp_distance(base.u, params.p))
    lams = np.array(lams)
    quot = (lams - 1.0) / s_arr
    deg = min(s_arr.size - 1, 3)
    extrap = float(np.polyval(np.polyfit(s_arr, quot, deg), 0.0)) if deg > 0 else float(quot[0])
    disc = abs(extrap - base.eigenvalue) / max(abs(base.eigenvalue), 1e-300)
    return EigenDerivativeReport(s_arr, lams, quot, extrap, base.eigenvalue, disc, np.array(dists))


def equal_area_shapes(area: float = math.pi) -> dict[str, Domain]:
    """Disk, square and 2:1 rectangle of the given area, centred at 0."""
    r = math.sqrt(area / math.pi)
    a = math.sqrt(area)
    w, h = math.sqrt(2.0 * area), math.sqrt(area / 2.0)
    return {
        "disk": Ball([0.0, 0.0], r),
        "square": Box([-a / 2, -a / 2], [a / 2, a / 2]),
        "rectangle_2to1": Box([-w / 2, -h / 2], [w / 2, h / 2]),
    }


@dataclass(frozen=True)
class FaberKrahnRow:
    shape: str
    n: int
    cells: int
    eigenvalue: float
    eigenvalue_refined: float | None

    @property
    def refinement_gap(self) -> float | None:
        if self.eigenvalue_refined is None:
            return None
        return abs(self.eigenvalue_refined - self.eigenvalue)


def faber_krahn_experiment(area: float, shapes: dict[str, Domain] | None, n: int,
                           params: ProblemParams, refine: bool = True, clipped: bool = False,
                           opts: RayleighOptions | None = None) -> list[FaberKrahnRow]:
    """First eigenvalues of equal-area shapes on n-per-axis grids (and 2n if
    ``refine``)."""
    shapes = shapes or equal_area_shapes(area)
    for name, dom in shapes.items():
        if abs(dom.volume() - area) > 1e-9 * area:
            raise DomainError(f"shape {name} has volume {dom.volume()} != {area}")
    rows = []
    for name, dom in shapes.items():
        lam = []
        for k in ((n, 2 * n) if refine else (n,)):
            g = Grid.uniform(dom, k, clipped=clipped)
            lam.append((g.n, min_rayleigh(assemble_log(dom, g, params), opts).eigenvalue))
        rows.append(FaberKrahnRow(name, n, lam[0][0], lam[0][1], lam[1][1] if refine else None))
    return rows


# ---------------------------------------------------------------------------
# Dirichlet problem

@dataclass(frozen=True)
class DirichletOptions:
    max_iter: int = 2000
    tol: float = 1e-10
    armijo_c: float = 1e-4
    backtrack: float = 0.5


def dirichlet_solve(asm: Assembly, f, opts: DirichletOptions | None = None) -> GridFunction:
    """Minimiser of (1/p) E(u) - sum_i f_i u_i m_i (convex when potential >= 0)."""
    opts = opts or DirichletOptions()
    fv = _values(f)
    if fv.shape != (asm.n,):
        raise DomainError("f does not match the assembly")
    if np.min(asm.potential) < 0.0:
        raise NonconvexError("nonconvex regime: the potential h + rho is negative on some cell")
    p, m = asm.p, asm.masses
    q = p / (p - 1.0)

    def J(v):
        return energy_value(asm, v) / p - float(np.sum(fv * v * m))

    u, _, _, rn, ok = _descend(
        np.zeros(asm.n), J,
        lambda a, b: energy_change(asm, a, b) / p - float(np.sum(fv * (b - a) * m)),
        lambda v, _: energy_gradient(asm, v) / (p * m) - fv,
        lambda v, r: _direction(asm, v, r),
        lambda u, d, t: u + t * d,
        m, q, 1.0, opts.tol, opts.max_iter, opts.armijo_c, opts.backtrack,
        lambda v: _roundoff_floor(asm, v))
    if not ok:
        raise ConvergenceError(f"Dirichlet descent stopped with residual {rn:.3g}", best=u)
    return GridFunction(asm.grid, u) if asm.grid is not None else u
