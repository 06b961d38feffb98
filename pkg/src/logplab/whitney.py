"""Dyadic Whitney decompositions and the logarithmic boundary Hardy inequality.

Cubes are stored as (level m, integer lattice coordinates t); the cube is
``prod_i [2^m t_i, 2^m (t_i + 1)]``.  All distance comparisons used to accept
a cube (``diam Q <= dist(Q, boundary) <= 4 diam Q``) and to verify the
pairing conditions are done in exact rational arithmetic, so the sharp
constants can be checked without floating slack.

The half-space ``{x_N > 0}`` is symbolic (``HalfSpace``) and uses the explicit
strip decomposition: level-m cubes are the dyadic cubes in
``2^(m+d+1) <= x_N <= 2^(m+d+2)`` with ``2^d <= sqrt(N) < 2^(d+1)``, truncated
to the lateral window ``[0, 1)^(N-1)``.  Bounded shapes (boxes, unions of
boxes, balls) use the maximal-cube construction within a level window.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .geometry import Ball, Box, BoxUnion, Domain, domain_from_dict
from .grid import Grid, GridFunction
from .operator import ScalarField
from .quadrature import LOG_TOL, kernel_tag, weight_table


# ---------------------------------------------------------------------------
# shapes and cubes

class HalfSpace:
    """The model half-space ``{x in R^N : x_N > 0}``."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DomainError("dimension must be positive")
        self.dim = int(dim)

    def __repr__(self):
        return f"HalfSpace({self.dim})"

    def __eq__(self, other):
        return isinstance(other, HalfSpace) and other.dim == self.dim

    def __hash__(self):
        return hash(("halfspace", self.dim))

    def inside(self, pts):
        return np.asarray(pts, dtype=float)[..., -1] > 0.0

    def contains(self, x) -> bool:
        return float(np.atleast_1d(x)[-1]) > 0.0

    def boundary_distance(self, x) -> float:
        return abs(float(np.atleast_1d(x)[-1]))

    def to_dict(self) -> dict:
        return {"type": "halfspace", "N": self.dim}


def shape_from_dict(data: dict):
    """Like domain_from_dict, also accepting {"type": "halfspace", "N": n}."""
    if data.get("type") == "halfspace":
        return HalfSpace(int(data["N"]))
    return domain_from_dict(data)


def _pow2(m: int) -> Fraction:
    return Fraction(2) ** m


@dataclass(frozen=True, order=True)
class DyadicCube:
    """``prod_i [2^m t_i, 2^m (t_i + 1)]``."""

    m: int
    t: tuple

    def __post_init__(self):
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "t", tuple(int(v) for v in self.t))

    @property
    def dim(self) -> int:
        return len(self.t)

    @property
    def side(self) -> Fraction:
        return _pow2(self.m)

    def lo(self) -> tuple:
        s = self.side
        return tuple(s * v for v in self.t)

    def hi(self) -> tuple:
        s = self.side
        return tuple(s * (v + 1) for v in self.t)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([float(v) for v in self.lo()]), np.array([float(v) for v in self.hi()]))

    def diam_squared(self) -> Fraction:
        return self.dim * self.side ** 2

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.m + 1, tuple(v >> 1 for v in self.t))

    def children(self) -> list["DyadicCube"]:
        out = [()]
        for v in self.t:
            out = [c + (2 * v + b,) for c in out for b in (0, 1)]
        return [DyadicCube(self.m - 1, c) for c in out]

    def __str__(self):
        return " ".join(str(v) for v in (self.m, *self.t))


def _dist2_boxes(alo, ahi, blo, bhi) -> Fraction:
    """Squared distance between two closed boxes."""
    total = Fraction(0)
    for a0, a1, b0, b1 in zip(alo, ahi, blo, bhi):
        gap = max(a0 - b1, b0 - a1, 0)
        total += gap * gap
    return total


def _maxdist2_boxes(alo, ahi, blo, bhi) -> Fraction:
    """Squared largest distance between points of two boxes (corner pairs)."""
    total = Fraction(0)
    for a0, a1, b0, b1 in zip(alo, ahi, blo, bhi):
        ext = max(abs(a1 - b0), abs(b1 - a0))
        total += ext * ext
    return total


# ---------------------------------------------------------------------------
# exact geometry of a cube relative to a shape

class _ExactShape:
    """Exact (rational) boundary data of a supported shape."""

    def __init__(self, domain):
        self.domain = domain
        self.dim = domain.dim
        if isinstance(domain, HalfSpace):
            self.kind = "halfspace"
        elif isinstance(domain, Ball):
            self.kind = "ball"
            self.center = tuple(Fraction(float(v)) for v in domain.center)
            self.r2 = Fraction(float(domain.radius)) ** 2
            self.radius = Fraction(float(domain.radius))
        elif isinstance(domain, (Box, BoxUnion)):
            self.kind = "faces"
            boxes = domain.boxes if isinstance(domain, BoxUnion) else (domain,)
            self.boxes = [(tuple(Fraction(float(v)) for v in b.lo),
                           tuple(Fraction(float(v)) for v in b.hi)) for b in boxes]
            faces = domain.exposed_faces() if isinstance(domain, BoxUnion) else _box_faces(domain)
            self.faces = []
            for axis, coord, lo_, hi_ in faces:
                flo = [None] * self.dim
                fhi = [None] * self.dim
                flo[axis] = fhi[axis] = Fraction(coord)
                if self.dim == 2:
                    flo[1 - axis], fhi[1 - axis] = Fraction(lo_), Fraction(hi_)
                self.faces.append((tuple(flo), tuple(fhi)))
        else:
            raise DomainError(f"Whitney decompositions are not available for {domain!r}")

    def meets(self, q: DyadicCube) -> bool:
        """Whether the open cube intersects the shape."""
        lo, hi = q.lo(), q.hi()
        if self.kind == "halfspace":
            return hi[-1] > 0
        if self.kind == "ball":
            d2 = sum((min(max(c, a), b) - c) ** 2 for c, a, b in zip(self.center, lo, hi))
            return d2 < self.r2
        return any(all(a < bh and b > bl for a, b, bl, bh in zip(lo, hi, blo, bhi))
                   for blo, bhi in self.boxes)

    def inside_dist2(self, q: DyadicCube):
        """For the faces and half-space kinds: dist(Q, boundary)^2 if Q lies
        in the shape, else None."""
        lo, hi = q.lo(), q.hi()
        if self.kind == "halfspace":
            return lo[-1] ** 2 if lo[-1] > 0 else None
        d2 = min(_dist2_boxes(lo, hi, flo, fhi) for flo, fhi in self.faces)
        if d2 == 0:
            return None
        centre = np.array([float(a + b) / 2 for a, b in zip(lo, hi)])
        if not bool(self.domain.inside(centre[None, :])[0]):
            return None
        return d2

    def classify(self, q: DyadicCube) -> str:
        """'whitney' if the sandwich holds, 'far' if Q is inside with
        dist > 4 diam (no descendant can qualify), otherwise 'other'."""
        D2 = q.diam_squared()
        if self.kind == "ball":
            # farthest corner: Q inside iff qf < R^2, dist = R - sqrt(qf)
            qf = sum(max(abs(a - c), abs(b - c)) ** 2
                     for c, a, b in zip(self.center, q.lo(), q.hi()))
            if qf >= self.r2:
                return "other"
            R2 = self.r2
            # diam <= R - sqrt(qf)  <=>  sqrt(qf) + diam <= R
            lower = _sqrt_sum_le(qf, D2, R2)
            # R - sqrt(qf) <= 4 diam  <=>  R <= sqrt(qf) + sqrt(16 D2)
            upper = not _sqrt_sum_le(qf, 16 * D2, R2) or _sqrt_sum_eq(qf, 16 * D2, R2)
            if lower and upper:
                return "whitney"
            return "far" if not upper else "other"
        d2 = self.inside_dist2(q)
        if d2 is None:
            return "other"
        if D2 <= d2 <= 16 * D2:
            return "whitney"
        return "far" if d2 > 16 * D2 else "other"


def _sqrt_sum_le(a: Fraction, b: Fraction, c2: Fraction) -> bool:
    """sqrt(a) + sqrt(b) <= sqrt(c2) exactly (a, b, c2 >= 0)."""
    rhs = c2 - a - b
    if rhs < 0:
        return False
    return 4 * a * b <= rhs * rhs


def _sqrt_sum_eq(a: Fraction, b: Fraction, c2: Fraction) -> bool:
    rhs = c2 - a - b
    return rhs >= 0 and 4 * a * b == rhs * rhs


def _box_faces(box: Box):
    faces = []
    if box.dim == 1:
        return [(0, float(box.lo[0]), 0.0, 0.0), (0, float(box.hi[0]), 0.0, 0.0)]
    for axis in (0, 1):
        other = 1 - axis
        for coord in (box.lo[axis], box.hi[axis]):
            faces.append((axis, float(coord), float(box.lo[other]), float(box.hi[other])))
    return faces


def halfspace_offset(N: int) -> int:
    """The integer d with 2^d <= sqrt(N) < 2^(d+1)."""
    d = 0
    while 4 ** (d + 1) <= N:
        d += 1
    return d


# ---------------------------------------------------------------------------
# decompositions

@dataclass(frozen=True)
class WhitneyDecomposition:
    domain: object
    m_min: int
    m_max: int
    levels: dict
    window: tuple = ()
    _index: frozenset = field(default=frozenset(), repr=False, compare=False)

    def cubes(self) -> list[DyadicCube]:
        return [q for m in sorted(self.levels) for q in self.levels[m]]

    def level(self, m: int) -> tuple:
        return self.levels.get(m, ())

    def __contains__(self, q: DyadicCube) -> bool:
        return q in self._index

    def __len__(self) -> int:
        return len(self._index)

    def measure(self) -> Fraction:
        return sum((q.side ** q.dim for q in self._index), Fraction(0))

    def dump(self) -> str:
        """One line ``m t_1 ... t_N`` per cube, sorted by level then coordinates."""
        return "".join(f"{q}\n" for q in self.cubes())


def _make_decomposition(domain, m_min, m_max, found, window):
    levels = {}
    for q in found:
        levels.setdefault(q.m, []).append(q)
    levels = {m: tuple(sorted(v)) for m, v in sorted(levels.items())}
    if not levels:
        raise DomainError("the level window contains no Whitney cube of the domain")
    return WhitneyDecomposition(domain, m_min, m_max, levels, window, frozenset(found))


def whitney_decompose(domain, m_min: int, m_max: int = 0) -> WhitneyDecomposition:
    """Whitney cubes with levels in [m_min, m_max].

    For ``HalfSpace`` the strip construction is used (lateral window
    [0, 1)^(N-1), so m_max <= 0).  For bounded shapes the cubes are the
    maximal dyadic cubes (within the window) satisfying
    diam Q <= dist(Q, boundary) <= 4 diam Q.
    """
    m_min, m_max = int(m_min), int(m_max)
    if m_min > m_max:
        raise DomainError("m_min must not exceed m_max")
    if isinstance(domain, HalfSpace):
        return _halfspace_decomposition(domain, m_min, m_max)
    shape = _ExactShape(domain)
    blo, bhi = domain.bounding_box()
    side = 2.0 ** m_max
    ranges = [range(math.floor(a / side), math.ceil(b / side)) for a, b in zip(blo, bhi)]
    stack = [DyadicCube(m_max, t) for t in _product(ranges)]
    found = []
    while stack:
        q = stack.pop()
        if not shape.meets(q):
            continue
        kind = shape.classify(q)
        if kind == "whitney":
            found.append(q)
        elif kind == "other" and q.m > m_min:
            stack.extend(q.children())
    return _make_decomposition(domain, m_min, m_max, found, (tuple(blo), tuple(bhi)))


def _product(ranges):
    out = [()]
    for r in ranges:
        out = [c + (v,) for c in out for v in r]
    return out


def _halfspace_decomposition(hs: HalfSpace, m_min: int, m_max: int) -> WhitneyDecomposition:
    if m_max > 0:
        raise DomainError("the half-space window [0,1)^(N-1) needs m_max <= 0")
    N = hs.dim
    d = halfspace_offset(N)
    normal = range(2 ** (d + 1), 2 ** (d + 2))
    found = []
    for m in range(m_min, m_max + 1):
        lateral = [range(0, 2 ** (-m))] * (N - 1)
        for t in _product(lateral):
            for tn in normal:
                found.append(DyadicCube(m, t + (tn,)))
    return _make_decomposition(hs, m_min, m_max, found, ("lateral [0,1)",))


def sandwich_violations(decomp: WhitneyDecomposition) -> list[DyadicCube]:
    """Cubes failing diam Q <= dist(Q, boundary) <= 4 diam Q (exact)."""
    shape = _ExactShape(decomp.domain)
    return [q for q in decomp.cubes() if shape.classify(q) != "whitney"]


def covered_measure(decomp: WhitneyDecomposition) -> float:
    return float(decomp.measure())


# ---------------------------------------------------------------------------
# half-space pairing and the hypotheses of the Hardy theorem

def halfspace_pairing(q: DyadicCube, j: int, j0: int = 0) -> DyadicCube:
    """E(Q, j): the level-j cube whose lateral projection contains that of Q
    and whose last lattice coordinate equals that of Q."""
    if not q.m < j <= j0:
        raise DomainError(f"pairing needs k < j <= j0, got k={q.m}, j={j}, j0={j0}")
    shift = j - q.m
    return DyadicCube(j, tuple(v >> shift for v in q.t[:-1]) + (q.t[-1],))


@dataclass(frozen=True)
class PairingReport:
    C1: float
    C2: float
    C3: float
    C4: float
    lam: float
    j0: int
    violations: tuple
    measured: dict
    pairs_checked: int
    multiplicity_exact: bool

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"valid": self.valid, "C1": self.C1, "C2": self.C2, "C3": self.C3, "C4": self.C4,
                "lambda": self.lam, "j0": self.j0, "measured": dict(self.measured),
                "pairs_checked": self.pairs_checked,
                "multiplicity_exact": self.multiplicity_exact,
                "violations": list(self.violations)}


def verify_conditions(decomp: WhitneyDecomposition,
                      pairing: Callable[[DyadicCube, int], DyadicCube] = halfspace_pairing,
                      j0: int = 0, C1: float = 1.0, C2: float = 1.0, C3: float | None = None,
                      C4: float = 1.0, lam: float | None = None) -> PairingReport:
    """Exhaustively check (i) size, (ii) diameter and (iii) multiplicity over the
    decomposition window.  C3 defaults to sqrt(N - 1 + 2^(2d+4)) and lam to N-1."""
    N = decomp.cubes()[0].dim
    d = halfspace_offset(N)
    C3_sq = Fraction(N - 1 + 2 ** (2 * d + 4)) if C3 is None else Fraction(C3) ** 2
    C3 = math.sqrt(C3_sq) if C3 is None else C3
    lam = float(N - 1) if lam is None else float(lam)
    C1f, C2f = Fraction(C1), Fraction(C2)
    violations = []
    counts = Counter()
    size_lo, size_hi, diam_ratio = None, None, Fraction(0)
    pairs = 0
    for q in decomp.cubes():
        if q.m >= j0:
            continue
        for j in range(q.m + 1, j0 + 1):
            e = pairing(q, j)
            pairs += 1
            if e not in decomp:
                violations.append(f"E({q}, {j}) = {e} is not a Whitney cube of the window")
                continue
            ratio = e.side / _pow2(j)
            size_lo = ratio if size_lo is None else min(size_lo, ratio)
            size_hi = ratio if size_hi is None else max(size_hi, ratio)
            if not C1f <= ratio <= C2f:
                violations.append(f"(i) fails for Q={q}, j={j}: l(E)/2^j = {ratio}")
            far2 = _maxdist2_boxes(q.lo(), q.hi(), e.lo(), e.hi()) / _pow2(2 * j)
            diam_ratio = max(diam_ratio, far2)
            if not far2 < C3_sq:
                violations.append(f"(ii) fails for Q={q}, j={j}: |x-y|^2/4^j = {far2}")
            counts[(e, q.m)] += 1
    exact = True
    worst_mult = 0.0
    for q0 in decomp.cubes():
        n = q0.m
        if n > j0:
            continue
        for m in range(decomp.m_min, n):
            c = counts.get((q0, m), 0)
            bound = C4 * 2.0 ** (lam * (n - m))
            worst_mult = max(worst_mult, c / 2.0 ** (lam * (n - m)))
            if c > bound:
                violations.append(f"(iii) fails for Q0={q0}, m={m}: count {c} > {bound}")
            if c != 2 ** ((N - 1) * (n - m)):
                exact = False
    measured = {
        "C1": float(size_lo) if size_lo is not None else None,
        "C2": float(size_hi) if size_hi is not None else None,
        "C3": math.sqrt(diam_ratio),
        "C4": worst_mult,
    }
    return PairingReport(float(C1), float(C2), float(C3), float(C4), lam, j0, tuple(violations),
                         measured, pairs, exact)


@dataclass(frozen=True)
class HardyConstants:
    N: int
    p: float
    C1: float
    C2: float
    C3: float
    C4: float
    lam: float
    j0: int
    c1: float
    c2: float


def reduced_j0(j0: int, C2: float, C3: float, N: int) -> int:
    """Apply both reductions of j0, in order: first min(j0, ceil(-log2 C3 - 1)),
    then decrease until 5 C2 2^j0 sqrt(N) < 1."""
    j = min(j0, math.ceil(-math.log2(C3) - 1.0))
    while 5.0 * C2 * 2.0 ** j * math.sqrt(N) >= 1.0:
        j -= 1
    return j


def hardy_constants(N: int, p: float, C1: float, C2: float, C3: float, C4: float, lam: float,
                    j0: int) -> HardyConstants:
    """c1, c2 in  int |u|^p ln+(1/delta) <= c1 * seminorm + c2 * int_{delta<1} |u|^p."""
    if not lam < N:
        raise DomainError("the multiplicity exponent must be < N")
    j = reduced_j0(j0, C2, C3, N)
    a = max(2.0 ** (p - 1.0), 1.0)
    c1 = C3 ** N * a / C1 ** N * math.log(2.0)
    c2 = (a * C4 * C2 ** N / ((1.0 - 2.0 ** (lam - N)) * C1 ** (N - lam)) - j) * math.log(2.0)
    return HardyConstants(N, p, C1, C2, C3, C4, lam, j, c1, c2)


def halfspace_hardy_constants(N: int, p: float, sharp: bool = True) -> HardyConstants:
    """Constants for the half-space with C1 = C2 = C4 = 1, lambda = N - 1 and
    C3 = sqrt(N - 1 + 2^(2d+4)) (``sharp``) or sqrt(17N - 1)."""
    d = halfspace_offset(N)
    C3 = math.sqrt(N - 1 + 2 ** (2 * d + 4)) if sharp else math.sqrt(17 * N - 1)
    return hardy_constants(N, p, 1.0, 1.0, C3, 1.0, float(N - 1), 0)


# ---------------------------------------------------------------------------
# local plumpness

def interior_depth(domain, pts) -> np.ndarray:
    """Vectorised distance to the boundary for points inside, 0 outside."""
    pts = np.asarray(pts, dtype=float)
    if isinstance(domain, HalfSpace):
        return np.maximum(pts[..., -1], 0.0)
    if isinstance(domain, Box):
        return np.maximum(np.minimum(np.min(pts - domain.lo, axis=-1),
                                     np.min(domain.hi - pts, axis=-1)), 0.0)
    if isinstance(domain, Ball):
        return np.maximum(domain.radius - np.linalg.norm(pts - domain.center, axis=-1), 0.0)
    if isinstance(domain, BoxUnion):
        flat = pts.reshape(-1, domain.dim)
        out = np.where(domain.inside(flat), domain._face_distance(flat), 0.0)
        return out.reshape(pts.shape[:-1])
    raise DomainError(f"no depth function for {domain!r}")


def closure_samples(domain: Domain, n: int) -> np.ndarray:
    """About n points of the closure, including boundary points and corners."""
    blo, bhi = domain.bounding_box()
    if domain.dim == 1:
        return np.linspace(blo[0], bhi[0], n)[:, None]
    k = max(2, int(round(math.sqrt(n))))
    axes = [np.linspace(blo[i], bhi[i], k) for i in range(2)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    if isinstance(domain, Ball):
        ang = np.linspace(0.0, 2 * math.pi, k, endpoint=False)
        rim = domain.center + domain.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        keep = np.linalg.norm(pts - domain.center, axis=-1) <= domain.radius
        return np.concatenate([pts[keep], rim])
    boxes = domain.boxes if isinstance(domain, BoxUnion) else (domain,)
    keep = np.zeros(len(pts), dtype=bool)
    for b in boxes:
        keep |= np.all((pts >= b.lo) & (pts <= b.hi), axis=-1)
    return pts[keep]


@dataclass(frozen=True)
class PlumpnessReport:
    kappa: float
    passed: bool
    worst_ratio: float
    worst_witness: tuple
    failures: tuple


def plumpness_check(domain, kappa: float, r_samples: Sequence[float], x_samples,
                    resolution: int = 40) -> PlumpnessReport:
    """Search, for each sample (x, r), a centre z in the closed ball B_r(x) on
    a lattice of step r/resolution maximising dist(z, boundary); the pair
    passes if that distance is at least kappa * r."""
    if not 0.0 < kappa < 1.0:
        raise DomainError("kappa must lie in (0, 1)")
    xs = np.atleast_2d(np.asarray(x_samples, dtype=float))
    if xs.shape[1] != domain.dim:
        xs = xs.reshape(-1, domain.dim)
    ticks = np.arange(-resolution, resolution + 1) / resolution
    if domain.dim == 1:
        offsets = ticks[:, None]
    else:
        g = np.stack(np.meshgrid(ticks, ticks, indexing="ij"), axis=-1).reshape(-1, 2)
        offsets = g[np.sum(g * g, axis=1) <= 1.0 + 1e-12]
    worst, witness, failures = math.inf, (), []
    for r in r_samples:
        r = float(r)
        if not 0.0 < r < 1.0:
            raise DomainError("radii must lie in (0, 1)")
        depth = interior_depth(domain, xs[:, None, :] + r * offsets[None, :, :])
        best = depth.max(axis=1) / r
        for x, ratio in zip(xs, best):
            if ratio < worst:
                worst, witness = float(ratio), (tuple(float(v) for v in x), r)
            if ratio < kappa:
                failures.append((tuple(float(v) for v in x), r, float(ratio)))
    return PlumpnessReport(float(kappa), not failures, worst, witness, tuple(failures))


# ---------------------------------------------------------------------------
# both sides of the logarithmic Hardy inequality

@dataclass(frozen=True)
class HardyReport:
    lhs: float
    seminorm_term: float
    mass_term: float

    @property
    def ratio(self) -> float:
        den = self.seminorm_term + self.mass_term
        return self.lhs / den if den > 0 else 0.0

    def bound(self, c1: float, c2: float) -> float:
        """c1 * seminorm + c2 * mass."""
        return c1 * self.seminorm_term + c2 * self.mass_term

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "seminorm_term": self.seminorm_term,
                "mass_term": self.mass_term, "ratio": self.ratio}


def _components_1d(domain) -> list[tuple[float, float]]:
    if isinstance(domain, HalfSpace):
        return [(0.0, math.inf)]
    return domain.intervals_1d()


def _log_plus_int(s0: float, s1: float) -> float:
    """int_{s0}^{s1} ln+(1/s) ds for 0 <= s0 <= s1."""
    def G(t):
        t = min(t, 1.0)
        return t - t * math.log(t) if t > 0 else 0.0
    return G(s1) - G(s0)


def _cell_log_mass_1d(a: float, b: float, comps) -> float:
    """int_a^b ln+(1/delta(x)) dx for a cell inside one component."""
    for c, d in comps:
        if c <= a and b <= d:
            mid = 0.5 * (c + d)
            total = 0.0
            if a < mid:
                total += _log_plus_int(a - c, min(b, mid) - c)
            if b > mid:
                total += _log_plus_int(d - b, d - max(a, mid))
            return total
    raise DomainError(f"cell [{a}, {b}] is not inside one component of the domain")


def _gauss_cell_log_mass(domain, lo, hi, order: int = 16) -> float:
    x, w = np.polynomial.legendre.leggauss(order)
    pts_1d = [0.5 * (lo[i] + hi[i]) + 0.5 * (hi[i] - lo[i]) * x for i in range(2)]
    P = np.stack(np.meshgrid(*pts_1d, indexing="ij"), axis=-1)
    W = np.outer(w, w) * np.prod(hi - lo) / 4.0
    dep = interior_depth(domain, P)
    with np.errstate(divide="ignore"):
        val = np.where(dep > 0, np.maximum(-np.log(dep), 0.0), 0.0)
    return float(np.sum(W * val))


def hardy_grid(u: ScalarField, domain, n: int = 64, cutoff: float = 1.0) -> Grid:
    """1-D grid resolving supp u with n cells, plus one zero cell per gap of
    the domain within distance ``cutoff`` of the support."""
    if u.dim != 1:
        raise DomainError("hardy_grid builds 1-D grids; use Grid.uniform in 2-D")
    c, s = u.center[0], u.scale
    pieces = []
    for a, b in _components_1d(domain):
        lo, hi = max(a, c - s), min(b, c + s)
        if hi > lo:
            pieces.append((lo, hi))
    if len(pieces) != 1:
        raise DomainError("the field support must meet exactly one component of the domain")
    lo, hi = pieces[0]
    edges = np.linspace(lo, hi, n + 1)
    cells = list(zip(edges[:-1], edges[1:]))
    for a, b in _components_1d(domain):
        for g0, g1 in ((max(a, lo - cutoff), min(b, lo)), (max(a, hi), min(b, hi + cutoff))):
            if g1 > g0:
                cells.append((g0, g1))
    cells.sort()
    lo_arr = np.array([[a] for a, _ in cells])
    hi_arr = np.array([[b] for _, b in cells])
    return Grid(domain, lo_arr, hi_arr, (hi_arr - lo_arr)[:, 0])


def hardy_sides(u, domain, p: float = 2.0, n: int = 64, cutoff: float = 1.0,
                tol: float = LOG_TOL) -> HardyReport:
    """Both sides of the Hardy inequality for the piecewise-constant function
    given by ``u`` (a GridFunction, or a ScalarField sampled at cell centres).

    lhs = int |u|^p ln+(1/delta), exact per cell in 1-D and by 16x16
    Gauss-Legendre per cell in 2-D; seminorm = sum over ordered cell pairs of
    |u_i - u_j|^p times the exact mass of {|x-y| < cutoff} under |x-y|^-N;
    mass = int |u|^p.  The grid must cover every point of the domain within
    ``cutoff`` of supp u (hardy_grid does this in 1-D).
    """
    if isinstance(u, ScalarField):
        grid = hardy_grid(u, domain, n, cutoff) if u.dim == 1 else Grid.uniform(domain, n)
        u = GridFunction(grid, u(grid.centers))
    grid = u.grid
    vals = np.abs(u.values) ** p
    if grid.dim == 1:
        comps = _components_1d(domain)
        logm = np.array([_cell_log_mass_1d(a[0], b[0], comps) for a, b in zip(grid.lo, grid.hi)])
    else:
        logm = np.array([_gauss_cell_log_mass(domain, a, b) for a, b in zip(grid.lo, grid.hi)])
    lhs = float(np.sum(vals * logm))
    mass = float(np.sum(vals * grid.masses))
    active = np.nonzero(u.values)[0]
    if active.size == 0:
        return HardyReport(lhs, 0.0, mass)
    table = weight_table(grid, float(grid.dim),
                         kernel_tag("log", part="inside", cutoff=cutoff), tol,
                         cutoff=cutoff, part="inside")
    diff = np.abs(u.values[:, None] - u.values[None, :]) ** p
    semi = float(np.sum(table.w * diff))
    return HardyReport(lhs, semi, mass)


def tent_family(ks: Sequence[int], boundary: float = 0.0, side: float = 1.0) -> list[ScalarField]:
    """Tents supported in (b, b + 2^-k) (side=+1) or (b - 2^-k, b) (side=-1)."""
    out = []
    for k in ks:
        half = 2.0 ** (-int(k) - 1)
        out.append(ScalarField("tent", (boundary + side * half,), half))
    return out


def empirical_constant(family: Sequence, domain, p: float = 2.0, n: int = 64,
                       cutoff: float = 1.0) -> float:
    """max over the family of lhs / (seminorm + mass)."""
    if not family:
        raise DomainError("the family is empty")
    return max(hardy_sides(u, domain, p, n, cutoff).ratio for u in family)
