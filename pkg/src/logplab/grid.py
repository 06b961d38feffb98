"""Cell grids over a domain and piecewise-constant grid functions."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError
from .geometry import Ball, Box, BoxUnion, Domain

@dataclass(frozen=True, eq=False)
class Grid:
    """Axis-aligned cells whose centres lie in ``domain``.

    ``lo``/``hi`` have shape (n, N).  ``masses`` are full cell volumes unless
    the grid was built with ``clipped=True``, in which case each mass is the
    measure of the cell intersected with the domain.  ``spacing`` is the
    lattice step per axis for uniform grids and ``None`` otherwise.
    """

    domain: Domain
    lo: np.ndarray
    hi: np.ndarray
    masses: np.ndarray
    clipped: bool = False
    spacing: tuple | None = None
    centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1, self.domain.dim)
        hi = np.asarray(self.hi, dtype=float).reshape(-1, self.domain.dim)
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if lo.shape != hi.shape or masses.shape[0] != lo.shape[0]:
            raise DomainError("inconsistent grid arrays")
        if lo.shape[0] == 0:
            raise DomainError("grid has no cells inside the domain")
        if np.any(masses <= 0):
            raise DomainError("cell masses must be positive")
        centers = 0.5 * (lo + hi)
        if not np.all(self.domain.inside(centers)):
            raise DomainError("every cell centre must lie in the domain")
        for arr in (lo, hi, masses, centers):
            arr.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "centers", centers)

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def sizes(self) -> np.ndarray:
        return self.hi - self.lo

    @classmethod
    def uniform(cls, domain: Domain, n, clipped: bool = False) -> "Grid":
        """Tensor grid over the bounding box with ``n`` cells per axis
        (an int or one int per axis), keeping cells whose centres are in Ω."""
        blo, bhi = domain.bounding_box()
        counts = np.broadcast_to(np.asarray(n, dtype=int), (domain.dim,))
        if np.any(counts < 1):
            raise DomainError("cell counts must be positive")
        h = (bhi - blo) / counts
        # shared edges come from one array, so neighbours touch exactly
        edges = [blo[k] + h[k] * np.arange(counts[k] + 1) for k in range(domain.dim)]
        lo = np.stack(np.meshgrid(*[e[:-1] for e in edges], indexing="ij"),
                      axis=-1).reshape(-1, domain.dim)
        hi = np.stack(np.meshgrid(*[e[1:] for e in edges], indexing="ij"),
                      axis=-1).reshape(-1, domain.dim)
        keep = domain.inside(0.5 * (lo + hi))
        lo, hi = lo[keep], hi[keep]
        if clipped:
            masses = np.array([_clipped_mass(domain, a, b) for a, b in zip(lo, hi)])
        else:
            masses = np.prod(hi - lo, axis=1)
        return cls(domain, lo, hi, masses, clipped=clipped, spacing=tuple(float(v) for v in h))

    @classmethod
    def from_edges(cls, domain: Domain, edges) -> "Grid":
        """1-D grid from increasing cell edges (cells with centres in Ω kept)."""
        if domain.dim != 1:
            raise DomainError("from_edges is for N = 1")
        e = np.asarray(edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise DomainError("edges must be strictly increasing")
        lo, hi = e[:-1, None], e[1:, None]
        keep = domain.inside(0.5 * (lo + hi))
        lo, hi = lo[keep], hi[keep]
        return cls(domain, lo, hi, (hi - lo)[:, 0])

    def dilate(self, r: float) -> "Grid":
        """The image grid r·G on r·Ω (masses scale by r^N)."""
        sp = None if self.spacing is None else tuple(r * v for v in self.spacing)
        return Grid(self.domain.dilate(r), r * self.lo, r * self.hi, r ** self.dim * self.masses,
                    clipped=self.clipped, spacing=sp)

    def translate(self, v) -> "Grid":
        v = np.asarray(v, dtype=float)
        return Grid(self.domain.translate(v), self.lo + v, self.hi + v, self.masses,
                    clipped=self.clipped, spacing=self.spacing)

    def subset(self, index) -> "Grid":
        index = np.asarray(index)
        return Grid(self.domain, self.lo[index], self.hi[index], self.masses[index],
                    clipped=self.clipped, spacing=self.spacing)

    def fingerprint(self) -> str:
        hsh = hashlib.sha256()
        hsh.update(repr(self.domain.to_dict()).encode())
        for arr in (self.lo, self.hi, self.masses):
            hsh.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return hsh.hexdigest()


def _clipped_mass(domain: Domain, a: np.ndarray, b: np.ndarray) -> float:
    """|cell ∩ Ω|: closed form for boxes and unions, quadrature for balls."""
    if isinstance(domain, Box):
        return _box_overlap(a, b, domain.lo, domain.hi)
    if isinstance(domain, BoxUnion):
        return sum(_box_overlap(a, b, bx.lo, bx.hi) for bx in domain.boxes)
    if isinstance(domain, Ball):
        c, rad = domain.center, domain.radius
        if domain.dim == 1:
            return _box_overlap(a, b, c - rad, c + rad)
        return _disk_rect_area(a - c, b - c, rad)
    raise DomainError(f"clipped masses not available for {type(domain).__name__}")


def _disk_rect_area(a, b, rad: float) -> float:
    """|[a0,b0]x[a1,b1] ∩ disk(0, rad)| by quadrature of the chord length."""
    x0, x1 = max(a[0], -rad), min(b[0], rad)
    if x1 <= x0:
        return 0.0

    def chord(x):
        half = math.sqrt(max(rad * rad - x * x, 0.0))
        return max(0.0, min(b[1], half) - max(a[1], -half))

    # the chord has kinks where the circle crosses the horizontal edges
    kinks = [sgn * math.sqrt(rad * rad - y * y) for y in (a[1], b[1]) if abs(y) < rad
             for sgn in (-1.0, 1.0)]
    knots = sorted({x0, x1, *[k for k in kinks if x0 < k < x1]})
    return sum(integrate.quad(chord, u, v, epsabs=1e-15, epsrel=1e-13)[0]
               for u, v in zip(knots[:-1], knots[1:]))


def _box_overlap(a, b, lo, hi) -> float:
    ext = np.minimum(b, hi) - np.maximum(a, lo)
    return float(np.prod(np.maximum(ext, 0.0)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function on ``grid`` (zero outside the domain)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != self.grid.n:
            raise DomainError(f"expected {self.grid.n} values, got {vals.shape[0]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def lp_norm(self, p: float) -> float:
        return float(np.sum(self.grid.masses * np.abs(self.values) ** p) ** (1.0 / p))

    def lp_distance(self, other: "GridFunction", p: float) -> float:
        if other.grid.n != self.grid.n:
            raise DomainError("grid functions live on different grids")
        diff = self.values - other.values
        return float(np.sum(self.grid.masses * np.abs(diff) ** p) ** (1.0 / p))

    def normalized(self, p: float) -> "GridFunction":
        nrm = self.lp_norm(p)
        if nrm == 0.0 or not math.isfinite(nrm):
            raise DomainError("cannot normalise a zero or non-finite function")
        return GridFunction(self.grid, self.values / nrm)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))
