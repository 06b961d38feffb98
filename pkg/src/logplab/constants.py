"""Special functions and the normalisation constants of the operator family.

All functions are pure and work on Python floats.  ``gamma_fn`` wraps
``math.gamma``; ``digamma_fn`` uses upward recurrence followed by the
asymptotic series, so no SciPy dependency is needed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286060651209008240243
LN2 = math.log(2.0)

# B_{2k} / (2k) for the digamma asymptotic series, k = 1..7
_DIGAMMA_TAIL = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N``, exponent ``p`` and (optionally) fractional order ``s``."""

    N: int
    p: float
    s: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"dimension N must be a positive integer, got {self.N!r}")
        if not self.p > 1.0:
            raise DomainError(f"exponent p must be > 1, got {self.p!r}")
        if self.s is not None and not 0.0 < self.s < 1.0:
            raise DomainError(f"fractional order s must lie in (0, 1), got {self.s!r}")

    def with_s(self, s: Optional[float]) -> "ProblemParams":
        return ProblemParams(self.N, self.p, s)


@dataclass(frozen=True)
class SpecialConstants:
    c_np: float
    rho_np: float
    omega_n: float


def gamma_fn(x: float) -> float:
    """Gamma function for real ``x > 0`` (delegates to ``math.gamma``)."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"gamma_fn requires x > 0, got {x!r}")
    if x > 171.6:
        raise DomainError("gamma_fn overflows for x > 171.6")
    return math.gamma(x)


def digamma_fn(x: float) -> float:
    """Digamma function psi = Gamma'/Gamma for real ``x > 0``."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"digamma_fn requires x > 0, got {x!r}")
    shift = 0.0
    while x < 10.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    power = inv2
    for c in _DIGAMMA_TAIL:
        tail += c * power
        power *= inv2
    return shift + math.log(x) - 0.5 / x - tail


def _check(params: ProblemParams) -> ProblemParams:
    if not isinstance(params, ProblemParams):
        raise TypeError("expected ProblemParams")
    return params


def sphere_measure(N: int) -> float:
    """omega_N, the (N-1)-dimensional measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / gamma_fn(N / 2.0)


def unit_ball_volume(N: int) -> float:
    return sphere_measure(N) / N


def kernel_constant(params: ProblemParams) -> float:
    """C_{N,p} = p Gamma(N/2) / (2 pi^{N/2}); satisfies C_{N,p} * omega_N = p."""
    params = _check(params)
    N, p = params.N, params.p
    return p * gamma_fn(N / 2.0) / (2.0 * math.pi ** (N / 2.0))


def rho_constant(params: ProblemParams) -> float:
    """Zero-order constant rho_N(p) = 2 ln 2 - gamma + (p/2) psi(N/2)."""
    params = _check(params)
    return 2.0 * LN2 - EULER_GAMMA + 0.5 * params.p * digamma_fn(params.N / 2.0)


def frac_constant(params: ProblemParams) -> float:
    """Normalisation C_{N,s,p} of the fractional p-Laplacian.

    Two branches: ``s > 1/2`` carries the extra factor
    ``sqrt(pi) / (2 Gamma((p+1)/2))``; for ``p = 2`` the branches coincide.
    """
    params = _check(params)
    s = params.s
    if s is None or not 0.0 < s < 1.0:
        raise DomainError(f"frac_constant requires s in (0, 1), got {s!r}")
    N, p = params.N, params.p
    sp = s * p
    if s > 0.5:
        return (sp * 2.0 ** (2.0 * s - 2.0) * gamma_fn((N + sp) / 2.0)
                / (math.pi ** ((N - 1) / 2.0) * gamma_fn(1.0 - s) * gamma_fn((p + 1.0) / 2.0)))
    return (sp * 2.0 ** (2.0 * s - 1.0) * gamma_fn((N + sp) / 2.0)
            / (math.pi ** (N / 2.0) * gamma_fn(1.0 - s)))


def special_constants(params: ProblemParams) -> SpecialConstants:
    return SpecialConstants(
        c_np=kernel_constant(params),
        rho_np=rho_constant(params),
        omega_n=sphere_measure(params.N),
    )


def g_map(a, p: float):
    """The p-power nonlinearity |a|^{p-2} a, with g(0) = 0.

    Accepts scalars or numpy arrays.
    """
    import numpy as np

    a_arr = np.asarray(a, dtype=float)
    if p == 2.0:
        out = a_arr.copy()
    else:
        out = np.sign(a_arr) * np.abs(a_arr) ** (p - 1.0)
    if out.ndim == 0:
        return float(out)
    return out
