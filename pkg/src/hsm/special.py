"""Special functions and closed-form constants.

Everything here is scalar-first; ``F_values`` is the vectorized entry point
used by the kernel matrices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special as sp

__all__ = [
    "DIVERGES",
    "Divergence",
    "KernelParams",
    "PoleError",
    "F_eval",
    "F_limit",
    "F_values",
    "angular_exp_integral",
    "hardy_hyperbolic_constant",
    "hls_constant",
    "hyperbolic_sobolev_shift",
    "kernel_prefactors",
    "log_gamma",
    "phi_prefactor",
    "psi_prefactor",
    "sobolev_constant",
    "sobolev_constant_3d",
    "sphere_volume",
]


class PoleError(ValueError):
    """A Gamma-function argument hit a pole."""


class Divergence(enum.Enum):
    """Tag for limits that are infinite by theory, not by overflow."""

    DIVERGES = "diverges"

    def __repr__(self):
        return "DIVERGES"


DIVERGES = Divergence.DIVERGES


@dataclass(frozen=True)
class KernelParams:
    """Dimension ``n`` and fractional order ``alpha``.

    ``beta = (n + 1 - alpha) / 2`` is always recomputed from the two stored
    fields.
    """

    n: int
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if self.alpha > self.n + 1:
            raise ValueError(f"alpha={self.alpha} exceeds n+1={self.n + 1}")

    @property
    def beta(self) -> float:
        return (self.n + 1 - self.alpha) / 2

    @property
    def regime(self) -> str:
        """``"unbounded"``, ``"hls"`` or ``"subcritical"``."""
        if self.alpha >= self.n:
            return "unbounded"
        if self.alpha >= self.n - 1:
            return "hls"
        return "subcritical"

    @property
    def critical_p(self) -> float:
        """Exponent p = 2n/(n+alpha) of the Hardy-Littlewood-Sobolev pairing."""
        return 2 * self.n / (self.n + self.alpha)


# ---------------------------------------------------------------------------
# Gamma and the angular integral
# ---------------------------------------------------------------------------

def log_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def _gamma(x: float) -> float:
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"Gamma has a pole at {x}")
    return math.gamma(x)


def angular_exp_integral(c):
    """Scaled angular integral ``exp(-c) * int_0^{2 pi} exp(c cos phi) dphi``.

    Equal to ``2 pi I_0(c) exp(-c)``; stays O(c^{-1/2}) for large ``c``
    instead of overflowing.  Accepts scalars or arrays.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("angular_exp_integral needs c >= 0")
    out = 2 * np.pi * sp.i0e(c)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# The appendix function F(A) = int_{-pi}^{pi} A (1 + 2A^2 (1 - cos phi))^{-beta}
# ---------------------------------------------------------------------------

_DIRECT_START = 256
_DIRECT_MAX = 2**16
_DIRECT_TOL = 1e-10


def _check_beta(beta):
    if not 0 <= beta <= 1:
        raise ValueError(f"beta must lie in [0, 1], got {beta!r}")


def _F_trapezoid(A, beta):
    """Periodic trapezoid with doubling; returns None if 2^16 nodes do not suffice."""
    prev = None
    N = _DIRECT_START
    while N <= _DIRECT_MAX:
        phi = -np.pi + 2 * np.pi * np.arange(N) / N
        # 1 - cos(phi) = 2 sin^2(phi/2), no cancellation near phi = 0
        val = 2 * np.pi / N * np.sum(A * (1 + 4 * A * A * np.sin(phi / 2) ** 2) ** (-beta))
        if prev is not None and abs(val - prev) <= _DIRECT_TOL * max(abs(val), 1e-300):
            return val
        prev = val
        N *= 2
    return None


def _F_graded(A, beta):
    # Half-angle form 4A int_0^{pi/2} (1 + 4A^2 sin^2 t)^{-beta} dt, with
    # breakpoints on a geometric ladder that resolves the peak of width 1/A.
    f = lambda t: (1 + 4 * A * A * math.sin(t) ** 2) ** (-beta)
    edges = [0.0]
    s = 1.0 / A
    while s < math.pi / 2:
        edges.append(s)
        s *= 4
    edges.append(math.pi / 2)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)
        total += val
    return 4 * A * total


def _F_subordination(A, beta):
    # 2 sin(pi beta) int_0^inf A t^{-beta} / sqrt((1+t)^2 + 4(1+t)A^2) dt.
    # [0, 1]: t = u^{1/(1-beta)} removes the t^{-beta} endpoint singularity.
    # [1, T]: t = e^s; beyond T the integrand is A t^{-1-beta}(1 + O((1+4A^2)/t)).
    g = lambda t: A / math.sqrt((1 + t) ** 2 + 4 * (1 + t) * A * A)
    e = 1.0 / (1.0 - beta)
    head, _ = integrate.quad(lambda u: g(u**e), 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    head *= e
    # integrand ~ A exp(-beta s) once t >> 1 + 4A^2; stop 1e-16 below the peak
    s_end = math.log1p(4 * A * A) + 37.0 / beta
    mid, _ = integrate.quad(
        lambda s: g(math.exp(s)) * math.exp((1 - beta) * s),
        0.0,
        s_end,
        epsabs=0,
        epsrel=1e-13,
        limit=400,
    )
    T = math.exp(s_end)
    tail = A * T ** (-beta) / beta
    return 2 * math.sin(math.pi * beta) * (head + mid + tail)


def F_eval(A: float, beta: float, method: str = "direct") -> float:
    """Evaluate F(A) for a single ``A`` by one of three independent routes.

    Parameters
    ----------
    A : float
        Nonnegative argument.
    beta : float
        Exponent in [0, 1].
    method : {"direct", "closed_form", "subordination"}
        ``direct`` integrates the defining periodic integral (equispaced
        trapezoid with doubling, switching to a graded rule when the peak is
        too narrow for 2^16 nodes).  ``closed_form`` is 2 pi A / sqrt(1+4A^2)
        and needs ``beta == 1``.  ``subordination`` integrates the resolvent
        representation and needs ``1/2 < beta < 1``.
    """
    if not A >= 0:
        raise ValueError(f"A must be nonnegative, got {A!r}")
    _check_beta(beta)
    A = float(A)
    if method == "closed_form":
        if beta != 1:
            raise ValueError("closed_form requires beta == 1")
        return 2 * math.pi * A / math.sqrt(1 + 4 * A * A)
    if method == "subordination":
        if not 0.5 < beta < 1:
            raise ValueError("subordination requires 1/2 < beta < 1")
        if A == 0:
            return 0.0
        return _F_subordination(A, beta)
    if method == "direct":
        if A == 0:
            return 0.0
        val = _F_trapezoid(A, beta)
        return val if val is not None else _F_graded(A, beta)
    raise ValueError(f"unknown method {method!r}")


# Gauss-Legendre nodes for the vectorized route, on a log-scale variable.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_PANELS = 12
_END_CUT = 1e-5


def F_values(A, beta: float) -> np.ndarray:
    """Vectorized F(A) for arrays of ``A`` at fixed ``beta``.

    Uses the closed form at ``beta == 1``.  Otherwise, with tan t = s/(2A)
    in the half-angle form,

        F(A) = 8A^2 int_0^inf (1 + 4A^2 s^2 / (4A^2 + s^2))^{-beta} ds / (4A^2 + s^2),

    integrated in log s with panelled Gauss-Legendre.  The integrand varies
    on scales 1 and A, both smooth in log s; the two end pieces are added in
    closed form to O(cut^3).
    """
    _check_beta(beta)
    A = np.asarray(A, dtype=float)
    if np.any(A < 0):
        raise ValueError("A must be nonnegative")
    if beta == 1:
        return 2 * np.pi * A / np.sqrt(1 + 4 * A * A)
    flat = A.ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    a = flat[pos]
    a2 = 4 * a * a
    s_lo = _END_CUT * np.minimum(1.0, 2 * a)
    s_hi = np.maximum(1.0, 2 * a) / _END_CUT
    lo, hi = np.log(s_lo), np.log(s_hi)
    width = (hi - lo) / _GL_PANELS
    total = np.zeros_like(a)
    for k in range(_GL_PANELS):
        u = (lo + width * k)[:, None] + (width / 2)[:, None] * (_GL_X + 1)
        s = np.exp(u)
        q = a2[:, None] + s * s
        integrand = (1 + a2[:, None] * s * s / q) ** (-beta) / q * s
        total += integrand @ _GL_W * width / 2
    head = 2 * s_lo
    tail = 2 * a2 * (1 + a2) ** (-beta) / s_hi
    out[pos] = 2 * a2 * total + head + tail
    return out.reshape(A.shape)


def F_limit(beta: float):
    """Limit of F(A) as A -> infinity.

    Returns sqrt(pi) Gamma(beta - 1/2) / Gamma(beta) for beta > 1/2 and
    ``DIVERGES`` for beta <= 1/2.
    """
    _check_beta(beta)
    if beta <= 0.5:
        return DIVERGES
    return math.sqrt(math.pi) * math.exp(math.lgamma(beta - 0.5) - math.lgamma(beta))


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def sphere_volume(n: int) -> float:
    """Surface measure |S^n| of the unit sphere in R^{n+1}."""
    return 2 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def sobolev_constant(n: int) -> float:
    """Sharp Sobolev constant S_n = n(n-2)/4 |S^n|^{2/n}."""
    if int(n) != n or n < 3:
        raise ValueError(f"sobolev_constant needs integer n >= 3, got {n!r}")
    return n * (n - 2) / 4 * sphere_volume(n) ** (2 / n)


def sobolev_constant_3d() -> float:
    """S_3 = 3 (pi/2)^{4/3}."""
    return 3 * (math.pi / 2) ** (4 / 3)


def hyperbolic_sobolev_shift(n: int) -> float:
    """n(n-2)/4, the sharp L^2 shift B_n on hyperbolic space for n > 3 (reference value)."""
    return n * (n - 2) / 4


def hardy_hyperbolic_constant(n: int) -> float:
    """(n-1)^2/4, the bottom of the spectrum of the hyperbolic Laplacian."""
    return (n - 1) ** 2 / 4


def hls_constant(n: int, alpha: float) -> float:
    """Lieb's sharp Hardy-Littlewood-Sobolev constant C(n, alpha), 0 < alpha < n."""
    if not 0 < alpha < n:
        raise ValueError(f"hls_constant needs 0 < alpha < n, got n={n}, alpha={alpha}")
    log_c = (
        (n - alpha) / 2 * math.log(math.pi)
        + math.lgamma(alpha / 2)
        - math.lgamma((n + alpha) / 2)
        - alpha / n * (math.lgamma(n / 2) - math.lgamma(n))
    )
    return math.exp(log_c)


def phi_prefactor(n: int, alpha: float) -> float:
    """2^{-alpha} pi^{-(n+1)/2} Gamma((n+1-alpha)/2) / Gamma(alpha/2)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if alpha == n + 1:
        raise PoleError(f"phi prefactor has a Gamma pole at alpha = n+1 = {n + 1}")
    if alpha > n + 1:
        raise ValueError(f"phi kernel needs alpha < n+1, got {alpha}")
    return 2.0**-alpha * math.pi ** (-(n + 1) / 2) * _gamma((n + 1 - alpha) / 2) / _gamma(alpha / 2)


def psi_prefactor(n: int, alpha: float) -> float:
    """2^{-alpha} pi^{-n/2} Gamma((n-alpha)/2) / Gamma(alpha/2)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if alpha == n:
        raise PoleError(f"psi prefactor has a Gamma pole at alpha = n = {n}")
    if alpha > n:
        raise ValueError(f"psi kernel needs alpha < n, got {alpha}")
    return 2.0**-alpha * math.pi ** (-n / 2) * _gamma((n - alpha) / 2) / _gamma(alpha / 2)


def kernel_prefactors(params: KernelParams) -> tuple[float, float]:
    """``(phi_prefactor, psi_prefactor)``; each side raises on its own pole."""
    return phi_prefactor(params.n, params.alpha), psi_prefactor(params.n, params.alpha)
