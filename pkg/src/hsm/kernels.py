"""Heat kernel, fractional-power kernel Phi and Riesz kernel Psi on the half-space.

Scalar functions take a :class:`KernelPointPair`; the ``*_matrix`` functions
take two stacks of half-space points and return the full kernel matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import HalfSpacePoint
from .special import (
    F_values,
    KernelParams,
    angular_exp_integral,
    phi_prefactor,
    psi_prefactor,
)
from .quadrature import ConvergenceError, periodic_integrate

__all__ = [
    "KernelPointPair",
    "heat_kernel",
    "heat_kernel_matrix",
    "mellin_phi",
    "phi_kernel",
    "phi_kernel_angular",
    "phi_matrix",
    "phi_translated",
    "psi_kernel",
    "psi_matrix",
]


@dataclass(frozen=True)
class KernelPointPair:
    p: HalfSpacePoint
    q: HalfSpacePoint

    def __post_init__(self):
        if self.p.n != self.q.n:
            raise ValueError("points of a pair must live in the same dimension")

    @classmethod
    def from_arrays(cls, p, q) -> "KernelPointPair":
        return cls(HalfSpacePoint.from_array(p), HalfSpacePoint.from_array(q))

    @property
    def n(self) -> int:
        return self.p.n

    @property
    def r(self) -> float:
        """Transverse distance |x - x'|."""
        return float(np.linalg.norm(self.p.x - self.q.x))

    @property
    def dist(self) -> float:
        return math.hypot(self.r, self.p.y - self.q.y)

    @property
    def A(self) -> float:
        return math.sqrt(self.p.y * self.q.y) / self.dist

    def swapped(self) -> "KernelPointPair":
        return KernelPointPair(self.q, self.p)

    def shifted(self, a: float) -> "KernelPointPair":
        """Both heights raised by ``a``."""
        return KernelPointPair(HalfSpacePoint(self.p.x, self.p.y + a),
                               HalfSpacePoint(self.q.x, self.q.y + a))

    def _require_offdiagonal(self):
        if self.dist == 0:
            raise ValueError("kernel is singular on the diagonal p = p'")


def _check_params(params, pair=None):
    if pair is not None and params.n != pair.n:
        raise ValueError(f"params.n={params.n} but points are {pair.n}-dimensional")


# ---------------------------------------------------------------------------
# heat kernel
# ---------------------------------------------------------------------------

def _heat(n, r2, y, yq, t):
    # e^{-(r^2 + y^2 + y'^2)/4t} int e^{(yy'/2t) cos} combined as
    # e^{-(r^2 + (y-y')^2)/4t} * [e^{-c} int e^{c cos}], c = yy'/2t
    c = y * yq / (2 * t)
    return ((4 * np.pi * t) ** (-(n + 1) / 2) * np.sqrt(y * yq)
            * np.exp(-(r2 + (y - yq) ** 2) / (4 * t)) * angular_exp_integral(c))


def heat_kernel(params: KernelParams | int, pair: KernelPointPair, t: float) -> float:
    """Heat kernel G(x - x', y, y'; t) of u_t = Delta u + u / (4 y^2)."""
    n = params if isinstance(params, int) else params.n
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    if n != pair.n:
        raise ValueError("dimension mismatch")
    return float(_heat(n, pair.r**2, pair.p.y, pair.q.y, t))


def heat_kernel_matrix(n: int, P: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    dx = P[:, None, :-1] - Q[None, :, :-1]
    r2 = np.einsum("ijk,ijk->ij", dx, dx)
    return _heat(n, r2, P[:, None, -1], Q[None, :, -1], t)


# ---------------------------------------------------------------------------
# fractional-power kernels
# ---------------------------------------------------------------------------

def phi_kernel(params: KernelParams, pair: KernelPointPair) -> float:
    """Phi_{n,alpha} = |p - p'|^{alpha - n} * phi_prefactor * F(A), beta = (n+1-alpha)/2."""
    _check_params(params, pair)
    pair._require_offdiagonal()
    pre = phi_prefactor(params.n, params.alpha)
    return float(pair.dist ** (params.alpha - params.n) * pre * F_values(pair.A, params.beta))


def phi_translated(params: KernelParams, pair: KernelPointPair, a: float) -> float:
    """Phi at the pair with both heights raised by ``a >= 0``."""
    if not a >= 0:
        raise ValueError("translation must be nonnegative")
    return phi_kernel(params, pair.shifted(a))


def phi_kernel_angular(params: KernelParams, pair: KernelPointPair) -> float:
    """Phi from its defining angular integral (independent of the F route).

    phi_prefactor * sqrt(yy') * int_0^{2pi} [r^2 + y^2 + y'^2 - 2yy' cos]^{-(n+1-alpha)/2}.
    """
    _check_params(params, pair)
    pair._require_offdiagonal()
    y, yq, r2 = pair.p.y, pair.q.y, pair.r**2
    d2 = r2 + (y - yq) ** 2
    ex = (params.n + 1 - params.alpha) / 2
    # r^2 + y^2 + y'^2 - 2yy'cos = d2 + 4yy' sin^2(phi/2)
    g = lambda phi: (d2 + 4 * y * yq * np.sin(phi / 2) ** 2) ** (-ex)
    try:
        val = periodic_integrate(g, N=64, tol=1e-13)
    except ConvergenceError:
        # narrow peak at phi = 0 when yy' >> d2; resolve it adaptively
        edges = [0.0]
        s = math.sqrt(d2 / (y * yq))
        while s < math.pi:
            edges.append(s)
            s *= 4
        edges.append(math.pi)
        val = 2 * sum(integrate.quad(lambda u: float(g(u)), a, b, epsabs=0, epsrel=1e-13,
                                     limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
    return phi_prefactor(params.n, params.alpha) * math.sqrt(y * yq) * val


def psi_kernel(params: KernelParams, pair: KernelPointPair) -> float:
    """Riesz kernel psi_prefactor * |p - p'|^{alpha - n}."""
    _check_params(params, pair)
    pair._require_offdiagonal()
    return psi_prefactor(params.n, params.alpha) * pair.dist ** (params.alpha - params.n)


def _dist_and_A(P, Q):
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    diff = P[:, None, :] - Q[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    yy = P[:, None, -1] * Q[None, :, -1]
    return d2, yy


def _masked_d2(P, Q, skip_diagonal):
    d2, yy = _dist_and_A(P, Q)
    if skip_diagonal:
        if len(P) != len(Q):
            raise ValueError("skip_diagonal needs a square self-interaction block")
        np.fill_diagonal(d2, np.inf)
    if np.any(d2 == 0):
        raise ValueError("kernel matrix called with coincident points")
    return d2, yy


def phi_matrix(params: KernelParams, P, Q, skip_diagonal: bool = False) -> np.ndarray:
    """Matrix of Phi_{n,alpha}(P_i, Q_j).

    Coincident points are an error unless ``skip_diagonal`` is set, in which
    case ``Q`` is ``P`` and the diagonal entries come back as zero.
    """
    d2, yy = _masked_d2(P, Q, skip_diagonal)
    A = np.sqrt(yy / d2)
    pre = phi_prefactor(params.n, params.alpha)
    return pre * d2 ** ((params.alpha - params.n) / 2) * F_values(A, params.beta)


def psi_matrix(params: KernelParams, P, Q, skip_diagonal: bool = False) -> np.ndarray:
    d2, _ = _masked_d2(P, Q, skip_diagonal)
    return psi_prefactor(params.n, params.alpha) * d2 ** ((params.alpha - params.n) / 2)


# ---------------------------------------------------------------------------
# time integral of the heat kernel
# ---------------------------------------------------------------------------

def mellin_phi(params: KernelParams, pair: KernelPointPair, span: float = 1e6,
               rtol: float = 1e-10) -> tuple[float, float]:
    """(1/Gamma(alpha/2)) int_0^inf t^{alpha/2 - 1} G(pair; t) dt.

    Integrated in log t over ``[d^2/span, d^2 span]`` with ``d = |p - p'|``.
    Below the window the integrand is smaller than exp(-span/4); above it
    G is replaced by its large-t form (4 pi t)^{-(n+1)/2} 2 pi sqrt(yy'),
    whose tail is added in closed form.  Returns ``(value, tail)`` so callers
    can check the tail is small.
    """
    _check_params(params, pair)
    pair._require_offdiagonal()
    n, alpha = params.n, params.alpha
    ex = (n + 1 - alpha) / 2
    if ex <= 0:
        raise ValueError("time integral diverges for alpha >= n + 1")
    d2 = pair.dist**2
    h = alpha / 2

    def integrand(s):
        t = math.exp(s)
        return t**h * heat_kernel(n, pair, t)

    lo, hi = math.log(d2 / span), math.log(d2 * span)
    # the peak sits near t ~ d^2; split there so quad sees it
    mid = math.log(d2)
    body = 0.0
    for a, b in ((lo, mid - 3), (mid - 3, mid + 3), (mid + 3, hi)):
        val, _ = integrate.quad(integrand, a, b, epsabs=0, epsrel=rtol, limit=400)
        body += val
    T = d2 * span
    coeff = (4 * math.pi) ** (-(n + 1) / 2) * 2 * math.pi * math.sqrt(pair.p.y * pair.q.y)
    tail = coeff * T ** (h - (n + 1) / 2) / ex
    g = math.gamma(h)
    return (body + tail) / g, tail / g
