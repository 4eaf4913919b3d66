"""Quadratic forms, norms and quotients, and the trial functions they act on.

All forms integrate over a :class:`~hsm.quadrature.TensorGrid`, and the grid
has to cover the support of the trial function.  Error estimates come from
re-running the same computation on a coarser copy of the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import geometry as geo
from .kernels import heat_kernel_matrix, phi_matrix, psi_matrix
from .quadrature import (
    TensorGrid,
    box_grid,
    build_spherical_grid,
    pairwise_sum,
    quadratic_form_singular,
)
from .special import KernelParams, hls_constant, psi_prefactor

__all__ = [
    "QuotientResult",
    "Support",
    "TrialFunction",
    "ball_form",
    "ball_from_hyperbolic",
    "bubble_family",
    "ball_bumps",
    "bubble_grid",
    "coarsen",
    "complement_form",
    "exterior_bumps",
    "gaussian_bump",
    "generator_limit",
    "hardy_form",
    "hardy_form_substituted",
    "halfspace_from_ball",
    "heat_apply",
    "hls_bound",
    "hls_quotient",
    "hyperbolic_form",
    "kelvin_pullback",
    "lp_norm",
    "random_bumps",
    "rayleigh_quotient",
    "smooth_bump",
    "support_grid",
    "theorem2_form",
]


@dataclass(frozen=True)
class Support:
    """Closed ball |p - center| <= radius, or a shell when ``inner > 0``."""

    center: np.ndarray
    radius: float
    inner: float = 0.0


@dataclass(frozen=True)
class TrialFunction:
    """Vectorized value and gradient of a compactly supported function.

    ``value`` maps an ``(N, n)`` array to ``(N,)``; ``grad`` to ``(N, n)``.
    ``domain`` is ``"halfspace"``, ``"ball"`` or ``"exterior"``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    domain: str
    support: Support
    n: int
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, P):
        return self.value(np.atleast_2d(P))

    def scaled(self, lam: float) -> "TrialFunction":
        """x -> f(lam x), a dilation about the origin."""
        v, g = self.value, self.grad
        s = self.support
        return replace(
            self,
            value=lambda P: v(lam * P),
            grad=lambda P: lam * g(lam * P),
            support=Support(s.center / lam, s.radius / lam, s.inner / lam),
            label=f"{self.label}@scale{lam:g}",
        )

    def times(self, c: float) -> "TrialFunction":
        v, g = self.value, self.grad
        return replace(self, value=lambda P: c * v(P), grad=lambda P: c * g(P),
                       label=f"{c:g}*{self.label}")


@dataclass(frozen=True)
class QuotientResult:
    form: float
    norm: float
    err_estimate: float

    @property
    def quotient(self) -> float:
        return self.form / self.norm**2


# ---------------------------------------------------------------------------
# trial functions
# ---------------------------------------------------------------------------

def smooth_bump(center, radius: float, amplitude: float = 1.0, sharpness: float = 1.0,
                domain: str = "halfspace", label: str = "bump") -> TrialFunction:
    """amplitude * exp(-k / (1 - s^2)) with s = |p - c| / radius, zero for s >= 1."""
    c = np.asarray(center, dtype=float)
    n = c.size
    k = float(sharpness)
    if domain == "halfspace" and not c[-1] > radius:
        raise ValueError("bump support must stay inside the half-space")

    def parts(P):
        d = np.asarray(P, dtype=float) - c
        s2 = np.sum(d * d, axis=-1) / radius**2
        inside = s2 < 1
        val = np.zeros(s2.shape)
        val[inside] = amplitude * np.exp(-k / (1 - s2[inside]))
        dlog = np.zeros(s2.shape)
        dlog[inside] = -2 * k / (1 - s2[inside]) ** 2 / radius**2
        return d, val, dlog

    def value(P):
        return parts(P)[1]

    def grad(P):
        d, val, dlog = parts(P)
        return (val * dlog)[:, None] * d

    return TrialFunction(value, grad, domain, Support(c, float(radius)), n, label,
                         meta=dict(center=c.tolist(), radius=radius, amplitude=amplitude, sharpness=k))


def _smoothstep(s):
    """C^2 step from 1 (s <= 0) to 0 (s >= 1) and its derivative."""
    s = np.clip(s, 0.0, 1.0)
    eta = 1 - s**3 * (10 - 15 * s + 6 * s * s)
    deta = -30 * s * s * (1 - s) ** 2
    return eta, deta


def bubble_family(epsilon: float, center_height: float, cutoff_radius: float, n: int = 3) -> TrialFunction:
    """Cut-off Sobolev optimizer (eps / (eps^2 + |p - p0|^2))^{(n-2)/2}.

    ``p0 = (0, ..., 0, center_height)``.  The cutoff is 1 for
    |p - p0| <= R/2, 0 for |p - p0| >= R, with a C^2 quintic transition.
    """
    eps, h, R = float(epsilon), float(center_height), float(cutoff_radius)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < R < h:
        raise ValueError("cutoff radius must satisfy 0 < R < center height")
    p0 = np.zeros(n)
    p0[-1] = h
    e = (n - 2) / 2

    def parts(P):
        d = np.asarray(P, dtype=float) - p0
        r2 = np.sum(d * d, axis=-1)
        r = np.sqrt(r2)
        U = (eps / (eps**2 + r2)) ** e
        dU_over_r = -2 * e * U / (eps**2 + r2)          # (dU/dr) / r
        eta, deta = _smoothstep((r - R / 2) / (R / 2))
        deta = deta / (R / 2)
        return d, r, U, dU_over_r, eta, deta

    def value(P):
        _, _, U, _, eta, _ = parts(P)
        return U * eta

    def grad(P):
        d, r, U, dU_over_r, eta, deta = parts(P)
        with np.errstate(invalid="ignore", divide="ignore"):
            deta_over_r = np.where(r > 0, deta / np.where(r > 0, r, 1.0), 0.0)
        return (dU_over_r * eta + U * deta_over_r)[:, None] * d

    return TrialFunction(value, grad, "halfspace", Support(p0, R), n, f"bubble(eps={eps:g})",
                         meta=dict(epsilon=eps, center_height=h, cutoff_radius=R))


def gaussian_bump(center, width: float, radius: float, domain: str = "halfspace",
                  label: str = "gaussian") -> TrialFunction:
    """exp(-|p - c|^2 / width^2), cut off smoothly between radius/2 and radius."""
    c = np.asarray(center, dtype=float)
    n = c.size
    w, R = float(width), float(radius)
    if domain == "halfspace" and not c[-1] > R:
        raise ValueError("gaussian support must stay inside the half-space")

    def parts(P):
        d = np.asarray(P, dtype=float) - c
        r = np.sqrt(np.sum(d * d, axis=-1))
        G = np.exp(-(r * r) / w**2)
        eta, deta = _smoothstep((r - R / 2) / (R / 2))
        return d, r, G, eta, deta / (R / 2)

    def value(P):
        _, _, G, eta, _ = parts(P)
        return G * eta

    def grad(P):
        d, r, G, eta, deta = parts(P)
        with np.errstate(invalid="ignore", divide="ignore"):
            deta_over_r = np.where(r > 0, deta / np.where(r > 0, r, 1.0), 0.0)
        return (G * (-2 / w**2 * eta + deta_over_r))[:, None] * d

    return TrialFunction(value, grad, domain, Support(c, R), n, label,
                         meta=dict(center=c.tolist(), width=w, radius=R))


def halfspace_from_ball(g: TrialFunction) -> TrialFunction:
    """f(p) = (2 / ((1+y)^2 + |x|^2))^{(n-2)/2} g(B(p))."""
    if g.domain != "ball":
        raise ValueError("expected a function on the ball")
    n = g.n
    e = (n - 2) / 2

    def value(P):
        return geo.conformal_weight_half_array(P, n) * g.value(geo.mobius_to_ball_array(P))

    def grad(P):
        W = geo.mobius_to_ball_array(P)
        w = geo.conformal_weight_half_array(P, n)
        lam, Qhat = geo.mobius_jacobian_array(P)
        q = P.copy()
        q[:, -1] += 1
        D = np.sum(q * q, axis=1)
        dw = (-e * w * 2 / D)[:, None] * q
        gv = g.value(W)
        gg = g.grad(W)
        # Jacobian of B is symmetric: lam (I - 2 Qhat Qhat^T)
        pulled = lam[:, None] * (gg - 2 * np.sum(Qhat * gg, axis=1)[:, None] * Qhat)
        return dw * gv[:, None] + w[:, None] * pulled

    c, r = geo.mobius_sphere(g.support.center, g.support.radius)
    return TrialFunction(value, grad, "halfspace", Support(c, r), n, f"B*{g.label}")


def ball_from_hyperbolic(k: TrialFunction) -> TrialFunction:
    """g(Omega) = (2 / (1 - |Omega|^2))^{(n-2)/2} k(Omega), k in ball coordinates."""
    if k.domain != "ball":
        raise ValueError("expected a function in ball coordinates")
    n = k.n
    e = (n - 2) / 2

    def value(W):
        return geo.conformal_weight_ball_array(W, n) * k.value(W)

    def grad(W):
        w = geo.conformal_weight_ball_array(W, n)
        r2 = np.sum(W * W, axis=1)
        dlogw = (e * 2 / (1 - r2))[:, None] * W
        return w[:, None] * (dlogw * k.value(W)[:, None] + k.grad(W))

    return TrialFunction(value, grad, "ball", k.support, n, f"P*{k.label}")


def kelvin_pullback(g: TrialFunction) -> TrialFunction:
    """g*(w) = |w|^{-(n-2)} g(w / |w|^2) for g on the ball complement."""
    if g.domain != "exterior":
        raise ValueError("expected a function on the complement of the ball")
    n = g.n

    def value(W):
        r2 = np.sum(W * W, axis=1)
        return r2 ** (-(n - 2) / 2) * g.value(W / r2[:, None])

    def grad(W):
        r2 = np.sum(W * W, axis=1)
        Z = W / r2[:, None]
        pref = r2 ** (-(n - 2) / 2)
        gv, gg = g.value(Z), g.grad(Z)
        what = W / np.sqrt(r2)[:, None]
        inv = (gg - 2 * np.sum(what * gg, axis=1)[:, None] * what) / r2[:, None]
        return (-(n - 2) * pref / r2 * gv)[:, None] * W + pref[:, None] * inv

    s = g.support
    if s.inner > 0:
        # shell about the origin maps to a shell about the origin
        support = Support(np.zeros(n), 1.0 / s.inner, 1.0 / s.radius)
    else:
        c, r = geo.invert_sphere(s.center, s.radius)
        support = Support(c, r)
    return TrialFunction(value, grad, "ball", support, n, f"K*{g.label}")


def random_bumps(n: int, count: int, seed: int, height=(1.5, 3.0), radius=(0.4, 1.2),
                 spread: float = 1.0) -> list[TrialFunction]:
    """Seeded corpus of nonnegative smooth bumps inside the half-space."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        y0 = rng.uniform(*height)
        rad = min(rng.uniform(*radius), 0.9 * y0)
        c = np.r_[rng.uniform(-spread, spread, n - 1), y0]
        out.append(smooth_bump(c, rad, amplitude=rng.uniform(0.5, 2.0),
                               sharpness=rng.uniform(0.5, 2.0), label=f"bump{i}"))
    return out


def ball_bumps(n: int, count: int, seed: int, reach: float = 0.8,
               domain: str = "ball") -> list[TrialFunction]:
    """Seeded nonnegative bumps supported in |Omega| <= reach."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        rad = rng.uniform(0.25, 0.6) * reach
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        c = direction * rng.uniform(0.0, reach - rad)
        out.append(smooth_bump(c, rad, amplitude=rng.uniform(0.5, 2.0),
                               sharpness=rng.uniform(0.5, 2.0), domain=domain, label=f"ball{i}"))
    return out


def exterior_bumps(n: int, count: int, seed: int) -> list[TrialFunction]:
    """Seeded nonnegative bumps supported outside the closed unit ball."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        dist = rng.uniform(1.8, 3.0)
        rad = rng.uniform(0.3, 0.7) * (dist - 1)
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        out.append(smooth_bump(direction * dist, rad, amplitude=rng.uniform(0.5, 2.0),
                               sharpness=rng.uniform(0.5, 2.0), domain="exterior", label=f"ext{i}"))
    return out


# ---------------------------------------------------------------------------
# grids for supports
# ---------------------------------------------------------------------------

def support_grid(f: TrialFunction, m: int = 24, kind: str = "spherical") -> TensorGrid:
    """Grid that exactly covers the support of ``f``.

    ``spherical`` gives a Gauss rule (n <= 3) suited to smooth integrands;
    ``box`` gives a midpoint grid on the bounding cube, as needed by the
    singular double sums.
    """
    s = f.support
    if kind == "box":
        return box_grid(s.center - s.radius, s.center + s.radius, m, domain=f.domain)
    return build_spherical_grid(s.center, s.radius, m, m, m, inner=s.inner, domain=f.domain)


def bubble_grid(f: TrialFunction, m: int = 24) -> TensorGrid:
    """Spherical grid about the bubble center, radially graded toward it."""
    eps = f.meta["epsilon"]
    R = f.meta["cutoff_radius"]
    breaks = []
    b = eps / 4
    while b < R / 2:
        breaks.append(b)
        b *= 2
    breaks.append(R / 2)
    return build_spherical_grid(f.support.center, R, m_r=max(8, m // 2), m_theta=m, m_phi=4,
                                breaks=breaks, domain="halfspace")


def coarsen(grid: TensorGrid, factor: float = 0.75) -> TensorGrid:
    """A lower-resolution copy of ``grid`` for error estimates."""
    spec = grid.spec
    if spec["builder"] == "spherical":
        keys = ("m_r", "m_theta") if spec["m_phi"] <= 4 else ("m_r", "m_theta", "m_phi")
        return grid.rebuild(**{k: max(4, int(round(spec[k] * factor))) for k in keys})
    m = spec["m"]
    if np.ndim(m) == 0:
        return grid.rebuild(m=max(4, int(round(m * factor))))
    return grid.rebuild(m=[max(4, int(round(k * factor))) for k in m])


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------

def _prepare(f: TrialFunction, n: int, grid: TensorGrid, domains):
    if f.n != n or grid.n != n:
        raise ValueError(f"dimension mismatch: n={n}, function {f.n}, grid {grid.n}")
    if f.domain not in domains:
        raise ValueError(f"form expects a function on {domains}, got {f.domain!r}")
    s = f.support
    if not grid.covers(s.center, s.radius, s.inner):
        raise ValueError(f"support of {f.label or 'f'} exceeds the grid region")
    P = grid.nodes
    return P, f.value(P), f.grad(P)


def hardy_form(f: TrialFunction, n: int, grid: TensorGrid) -> float:
    """int |grad f|^2 - |f|^2 / (4 y^2) over the half-space."""
    P, v, g = _prepare(f, n, grid, ("halfspace",))
    y = P[:, -1]
    return grid.integrate(np.sum(g * g, axis=1) - v * v / (4 * y * y))


def hardy_form_substituted(f: TrialFunction, n: int, grid: TensorGrid) -> float:
    """int (|grad_x g|^2 + g_y^2) y dx dy with g = f / sqrt(y).

    Equal to :func:`hardy_form` after an integration by parts in y; the two
    integrands differ pointwise.
    """
    P, v, grad = _prepare(f, n, grid, ("halfspace",))
    y = P[:, -1]
    gg = grad / np.sqrt(y)[:, None]
    gg[:, -1] -= v / (2 * y ** 1.5)
    return grid.integrate(np.sum(gg * gg, axis=1) * y)


def _ball_like(g, n, grid, weight, domains=("ball",)):
    W, v, gr = _prepare(g, n, grid, domains)
    r2 = np.sum(W * W, axis=1)
    return grid.integrate(np.sum(gr * gr, axis=1) - weight(r2) * v * v)


def ball_form(g: TrialFunction, n: int, grid: TensorGrid) -> float:
    """int |grad g|^2 - |g|^2 / (1 - |Omega|^2)^2 over the unit ball."""
    return _ball_like(g, n, grid, lambda r2: 1 / (1 - r2) ** 2)


def complement_form(g: TrialFunction, n: int, grid: TensorGrid) -> float:
    """Same integrand as :func:`ball_form`, for functions outside the unit ball."""
    return _ball_like(g, n, grid, lambda r2: 1 / (1 - r2) ** 2, domains=("exterior",))


def theorem2_form(g: TrialFunction, n: int, grid: TensorGrid) -> float:
    """int |grad g|^2 - |g|^2 / (4 (1 - |Omega|)^2), distance-to-boundary weight."""
    return _ball_like(g, n, grid, lambda r2: 1 / (4 * (1 - np.sqrt(r2)) ** 2))


def hyperbolic_form(k: TrialFunction, n: int, grid: TensorGrid) -> tuple[float, float]:
    """(int |grad_h k|^2 - (n-1)^2/4 int k^2, int k^2) in the Poincare ball.

    dVol = (2 / (1 - r^2))^n dOmega and |grad_h k|^2 = ((1 - r^2)/2)^2 |grad k|^2.
    """
    W, v, gr = _prepare(k, n, grid, ("ball",))
    r2 = np.sum(W * W, axis=1)
    conf = 2 / (1 - r2)
    vol = conf**n
    dirichlet = grid.integrate(np.sum(gr * gr, axis=1) / conf**2 * vol)
    mass = grid.integrate(v * v * vol)
    return dirichlet - (n - 1) ** 2 / 4 * mass, mass


def lp_norm(f: TrialFunction, p: float, grid: TensorGrid) -> float:
    """(int |f|^p)^{1/p} over the grid."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p!r}")
    s = f.support
    if not grid.covers(s.center, s.radius, s.inner):
        raise ValueError("support exceeds the grid region")
    return grid.integrate(np.abs(f.value(grid.nodes)) ** p) ** (1 / p)


def rayleigh_quotient(f: TrialFunction, n: int, grid: TensorGrid,
                      coarse: TensorGrid | None = None) -> QuotientResult:
    """hardy_form(f) / ||f||_{2n/(n-2)}^2 with a coarse-grid error estimate."""
    if n < 3:
        raise ValueError("the Sobolev exponent needs n >= 3")
    p = 2 * n / (n - 2)
    form = hardy_form(f, n, grid)
    norm = lp_norm(f, p, grid)
    if norm == 0:
        raise ValueError("rayleigh_quotient of the zero function")
    coarse = coarse if coarse is not None else coarsen(grid)
    q_coarse = hardy_form(f, n, coarse) / lp_norm(f, p, coarse) ** 2
    return QuotientResult(form, norm, abs(form / norm**2 - q_coarse))


def hls_bound(params: KernelParams) -> float:
    """psi_prefactor(n, alpha) * C(n, alpha)."""
    return psi_prefactor(params.n, params.alpha) * hls_constant(params.n, params.alpha)


def _pairing(f, params, grid, kernel):
    vals = f.value(grid.nodes)
    if kernel == "phi":
        K = lambda P, Q, skip: phi_matrix(params, P, Q, skip)
    elif kernel == "psi":
        K = lambda P, Q, skip: psi_matrix(params, P, Q, skip)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    # both kernels share the leading diagonal term psi_prefactor |p - q|^{alpha - n}
    leading = (psi_prefactor(params.n, params.alpha), params.n - params.alpha)
    return quadratic_form_singular(K, vals, grid, leading)


def hls_quotient(f: TrialFunction, params: KernelParams, grid: TensorGrid,
                 coarse: TensorGrid | None = None, kernel: str = "phi") -> QuotientResult:
    """(f, K f) / ||f||_p^2 with p = 2n/(n+alpha), K = Phi (default) or Psi.

    The error estimate is the change against ``coarse``, by default the same
    box at half the resolution.  The singular sum converges like h^2, so the
    half-resolution difference is about three times the actual error.
    """
    if kernel == "phi" and params.regime != "hls":
        raise ValueError(f"hls_quotient needs n-1 <= alpha < n, got {params}")
    if f.n != params.n or grid.n != params.n:
        raise ValueError("dimension mismatch")
    s = f.support
    if not grid.covers(s.center, s.radius, s.inner):
        raise ValueError("support exceeds the grid region")
    p = params.critical_p
    form = _pairing(f, params, grid, kernel)
    norm = lp_norm(f, p, grid)
    if norm == 0:
        raise ValueError("hls_quotient of the zero function")
    coarse = coarse if coarse is not None else coarsen(grid, 0.5)
    q_coarse = _pairing(f, params, coarse, kernel) / lp_norm(f, p, coarse) ** 2
    return QuotientResult(form, norm, abs(form / norm**2 - q_coarse))


# ---------------------------------------------------------------------------
# heat semigroup
# ---------------------------------------------------------------------------

def heat_apply(values, t: float, grid: TensorGrid, n: int | None = None, block: int = 1024) -> np.ndarray:
    """(G_t f)(p_i) = sum_j G_t(p_i, p_j) w_j f_j on the grid nodes."""
    n = grid.n if n is None else n
    v = np.asarray(values, dtype=float)
    wf = grid.weights * v
    P = grid.nodes
    out = np.empty(len(P))
    for a in range(0, len(P), block):
        out[a:a + block] = heat_kernel_matrix(n, P[a:a + block], P, t) @ wf
    return out


def _l2_sq(values, grid):
    return grid.integrate(np.asarray(values) ** 2)


def generator_limit(f: TrialFunction, t_sequence, grid: TensorGrid) -> np.ndarray:
    """(1/t) [||f||^2 - (f, G_t f)] for each t in ``t_sequence``."""
    s = f.support
    if not grid.covers(s.center, s.radius, s.inner):
        raise ValueError("support exceeds the grid region")
    v = f.value(grid.nodes)
    norm2 = _l2_sq(v, grid)
    out = []
    for t in t_sequence:
        if not t > 0:
            raise ValueError("times must be positive")
        Gv = heat_apply(v, t, grid)
        out.append((norm2 - grid.integrate(v * Gv)) / t)
    return np.array(out)
