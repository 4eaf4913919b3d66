"""Quadrature rules and grids.

Grids are flat: ``nodes`` is an ``(N, n)`` array and ``weights`` an ``(N,)``
array, whatever coordinate system was used to build them.  Each grid also
records the region it covers, so forms can refuse functions whose support
sticks out, and the builder arguments, so a coarser or finer copy can be
rebuilt for error estimates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, signal

__all__ = [
    "ConvergenceError",
    "QuadratureRule",
    "TensorGrid",
    "adaptive_integrate",
    "ball_self_energy",
    "box_grid",
    "build_ball_grid",
    "build_halfspace_grid",
    "build_spherical_grid",
    "gauss_legendre",
    "pairwise_sum",
    "periodic_integrate",
    "periodic_rule",
    "quadratic_form_singular",
    "worker_count",
]


class ConvergenceError(RuntimeError):
    """A quadrature did not reach its tolerance within its budget."""

    def __init__(self, message, last_values=None):
        super().__init__(message)
        self.last_values = last_values


def worker_count() -> int:
    """Parallelism cap from ``HSM_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HSM_WORKERS", "1")))
    except ValueError:
        return 1


def pairwise_sum(values) -> float:
    """Tree summation with a fixed reduction order."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


# ---------------------------------------------------------------------------
# 1-D rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    domain: str

    def __post_init__(self):
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("nodes and weights differ in length")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def periodic_rule(N: int) -> QuadratureRule:
    """Equispaced trapezoid rule on [-pi, pi)."""
    phi = -np.pi + 2 * np.pi * np.arange(N) / N
    return QuadratureRule(phi, np.full(N, 2 * np.pi / N), "periodic_angle")


def gauss_legendre(m: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(m)
    return QuadratureRule(a + (b - a) * (x + 1) / 2, w * (b - a) / 2, "interval")


def periodic_integrate(f: Callable, N: int = 8, tol: float = 1e-12, max_nodes: int = 2**16) -> float:
    """Integrate a periodic function over [-pi, pi] by the trapezoid rule.

    ``f`` must accept an array of angles.  ``N`` doubles until two successive
    values agree to ``tol`` (relative, absolute near zero).
    """
    if N < 8 or N & (N - 1):
        raise ValueError(f"N must be a power of two >= 8, got {N}")
    prev = None
    while N <= max_nodes:
        rule = periodic_rule(N)
        val = rule.integrate(f(rule.nodes))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        N *= 2
    raise ConvergenceError(
        f"periodic trapezoid not converged at N={max_nodes}", last_values=(prev, val)
    )


def adaptive_integrate(f: Callable, a: float, b: float, tol: float = 1e-10,
                       max_evals: int = 10**6) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod integral of a scalar function.

    ``b`` may be ``math.inf``; the semi-infinite case is mapped to a finite
    interval internally.  Returns ``(value, error_estimate)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    limit = max(50, max_evals // 21)
    val, err, info, *rest = integrate.quad(
        f, a, b, epsabs=tol, epsrel=0.0, limit=limit, full_output=1
    )
    if info["neval"] > max_evals:
        raise ConvergenceError(f"budget exhausted after {info['neval']} evaluations", (val, err))
    if rest and err > tol:
        raise ConvergenceError(f"adaptive quadrature failed: {rest[0]}", (val, err))
    return val, err


# ---------------------------------------------------------------------------
# multi-dimensional grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorGrid:
    """Product rule flattened to nodes and weights.

    ``region`` is ``("box", lo, hi)`` or ``("sphere", center, r_in, r_out)``.
    ``cells`` holds per-node cell volumes for midpoint grids (None for Gauss
    grids, which have no cells).
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: str
    region: tuple
    spec: dict = field(default_factory=dict)
    cells: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values) -> float:
        return pairwise_sum(self.weights * np.asarray(values))

    def measure(self) -> float:
        return pairwise_sum(self.weights)

    def covers(self, center, radius: float, inner: float = 0.0) -> bool:
        """True if the closed ball (or shell) about ``center`` lies in the grid region."""
        c = np.asarray(center, dtype=float)
        slack = 1e-12 * max(1.0, radius)
        kind = self.region[0]
        if kind == "box":
            lo, hi = self.region[1], self.region[2]
            return bool(np.all(c - radius >= lo - slack) and np.all(c + radius <= hi + slack))
        _, gc, r_in, r_out = self.region
        d = float(np.linalg.norm(c - gc))
        if d + radius > r_out + slack:
            return False
        if r_in > 0:
            # a shell support about the same center is fine when it clears r_in
            return d <= slack and inner >= r_in - slack
        return True

    def translated(self, shift) -> "TensorGrid":
        shift = np.asarray(shift, dtype=float)
        spec = dict(self.spec)
        if self.region[0] == "box":
            region = ("box", self.region[1] + shift, self.region[2] + shift)
            if spec.get("builder") == "halfspace":
                # a shifted half-space grid is just a box grid
                spec = dict(builder="box", lo=region[1].tolist(), hi=region[2].tolist(), m=spec["m"],
                            grading=spec["grading"], domain=self.domain)
            elif spec:
                spec.update(lo=region[1].tolist(), hi=region[2].tolist())
        else:
            region = ("sphere", self.region[1] + shift, self.region[2], self.region[3])
            if spec:
                spec["center"] = region[1].tolist()
        return replace(self, nodes=self.nodes + shift, region=region, spec=spec)

    def rebuild(self, **changes) -> "TensorGrid":
        """Rebuild from the recorded builder arguments with some overridden."""
        spec = dict(self.spec)
        builder = _BUILDERS[spec.pop("builder")]
        spec.update(changes)
        return builder(**spec)


def _graded_edges(m: int, H: float, grading: float) -> np.ndarray:
    return H * (np.arange(m + 1) / m) ** grading


def box_grid(lo, hi, m, grading: float = 1.0, domain: str = "halfspace") -> TensorGrid:
    """Midpoint tensor grid on the box [lo, hi].

    ``m`` is cells per axis (int or sequence).  With ``grading > 1`` the last
    axis is graded toward ``lo[-1]`` as ``lo + (j/m)^grading (hi - lo)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    ms = [int(m)] * n if np.ndim(m) == 0 else [int(k) for k in m]
    axes, widths = [], []
    for k in range(n):
        if k == n - 1 and grading != 1.0:
            edges = lo[k] + _graded_edges(ms[k], hi[k] - lo[k], grading)
        else:
            edges = np.linspace(lo[k], hi[k], ms[k] + 1)
        axes.append((edges[:-1] + edges[1:]) / 2)
        widths.append(np.diff(edges))
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*widths, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=1), axis=1)
    spec = dict(builder="box", lo=lo.tolist(), hi=hi.tolist(), m=m if np.ndim(m) == 0 else list(ms),
                grading=grading, domain=domain)
    return TensorGrid(nodes, weights, domain, ("box", lo, hi), spec, cells=weights.copy())


def build_halfspace_grid(n: int, L: float = 16.0, H: float = 16.0, m: int = 32,
                         grading: float = 2.0) -> TensorGrid:
    """Midpoint grid on [-L, L]^{n-1} x (0, H], graded toward y = 0."""
    if not (L > 0 and H > 0):
        raise ValueError("L and H must be positive")
    if m < 8:
        raise ValueError("need at least 8 cells per axis")
    if grading < 1:
        raise ValueError("grading exponent must be >= 1")
    lo = np.r_[-L * np.ones(n - 1), 0.0]
    hi = np.r_[L * np.ones(n - 1), H]
    grid = box_grid(lo, hi, m, grading=grading, domain="halfspace")
    spec = dict(builder="halfspace", n=n, L=L, H=H, m=m, grading=grading)
    return replace(grid, spec=spec)


def _radial_rule(r_in, r_out, m_r, breaks, n):
    edges = [r_in] + [b for b in sorted(breaks or []) if r_in < b < r_out] + [r_out]
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        rule = gauss_legendre(m_r, a, b)
        xs.append(rule.nodes)
        ws.append(rule.weights * rule.nodes ** (n - 1))
    return np.concatenate(xs), np.concatenate(ws)


def build_spherical_grid(center, radius: float, m_r: int = 24, m_theta: int = 24,
                         m_phi: int = 24, inner: float = 0.0, breaks=None,
                         domain: str = "halfspace") -> TensorGrid:
    """Gauss product rule on a ball (or shell) about ``center``, n in {2, 3}.

    Radius: composite Gauss-Legendre with panels split at ``breaks``.  In 3-D
    the polar axis is the last coordinate, with Gauss-Legendre in cos(theta)
    and the trapezoid rule in the azimuth.
    """
    c = np.asarray(center, dtype=float)
    n = c.size
    r, wr = _radial_rule(inner, radius, m_r, breaks, n)
    if n == 2:
        phi = 2 * np.pi * np.arange(m_phi) / m_phi
        R, PH = np.meshgrid(r, phi, indexing="ij")
        W = np.outer(wr, np.full(m_phi, 2 * np.pi / m_phi))
        nodes = np.stack([R * np.sin(PH), R * np.cos(PH)], axis=-1).reshape(-1, 2)
    elif n == 3:
        ct = gauss_legendre(m_theta)
        phi = 2 * np.pi * np.arange(m_phi) / m_phi
        R, CT, PH = np.meshgrid(r, ct.nodes, phi, indexing="ij")
        ST = np.sqrt(1 - CT**2)
        W = wr[:, None, None] * ct.weights[None, :, None] * (2 * np.pi / m_phi)
        W = np.broadcast_to(W, R.shape)
        nodes = np.stack([R * ST * np.cos(PH), R * ST * np.sin(PH), R * CT], axis=-1).reshape(-1, 3)
    else:
        raise NotImplementedError("spherical grids are implemented for n = 2 and n = 3")
    spec = dict(builder="spherical", center=c.tolist(), radius=radius, m_r=m_r, m_theta=m_theta,
                m_phi=m_phi, inner=inner, breaks=list(breaks or []), domain=domain)
    return TensorGrid(nodes + c, np.ascontiguousarray(W).ravel(), domain,
                      ("sphere", c, float(inner), float(radius)), spec)


def build_ball_grid(n: int, m: int = 24, radius: float = 1.0) -> TensorGrid:
    """Spherical Gauss grid on the ball |Omega| <= radius about the origin."""
    if not 0 < radius < 1:
        raise ValueError("ball grid radius must lie in (0, 1)")
    return build_spherical_grid(np.zeros(n), radius, m, m, m, domain="ball")


_BUILDERS = {
    "box": box_grid,
    "halfspace": build_halfspace_grid,
    "spherical": build_spherical_grid,
}


# ---------------------------------------------------------------------------
# singular double sums
# ---------------------------------------------------------------------------

def ball_self_energy(n: int, order: float) -> float:
    """int_{B} int_{B} |p - q|^{-order} dp dq over the unit ball of R^n.

    Uses the lens-volume representation
    ``int_0^2 s^{-order} |S^{n-1}| s^{n-1} V(s) ds`` with ``V`` the volume of
    the intersection of two unit balls at distance ``s``.
    """
    if not 0 <= order < n:
        raise ValueError("order must lie in [0, n) for the self-energy to be finite")
    ball_nm1 = math.pi ** ((n - 1) / 2) / math.gamma((n + 1) / 2)
    sphere_nm1 = 2 * math.pi ** (n / 2) / math.gamma(n / 2)

    def lens(s):
        v, _ = integrate.quad(lambda h: (1 - h * h) ** ((n - 1) / 2), s / 2, 1, epsabs=0, epsrel=1e-13)
        return 2 * ball_nm1 * v

    val, _ = integrate.quad(
        lambda s: s ** (n - 1 - order) * lens(s), 0, 2, epsabs=0, epsrel=1e-12, limit=200
    )
    return sphere_nm1 * val


def _row_blocks(N, block):
    return [(i, min(i + block, N)) for i in range(0, N, block)]


def _self_cell_term(f, cells, n, leading):
    coeff, order = leading
    unit_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    rho = (cells / unit_ball) ** (1.0 / n)
    self_energy = coeff * ball_self_energy(n, order) * rho ** (2 * n - order)
    return pairwise_sum(f**2 * self_energy)


def _run_jobs(fn, jobs):
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def _box_axes(grid: TensorGrid):
    """Per-axis midpoints of a box grid, or None if the grid is not one."""
    spec = grid.spec
    if spec.get("builder") == "halfspace":
        n, L, H = spec["n"], spec["L"], spec["H"]
        spec = dict(lo=[-L] * (n - 1) + [0.0], hi=[L] * (n - 1) + [H], m=spec["m"],
                    grading=spec["grading"])
    elif spec.get("builder") != "box":
        return None
    lo, hi = spec["lo"], spec["hi"]
    n = len(lo)
    ms = [int(spec["m"])] * n if np.ndim(spec["m"]) == 0 else list(spec["m"])
    axes = []
    for k in range(n):
        if k == n - 1 and spec["grading"] != 1.0:
            edges = lo[k] + _graded_edges(ms[k], hi[k] - lo[k], spec["grading"])
        else:
            edges = np.linspace(lo[k], hi[k], ms[k] + 1)
        axes.append((edges[:-1] + edges[1:]) / 2)
    return axes


def quadratic_form_singular(kernel: Callable, f, grid: TensorGrid, leading: tuple[float, float],
                            block: int = 512, method: str = "auto") -> float:
    """Discrete ``sum_{i != j} w_i w_j f_i K(p_i, p_j) f_j`` plus a self-cell term.

    Parameters
    ----------
    kernel : callable
        ``kernel(P, Q, skip_diagonal)`` returning the ``(len(P), len(Q))``
        kernel matrix.  On self-interaction blocks ``skip_diagonal`` is True
        and the kernel must return zeros on the diagonal.  The kernel must be
        invariant under transverse translations (it may depend on both
        heights) for the ``"fft"`` method.
    f : array
        Function values at the grid nodes.
    grid : TensorGrid
        Midpoint grid; ``grid.cells`` supplies the cell volumes.
    leading : (coeff, order)
        Leading diagonal singularity ``coeff * |p - q|^{-order}``.  Each cell
        is replaced by the ball of equal volume, on which that term
        integrates in closed form (see :func:`ball_self_energy`).
    method : {"auto", "dense", "fft"}
        ``"dense"`` sums the upper triangle in fixed blocks.  ``"fft"`` uses
        that on a box grid the kernel between two height levels depends only
        on the transverse offset, so each pair of levels is a convolution.
        ``"auto"`` picks ``"fft"`` for box grids.

    Both methods fix the reduction order, so the result does not depend on
    the worker count.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.size,):
        raise ValueError("f must have one value per grid node")
    if grid.cells is None:
        raise ValueError("quadratic_form_singular needs a midpoint grid with cell volumes")
    if method not in ("auto", "dense", "fft"):
        raise ValueError(f"unknown method {method!r}")
    axes = _box_axes(grid)
    if method == "fft" and axes is None:
        raise ValueError("the fft method needs a box grid")
    if method != "dense" and axes is not None:
        off = _offdiag_fft(kernel, f, grid, axes)
    else:
        off = _offdiag_dense(kernel, f, grid, block)
    nz = f != 0
    return off + _self_cell_term(f[nz], grid.cells[nz], grid.n, leading)


def _offdiag_dense(kernel, f, grid, block):
    wf = grid.weights * f
    nz = np.flatnonzero(wf != 0)
    P, wf = grid.nodes[nz], wf[nz]
    blocks = _row_blocks(len(nz), block)

    def block_sum(ij):
        (a, b), (c, d) = ij
        if a == c:
            # symmetric block with a zero diagonal: twice the strict upper triangle
            K = np.triu(kernel(P[a:b], P[c:d], True), k=1)
            return 2.0 * float(wf[a:b] @ K @ wf[c:d])
        K = kernel(P[a:b], P[c:d], False)
        return 2.0 * float(wf[a:b] @ K @ wf[c:d])

    jobs = [(blocks[i], blocks[j]) for i in range(len(blocks)) for j in range(i, len(blocks))]
    return pairwise_sum(_run_jobs(block_sum, jobs))


def _offdiag_fft(kernel, f, grid, axes):
    shape = tuple(len(a) for a in axes)
    wf = (grid.weights * f).reshape(shape)
    trans, heights = axes[:-1], axes[-1]
    # transverse offsets k * h for k in [-(m-1), m-1] on each axis
    offs = [(np.arange(2 * len(a) - 1) - (len(a) - 1)) * (a[1] - a[0] if len(a) > 1 else 0.0)
            for a in trans]
    mesh = np.meshgrid(*offs, indexing="ij")
    D = np.stack([g.ravel() for g in mesh], axis=1)
    oshape = tuple(2 * len(a) - 1 for a in trans)
    center = int(np.ravel_multi_index(tuple(len(a) - 1 for a in trans), oshape))
    keep = np.ones(len(D), dtype=bool)
    keep[center] = False
    live = [j for j in range(len(heights)) if np.any(wf[..., j] != 0)]

    def level_pair(ab):
        a, b = ab
        origin = np.zeros((1, len(axes)))
        origin[0, -1] = heights[a]
        Q = np.concatenate([D, np.full((len(D), 1), heights[b])], axis=1)
        row = np.zeros(len(D))
        if a == b:
            row[keep] = kernel(origin, Q[keep], False)[0]
        else:
            row[:] = kernel(origin, Q, False)[0]
        conv = signal.fftconvolve(wf[..., b], row.reshape(oshape), mode="valid")
        val = pairwise_sum(wf[..., a] * conv)
        return val if a == b else 2.0 * val

    jobs = [(a, b) for i, a in enumerate(live) for b in live[i:]]
    return pairwise_sum(_run_jobs(level_pair, jobs))
