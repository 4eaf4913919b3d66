"""Conformal maps between the half-space, the unit ball and the hyperboloid.

The point classes validate their domain on construction.  Array versions of
the maps (suffix ``_array``) act on stacks of points with the last axis as
coordinates; the half-space convention is ``p = (x_1, ..., x_{n-1}, y)``.

The Moebius map is written through the shifted point ``q = p + e_n``::

    B(p) = 2 q / |q|^2 - e_n,    |q|^2 = (1 + y)^2 + |x|^2,

so that its Jacobian is ``(2/|q|^2) (I - 2 q q^T / |q|^2)`` and its
conformal factor is ``2/|q|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_EPS = 1e-14
HYPERBOLOID_TOL = 1e-12


def _vec(v) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HalfSpacePoint:
    x: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not self.y >= BOUNDARY_EPS:
            raise ValueError(f"half-space point needs y > {BOUNDARY_EPS}, got y={self.y!r}")

    @property
    def n(self) -> int:
        return self.x.size + 1

    def as_array(self) -> np.ndarray:
        return np.append(self.x, self.y)

    @classmethod
    def from_array(cls, p) -> "HalfSpacePoint":
        p = np.asarray(p, dtype=float)
        return cls(p[:-1], p[-1])


@dataclass(frozen=True)
class BallPoint:
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", _vec(self.omega))
        r = float(np.linalg.norm(self.omega))
        if not r <= 1 - BOUNDARY_EPS:
            raise ValueError(f"ball point needs |omega| < 1 - {BOUNDARY_EPS}, got {r!r}")

    @property
    def n(self) -> int:
        return self.omega.size


@dataclass(frozen=True)
class HyperboloidPoint:
    """Point (u, v) on the upper sheet v^2 - |u|^2 = 1."""

    u: np.ndarray
    v: float
    tol: float = field(default=HYPERBOLOID_TOL, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "u", _vec(self.u))
        object.__setattr__(self, "v", float(self.v))
        if self.v < 1:
            raise ValueError(f"hyperboloid point needs v >= 1, got {self.v!r}")
        defect = self.v * self.v - float(self.u @ self.u) - 1
        if abs(defect) > self.tol * self.v * self.v:
            raise ValueError(f"v^2 - |u|^2 - 1 = {defect:.3e} off the hyperboloid")

    @property
    def n(self) -> int:
        return self.u.size


def _check_n(n, actual, minimum=2):
    if n is None:
        n = actual
    if n != actual:
        raise ValueError(f"dimension mismatch: n={n} but point has {actual} coordinates")
    if n < minimum:
        raise ValueError(f"dimension must be >= {minimum}, got {n}")
    return n


# ---------------------------------------------------------------------------
# array maps
# ---------------------------------------------------------------------------

def mobius_to_ball_array(P: np.ndarray) -> np.ndarray:
    """B(x, y) = (2x, 1 - |x|^2 - y^2) / ((1 + y)^2 + |x|^2) on a stack of points."""
    P = np.asarray(P, dtype=float)
    D = np.sum(P[..., :-1] ** 2, axis=-1) + (1 + P[..., -1]) ** 2
    out = np.empty_like(P)
    out[..., :-1] = 2 * P[..., :-1] / D[..., None]
    out[..., -1] = (1 - np.sum(P**2, axis=-1)) / D
    return out


def mobius_from_ball_array(W: np.ndarray) -> np.ndarray:
    """Inverse of :func:`mobius_to_ball_array`: p = 2(W + e)/|W + e|^2 - e.

    Same formula as the forward map; B is an involution of R^n.
    """
    W = np.asarray(W, dtype=float)
    Q = W.copy()
    Q[..., -1] += 1
    P = 2 * Q / np.sum(Q**2, axis=-1)[..., None]
    P[..., -1] -= 1
    return P


def mobius_jacobian_array(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(lam, Q)`` with ``dB = lam (I - 2 Q Q^T)`` and ``Q`` unit vectors."""
    Q = np.asarray(P, dtype=float).copy()
    Q[..., -1] += 1
    D = np.sum(Q**2, axis=-1)
    return 2 / D, Q / np.sqrt(D)[..., None]


def conformal_weight_half_array(P: np.ndarray, n: int) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    D = np.sum(P[..., :-1] ** 2, axis=-1) + (1 + P[..., -1]) ** 2
    return (2 / D) ** ((n - 2) / 2)


def conformal_weight_ball_array(W: np.ndarray, n: int) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    return (2 / (1 - np.sum(W**2, axis=-1))) ** ((n - 2) / 2)


def lift_to_hyperboloid_array(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    W = np.asarray(W, dtype=float)
    r2 = np.sum(W**2, axis=-1)
    den = 1 - r2
    return 2 * W / den[..., None], (1 + r2) / den


def hyperboloid_to_ball_array(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Inverse of the lift: Omega = u / (1 + v)."""
    return np.asarray(U, dtype=float) / (1 + np.asarray(V, dtype=float))[..., None]


def kelvin_array(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    return W / np.sum(W**2, axis=-1)[..., None]


# ---------------------------------------------------------------------------
# point API
# ---------------------------------------------------------------------------

def mobius_to_ball(p: HalfSpacePoint, n: int | None = None) -> BallPoint:
    """Map a half-space point to the unit ball."""
    _check_n(n, p.n)
    return BallPoint(mobius_to_ball_array(p.as_array()))


def mobius_from_ball(omega: BallPoint, n: int | None = None) -> HalfSpacePoint:
    """Inverse Moebius map, ball to half-space."""
    _check_n(n, omega.n)
    return HalfSpacePoint.from_array(mobius_from_ball_array(omega.omega))


def lift_to_hyperboloid(omega: BallPoint) -> HyperboloidPoint:
    """(u, v) = (2 Omega, 1 + |Omega|^2) / (1 - |Omega|^2)."""
    u, v = lift_to_hyperboloid_array(omega.omega)
    return HyperboloidPoint(u, float(v))


def conformal_weight_half(p: HalfSpacePoint, n: int | None = None) -> float:
    """(2 / ((1 + y)^2 + |x|^2))^{(n-2)/2}."""
    n = _check_n(n, p.n, minimum=3)
    return float(conformal_weight_half_array(p.as_array(), n))


def conformal_weight_ball(omega: BallPoint, n: int | None = None) -> float:
    """(2 / (1 - |Omega|^2))^{(n-2)/2}."""
    n = _check_n(n, omega.n, minimum=3)
    return float(conformal_weight_ball_array(omega.omega, n))


def kelvin_invert(omega, n: int | None = None) -> tuple[BallPoint, float]:
    """Invert a point outside the closed unit ball through the unit sphere.

    Returns the image ``Omega / |Omega|^2`` and the Kelvin weight
    ``|Omega|^{-(n-2)}``.
    """
    w = np.asarray(omega, dtype=float).reshape(-1)
    n = _check_n(n, w.size)
    r = float(np.linalg.norm(w))
    if not r > 1:
        raise ValueError(f"kelvin_invert needs |Omega| > 1, got {r!r}")
    return BallPoint(w / r**2), r ** (-(n - 2))


# ---------------------------------------------------------------------------
# images of spheres, used to place quadrature grids on supports
# ---------------------------------------------------------------------------

def invert_sphere(center, radius: float, k: float = 1.0) -> tuple[np.ndarray, float]:
    """Image of the sphere |z - c| = r under z -> k z / |z|^2.

    The sphere must not pass through the origin.
    """
    c = np.asarray(center, dtype=float)
    d = float(c @ c) - radius**2
    if abs(d) < 1e-300:
        raise ValueError("sphere passes through the inversion center")
    return k * c / d, k * radius / abs(d)


def mobius_sphere(center, radius: float) -> tuple[np.ndarray, float]:
    """Image of the sphere |p - c| = r under B (B is its own inverse on R^n).

    Works in both directions: half-space sphere to ball sphere and back.
    """
    c = np.asarray(center, dtype=float).copy()
    c[-1] += 1
    m, rho = invert_sphere(c, radius, k=2.0)
    m = m.copy()
    m[-1] -= 1
    return m, rho
