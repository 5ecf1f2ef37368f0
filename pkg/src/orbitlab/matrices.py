"""2x2 matrix algebra: exact integer group elements, coordinate charts, norms.

Conventions used throughout the package:

* the matrix norm is the *trace* norm ``tr(g^t g)``, i.e. the sum of squared
  entries with no square root.  All norm budgets and exponent computations use
  this convention; ``frobenius_norm`` exists only as a conversion helper.
* ``upper_shear(x) = [[1, x], [0, 1]]``, ``lower_shear(x) = [[1, 0], [x, 1]]``,
  ``diag_squeeze(y) = [[sqrt(y), 0], [0, 1/sqrt(y)]]`` (y > 0) and
  ``rotation(theta) = [[cos, sin], [-sin, cos]]``.
* determinant-one real matrices act on the upper half plane by fractional
  linear transformations; ``rotation`` fixes ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoordinate

__all__ = [
    "LatticeElement",
    "IDENTITY",
    "UDLCoords",
    "IwasawaCoords",
    "hs_norm",
    "frobenius_norm",
    "det2",
    "upper_shear",
    "lower_shear",
    "diag_squeeze",
    "rotation",
    "act_upper_half",
    "udl_decompose",
    "iwasawa_decompose",
    "cartan_radius",
]


@dataclass(frozen=True, order=True)
class LatticeElement:
    """Exact integer matrix [[a, b], [c, d]] with determinant one."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError(f"determinant is not 1: {(self.a, self.b, self.c, self.d)}")

    @property
    def norm(self) -> int:
        """Trace norm: sum of squared entries (an exact integer, always >= 2)."""
        return self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d

    def inverse(self) -> "LatticeElement":
        return LatticeElement(self.d, -self.b, -self.c, self.a)

    def __neg__(self) -> "LatticeElement":
        return LatticeElement(-self.a, -self.b, -self.c, -self.d)

    def __matmul__(self, other: "LatticeElement") -> "LatticeElement":
        return LatticeElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def apply(self, u) -> np.ndarray:
        """Linear action on a plane vector: (a*u1 + b*u2, c*u1 + d*u2)."""
        u1, u2 = float(u[0]), float(u[1])
        return np.array([self.a * u1 + self.b * u2, self.c * u1 + self.d * u2])

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def entries(self) -> tuple:
        return (self.a, self.b, self.c, self.d)


IDENTITY = LatticeElement(1, 0, 0, 1)


def hs_norm(g) -> float:
    """Sum of squared entries (trace of g^t g); *no* square root is taken."""
    if isinstance(g, LatticeElement):
        return g.norm
    arr = np.asarray(g, dtype=float)
    return float(np.sum(arr * arr))


def frobenius_norm(g) -> float:
    """sqrt of the trace norm.  Conversion helper only; budgets never use it."""
    return math.sqrt(hs_norm(g))


def det2(g) -> float:
    g = np.asarray(g, dtype=float)
    return float(g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0])


def upper_shear(x: float) -> np.ndarray:
    return np.array([[1.0, float(x)], [0.0, 1.0]])


def lower_shear(x: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [float(x), 1.0]])


def diag_squeeze(y: float) -> np.ndarray:
    if y <= 0:
        raise ValueError("diagonal parameter must be positive")
    r = math.sqrt(y)
    return np.array([[r, 0.0], [0.0, 1.0 / r]])


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def act_upper_half(g, z: complex) -> complex:
    """Fractional linear action of g on a point of the upper half plane."""
    g = np.asarray(g, dtype=float)
    return (g[0, 0] * z + g[0, 1]) / (g[1, 0] * z + g[1, 1])


@dataclass(frozen=True)
class UDLCoords:
    """Coordinates of g = sign * upper_shear(x) @ diag_squeeze(y) @ lower_shear(xp).

    The chart covers matrices with nonzero lower-right entry; ``sign`` records
    whether -g was decomposed (the two differ by a central element, which acts
    trivially on the quotient).
    """

    x: float
    y: float
    xp: float
    sign: int = 1

    def recompose(self) -> np.ndarray:
        r = math.sqrt(self.y)
        s = float(self.sign)
        return s * np.array(
            [
                [r + self.x * self.xp / r, self.x / r],
                [self.xp / r, 1.0 / r],
            ]
        )


def udl_decompose(g) -> UDLCoords:
    """Factor g as upper_shear(x) @ diag_squeeze(y) @ lower_shear(xp).

    Requires the lower-right entry d to be nonzero; the excluded set d = 0 has
    measure zero.  For d < 0 the negated matrix is decomposed and the sign is
    recorded.  Raises DegenerateCoordinate when |d| < 1e-12 * frobenius_norm(g).
    """
    g = np.asarray(g, dtype=float)
    d = g[1, 1]
    if abs(d) < 1e-12 * frobenius_norm(g):
        raise DegenerateCoordinate(f"lower-right entry too small: {d!r}")
    sign = 1 if d > 0 else -1
    a, b, c, dd = sign * g[0, 0], sign * g[0, 1], sign * g[1, 0], sign * g[1, 1]
    return UDLCoords(x=b / dd, y=1.0 / (dd * dd), xp=c / dd, sign=sign)


@dataclass(frozen=True)
class IwasawaCoords:
    """Coordinates of g = upper_shear(x) @ diag_squeeze(y) @ rotation(theta).

    ``x + i*y`` is the image of ``i`` under g; theta is normalized to [0, 2*pi).
    The invariant volume element is dx dy dtheta / y**2 in these coordinates.
    """

    x: float
    y: float
    theta: float

    def recompose(self) -> np.ndarray:
        r = math.sqrt(self.y)
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array(
            [
                [r * c - self.x * s / r, r * s + self.x * c / r],
                [-s / r, c / r],
            ]
        )


def iwasawa_decompose(g) -> IwasawaCoords:
    """Global shear / squeeze / rotation factorization of a determinant-one matrix."""
    g = np.asarray(g, dtype=float)
    if abs(det2(g) - 1.0) > 1e-6:
        raise ValueError(f"matrix is not in the determinant-one group: det={det2(g)!r}")
    c, d = g[1, 0], g[1, 1]
    r2 = c * c + d * d
    y = 1.0 / r2
    x = (g[0, 0] * c + g[0, 1] * d) * y
    theta = math.atan2(-c, d) % (2.0 * math.pi)
    return IwasawaCoords(x=x, y=y, theta=theta)


def cartan_radius(t: float) -> float:
    """Diagonal radius y >= 1 of a shear of size t, i.e. the root of y + 1/y = 2 + t**2.

    Computed as (q + |t|*sqrt(4 + t**2)) / 2 with q = 2 + t**2, which avoids the
    cancellation in sqrt(q**2 - 4) for small t.
    """
    t = float(t)
    q = 2.0 + t * t
    return 0.5 * (q + abs(t) * math.sqrt(4.0 + t * t))
