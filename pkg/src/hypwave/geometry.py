"""Poincare disk geometry: points, Mobius isometries, geodesic flow, frames.

Model: the unit disk with metric ds = 2|dz| / (1 - |z|^2), curvature -1.
Orientation-preserving isometries are Mobius maps z -> (a z + b) / (bbar z + abar)
with |a|^2 - |b|^2 = 1.  Tangent directions are stored as unit vectors in the
conformal chart; since the metric is conformal these are simultaneously the
components of a hyperbolically unit vector in the standard orthonormal frame.

All closed forms here (flow, distance, segment minimization) are exact; the
integration-based cross-checks live in the test suite.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiskPoint",
    "MobiusMap",
    "PhasePoint",
    "FrameChart",
    "hyp_distance",
    "hyp_distance_z",
    "mobius_apply",
    "geodesic_flow",
    "flow_z",
    "exp_frame",
    "embed_hyperboloid",
    "tangent_hyperboloid",
    "segment_closest",
]

_BOUNDARY_MARGIN = 1e-12
_DET_TOL = 1e-10
_UNIT_TOL = 1e-10


@dataclass(frozen=True)
class DiskPoint:
    """Point of the open unit disk."""

    u: float
    v: float

    def __post_init__(self):
        if self.u * self.u + self.v * self.v >= 1.0 - _BOUNDARY_MARGIN:
            raise ValueError(f"point ({self.u}, {self.v}) not inside the disk")

    @property
    def z(self):
        return complex(self.u, self.v)

    @classmethod
    def from_z(cls, z):
        return cls(float(z.real), float(z.imag))

    @classmethod
    def origin(cls):
        return cls(0.0, 0.0)


@dataclass(frozen=True)
class MobiusMap:
    """Disk isometry z -> (a z + b) / (conj(b) z + conj(a)), det = 1."""

    a: complex
    b: complex

    def __post_init__(self):
        if abs(self.det - 1.0) > _DET_TOL:
            raise ValueError(f"determinant {self.det} not 1 within {_DET_TOL}")

    @property
    def det(self):
        return abs(self.a) ** 2 - abs(self.b) ** 2

    @classmethod
    def identity(cls):
        return cls(1.0 + 0.0j, 0.0j)

    def normalized(self):
        s = math.sqrt(self.det)
        return MobiusMap(self.a / s, self.b / s)

    def compose(self, other):
        """self after other (matrix product)."""
        a = self.a * other.a + self.b * np.conj(other.b)
        b = self.a * other.b + self.b * np.conj(other.a)
        return MobiusMap(a, b)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self):
        return MobiusMap(np.conj(self.a), -self.b)

    def apply_z(self, z):
        return (self.a * z + self.b) / (np.conj(self.b) * z + np.conj(self.a))

    def apply(self, p):
        return DiskPoint.from_z(self.apply_z(p.z))

    def deriv_z(self, z):
        """Complex derivative of the map at z."""
        return 1.0 / (np.conj(self.b) * z + np.conj(self.a)) ** 2

    def is_identity(self, tol=1e-9):
        # -I acts trivially on the disk, so compare up to sign
        return (abs(self.a - 1) < tol and abs(self.b) < tol) or (
            abs(self.a + 1) < tol and abs(self.b) < tol
        )


@dataclass(frozen=True)
class PhasePoint:
    """Unit (co)tangent vector: base point plus unit direction components."""

    base: DiskPoint
    dir: tuple

    def __post_init__(self):
        d1, d2 = self.dir
        if abs(math.hypot(d1, d2) - 1.0) > _UNIT_TOL:
            raise ValueError("direction not unit length")

    @property
    def dir_z(self):
        return complex(self.dir[0], self.dir[1])

    @classmethod
    def from_z(cls, z, w):
        w = w / abs(w)
        return cls(DiskPoint.from_z(z), (float(w.real), float(w.imag)))


@dataclass(frozen=True)
class FrameChart:
    """Orthonormal frame (e1, e2) at a base point, conformal components."""

    origin: DiskPoint
    e1: tuple
    e2: tuple

    def __post_init__(self):
        a = np.array(self.e1)
        b = np.array(self.e2)
        if abs(a @ a - 1) > _UNIT_TOL or abs(b @ b - 1) > _UNIT_TOL or abs(a @ b) > _UNIT_TOL:
            raise ValueError("frame not orthonormal")

    @classmethod
    def at(cls, origin, angle=0.0):
        c, s = math.cos(angle), math.sin(angle)
        return cls(origin, (c, s), (-s, c))

    @property
    def e1_z(self):
        return complex(self.e1[0], self.e1[1])

    @property
    def e2_z(self):
        return complex(self.e2[0], self.e2[1])


def hyp_distance_z(z, w):
    """Distance on (arrays of) complex disk coordinates."""
    z = np.asarray(z)
    w = np.asarray(w)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    arg = 1.0 + num / den
    return np.arccosh(np.maximum(arg, 1.0))


def hyp_distance(p, q):
    return float(hyp_distance_z(p.z, q.z))


def mobius_apply(m, p):
    return m.apply(p)


def flow_z(z, u, t):
    """Geodesic flow on raw complex arrays.

    Parameters
    ----------
    z : complex array, base points
    u : complex array, unit conformal directions
    t : float or array, flow time (may be negative)

    Returns (z_t, u_t); unit speed, so hyp_distance(z, z_t) = |t|.
    """
    w0 = np.tanh(np.asarray(t) / 2.0) * u
    den = 1.0 + np.conj(z) * w0
    z_t = (w0 + z) / den
    u_t = u * (np.conj(den) / np.abs(den)) ** 2
    return z_t, u_t


def geodesic_flow(pp, t):
    """Flow a phase point for time t along its geodesic."""
    z_t, u_t = flow_z(pp.base.z, pp.dir_z, float(t))
    return PhasePoint.from_z(complex(z_t), complex(u_t))


def exp_frame(chart, y, scale=1.0):
    """Exponential map in frame coordinates.

    Maps y in R^2 to the point at hyperbolic distance scale*|y| from the
    chart origin in direction y1*e1 + y2*e2.
    """
    y1, y2 = float(y[0]), float(y[1])
    r = math.hypot(y1, y2)
    if r == 0.0:
        return chart.origin
    u = (y1 * chart.e1_z + y2 * chart.e2_z) / r
    z_t, _ = flow_z(chart.origin.z, u, scale * r)
    return DiskPoint.from_z(complex(z_t))


# hyperboloid model helpers, used for exact point-to-segment distances

def embed_hyperboloid(z):
    """Disk point(s) -> hyperboloid sheet X with <X,X> = -1 (signature ++-)."""
    z = np.asarray(z)
    n = 1.0 - np.abs(z) ** 2
    return np.stack([2.0 * z.real / n, 2.0 * z.imag / n, (1.0 + np.abs(z) ** 2) / n], axis=-1)


def tangent_hyperboloid(z, u):
    """Unit spacelike tangent at embed(z) of the geodesic with direction u."""
    z = np.asarray(z)
    u = np.asarray(u)
    n = 1.0 - np.abs(z) ** 2
    # derivative of the embedding along unit-speed motion z' = u * n / 2
    du = u * n / 2.0
    x, y = z.real, z.imag
    dx, dy = du.real, du.imag
    common = 2.0 * (x * dx + y * dy)
    t1 = (2.0 * dx * n + 2.0 * x * common) / n**2
    t2 = (2.0 * dy * n + 2.0 * y * common) / n**2
    t3 = (common * n + (1.0 + x * x + y * y) * common) / n**2
    return np.stack([t1, t2, t3], axis=-1)


def _mdot(x, y):
    return x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] - x[..., 2] * y[..., 2]


def segment_closest(w, a, b, s_lo, s_hi):
    """Closest approach of geodesic segment {flow s in [s_lo, s_hi]} to points w.

    Parameters
    ----------
    w : (..., 3) hyperboloid points to measure from
    a, b : (..., 3) hyperboloid base point and unit tangent of the geodesic
    s_lo, s_hi : segment bounds (broadcastable)

    Returns (dist, s_star): over the segment, cosh d(s) = al*cosh s + be*sinh s
    with al = -<w,a>, be = -<w,b>; the unconstrained minimizer satisfies
    tanh s* = -be/al and the clamped argmin is closed form.
    """
    al = -_mdot(w, a)
    be = -_mdot(w, b)
    # al > |be| always holds for w on the sheet (cosh of a distance), but
    # guard the ratio against rounding at near-ideal configurations
    ratio = np.clip(-be / np.maximum(al, 1.0), -1.0 + 1e-15, 1.0 - 1e-15)
    s_star = np.arctanh(ratio)
    s_star = np.clip(s_star, s_lo, s_hi)
    f = al * np.cosh(s_star) + be * np.sinh(s_star)
    return np.arccosh(np.maximum(f, 1.0)), s_star
