"""Monochromatic Lagrangian states and Busemann phase geometry.

The initial data is a WKB state a0(z) exp(i B_p(z) / h) whose phase is the
Busemann function of an ideal boundary point p and whose amplitude is a
radial bump strictly inside one copy of the fundamental domain.  The
Lagrangian leaf is the graph of dB_p, a union of unstable horocycles; the
geodesic flow acts on it by translation along the flow lines of grad B_p.

Conventions: B_p(z) = log(|z - p|^2 / (1 - |z|^2)), so B_p(0) = 0 and B_p
decreases toward p; the forward characteristic moves away from p with
B(flow t) = B + t exactly.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import DiskPoint, MobiusMap, flow_z, hyp_distance_z
from .profiles import BumpProfile
from .surface import INJECTIVITY_RADIUS, LiftSet

__all__ = [
    "LagrangianState",
    "busemann",
    "busemann_grad_dir",
    "amplitude_a0",
    "enumerate_lifts",
]


def busemann(p, z):
    """Busemann function of boundary point p (|p| = 1) at z, based at 0."""
    z = np.asarray(z)
    return np.log(np.abs(z - p) ** 2 / (1.0 - np.abs(z) ** 2))


def busemann_grad_dir(p, z):
    """Unit conformal direction of grad B_p (points away from p)."""
    z = np.asarray(z)
    g = 2.0 * (1.0 / np.conj(z - p) + z / (1.0 - np.abs(z) ** 2))
    return g / np.abs(g)


@dataclass(frozen=True)
class LagrangianState:
    """Busemann-phase WKB state with a compactly supported radial amplitude."""

    boundary_point: complex = 1.0 + 0.0j
    amplitude_center: DiskPoint = DiskPoint(0.0, 0.0)
    amplitude_radius: float = 0.25 * INJECTIVITY_RADIUS
    amplitude_norm: float = 1.0
    amplitude_profile: BumpProfile = BumpProfile("poly")

    def __post_init__(self):
        if abs(abs(self.boundary_point) - 1.0) > 1e-12:
            raise ValueError("boundary point must lie on the unit circle")
        if not 0.0 < self.amplitude_radius < INJECTIVITY_RADIUS:
            raise ValueError(
                "amplitude support must fit strictly inside one domain copy "
                f"(radius < {INJECTIVITY_RADIUS:.6f})"
            )
        if self.amplitude_norm <= 0.0:
            raise ValueError("amplitude norm must be positive")

    @cached_property
    def amplitude_scale(self):
        """Scale making the L2 norm over the disk equal amplitude_norm."""
        r = np.linspace(0.0, self.amplitude_radius, 4097)
        chi = self.amplitude_profile(r / self.amplitude_radius)
        integrand = chi**2 * np.sinh(r)
        w = np.ones_like(r)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        step = r[1] - r[0]
        norm_sq = 2.0 * math.pi * step / 3.0 * float(w @ integrand)
        return self.amplitude_norm / math.sqrt(norm_sq)

    def support_distance_to_origin(self):
        return hyp_distance_z(self.amplitude_center.z, 0.0) + self.amplitude_radius


def amplitude_a0(state, z):
    """Initial amplitude at disk point(s) z."""
    d = hyp_distance_z(np.asarray(z), state.amplitude_center.z)
    return state.amplitude_scale * state.amplitude_profile(d / state.amplitude_radius)


def backward_characteristic(state, z, t):
    """Flow (z, grad B) backward for time t (toward the boundary point)."""
    u = busemann_grad_dir(state.boundary_point, z)
    return flow_z(z, u, -t)


def enumerate_lifts(group, x, t, state, margin=0.25):
    """Lifts of x whose backward characteristic lands in the amplitude support.

    Returns a LiftSet ordered by word length then lexicographic word.  The
    candidate pool is the group ball of radius t + support reach + |x|, which
    contains every lift that can contribute by the triangle inequality.
    """
    if t < 0:
        raise ValueError("time horizon must be nonnegative")
    xz = x.z if isinstance(x, DiskPoint) else complex(x)
    reach = state.support_distance_to_origin()
    radius = t + reach + float(hyp_distance_z(xz, 0.0)) + margin
    # quantize so different sample points share one cached ball
    radius = 0.5 * math.ceil(radius / 0.5)
    ball = group.group_ball(radius)
    lifts = (ball.ga * xz + ball.gb) / (np.conj(ball.gb) * xz + np.conj(ball.ga))
    # quick radial cut before the exact backward-flow test
    rough = hyp_distance_z(lifts, 0.0) <= t + reach + 1e-9
    idx = np.nonzero(rough)[0]
    back, _ = backward_characteristic(state, lifts[idx], t)
    hit = hyp_distance_z(back, state.amplitude_center.z) <= state.amplitude_radius
    idx = idx[hit]
    order = sorted(range(len(idx)), key=lambda i: (len(ball.words[idx[i]]), ball.words[idx[i]]))
    idx = idx[np.array(order, dtype=int)] if len(idx) else idx
    elements = tuple(
        (MobiusMap(complex(ball.ga[i]), complex(ball.gb[i])), DiskPoint.from_z(complex(lifts[i])))
        for i in idx
    )
    return LiftSet(
        elements=elements,
        time_horizon=float(t),
        words=tuple(ball.words[i] for i in idx),
        ga=ball.ga[idx],
        gb=ball.gb[idx],
        z_lift=lifts[idx],
    )
