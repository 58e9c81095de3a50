"""Isotropic monochromatic Gaussian reference field in the plane.

The limiting covariance kernel is

    K(s) = intensity * (1/2pi) integral_0^2pi cos(s cos theta) dtheta,

evaluated by the uniform angular average (spectrally accurate for the node
counts used here).  sample_berry synthesizes approximate realizations as a
sum of n_waves unit plane waves with equispaced directions and independent
complex Gaussian weights; its covariance matches K up to aliasing terms
that are negligible for the separations of interest.
"""

import math
from dataclasses import dataclass

import numpy as np

from .field import LocalFieldSample
from .geometry import DiskPoint, FrameChart
from .rng import STREAM_BERRY, Stream

__all__ = ["BerryKernel", "sample_berry"]


@dataclass(frozen=True)
class BerryKernel:
    """Covariance kernel of the unit-intensity monochromatic field."""

    intensity: float = 1.0
    n_nodes: int = 0  # 0: choose from the separation magnitude

    def __post_init__(self):
        if self.intensity <= 0:
            raise ValueError("intensity must be positive")

    def _nodes_for(self, rmax):
        if self.n_nodes > 0:
            return self.n_nodes
        return max(256, 2 * int(math.ceil(rmax)) + 64)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        n = self._nodes_for(float(np.max(np.abs(r))) if r.size else 1.0)
        theta = 2.0 * np.pi * np.arange(n) / n
        vals = np.mean(np.cos(np.abs(r)[..., None] * np.cos(theta)), axis=-1)
        return self.intensity * vals

    def first_zero(self, tol=1e-12):
        """Smallest positive root, found by bisection."""
        lo, hi = 2.0, 3.0
        flo = float(self(lo))
        if not flo > 0 or not float(self(hi)) < 0:
            raise RuntimeError("bisection bracket lost")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if float(self(mid)) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def helmholtz_residual(self, r, dr=1e-4):
        """Radial Helmholtz operator applied to the kernel by differences.

        K satisfies K'' + K'/r + K = 0; the residual quantifies quadrature
        plus finite-difference error.
        """
        r = np.asarray(r, dtype=float)
        if np.any(r <= dr):
            raise ValueError("residual check needs r > dr")
        kp = self(r + dr)
        km = self(r - dr)
        k0 = self(r)
        d2 = (kp - 2.0 * k0 + km) / dr**2
        d1 = (kp - km) / (2.0 * dr)
        return d2 + d1 / r + k0


def sample_berry(offsets, n_draws, n_waves=64, seed=0, intensity=1.0):
    """Realizations of the reference field at the given plane offsets.

    Returns the same sample container as the propagated field so both sides
    serialize identically.
    """
    if n_waves < 64:
        raise ValueError("n_waves below 64 leaves visible direction aliasing")
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    dirs = np.exp(2j * np.pi * np.arange(n_waves) / n_waves)
    stream = Stream(seed, STREAM_BERRY)
    c = stream.complex_normal(n_draws * n_waves).reshape(n_draws, n_waves)
    c = c * math.sqrt(intensity / n_waves)
    ky = offsets[:, 0][:, None] * dirs.real[None, :] + offsets[:, 1][:, None] * dirs.imag[None, :]
    values = c @ np.exp(1j * ky.T)  # (n_draws, n_offsets)
    x = DiskPoint.origin()
    meta = {
        "kind": "berry",
        "intensity": intensity,
        "n_waves": int(n_waves),
        "seed": int(seed),
        "mode": "berry",
        "x": [0.0, 0.0],
        "frame_e1": [1.0, 0.0],
        "n_draws": int(n_draws),
        "n_offsets": int(offsets.shape[0]),
        "columns": ["x_u", "x_v", "seed", "y1", "y2", "re", "im"],
    }
    return LocalFieldSample(
        x=x,
        chart=FrameChart.at(x, 0.0),
        offsets=offsets,
        values=values,
        draw_seeds=np.arange(n_draws, dtype=np.int64),
        mode="berry",
        meta=meta,
    )
