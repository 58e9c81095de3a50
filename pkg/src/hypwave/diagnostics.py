"""Trajectory diagnostics: near self-intersections and excision intervals.

Backward characteristics projected to the surface can nearly revisit
themselves or nearly cross the trajectory of another lift.  Points whose
trajectory self-approaches closer than h^gamma within the time horizon form
the bad set; pairs of lift trajectories sharing bump territory produce the
close-approach intervals excised from the perturbation phase when testing
independence.

All distance computations are closed-form point-to-geodesic-segment
minimizations in the hyperboloid model.  Surface distances are obtained by
splitting the folded trajectory into runs with a constant reducing element
(each run is a genuine geodesic arc) and minimizing over images under a
small two-domain group ball; adjacent runs overlap by one grid step, so the
union of arcs covers the trajectory continuously.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    MobiusMap,
    embed_hyperboloid,
    flow_z,
    hyp_distance_z,
    segment_closest,
    tangent_hyperboloid,
)
from .lagrangian import busemann_grad_dir
from .surface import INJECTIVITY_RADIUS, default_group

__all__ = [
    "ApproachIntervals",
    "BadSetProbe",
    "is_bad_point",
    "close_approach_intervals",
    "approach_intervals_for_point",
    "in_V_neighborhood",
    "point_near_arc",
    "tube_area",
]

log = logging.getLogger(__name__)

_MEDIUM_BALL_RADIUS = 5.5  # covers image pairs of two in-domain points


@dataclass(frozen=True)
class ApproachIntervals:
    """Sorted disjoint parameter intervals flagged for excision."""

    intervals: tuple
    threshold: float
    grid_step: float

    def __post_init__(self):
        prev = -math.inf
        for lo, hi in self.intervals:
            if hi < lo:
                raise ValueError(f"reversed interval ({lo}, {hi})")
            if lo < prev:
                raise ValueError("intervals must be sorted and disjoint")
            prev = hi

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def as_list(self):
        return [tuple(iv) for iv in self.intervals]

    def total_length(self):
        return float(sum(hi - lo for lo, hi in self.intervals))

    def to_json(self):
        return {
            "intervals": self.as_list(),
            "threshold": self.threshold,
            "grid_step": self.grid_step,
            "total_length": self.total_length(),
        }


@dataclass(frozen=True)
class BadSetProbe:
    """Self-approach verdict for one surface point's backward trajectory."""

    x: complex
    bad: bool
    min_distance: float
    threshold: float
    witness: tuple  # (MobiusMap, t1, t2) at the closest approach
    horizon: float
    separation_floor: float

    def to_json(self):
        g, t1, t2 = self.witness
        return {
            "x": [self.x.real, self.x.imag],
            "bad": self.bad,
            "min_distance": self.min_distance,
            "threshold": self.threshold,
            "witness_t1": t1,
            "witness_t2": t2,
            "witness_displacement": float(
                np.arccosh(abs(g.a) ** 2 + abs(g.b) ** 2)
            ),
            "horizon": self.horizon,
            "separation_floor": self.separation_floor,
        }


class _FoldedRay:
    """Backward ray folded to the fundamental domain, split into arcs.

    Each arc stores the inverse reducing element, so the distance from any
    disk point P to the folded arc is d(g_inv_applied_to_images_of_P, ray)
    evaluated on the original parametrization.
    """

    def __init__(self, group, z0, u, length, step):
        self.group = group
        self.z0 = complex(z0)
        self.u = complex(u)
        self.length = float(length)
        n = max(2, int(math.ceil(length / step)))
        self.s = np.linspace(0.0, length, n + 1)
        zz, _ = flow_z(np.full(n + 1, self.z0), np.full(n + 1, self.u), -self.s)
        self.z_red, ra, rb = group.reduce_batch(zz)
        self.base = embed_hyperboloid(np.asarray(self.z0))
        self.tangent = tangent_hyperboloid(np.asarray(self.z0), np.asarray(-self.u))
        pad = self.s[1] - self.s[0]
        runs = []
        i = 0
        while i <= n:
            j = i
            while (
                j + 1 <= n
                and abs(ra[j + 1] - ra[i]) < 1e-9
                and abs(rb[j + 1] - rb[i]) < 1e-9
            ):
                j += 1
            lo = max(0.0, self.s[i] - pad)
            hi = min(length, self.s[j] + pad)
            red = MobiusMap(complex(ra[i]), complex(rb[i]))
            runs.append((lo, hi, red))
            i = j + 1
        self.runs = runs

    def point_at(self, s):
        z, _ = flow_z(np.asarray(self.z0), np.asarray(self.u), -np.asarray(s))
        return z

    def min_distance_to(self, p_images, window=None):
        """Min surface distance from folded point images to the folded ray.

        p_images: disk images of the probe point under the medium group
        ball (its orbit near the domain).  window restricts the ray
        parameter.  Returns (dist, s_star, run_index, image_index).
        """
        best = (math.inf, 0.0, 0, 0)
        w_lo = 0.0 if window is None else window[0]
        w_hi = self.length if window is None else window[1]
        if w_hi <= w_lo:
            return best
        W_all = None
        for k, (lo, hi, red) in enumerate(self.runs):
            a, b = max(lo, w_lo), min(hi, w_hi)
            if b <= a:
                continue
            inv = red.inverse()
            q = inv.apply_z(p_images)
            W = embed_hyperboloid(q)
            d, s_star = segment_closest(W, self.base, self.tangent, a, b)
            m = int(np.argmin(d))
            if d[m] < best[0]:
                best = (float(d[m]), float(s_star[m]), k, m)
        return best


def _medium_images(group, z):
    ball = group.group_ball(_MEDIUM_BALL_RADIUS)
    return (ball.ga * z + ball.gb) / (np.conj(ball.gb) * z + np.conj(ball.ga))


def is_bad_point(
    x,
    h,
    boundary_point=1.0 + 0.0j,
    gamma=0.3,
    horizon=2.5,
    separation_floor=None,
    group=None,
):
    """Does the backward trajectory of x nearly revisit itself?

    The trajectory over [0, horizon] is scanned for pairs (t1, t2) with
    t2 - t1 >= separation_floor (default: the injectivity radius) whose
    surface distance falls below h^gamma.  Coarse grid step h^gamma / 4,
    then one local refinement at an eighth of that around the best pair.
    """
    group = group or default_group()
    if separation_floor is None:
        separation_floor = INJECTIVITY_RADIUS
    if horizon <= separation_floor + 1e-9:
        raise ValueError(
            "horizon must exceed the separation floor to admit revisits"
        )
    threshold = h**gamma
    step = threshold / 4.0
    u = complex(busemann_grad_dir(boundary_point, np.asarray(complex(x))))
    ray = _FoldedRay(group, x, u, horizon, step)
    ball = group.group_ball(_MEDIUM_BALL_RADIUS)
    maps = ball.maps()

    def scan(t2_values):
        best = (math.inf, 0.0, 0.0, None)
        z2, _ = flow_z(
            np.full(len(t2_values), complex(x)), np.full(len(t2_values), u), -np.asarray(t2_values)
        )
        z2r, ra2, rb2 = group.reduce_batch(z2)
        for i, t2 in enumerate(t2_values):
            if t2 < separation_floor:
                continue
            imgs = _medium_images(group, complex(z2r[i]))
            d, s1, k, m = ray.min_distance_to(imgs, window=(0.0, t2 - separation_floor))
            if d < best[0]:
                red2 = MobiusMap(complex(ra2[i]), complex(rb2[i]))
                witness = ray.runs[k][2].inverse() @ maps[m] @ red2
                best = (d, s1, float(t2), witness)
        return best

    coarse_t2 = ray.s[ray.s >= separation_floor]
    d, t1, t2, wit = scan(coarse_t2)
    fine = np.arange(max(separation_floor, t2 - step), min(horizon, t2 + step), step / 8.0)
    if len(fine):
        d2, t1b, t2b, wit2 = scan(fine)
        if d2 < d:
            d, t1, t2, wit = d2, t1b, t2b, wit2
    return BadSetProbe(
        x=complex(x),
        bad=bool(d <= threshold),
        min_distance=float(d),
        threshold=float(threshold),
        witness=(wit, t1, t2),
        horizon=float(horizon),
        separation_floor=float(separation_floor),
    )


def _merge_intervals(pairs):
    out = []
    for lo, hi in sorted(pairs):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def close_approach_intervals(job, z_lift_a, z_lift_b, threshold=None, eps=None):
    """Parameter intervals on ray a that come close to ray b on the surface.

    Both rays are the backward characteristics of lifts over [0, t].  The
    default threshold h^(beta - eps) with eps = 0.05 beta; pass a larger
    threshold (e.g. 2.1 * support_radius) to guarantee that the excised
    integral touches no bump shared with ray b, since h^(-eps) barely
    exceeds 1 at the h values this tool runs at.  Grid step h^beta / 8
    with bisection-refined interval endpoints.
    """
    h, beta = job.h, job.beta
    if eps is None:
        eps = 0.05 * beta
    if threshold is None:
        threshold = h ** (beta - eps)
    step = h**beta / 8.0
    group = job.group
    p = job.state.boundary_point
    ua = complex(busemann_grad_dir(p, np.asarray(complex(z_lift_a))))
    ray_b = _FoldedRay(
        group, z_lift_b, complex(busemann_grad_dir(p, np.asarray(complex(z_lift_b)))),
        job.t, step,
    )
    n = max(2, int(math.ceil(job.t / step)))
    s = np.linspace(0.0, job.t, n + 1)
    za, _ = flow_z(np.full(n + 1, complex(z_lift_a)), np.full(n + 1, ua), -s)
    zar, _, _ = group.reduce_batch(za)

    def dist_at(si, zi_red):
        imgs = _medium_images(group, complex(zi_red))
        return ray_b.min_distance_to(imgs)[0]

    dvals = np.array([dist_at(s[i], zar[i]) for i in range(n + 1)])
    inside = dvals <= threshold

    def dist_param(sv):
        zz, _ = flow_z(np.asarray(complex(z_lift_a)), np.asarray(ua), -np.asarray(sv))
        zr, _, _ = group.reduce_batch(np.atleast_1d(zz))
        return dist_at(sv, zr[0])

    def refine_edge(s_out, s_in):
        for _ in range(5):
            mid = 0.5 * (s_out + s_in)
            if dist_param(mid) <= threshold:
                s_in = mid
            else:
                s_out = mid
        return 0.5 * (s_out + s_in)

    raw = []
    i = 0
    while i <= n:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 <= n and inside[j + 1]:
            j += 1
        lo = s[i] if i == 0 else refine_edge(s[i - 1], s[i])
        hi = s[j] if j == n else refine_edge(s[j + 1], s[j])
        raw.append((max(0.0, lo - step / 4.0), min(job.t, hi + step / 4.0)))
        i = j + 1
    return ApproachIntervals(
        intervals=tuple(_merge_intervals(raw)), threshold=float(threshold),
        grid_step=float(step),
    )


def approach_intervals_for_point(job, x, threshold=None, bundle=None, eps=None):
    """Per-lift union of close approaches against every other lift at x.

    Lifts whose excised total exceeds h^(beta - 5 eps) are logged as
    counterexamples to the expected interval-length bound, never clipped.
    """
    from .wkb import prepare_point

    if bundle is None:
        bundle = prepare_point(job, x)
    if eps is None:
        eps = 0.05 * job.beta
    bound = job.h ** (job.beta - 5.0 * eps)
    zl = bundle.lifts.z_lift
    out = []
    step = job.h**job.beta / 8.0
    for i in range(len(zl)):
        pairs = []
        thr = threshold
        for j in range(len(zl)):
            if j == i:
                continue
            iv = close_approach_intervals(
                job, complex(zl[i]), complex(zl[j]), threshold=threshold, eps=eps
            )
            thr = iv.threshold
            pairs.extend(iv.as_list())
        merged = ApproachIntervals(
            intervals=tuple(_merge_intervals(pairs)),
            threshold=float(thr) if thr is not None else 0.0,
            grid_step=step,
        )
        if merged.total_length() > bound:
            log.warning(
                "excised length %.4f exceeds bound %.4f at lift %d of %s",
                merged.total_length(), bound, i, x,
            )
        out.append(merged)
    return bundle, out


def tube_area(length, radius):
    """Area of the radius-neighborhood of a geodesic arc (no overlap)."""
    return 2.0 * float(length) * math.sinh(float(radius))


def in_V_neighborhood(job, x, y, eps=None):
    """Is y within h^(beta - eps) of a lift trajectory of x over [-t, t]?

    Scans the trajectories of every amplitude-bearing lift of x through
    forward and backward time up to the propagation time.  A point with no
    amplitude-bearing lifts has no trajectories, so the answer is False.
    """
    from .wkb import prepare_point

    if eps is None:
        eps = 0.05 * job.beta
    radius = job.h ** (job.beta - eps)
    group = job.group
    p = job.state.boundary_point
    bundle = prepare_point(job, x)
    sel = np.where(bundle.b0 > 1e-12)[0]
    if not len(sel):
        return False
    yr, _ = group.reduce(_as_point(y))
    imgs = _medium_images(group, yr.z)
    step = job.h**job.beta / 8.0
    for i in sel:
        zl = complex(bundle.lifts.z_lift[i])
        u = complex(busemann_grad_dir(p, np.asarray(zl)))
        if job.t < 1e-12:
            zr, _, _ = group.reduce_batch(np.atleast_1d(zl))
            if np.min(hyp_distance_z(np.asarray(zr[0]), imgs)) <= radius:
                return True
            continue
        # start from the forward endpoint so one backward ray covers [-t, t]
        z1, u1 = flow_z(np.asarray(zl), np.asarray(u), np.asarray(job.t))
        ray = _FoldedRay(group, complex(z1), complex(u1), 2.0 * job.t, step)
        if ray.min_distance_to(imgs)[0] <= radius:
            return True
    return False


def point_near_arc(x, seg_a, seg_b, radius, group=None):
    """Is x within the given surface distance of the geodesic arc a -> b?"""
    group = group or default_group()
    a = complex(seg_a)
    b = complex(seg_b)
    L = float(hyp_distance_z(np.asarray(a), np.asarray(b)))
    if L < 1e-12:
        raise ValueError("degenerate arc")
    bprime = (b - a) / (1.0 - np.conj(a) * b)
    u = bprime / abs(bprime)
    base = embed_hyperboloid(np.asarray(a))
    tang = tangent_hyperboloid(np.asarray(a), np.asarray(u))
    xr, _ = group.reduce(_as_point(x))
    imgs = _medium_images(group, xr.z)
    W = embed_hyperboloid(imgs)
    d, _ = segment_closest(W, base, tang, 0.0, L)
    return bool(np.min(d) <= radius)


def _as_point(x):
    from .geometry import DiskPoint

    return x if isinstance(x, DiskPoint) else DiskPoint.from_z(complex(x))
