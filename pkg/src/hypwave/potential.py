"""Random bump potentials on the quotient surface.

The potential is q_omega = sum_j omega_j chi(d(., x_j) / h^beta) where the
centers {x_j} form a maximal h^beta-separated net of the fundamental domain
(distances on the quotient, so bumps wrap across the octagon sides through
their group images) and the coupling amplitudes omega_j are iid uniform on
[-sqrt(3), sqrt(3)] (unit variance).  In the symbol case centers live in the
unit tangent bundle and the distance is a Sasaki-type product metric.

Centers come from a greedy pass over a deterministic low-discrepancy stream,
so the net depends only on (h, beta, case, profile); the seed only enters
the amplitudes.  Nets are cached per parameter tuple.
"""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DiskPoint, PhasePoint, flow_z, hyp_distance_z
from .profiles import BumpProfile
from .rng import STREAM_OMEGA, Stream
from .surface import default_group

log = logging.getLogger(__name__)

__all__ = [
    "RandomPotential",
    "AdmissibilityReport",
    "build_net",
    "eval_q",
    "ensemble_omegas",
    "verify_hypotheses",
]

C_OVERLAP = 10  # declared bound on simultaneously active bumps
_CIRCUMRADIUS = 2.4485224083551082  # distance from origin to an octagon vertex
_IMAGE_BALL = 2.0 * _CIRCUMRADIUS + 0.4


def halton(n, base, start=1):
    """First n Halton points in the given base, skipping `start` burn-in."""
    out = np.empty(n)
    for i in range(n):
        k = start + i
        f = 1.0
        r = 0.0
        while k > 0:
            f /= base
            r += f * (k % base)
            k //= base
        out[i] = r
    return out


def _sample_domain_stream(group, n, with_angle=False):
    """Deterministic area-uniform points of the fundamental domain."""
    rmax = _CIRCUMRADIUS + 1e-6
    u = halton(n, 2)
    v = halton(n, 3)
    r = 2.0 * np.arcsinh(np.sqrt(u) * math.sinh(rmax / 2.0))
    z = np.tanh(r / 2.0) * np.exp(2j * math.pi * v)
    keep = group.in_domain(z)
    z = z[keep]
    if not with_angle:
        return z
    w = halton(n, 5)[keep]
    return z, np.exp(2j * math.pi * w)


def transport_angle_factor(z_from, z_to):
    """Unit complex factors rotating directions under parallel transport.

    Along the geodesic from z_from to z_to; multiply a conformal direction
    at z_from by the factor to get its transport at z_to.  Derivation: the
    map M(w) = (w - z_from)/(1 - conj(z_from) w) sends the geodesic to a
    diameter, along which conformal directions are constant; the rotation
    is the phase of M'(z_from) / M'(z_to), which collapses to the below.
    """
    d = 1.0 - np.conj(np.asarray(z_from)) * np.asarray(z_to)
    return (d / np.abs(d)) ** 2


@dataclass(frozen=True, eq=False)
class RandomPotential:
    """Frozen net of bump centers with coupling amplitudes."""

    h: float
    beta: float
    case: str
    seed: int
    centers: tuple
    omegas: np.ndarray
    profile: BumpProfile
    img_z: np.ndarray = field(repr=False)
    img_idx: np.ndarray = field(repr=False)
    img_dir: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta {self.beta} outside (0, 1/2): net not admissible")
        if self.case not in ("base", "symbol"):
            raise ValueError(f"unknown case {self.case!r}")
        if len(self.omegas) != len(self.centers):
            raise ValueError("one amplitude per center required")
        if len(self.centers) and float(np.var(self.omegas)) == 0.0 and len(self.omegas) > 1:
            log.warning("amplitude sample variance is zero")

    @property
    def support_radius(self):
        return self.h**self.beta

    @property
    def n_centers(self):
        return len(self.centers)

    def center_array(self):
        if self.case == "base":
            return np.array([c.z for c in self.centers])
        return np.array([c.base.z for c in self.centers])

    def to_json(self):
        if self.case == "base":
            centers = [[c.u, c.v] for c in self.centers]
        else:
            centers = [[c.base.u, c.base.v, c.dir[0], c.dir[1]] for c in self.centers]
        return json.dumps(
            {
                "h": self.h,
                "beta": self.beta,
                "case": self.case,
                "seed": self.seed,
                "centers": centers,
                "omegas": [float(w) for w in self.omegas],
                "profile": self.profile.describe(),
            }
        )

    @classmethod
    def from_json(cls, text, group=None):
        doc = json.loads(text)
        group = group or default_group()
        if doc["case"] == "base":
            centers = tuple(DiskPoint(u, v) for u, v in doc["centers"])
        else:
            centers = tuple(
                PhasePoint(DiskPoint(u, v), (d1, d2)) for u, v, d1, d2 in doc["centers"]
            )
        pot = _finalize(
            group,
            float(doc["h"]),
            float(doc["beta"]),
            doc["case"],
            int(doc["seed"]),
            centers,
            np.array(doc["omegas"]),
            BumpProfile.parse(doc["profile"]),
        )
        return pot


_NET_CACHE = {}


def _center_images(group, centers, case, r_supp):
    """Group images of the centers that can touch the closed domain."""
    ball = group.group_ball(_IMAGE_BALL)
    if case == "base":
        cz = np.array([c.z for c in centers])
        cdir = np.ones(len(centers), dtype=complex)
    else:
        cz = np.array([c.base.z for c in centers])
        cdir = np.array([c.dir_z for c in centers])
    za = ball.ga[:, None] * cz[None, :] + ball.gb[:, None]
    zb = np.conj(ball.gb)[:, None] * cz[None, :] + np.conj(ball.ga)[:, None]
    img = za / zb
    keep = hyp_distance_z(img, 0.0) <= _CIRCUMRADIUS + r_supp + 0.05
    gi, ci = np.nonzero(keep)
    # direction transforms by the derivative phase of the group element
    dphase = 1.0 / zb[gi, ci] ** 2
    dphase /= np.abs(dphase)
    return img[gi, ci], ci.astype(np.int64), cdir[ci] * dphase


def _finalize(group, h, beta, case, seed, centers, omegas, profile):
    img_z, img_idx, img_dir = _center_images(group, centers, case, h**beta)
    return RandomPotential(
        h=h,
        beta=beta,
        case=case,
        seed=seed,
        centers=centers,
        omegas=omegas,
        profile=profile,
        img_z=img_z,
        img_idx=img_idx,
        img_dir=img_dir,
    )


def _sasaki_distance(z1, u1, z2, u2):
    """Product distance on the unit tangent bundle."""
    base = hyp_distance_z(z1, z2)
    fac = transport_angle_factor(z2, z1)
    ang = np.abs(np.angle(u1 * np.conj(u2 * fac)))
    return np.sqrt(base**2 + ang**2)


def build_net(h, beta, seed, group=None, case="base", profile=None, stream_budget=60_000):
    """Greedy maximal h^beta-separated net with amplitudes.

    Deterministic centers (low-discrepancy stream, greedy acceptance in
    stream order); amplitudes iid uniform [-sqrt3, sqrt3] from the seed.
    """
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta {beta} outside (0, 1/2): net not admissible")
    group = group or default_group()
    profile = profile or BumpProfile("poly")
    r = float(h) ** beta
    cache_key = (round(float(h), 14), round(beta, 14), case, profile.describe())
    if cache_key in _NET_CACHE:
        centers = _NET_CACHE[cache_key]
    else:
        centers = _greedy_net(group, r, case, stream_budget)
        _NET_CACHE[cache_key] = centers
    omegas = Stream(seed, STREAM_OMEGA).uniform(len(centers), -math.sqrt(3.0), math.sqrt(3.0))
    return _finalize(group, float(h), float(beta), case, int(seed), centers, omegas, profile)


def _greedy_net(group, r, case, stream_budget):
    ball = group.group_ball(_IMAGE_BALL)
    if case == "base":
        cand = _sample_domain_stream(group, stream_budget)
        cand_dir = None
    else:
        cand, cand_dir = _sample_domain_stream(group, stream_budget, with_angle=True)

    accepted = []
    acc_dir = []
    img_z = np.zeros(0, dtype=complex)
    img_dir = np.zeros(0, dtype=complex)

    def images_of(z, u):
        za = ball.ga * z + ball.gb
        zb = np.conj(ball.gb) * z + np.conj(ball.ga)
        img = za / zb
        keep = hyp_distance_z(img, 0.0) <= _CIRCUMRADIUS + r + 0.05
        if u is None:
            return img[keep], None
        dp = 1.0 / zb[keep] ** 2
        return img[keep], u * dp / np.abs(dp)

    chunk = 2048
    for lo in range(0, len(cand), chunk):
        zz = cand[lo : lo + chunk]
        uu = cand_dir[lo : lo + chunk] if cand_dir is not None else None
        if img_z.size:
            if case == "base":
                dmin = hyp_distance_z(zz[:, None], img_z[None, :]).min(axis=1)
            else:
                dmin = _sasaki_distance(
                    zz[:, None], uu[:, None], img_z[None, :], img_dir[None, :]
                ).min(axis=1)
            survivors = np.nonzero(dmin >= r)[0]
        else:
            survivors = np.arange(len(zz))
        for i in survivors:
            z = zz[i]
            u = uu[i] if uu is not None else None
            if img_z.size:
                if case == "base":
                    d = hyp_distance_z(z, img_z).min()
                else:
                    d = _sasaki_distance(z, u, img_z, img_dir).min()
                if d < r:
                    continue
            accepted.append(z)
            new_img, new_dir = images_of(z, u)
            img_z = np.concatenate([img_z, new_img])
            if case == "symbol":
                acc_dir.append(u)
                img_dir = np.concatenate([img_dir, new_dir])

    if case == "base":
        return tuple(DiskPoint.from_z(complex(z)) for z in accepted)
    return tuple(
        PhasePoint(DiskPoint.from_z(complex(z)), (float(u.real), float(u.imag)))
        for z, u in zip(accepted, acc_dir)
    )


def eval_q(pot, points, omegas=None, directions=None, group=None, reduce_points=True):
    """Evaluate the potential at disk points (any lift; reduced internally)."""
    if omegas is None:
        omegas = pot.omegas
    z = np.asarray(points, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if reduce_points:
        group = group or default_group()
        zr, ga, gb = group.reduce_batch(z.ravel())
        zr = zr.reshape(z.shape)
    else:
        zr = z
        ga = gb = None
    if pot.case == "symbol":
        if directions is None:
            raise ValueError("symbol-case evaluation needs directions")
        u = np.atleast_1d(np.asarray(directions, dtype=complex))
        if reduce_points and ga is not None:
            dp = 1.0 / (np.conj(gb) * z.ravel() + np.conj(ga)) ** 2
            u = (u.ravel() * dp / np.abs(dp)).reshape(z.shape)
        ds = _sasaki_distance(zr[..., None], u[..., None], pot.img_z, pot.img_dir)
        chi = pot.profile(ds / pot.support_radius)
    else:
        d = hyp_distance_z(zr[..., None], pot.img_z)
        chi = pot.profile(d / pot.support_radius)
    vals = np.einsum("...m,m->...", chi, omegas[pot.img_idx])
    return float(vals[0]) if scalar else vals


def ensemble_omegas(pot, n_draws):
    """Amplitude matrix, one row per draw; row k uses seed XOR k."""
    out = np.empty((n_draws, pot.n_centers))
    for k in range(n_draws):
        out[k] = Stream(pot.seed ^ k, STREAM_OMEGA).uniform(
            pot.n_centers, -math.sqrt(3.0), math.sqrt(3.0)
        )
    return out


@dataclass(frozen=True)
class AdmissibilityReport:
    """Measured constants and pass flags for the standing assumptions."""

    overlap_max: int
    ck_ratios: tuple
    line_integral_min: float
    bumps_ok: bool
    lower_bound_ok: bool
    exponents_ok: bool
    profile: str = "poly"

    def all_ok(self):
        return self.bumps_ok and self.lower_bound_ok and self.exponents_ok

    def to_json(self):
        return json.dumps(
            {
                "overlap_max": self.overlap_max,
                "ck_ratios": list(self.ck_ratios),
                "line_integral_min": self.line_integral_min,
                "bumps_ok": self.bumps_ok,
                "lower_bound_ok": self.lower_bound_ok,
                "exponents_ok": self.exponents_ok,
                "profile": self.profile,
            }
        )


def _ck_ratios(pot, group, n_probe=40):
    """Directional-derivative sup ratios |D^k q| h^{k beta} / sup|q|, k=1..3."""
    r = pot.support_radius
    ones = np.ones(pot.n_centers)
    cz = pot.center_array()[:n_probe]
    directions = np.exp(1j * np.linspace(0.0, 2 * math.pi, 7)[:-1])
    step = r / 24.0
    # stencils centered on the rolloff region of each bump, where the
    # derivatives peak (at the center itself the odd ones vanish)
    shifts = np.array([0.0, 0.45 * r, 0.8 * r])
    sup = [0.0, 0.0, 0.0, 0.0]
    for ph in directions:
        for shift in shifts:
            s_pos = shift + np.arange(-3, 4) * step
            pts = cz[:, None] + (s_pos * (1.0 - np.abs(cz[:, None]) ** 2) / 2.0) * ph
            vals = eval_q(pot, pts, omegas=ones, group=group)
            # hyperbolic arc length between consecutive probe points
            hstep = hyp_distance_z(pts[:, 1:], pts[:, :-1]).mean(axis=1)
            d1 = (vals[:, 4] - vals[:, 2]) / (2 * hstep)
            d2 = (vals[:, 4] - 2 * vals[:, 3] + vals[:, 2]) / hstep**2
            d3 = (vals[:, 5] - 2 * vals[:, 4] + 2 * vals[:, 2] - vals[:, 1]) / (2 * hstep**3)
            sup[0] = max(sup[0], float(np.abs(vals).max()))
            sup[1] = max(sup[1], float(np.abs(d1).max()))
            sup[2] = max(sup[2], float(np.abs(d2).max()))
            sup[3] = max(sup[3], float(np.abs(d3).max()))
    base = max(sup[0], 1e-300)
    return tuple(sup[k] * r**k / base for k in (1, 2, 3))


def verify_hypotheses(pot, delta, eps0=0.1, T=2.0, n_geodesics=64, group=None):
    """Audit the standing assumptions; returns a report, never raises on failure.

    Checks (i) bounded overlap and h-independent C^k ratios of the bump
    family, (ii) the uniform lower bound on line integrals of the unsigned
    bump sum over length-T geodesics, (iii) the exponent inequalities tying
    the noise size delta to h, beta, eps0.
    """
    group = group or default_group()
    h, beta = pot.h, pot.beta
    r = pot.support_radius

    # overlap: count active bumps over a probe grid
    probes = _sample_domain_stream(group, 4000)
    d = hyp_distance_z(probes[:, None], pot.img_z)
    overlap = int((d < r).sum(axis=1).max()) if pot.n_centers else 0

    ck = _ck_ratios(pot, group) if pot.n_centers else (0.0, 0.0, 0.0)

    # line integrals of q with all amplitudes set to one
    ones = np.ones(pot.n_centers)
    zs = _sample_domain_stream(group, 6 * n_geodesics)[:n_geodesics]
    angles = halton(len(zs), 7)
    n_nodes = max(96, int(8 * T / r))
    if n_nodes % 2:
        n_nodes += 1
    ss = np.linspace(0.0, T, n_nodes + 1)
    w = np.ones(n_nodes + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= T / (3.0 * n_nodes)
    lim = np.inf
    for z0, ang in zip(zs, angles):
        u0 = np.exp(2j * math.pi * ang)
        zz, uu = flow_z(np.full(ss.shape, z0), np.full(ss.shape, u0), ss)
        if pot.case == "symbol":
            vals = eval_q(pot, zz, omegas=ones, directions=uu, group=group)
        else:
            vals = eval_q(pot, zz, omegas=ones, group=group)
        lim = min(lim, float(w @ vals) / T)
    line_min = 0.0 if pot.n_centers == 0 else float(lim)

    # magnitude guard only; h-independence of the ratios is audited across nets
    bumps_ok = overlap <= C_OVERLAP and all(np.isfinite(c) and c < 1e4 for c in ck)
    lower_bound_ok = line_min > 0.0
    exponents_ok = (
        delta * h ** (-2.0 * beta - eps0) <= 1.0 + 1e-12
        and delta**2 * h ** (beta - 2.0) >= h**-eps0 - 1e-12
        and delta * h ** (beta - 1.0) <= h**eps0 + 1e-12
    )
    report = AdmissibilityReport(
        overlap_max=overlap,
        ck_ratios=ck,
        line_integral_min=line_min,
        bumps_ok=bumps_ok,
        lower_bound_ok=lower_bound_ok,
        exponents_ok=bool(exponents_ok),
        profile=pot.profile.describe(),
    )
    if not report.all_ok():
        log.warning("admissibility audit failed: %s", report.to_json())
    return report
