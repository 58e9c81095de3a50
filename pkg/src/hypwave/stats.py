"""Ensemble statistics of the rescaled field against the reference kernel.

The workhorse is a panel: domain-uniform base points that carry at least
one contributing lift, each sampled over a shared coupling ensemble.  Per
point the field is normalized by its own amplitude mass sum(b0^2), so the
limiting covariance at separation s is the unit-intensity kernel K(s).

Estimator conventions (kept fixed so tolerances mean the same thing across
runs): separations pair each offset with the origin offset; angles average
over a half-circle fan; the cluster standard error treats base points, not
draws, as the independent unit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .berry import BerryKernel
from .field import superpose
from .geometry import FrameChart
from .potential import ensemble_omegas
from .rng import STREAM_BOOT, STREAM_PHASES, STREAM_POINTS, Stream
from .surface import default_group
from .wkb import excised_line_integrals, prepare_point

__all__ = [
    "DEFAULT_SEPARATIONS",
    "FieldPanel",
    "CovarianceEstimate",
    "GaussianityReport",
    "MeanPhaseResult",
    "IndependenceResult",
    "domain_panel_points",
    "collect_panel",
    "empirical_covariance",
    "gaussianity",
    "fourth_moment_ratio",
    "mean_phase",
    "phase_independence",
    "write_covariance_csv",
]

DEFAULT_SEPARATIONS = np.linspace(0.0, 6.0, 12)
_CIRCUMRADIUS = 2.4485224083551082


def domain_panel_points(n, seed, group=None, offset=0):
    """Area-uniform points of the fundamental domain from the point stream."""
    group = group or default_group()
    stream = Stream(seed, STREAM_POINTS)
    out = []
    pos = offset
    while len(out) < n:
        m = max(64, 2 * (n - len(out)))
        u = stream.uniform(m, offset=pos)
        ang = stream.uniform(m, 0.0, 2.0 * math.pi, offset=pos + m)
        pos += 2 * m
        rad = 2.0 * np.arcsinh(np.sqrt(u) * math.sinh(_CIRCUMRADIUS / 2.0))
        z = np.tanh(rad / 2.0) * np.exp(1j * ang)
        keep = group.in_domain(z)
        out.extend(z[keep].tolist())
    return np.array(out[:n]), pos


def _offset_grid(separations, n_angles):
    angs = np.exp(1j * np.pi * np.arange(n_angles) / n_angles)
    pts = [0j]
    for s in separations[1:]:
        pts.extend(s * angs)
    g = np.array(pts)
    return np.column_stack([g.real, g.imag])


@dataclass(frozen=True, eq=False)
class FieldPanel:
    """Normalized field draws over a panel of base points."""

    x_points: np.ndarray  # (nx,) complex
    values: np.ndarray  # (nx, ndraws, ngrid) normalized field
    em_small: np.ndarray  # (nx,) mean phase factor of the shortest-word lift
    lift_counts: np.ndarray  # (nx,)
    separations: np.ndarray
    n_angles: int
    meta: dict

    @property
    def n_points(self):
        return self.values.shape[0]

    @property
    def n_draws(self):
        return self.values.shape[1]


def collect_panel(
    job,
    n_points,
    n_draws,
    separations=None,
    n_angles=8,
    seed=None,
    mode="full",
    max_candidates=None,
    points=None,
    point_filter=None,
):
    """Sample the rescaled field over a panel of admissible base points.

    A candidate point is admissible when at least one lift carries
    amplitude; candidates are consumed from the deterministic point stream
    until n_points are kept.  mode "synthetic" replaces the propagated
    phases with iid uniform ones (the Gaussian null).  An explicit points
    array bypasses the stream (every given point must be admissible); a
    point_filter callable rejects stream candidates after the amplitude
    check, e.g. to exclude near-self-intersecting trajectories.
    """
    if mode not in ("full", "synthetic"):
        raise ValueError(f"unsupported panel mode {mode!r}")
    pot = job.potential
    seed = pot.seed if seed is None else seed
    seps = DEFAULT_SEPARATIONS if separations is None else np.asarray(separations, float)
    if seps[0] != 0.0:
        raise ValueError("separation grid must start at 0")
    offsets = _offset_grid(seps, n_angles)
    omegas = ensemble_omegas(pot, n_draws)
    phase_stream = Stream(seed, STREAM_PHASES)
    if points is not None:
        points = [complex(z) for z in points]
        n_points = len(points)
    if max_candidates is None:
        max_candidates = 50 * n_points

    xs, vals, ems, counts = [], [], [], []
    stream_pos = 0
    tried = 0
    buf = []
    while len(xs) < n_points:
        if points is not None:
            x = points[len(xs)]
        else:
            if tried >= max_candidates:
                raise RuntimeError(
                    f"only {len(xs)} admissible points among {tried} candidates; "
                    "the propagated support may be too thin for this panel"
                )
            if not buf:
                batch, stream_pos = domain_panel_points(
                    max(16, n_points), seed, job.group, offset=stream_pos
                )
                buf = list(batch)
            x = complex(buf.pop(0))
        tried += 1
        bundle = prepare_point(job, x)
        sel = np.where(bundle.b0 > 1e-12)[0]
        if sel.size == 0:
            if points is not None:
                raise RuntimeError(f"supplied panel point {x} carries no amplitude")
            continue
        if points is None and point_filter is not None and not point_filter(x):
            continue
        b0 = bundle.b0[sel]
        if mode == "synthetic":
            ph = phase_stream.uniform(
                n_draws * sel.size, 0.0, 2.0 * math.pi, offset=len(xs) * 2_000_000
            ).reshape(n_draws, sel.size)
            phases = ph
            em = np.exp(1j * ph[:, 0]).mean()
        else:
            theta = -(omegas @ bundle.line_integrals[sel].T)  # (ndraws, nsel)
            phases = (bundle.phi0[sel][None, :] + job.delta * theta) / job.h
            em = np.exp(1j * (job.delta / job.h) * theta[:, 0]).mean()
        chart = FrameChart.at(bundle.x, 0.0)
        comps = np.column_stack(
            [
                np.real(bundle.xi[sel] * np.conj(chart.e1_z)),
                np.real(bundle.xi[sel] * np.conj(chart.e2_z)),
            ]
        )
        psi = superpose(b0, comps, phases, offsets)
        psin = psi / math.sqrt(float(np.sum(b0**2)))
        xs.append(x)
        vals.append(psin)
        ems.append(em)
        counts.append(sel.size)

    meta = {
        "h": job.h,
        "beta": job.beta,
        "t": job.t,
        "delta": job.delta,
        "case": pot.case,
        "mode": mode,
        "potential_seed": pot.seed,
        "panel_seed": seed,
        "n_points": n_points,
        "n_draws": n_draws,
        "n_angles": n_angles,
        "candidates_tried": tried,
    }
    return FieldPanel(
        x_points=np.array(xs),
        values=np.array(vals),
        em_small=np.array(ems),
        lift_counts=np.array(counts),
        separations=seps,
        n_angles=n_angles,
        meta=meta,
    )


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Radial covariance profile with cluster standard errors."""

    separations: np.ndarray
    values: np.ndarray  # complex
    stderr: np.ndarray
    kernel_reference: np.ndarray
    n_points: int
    n_draws: int
    meta: dict

    def deviations(self):
        return np.abs(self.values - self.kernel_reference)

    def max_deviation(self):
        return float(np.max(self.deviations()))

    def passes(self, floor=0.1, n_sigma=3.0):
        tol = np.maximum(floor, n_sigma * self.stderr)
        return bool(np.all(self.deviations() <= tol))

    def to_json(self):
        return {
            "separations": self.separations.tolist(),
            "re": np.real(self.values).tolist(),
            "im": np.imag(self.values).tolist(),
            "stderr": self.stderr.tolist(),
            "kernel_reference": self.kernel_reference.tolist(),
            "max_deviation": self.max_deviation(),
            "n_points": self.n_points,
            "n_draws": self.n_draws,
            "meta": self.meta,
        }


def empirical_covariance(panel, kernel=None):
    """Aggregate the panel into a radial covariance estimate.

    Pairing is against the origin offset; per separation the angle fan is
    averaged per point first, then across points, with the standard error
    taken across points.
    """
    kernel = kernel or BerryKernel()
    per_x = (panel.values * np.conj(panel.values[:, :, [0]])).mean(axis=1)  # (nx, ng)
    na = panel.n_angles
    cols = [per_x[:, 0]]
    for j in range(1, len(panel.separations)):
        idx = [1 + (j - 1) * na + a for a in range(na)]
        cols.append(per_x[:, idx].mean(axis=1))
    sub = np.stack(cols, axis=1)  # (nx, nsep)
    values = sub.mean(axis=0)
    nx = sub.shape[0]
    stderr = np.sqrt(np.mean(np.abs(sub - values[None, :]) ** 2, axis=0) / max(1, nx - 1))
    return CovarianceEstimate(
        separations=panel.separations,
        values=values,
        stderr=stderr,
        kernel_reference=kernel(panel.separations),
        n_points=nx,
        n_draws=panel.n_draws,
        meta=dict(panel.meta),
    )


def write_covariance_csv(est, path, comment=None):
    import csv

    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["r", "re", "im", "stderr", "kernel_reference"])
        for k in range(len(est.separations)):
            w.writerow(
                [
                    repr(float(est.separations[k])),
                    repr(float(np.real(est.values[k]))),
                    repr(float(np.imag(est.values[k]))),
                    repr(float(est.stderr[k])),
                    repr(float(est.kernel_reference[k])),
                ]
            )


@dataclass(frozen=True)
class GaussianityReport:
    """Fourth-moment ratio at the base offset; 2 for the complex Gaussian."""

    ratio: float
    n_points: int
    n_draws: int
    target: float = 2.0

    def passes(self, tol=0.15):
        return abs(self.ratio - self.target) <= tol

    def to_json(self):
        return {
            "ratio": self.ratio,
            "target": self.target,
            "n_points": self.n_points,
            "n_draws": self.n_draws,
        }


def fourth_moment_ratio(values):
    """E|u|^4 / (E|u|^2)^2 for a 1-d batch of complex samples."""
    a = np.abs(np.asarray(values))
    den = float(np.mean(a**2))
    if den <= 0.0:
        raise ValueError("degenerate sample: no variance at the base offset")
    return float(np.mean(a**4) / den**2)


def gaussianity(panel):
    """Panel-pooled fourth-moment ratio at the origin offset."""
    v0 = np.abs(panel.values[:, :, 0])
    num = (v0**4).mean(axis=1)
    den = (v0**2).mean(axis=1)
    pooled_den = float(den.mean())
    if pooled_den <= 0.0:
        raise ValueError("degenerate panel: no amplitude at the base offset")
    ratio = float(num.mean() / pooled_den**2)
    return GaussianityReport(ratio=ratio, n_points=panel.n_points, n_draws=panel.n_draws)


@dataclass(frozen=True)
class MeanPhaseResult:
    """Equidistribution of the perturbation phase factor at one point."""

    raw_abs_mean: float
    debiased_abs_mean: float
    stderr: float
    n_draws: int

    def to_json(self):
        return {
            "raw_abs_mean": self.raw_abs_mean,
            "debiased_abs_mean": self.debiased_abs_mean,
            "stderr": self.stderr,
            "n_draws": self.n_draws,
        }


def _phase_factors(job, x, n_draws, intervals=None, lift_index=None):
    bundle = prepare_point(job, x)
    sel = np.where(bundle.b0 > 1e-12)[0]
    if sel.size == 0:
        raise ValueError("point carries no amplitude at this time")
    l = int(sel[0]) if lift_index is None else int(lift_index)
    omegas = ensemble_omegas(job.potential, n_draws)
    if intervals is None:
        line = bundle.line_integrals[l]
    else:
        line = excised_line_integrals(job, complex(bundle.lifts.z_lift[l]), intervals)
    theta = -(omegas @ line)
    return np.exp(1j * (job.delta / job.h) * theta)


def mean_phase(job, x, n_draws, n_boot=200, seed=None):
    """|mean| of the perturbation phase factor over the coupling ensemble.

    Small values certify phase equidistribution; the bias-corrected variant
    removes the 1/n floor of |mean| under the null.  Bootstrap over draws
    supplies the standard error.
    """
    P = _phase_factors(job, x, n_draws)
    n = n_draws
    em = P.mean()
    raw = float(np.abs(em))
    debiased = math.sqrt(max(0.0, (n * raw**2 - 1.0) / (n - 1))) if n > 1 else raw
    boot = Stream(job.potential.seed if seed is None else seed, STREAM_BOOT)
    idx = np.minimum(
        (boot.uniform(n_boot * n, 0.0, float(n))).astype(np.int64), n - 1
    ).reshape(n_boot, n)
    means = np.abs(P[idx].mean(axis=1))
    return MeanPhaseResult(
        raw_abs_mean=raw,
        debiased_abs_mean=debiased,
        stderr=float(means.std()),
        n_draws=n,
    )


@dataclass(frozen=True)
class IndependenceResult:
    """Complex correlation of phase factors at two base points."""

    corr: complex
    n_draws: int

    @property
    def abs_corr(self):
        return abs(self.corr)

    def threshold(self, n_sigma=3.0):
        return n_sigma / math.sqrt(self.n_draws)

    def to_json(self):
        return {
            "corr_re": self.corr.real,
            "corr_im": self.corr.imag,
            "abs_corr": self.abs_corr,
            "n_draws": self.n_draws,
        }


def phase_independence(
    job, x1, x2, n_draws, intervals1=None, intervals2=None,
    lift_index1=None, lift_index2=None,
):
    """Correlation between the phase factors of two points' leading lifts.

    Optional excision intervals apply per point.  Raises on a degenerate
    (noiseless) ensemble where the correlation is undefined.
    """
    P1 = _phase_factors(job, x1, n_draws, intervals=intervals1, lift_index=lift_index1)
    P2 = _phase_factors(job, x2, n_draws, intervals=intervals2, lift_index=lift_index2)
    m1, m2 = P1.mean(), P2.mean()
    v1 = float(np.mean(np.abs(P1 - m1) ** 2))
    v2 = float(np.mean(np.abs(P2 - m2) ** 2))
    if v1 < 1e-14 or v2 < 1e-14:
        raise ValueError("degenerate phase ensemble: variance is zero")
    c = complex(np.mean(P1 * np.conj(P2)) - m1 * np.conj(m2))
    return IndependenceResult(corr=c / math.sqrt(v1 * v2), n_draws=n_draws)
