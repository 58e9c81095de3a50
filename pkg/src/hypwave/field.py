"""Locally rescaled wave samples around a base point.

In a frame chart at x, offsets y are measured in units of h.  To principal
order the propagated wave at exp_x(h y) is the monochromatic superposition

    u(y) = sum_lifts b0_l exp(i [Theta_l(x)/h + <xi_l, y>]),

with |xi_l| = 1, which is the object compared against the isotropic
monochromatic Gaussian field.  Modes:

    full      Theta = phi0 + delta * theta over the whole backward ray
    excised   theta restricted outside given close-approach intervals
    synthetic caller-supplied phases (null tests and oracles)

Samples serialize to CSV (columns x_u, x_v, seed, y1, y2, re, im) with a
JSON sidecar carrying the run parameters; that file pair is the hand-off
format for downstream plotting.
"""

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .geometry import DiskPoint, FrameChart
from .potential import ensemble_omegas
from .wkb import excised_line_integrals, prepare_point

__all__ = ["LocalFieldSample", "superpose", "sample_field", "write_field_csv"]


def superpose(b0, xi_components, phases, offsets):
    """Evaluate the superposition on a batch of phase draws.

    b0: (nl,), xi_components: (nl, 2) unit rows, phases: (ndraws, nl),
    offsets: (n, 2).  Returns complex values of shape (ndraws, n).
    """
    b0 = np.asarray(b0, dtype=float)
    xi = np.asarray(xi_components, dtype=float)
    phases = np.atleast_2d(np.asarray(phases, dtype=float))
    offsets = np.asarray(offsets, dtype=float)
    disp = offsets @ xi.T  # (n, nl)
    amp = b0[None, :] * np.exp(1j * phases)  # (ndraws, nl)
    return amp @ np.exp(1j * disp.T)


@dataclass(frozen=True, eq=False)
class LocalFieldSample:
    """Field values at chart offsets for an ensemble of amplitude draws."""

    x: DiskPoint
    chart: FrameChart
    offsets: np.ndarray  # (n, 2)
    values: np.ndarray  # (ndraws, n) complex
    draw_seeds: np.ndarray  # (ndraws,)
    mode: str
    meta: dict

    @property
    def n_draws(self):
        return self.values.shape[0]

    def to_csv(self, path):
        write_field_csv(self, path)


def _chart_components(xi, chart):
    return np.column_stack(
        [np.real(xi * np.conj(chart.e1_z)), np.real(xi * np.conj(chart.e2_z))]
    )


def sample_field(
    job,
    x,
    offsets,
    n_draws=1,
    chart=None,
    mode="full",
    intervals_per_lift=None,
    synthetic_phases=None,
    omegas=None,
    bundle=None,
):
    """Sample the rescaled field at one base point.

    omegas overrides the default ensemble (rows indexed by draw); bundle
    lets callers reuse a precomputed propagation bundle for this x.
    """
    if mode not in ("full", "excised", "synthetic"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    if mode == "synthetic" and synthetic_phases is None:
        raise ValueError("synthetic mode needs synthetic_phases")
    if bundle is None:
        bundle = prepare_point(job, x)
    if chart is None:
        chart = FrameChart.at(bundle.x, 0.0)
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    nl = len(bundle.b0)
    pot = job.potential

    if mode == "synthetic":
        phases = np.atleast_2d(np.asarray(synthetic_phases, dtype=float))
        if phases.shape[1] != nl:
            raise ValueError("synthetic phases must have one column per lift")
        seeds = np.arange(phases.shape[0])
    else:
        if omegas is None:
            omegas = ensemble_omegas(pot, n_draws)
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        if mode == "excised":
            line = np.zeros((nl, pot.n_centers))
            for l in range(nl):
                iv = None if intervals_per_lift is None else intervals_per_lift[l]
                line[l] = excised_line_integrals(job, complex(bundle.lifts.z_lift[l]), iv or [])
        else:
            line = bundle.line_integrals
        theta = -(omegas @ line.T)  # (ndraws, nl)
        phases = (bundle.phi0[None, :] + job.delta * theta) / job.h
        seeds = np.array([pot.seed ^ k for k in range(omegas.shape[0])], dtype=np.int64)

    comps = _chart_components(bundle.xi, chart)
    values = superpose(bundle.b0, comps, phases, offsets)
    meta = {
        "h": job.h,
        "beta": job.beta,
        "t": job.t,
        "delta": job.delta,
        "case": pot.case,
        "profile": pot.profile.describe(),
        "potential_seed": pot.seed,
        "mode": mode,
        "x": [bundle.x.u, bundle.x.v],
        "frame_e1": [float(np.real(chart.e1_z)), float(np.imag(chart.e1_z))],
        "n_lifts": int(nl),
        "n_draws": int(values.shape[0]),
        "n_offsets": int(offsets.shape[0]),
        "columns": ["x_u", "x_v", "seed", "y1", "y2", "re", "im"],
    }
    return LocalFieldSample(
        x=bundle.x,
        chart=chart,
        offsets=offsets,
        values=values,
        draw_seeds=np.asarray(seeds, dtype=np.int64),
        mode=mode,
        meta=meta,
    )


def _sidecar_path(path):
    base = os.fspath(path)
    root, ext = os.path.splitext(base)
    return (root if ext.lower() == ".csv" else base) + ".json"


def write_field_csv(sample, path, comment=None):
    """One row per (draw, offset); sidecar JSON next to the CSV."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["x_u", "x_v", "seed", "y1", "y2", "re", "im"])
        xu, xv = sample.x.u, sample.x.v
        for d in range(sample.values.shape[0]):
            sd = int(sample.draw_seeds[d])
            for k in range(sample.offsets.shape[0]):
                v = sample.values[d, k]
                w.writerow(
                    [
                        repr(xu),
                        repr(xv),
                        sd,
                        repr(float(sample.offsets[k, 0])),
                        repr(float(sample.offsets[k, 1])),
                        repr(float(v.real)),
                        repr(float(v.imag)),
                    ]
                )
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sample.meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
