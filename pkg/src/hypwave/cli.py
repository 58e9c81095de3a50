"""Batch front-end: configured, seeded experiment runs with bit-stable files.

Every subcommand reads one TOML config, writes CSV/JSON artifacts into the
output directory, embeds the config hash in each artifact, and finishes
with a manifest listing the sha256 of every file produced.  Identical
config and seeds give byte-identical artifacts, independent of --jobs.
"""

import argparse
import hashlib
import json
import math
import os
from functools import partial
from multiprocessing import get_context

import numpy as np

from . import diagnostics, stats, wkb
from .berry import BerryKernel, sample_berry
from .config import ConfigError, load_config
from .field import sample_field, write_field_csv
from .geometry import DiskPoint
from .potential import verify_hypotheses
from .stats import write_covariance_csv

__all__ = ["main"]


def _fmt_h(h):
    return "%g" % h


def _np_plain(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")


class _Run:
    """Artifact collector: writes files, remembers digests, ends in a manifest."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.outdir = cfg.out_dir
        self.files = {}
        os.makedirs(self.outdir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.outdir, name)

    def register(self, name):
        with open(self.path(name), "rb") as fh:
            self.files[name] = hashlib.sha256(fh.read()).hexdigest()

    def emit_json(self, name, obj):
        obj = dict(obj)
        obj.setdefault("config", self.cfg.config_hash())
        text = json.dumps(obj, indent=1, sort_keys=True, default=_np_plain) + "\n"
        with open(self.path(name), "w") as fh:
            fh.write(text)
        self.register(name)

    def finish(self, command):
        manifest = {
            "command": command,
            "config": self.cfg.config_hash(),
            "files": dict(sorted(self.files.items())),
        }
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _pmap(fn, items, jobs):
    """Order-preserving map, optionally over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with get_context("fork").Pool(min(jobs, len(items))) as pool:
        return pool.map(fn, items)


def _admissible_points(job, n, seed):
    """First n panel points carrying amplitude, with their bundles."""
    out = []
    pos = 0
    tried = 0
    while len(out) < n and tried < max(50 * n, 200):
        batch, pos = stats.domain_panel_points(64, seed, group=job.group, offset=pos)
        for z in batch:
            tried += 1
            bundle = wkb.prepare_point(job, complex(z))
            if np.any(bundle.b0 > 1e-12):
                out.append((complex(z), bundle))
                if len(out) == n:
                    break
    if len(out) < n:
        raise RuntimeError(
            f"only {len(out)} admissible points among {tried} candidates"
        )
    return out


# --- subcommands -------------------------------------------------------------


def _net_one(cfg, h):
    pot = cfg.potential(h)
    rep = verify_hypotheses(pot, cfg.delta_for(h))
    return pot, rep


def _cmd_net(cfg, run, jobs):
    ok = True
    for h, (pot, rep) in zip(
        cfg.h_list, _pmap(partial(_net_one, cfg), cfg.h_list, jobs)
    ):
        run.emit_json(
            f"net_h{_fmt_h(h)}.json",
            {
                "h": h,
                "n_centers": pot.n_centers,
                "support_radius": pot.support_radius,
                **json.loads(rep.to_json()),
                "ok": rep.all_ok(),
            },
        )
        ok = ok and rep.all_ok()
    return 0 if ok else 1


def _cmd_propagate(cfg, run, jobs):
    import csv

    tag = f"config={cfg.config_hash()}"
    for h in cfg.h_list:
        job = cfg.job(h)
        (x, bundle), = _admissible_points(job, 1, cfg.seed)
        theta = bundle.thetas(job.potential.omegas)[0]
        xp = DiskPoint.from_z(x)
        name = f"propagate_h{_fmt_h(h)}.csv"
        with open(run.path(name), "w", newline="") as fh:
            fh.write(f"# {tag}\n")
            w = csv.writer(fh)
            w.writerow(["x_u", "x_v", "word", "b0", "phi0", "theta", "xi_re", "xi_im"])
            for l in range(len(bundle.b0)):
                w.writerow(
                    [
                        repr(xp.u),
                        repr(xp.v),
                        bundle.lifts.words[l] or "e",
                        repr(float(bundle.b0[l])),
                        repr(float(bundle.phi0[l])),
                        repr(float(theta[l])),
                        repr(float(np.real(bundle.xi[l]))),
                        repr(float(np.imag(bundle.xi[l]))),
                    ]
                )
        run.register(name)
    return 0


def _cmd_sample(cfg, run, jobs):
    tag = f"config={cfg.config_hash()}"
    for h in cfg.h_list:
        job = cfg.job(h)
        (x, bundle), = _admissible_points(job, 1, cfg.seed)
        offsets = stats._offset_grid(cfg.separations(), cfg.n_angles)
        sample = sample_field(job, x, offsets, n_draws=cfg.n_omega, bundle=bundle)
        sample.meta["config"] = cfg.config_hash()
        name = f"field_h{_fmt_h(h)}.csv"
        write_field_csv(sample, run.path(name), comment=tag)
        run.register(name)
        run.register(f"field_h{_fmt_h(h)}.json")
    return 0


def _panel_one(cfg, h):
    job = cfg.job(h)
    return stats.collect_panel(
        job,
        cfg.n_x,
        cfg.n_omega,
        separations=cfg.separations(),
        n_angles=cfg.n_angles,
        seed=cfg.seed,
    )


def _cmd_covariance(cfg, run, jobs):
    tag = f"config={cfg.config_hash()}"
    panels = _pmap(partial(_panel_one, cfg), cfg.h_list, jobs)
    for h, panel in zip(cfg.h_list, panels):
        est = stats.empirical_covariance(panel)
        name = f"covariance_h{_fmt_h(h)}"
        write_covariance_csv(est, run.path(name + ".csv"), comment=tag)
        run.register(name + ".csv")
        run.emit_json(
            name + ".json", {"h": h, **est.to_json(), "passes": est.passes()}
        )
    return 0


def _cmd_gaussianity(cfg, run, jobs):
    panels = _pmap(partial(_panel_one, cfg), cfg.h_list, jobs)
    for h, panel in zip(cfg.h_list, panels):
        rep = stats.gaussianity(panel)
        run.emit_json(
            f"gaussianity_h{_fmt_h(h)}.json",
            {"h": h, **rep.to_json(), "passes": rep.passes()},
        )
    return 0


def _meanphase_one(cfg, h):
    import csv
    import io

    job = cfg.job(h)
    pts = _admissible_points(job, cfg.n_x, cfg.seed)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["x_u", "x_v", "raw", "debiased", "stderr"])
    vals = []
    for x, _ in pts:
        mp = stats.mean_phase(job, x, n_draws=cfg.n_omega, seed=cfg.seed)
        xp = DiskPoint.from_z(x)
        w.writerow(
            [
                repr(xp.u),
                repr(xp.v),
                repr(mp.raw_abs_mean),
                repr(mp.debiased_abs_mean),
                repr(mp.stderr),
            ]
        )
        vals.append(mp.debiased_abs_mean)
    return buf.getvalue(), float(np.mean(vals))


def _cmd_meanphase(cfg, run, jobs):
    tag = f"config={cfg.config_hash()}"
    results = _pmap(partial(_meanphase_one, cfg), cfg.h_list, jobs)
    means = {}
    for h, (text, mean_debiased) in zip(cfg.h_list, results):
        name = f"meanphase_h{_fmt_h(h)}.csv"
        with open(run.path(name), "w", newline="") as fh:
            fh.write(f"# {tag}\n")
            fh.write(text)
        run.register(name)
        means[_fmt_h(h)] = mean_debiased
    order = [means[_fmt_h(h)] for h in sorted(cfg.h_list, reverse=True)]
    run.emit_json(
        "meanphase.json",
        {
            "mean_debiased": means,
            "decreasing_in_h": all(a >= b for a, b in zip(order, order[1:])),
        },
    )
    return 0


def _diagnose_one(cfg, h):
    pts, _ = stats.domain_panel_points(cfg.n_x, cfg.seed)
    probes = [
        diagnostics.is_bad_point(
            complex(z), h=h, gamma=cfg.gamma, horizon=cfg.bad_horizon
        )
        for z in pts
    ]
    job = cfg.job(h)
    (x, bundle), = _admissible_points(job, 1, cfg.seed)
    _, ivs = diagnostics.approach_intervals_for_point(job, x, bundle=bundle)
    return probes, [iv.total_length() for iv in ivs]


def _cmd_diagnose(cfg, run, jobs):
    results = _pmap(partial(_diagnose_one, cfg), cfg.h_list, jobs)
    for h, (probes, totals) in zip(cfg.h_list, results):
        eps = 0.05 * cfg.beta
        run.emit_json(
            f"diagnose_h{_fmt_h(h)}.json",
            {
                "h": h,
                "gamma": cfg.gamma,
                "horizon": cfg.bad_horizon,
                "n_probes": len(probes),
                "bad_fraction": float(np.mean([p.bad for p in probes])),
                "flagged": [p.to_json() for p in probes if p.bad],
                "interval_statistics": {
                    "per_lift_total": totals,
                    "max_total": max(totals) if totals else 0.0,
                    "bound": h ** (cfg.beta - 5.0 * eps),
                },
            },
        )
    return 0


def _cmd_oracle(cfg, run, jobs):
    rs = np.linspace(0.0, 8.0, 20)
    offsets = np.column_stack([rs, np.zeros_like(rs)])
    sample = sample_berry(offsets, n_draws=10_000, n_waves=256, seed=cfg.seed)
    kernel = BerryKernel()
    v = sample.values
    prod = v * np.conj(v[:, :1])
    est = prod.mean(axis=0)
    se_re = np.std(prod.real, axis=0) / math.sqrt(prod.shape[0])
    se_im = np.std(prod.imag, axis=0) / math.sqrt(prod.shape[0])
    ref = kernel(rs)
    cov_ok = bool(
        np.all(np.abs(est.real - ref) <= 3.0 * np.maximum(se_re, 1e-12))
        and np.all(np.abs(est.imag) <= 3.0 * np.maximum(se_im, 1e-12))
    )
    a0 = np.abs(v[:, 0])
    ratio = float(np.mean(a0**4) / np.mean(a0**2) ** 2)
    ratio_ok = abs(ratio - 2.0) <= 0.15
    run.emit_json(
        "oracle.json",
        {
            "separations": rs,
            "re": est.real,
            "im": est.imag,
            "stderr_re": se_re,
            "stderr_im": se_im,
            "kernel_reference": ref,
            "covariance_ok": cov_ok,
            "fourth_moment_ratio": ratio,
            "ratio_ok": bool(ratio_ok),
            "ok": bool(cov_ok and ratio_ok),
        },
    )
    return 0 if cov_ok and ratio_ok else 1


def _cmd_report(cfg, run, jobs):
    artifacts = {}
    for name in sorted(os.listdir(run.outdir)):
        if not name.endswith(".json") or name in ("manifest.json", "report.json"):
            continue
        with open(run.path(name)) as fh:
            artifacts[name] = json.load(fh)
    run.emit_json("report.json", {"artifacts": artifacts})
    return 0


_COMMANDS = {
    "net": _cmd_net,
    "propagate": _cmd_propagate,
    "sample": _cmd_sample,
    "covariance": _cmd_covariance,
    "gaussianity": _cmd_gaussianity,
    "meanphase": _cmd_meanphase,
    "diagnose": _cmd_diagnose,
    "oracle": _cmd_oracle,
    "report": _cmd_report,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="hypwave",
        description="Seeded wave-propagation experiments on the Bolza surface.",
    )
    p.add_argument("--config", help="TOML experiment file (defaults when omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="override the output directory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).override(seed=args.seed, out_dir=args.out)
    except (ConfigError, OSError, ValueError) as exc:
        print(
            json.dumps(
                {
                    "error": "config",
                    "message": str(exc),
                    "field": getattr(exc, "field", None),
                }
            )
        )
        return 2
    run = _Run(cfg)
    try:
        code = _COMMANDS[args.command](cfg, run, args.jobs)
    except ConfigError as exc:
        print(
            json.dumps(
                {"error": "config", "message": str(exc), "field": exc.field}
            )
        )
        return 2
    except Exception as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}))
        return 1
    run.finish(args.command)
    return code
