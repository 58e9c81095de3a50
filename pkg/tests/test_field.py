"""Local field sampling: superposition oracle, modes, serialization."""

import cmath
import csv
import json
import math

import numpy as np
import pytest

from hypwave.field import sample_field, superpose, write_field_csv
from hypwave.geometry import DiskPoint, FrameChart, flow_z
from hypwave.lagrangian import LagrangianState, busemann_grad_dir
from hypwave.potential import build_net
from hypwave.surface import default_group
from hypwave import wkb

H = 0.05
BETA = 0.3


@pytest.fixture(scope="module")
def job():
    pot = build_net(H, BETA, seed=11)
    return wkb.PropagationJob(potential=pot, state=LagrangianState(), t=1.2, delta=H**0.8)


@pytest.fixture(scope="module")
def x_on_strip(job):
    y = 0.1 + 0.05j
    u = busemann_grad_dir(job.state.boundary_point, y)
    zfwd, _ = flow_z(y, u, job.t)
    x, _ = default_group().reduce(DiskPoint.from_z(complex(zfwd)))
    return x


def test_superpose_three_lift_oracle():
    b0 = [0.5, 1.2, 0.3]
    angles = [0.0, 2.1, 4.0]
    xi = [[math.cos(a), math.sin(a)] for a in angles]
    phases = [[0.3, -1.1, 2.2]]
    offsets = [[0.0, 0.0], [1.5, -0.4], [-2.0, 0.7]]
    got = superpose(b0, xi, phases, offsets)
    assert got.shape == (1, 3)
    for k, (y1, y2) in enumerate(offsets):
        want = sum(
            b0[l] * cmath.exp(1j * (phases[0][l] + xi[l][0] * y1 + xi[l][1] * y2))
            for l in range(3)
        )
        assert abs(got[0, k] - want) < 1e-13


def test_zero_offset_matches_contributions(job, x_on_strip):
    sample = sample_field(job, x_on_strip, [[0.0, 0.0]], n_draws=1)
    contribs = wkb.propagate(job, x_on_strip)
    want = sum(
        c.b0 * cmath.exp(1j * (c.phi0 + job.delta * c.theta) / job.h) for c in contribs
    )
    assert abs(sample.values[0, 0] - want) < 1e-10 * max(1.0, abs(want))


def test_amplitude_bound(job, x_on_strip):
    offsets = np.random.default_rng(0).uniform(-3, 3, size=(40, 2))
    sample = sample_field(job, x_on_strip, offsets, n_draws=16)
    bundle = wkb.prepare_point(job, x_on_strip)
    assert np.all(np.abs(sample.values) <= np.sum(bundle.b0) + 1e-10)


def test_deterministic_and_row_zero(job, x_on_strip):
    offs = [[0.3, 0.1], [1.0, -1.0]]
    a = sample_field(job, x_on_strip, offs, n_draws=4)
    b = sample_field(job, x_on_strip, offs, n_draws=4)
    assert np.array_equal(a.values, b.values)
    base = sample_field(job, x_on_strip, offs, omegas=job.potential.omegas[None, :])
    assert np.allclose(a.values[0], base.values[0], rtol=0, atol=1e-14)


def test_excised_none_equals_full(job, x_on_strip):
    offs = [[0.5, 0.5]]
    full = sample_field(job, x_on_strip, offs, n_draws=3, mode="full")
    exc = sample_field(job, x_on_strip, offs, n_draws=3, mode="excised")
    assert np.allclose(full.values, exc.values, rtol=0, atol=1e-12)


def test_excised_matches_manual_composition(job, x_on_strip):
    bundle = wkb.prepare_point(job, x_on_strip)
    nl = len(bundle.b0)
    intervals = [[(0.2, 0.6)] if l == 0 else [] for l in range(nl)]
    offs = [[0.0, 0.0]]
    om = job.potential.omegas
    got = sample_field(
        job, x_on_strip, offs, omegas=om[None, :], mode="excised",
        intervals_per_lift=intervals,
    ).values[0, 0]
    want = 0.0
    for l in range(nl):
        th = wkb.theta_phase_excised(job, complex(bundle.lifts.z_lift[l]), intervals[l], omegas=om)
        want += bundle.b0[l] * cmath.exp(
            1j * (bundle.phi0[l] + job.delta * th) / job.h
        ) * cmath.exp(0j)
    assert abs(got - want) < 1e-10 * max(1.0, abs(want))
    full = sample_field(job, x_on_strip, offs, omegas=om[None, :]).values[0, 0]
    assert abs(got - full) > 0  # the excision actually moved the phase


def test_synthetic_mode(job, x_on_strip):
    bundle = wkb.prepare_point(job, x_on_strip)
    nl = len(bundle.b0)
    rng = np.random.default_rng(3)
    phases = rng.uniform(0, 2 * math.pi, size=(5, nl))
    offs = [[0.2, -0.4], [1.1, 0.0]]
    sample = sample_field(job, x_on_strip, offs, mode="synthetic", synthetic_phases=phases)
    chart = FrameChart.at(bundle.x, 0.0)
    comps = np.column_stack(
        [np.real(bundle.xi * np.conj(chart.e1_z)), np.real(bundle.xi * np.conj(chart.e2_z))]
    )
    want = superpose(bundle.b0, comps, phases, offs)
    assert np.allclose(sample.values, want, rtol=0, atol=1e-13)


def test_mode_validation(job, x_on_strip):
    with pytest.raises(ValueError, match="mode"):
        sample_field(job, x_on_strip, [[0, 0]], mode="fancy")
    with pytest.raises(ValueError, match="synthetic"):
        sample_field(job, x_on_strip, [[0, 0]], mode="synthetic")


def test_frame_covariance(job, x_on_strip):
    alpha = 0.9
    offs = np.array([[0.7, 0.2], [-1.2, 0.5], [0.0, 2.0]])
    rot = np.array(
        [[math.cos(alpha), -math.sin(alpha)], [math.sin(alpha), math.cos(alpha)]]
    )
    bundle = wkb.prepare_point(job, x_on_strip)
    s_rot = sample_field(
        job, x_on_strip, offs, n_draws=2, chart=FrameChart.at(bundle.x, alpha),
        bundle=bundle,
    )
    s_ref = sample_field(
        job, x_on_strip, offs @ rot.T, n_draws=2,
        chart=FrameChart.at(bundle.x, 0.0), bundle=bundle,
    )
    assert np.allclose(s_rot.values, s_ref.values, rtol=0, atol=1e-10)


def test_csv_round_trip(job, x_on_strip, tmp_path):
    offs = [[0.0, 0.0], [1.0, 0.5]]
    sample = sample_field(job, x_on_strip, offs, n_draws=3)
    path = tmp_path / "field.csv"
    write_field_csv(sample, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x_u", "x_v", "seed", "y1", "y2", "re", "im"]
    assert len(rows) == 1 + 3 * 2
    first = rows[1]
    assert float(first[0]) == sample.x.u and float(first[1]) == sample.x.v
    assert int(first[2]) == job.potential.seed ^ 0
    assert float(first[5]) == sample.values[0, 0].real
    assert float(first[6]) == sample.values[0, 0].imag
    with open(tmp_path / "field.json") as fh:
        meta = json.load(fh)
    assert meta["h"] == H and meta["mode"] == "full"
    assert meta["columns"] == rows[0]
    assert meta["n_draws"] == 3


def test_draw_seeds(job, x_on_strip):
    sample = sample_field(job, x_on_strip, [[0, 0]], n_draws=4)
    assert list(sample.draw_seeds) == [job.potential.seed ^ k for k in range(4)]
