"""Disk geometry: frozen values, integration oracles, isometry/flow invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypwave.geometry import (
    DiskPoint,
    FrameChart,
    MobiusMap,
    PhasePoint,
    embed_hyperboloid,
    exp_frame,
    flow_z,
    geodesic_flow,
    hyp_distance,
    hyp_distance_z,
    segment_closest,
    tangent_hyperboloid,
)

RNG = np.random.default_rng(20260823)


def random_point(rng=RNG, rmax=0.93):
    r = rmax * math.sqrt(rng.uniform())
    th = rng.uniform(0, 2 * math.pi)
    return DiskPoint(r * math.cos(th), r * math.sin(th))


def random_mobius(rng=RNG):
    """Random isometry as translation * rotation * translation."""
    half = rng.uniform(0, math.pi)
    m = MobiusMap(complex(math.cos(half), math.sin(half)), 0j)
    for _ in range(2):
        t = rng.uniform(0, 2.5)
        th = rng.uniform(0, 2 * math.pi)
        trans = MobiusMap(
            complex(math.cosh(t / 2), 0), math.sinh(t / 2) * complex(math.cos(th), math.sin(th))
        )
        m = (m @ trans).normalized()
    return m


def simpson(f, a, b, n):
    if n % 2:
        n += 1
    x = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return (b - a) / (3 * n) * float(w @ f(x))


# --- distance ---------------------------------------------------------------


def test_distance_half_radius_is_log3():
    d = hyp_distance(DiskPoint(0, 0), DiskPoint(0.5, 0))
    assert abs(d - math.log(3.0)) < 1e-12
    # independent oracle: integrate the conformal factor along the radius
    oracle = simpson(lambda x: 2.0 / (1.0 - x * x), 0.0, 0.5, 4000)
    assert abs(d - oracle) < 1e-10


def test_distance_basics():
    p = DiskPoint(0.3, -0.4)
    assert hyp_distance(p, p) == 0.0
    q = DiskPoint(-0.1, 0.7)
    assert abs(hyp_distance(p, q) - hyp_distance(q, p)) < 1e-15


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_point(rng) for _ in range(3))
    assert hyp_distance(a, c) <= hyp_distance(a, b) + hyp_distance(b, c) + 1e-12


def test_isometry_invariance_bulk():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        m = random_mobius(rng)
        p, q = random_point(rng), random_point(rng)
        d1 = hyp_distance(p, q)
        d2 = hyp_distance(m.apply(p), m.apply(q))
        worst = max(worst, abs(d1 - d2))
    assert worst < 1e-10


# --- Mobius maps ------------------------------------------------------------


def test_mobius_validation():
    with pytest.raises(ValueError):
        MobiusMap(2.0 + 0j, 0j)
    with pytest.raises(ValueError):
        DiskPoint(1.0, 0.0)
    with pytest.raises(ValueError):
        PhasePoint(DiskPoint(0, 0), (0.5, 0.5))


def test_mobius_compose_inverse():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m = random_mobius(rng)
        n = random_mobius(rng)
        p = random_point(rng)
        lhs = (m @ n).apply(p)
        rhs = m.apply(n.apply(p))
        assert abs(lhs.z - rhs.z) < 1e-12
        back = m.inverse().apply(m.apply(p))
        assert abs(back.z - p.z) < 1e-12
    ident = m @ m.inverse()
    assert ident.is_identity(1e-9)


def test_mobius_derivative_fd():
    rng = np.random.default_rng(13)
    for _ in range(20):
        m = random_mobius(rng)
        z = random_point(rng).z
        eps = 1e-6
        fd = (m.apply_z(z + eps) - m.apply_z(z - eps)) / (2 * eps)
        assert abs(fd - m.deriv_z(z)) < 1e-6


# --- geodesic flow ----------------------------------------------------------


def test_flow_unit_time_from_origin():
    pp = PhasePoint(DiskPoint(0, 0), (1.0, 0.0))
    out = geodesic_flow(pp, 1.0)
    assert abs(out.base.u - math.tanh(0.5)) < 1e-12
    assert abs(out.base.v) < 1e-12
    assert abs(out.dir[0] - 1.0) < 1e-12


def _rk4_geodesic(z0, u0, t, n=4000):
    """Independent oracle: second-order geodesic ODE for the conformal metric.

    z'' = -2 conj(z) (z')^2 / (1 - |z|^2), unit hyperbolic speed start.
    """

    def deriv(state):
        z, w = state
        return np.array([w, -2.0 * np.conj(z) * w * w / (1.0 - abs(z) ** 2)])

    state = np.array([z0, u0 * (1.0 - abs(z0) ** 2) / 2.0])
    dt = t / n
    for _ in range(n):
        k1 = deriv(state)
        k2 = deriv(state + dt / 2 * k1)
        k3 = deriv(state + dt / 2 * k2)
        k4 = deriv(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    z, w = state
    u = w * 2.0 / (1.0 - abs(z) ** 2)
    return z, u / abs(u)


def test_flow_matches_ode_oracle():
    rng = np.random.default_rng(17)
    for _ in range(5):
        p = random_point(rng, rmax=0.5)
        th = rng.uniform(0, 2 * math.pi)
        u = complex(math.cos(th), math.sin(th))
        t = rng.uniform(0.5, 2.0)
        z_cf, u_cf = flow_z(p.z, u, t)
        z_ode, u_ode = _rk4_geodesic(p.z, u, t)
        assert abs(z_cf - z_ode) < 1e-9
        assert abs(u_cf - u_ode) < 1e-8


def test_flow_preserves_unit_direction():
    rng = np.random.default_rng(19)
    for _ in range(200):
        p = random_point(rng)
        th = rng.uniform(0, 2 * math.pi)
        pp = PhasePoint(p, (math.cos(th), math.sin(th)))
        t = rng.uniform(-1.0, 1.0)
        out = geodesic_flow(pp, t)
        assert abs(math.hypot(*out.dir) - 1.0) < 1e-8


def test_flow_unit_speed():
    rng = np.random.default_rng(23)
    for _ in range(200):
        p = random_point(rng)
        th = rng.uniform(0, 2 * math.pi)
        pp = PhasePoint(p, (math.cos(th), math.sin(th)))
        t = rng.uniform(-3.0, 3.0)
        out = geodesic_flow(pp, t)
        assert abs(hyp_distance(p, out.base) - abs(t)) < 1e-8


def test_flow_cocycle():
    rng = np.random.default_rng(29)
    worst = 0.0
    for _ in range(200):
        p = random_point(rng, rmax=0.8)
        th = rng.uniform(0, 2 * math.pi)
        pp = PhasePoint(p, (math.cos(th), math.sin(th)))
        t = rng.uniform(-3.0, 3.0)
        s = rng.uniform(-3.0, 3.0)
        one = geodesic_flow(pp, t + s)
        two = geodesic_flow(geodesic_flow(pp, s), t)
        worst = max(worst, abs(one.base.z - two.base.z), abs(one.dir_z - two.dir_z))
    assert worst < 1e-7


def test_flow_reversibility():
    rng = np.random.default_rng(31)
    for _ in range(100):
        p = random_point(rng, rmax=0.9)
        th = rng.uniform(0, 2 * math.pi)
        pp = PhasePoint(p, (math.cos(th), math.sin(th)))
        t = rng.uniform(-5.0, 5.0)
        back = geodesic_flow(geodesic_flow(pp, t), -t)
        assert abs(back.base.z - p.z) < 1e-7
        assert abs(back.dir_z - pp.dir_z) < 1e-7


def test_flow_equivariance_under_isometry():
    # m(flow(pp, t)) = flow(m(pp), t) with direction rotated by the map phase
    rng = np.random.default_rng(37)
    for _ in range(50):
        m = random_mobius(rng)
        p = random_point(rng, rmax=0.8)
        th = rng.uniform(0, 2 * math.pi)
        u = complex(math.cos(th), math.sin(th))
        t = rng.uniform(-2.0, 2.0)
        z1, u1 = flow_z(p.z, u, t)
        dphase = m.deriv_z(p.z)
        dphase /= abs(dphase)
        z2, u2 = flow_z(m.apply_z(p.z), u * dphase, t)
        d1 = m.deriv_z(complex(z1))
        d1 /= abs(d1)
        assert abs(m.apply_z(complex(z1)) - z2) < 1e-10
        assert abs(u1 * d1 - u2) < 1e-9


# --- frames and exp ---------------------------------------------------------


def test_frame_validation():
    with pytest.raises(ValueError):
        FrameChart(DiskPoint(0, 0), (1.0, 0.0), (1.0, 0.0))


def test_exp_frame_distance():
    rng = np.random.default_rng(41)
    for _ in range(100):
        chart = FrameChart.at(random_point(rng, rmax=0.8), rng.uniform(0, 2 * math.pi))
        y = rng.normal(size=2)
        scale = rng.uniform(0.01, 2.0)
        p = exp_frame(chart, y, scale)
        assert abs(hyp_distance(chart.origin, p) - scale * float(np.hypot(*y))) < 1e-8


def test_exp_frame_origin_and_axes():
    chart = FrameChart.at(DiskPoint(0, 0))
    assert exp_frame(chart, (0.0, 0.0), 1.0) == chart.origin
    p = exp_frame(chart, (1.0, 0.0), 1.0)
    assert abs(p.u - math.tanh(0.5)) < 1e-12 and abs(p.v) < 1e-12
    q = exp_frame(chart, (0.0, 1.0), 1.0)
    assert abs(q.v - math.tanh(0.5)) < 1e-12 and abs(q.u) < 1e-12


# --- hyperboloid segment distance -------------------------------------------


def test_hyperboloid_embedding_invariants():
    rng = np.random.default_rng(43)
    z = np.array([random_point(rng).z for _ in range(64)])
    th = rng.uniform(0, 2 * math.pi, size=64)
    u = np.exp(1j * th)
    X = embed_hyperboloid(z)
    T = tangent_hyperboloid(z, u)

    def mdot(x, y):
        return x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] - x[..., 2] * y[..., 2]

    assert np.max(np.abs(mdot(X, X) + 1.0)) < 1e-10
    assert np.max(np.abs(mdot(T, T) - 1.0)) < 1e-10
    assert np.max(np.abs(mdot(X, T))) < 1e-10
    # cosh of pairwise distance equals -<X, Y>
    w = np.array([random_point(rng).z for _ in range(64)])
    Y = embed_hyperboloid(w)
    assert np.max(np.abs(-mdot(X, Y) - np.cosh(hyp_distance_z(z, w)))) < 1e-8


def test_segment_closest_matches_grid():
    rng = np.random.default_rng(47)
    for _ in range(50):
        p = random_point(rng, rmax=0.7)
        th = rng.uniform(0, 2 * math.pi)
        u = complex(math.cos(th), math.sin(th))
        w = random_point(rng, rmax=0.7)
        s_lo, s_hi = sorted(rng.uniform(-2.5, 2.5, size=2))
        W = embed_hyperboloid(np.array([w.z]))[0]
        A = embed_hyperboloid(np.array([p.z]))[0]
        B = tangent_hyperboloid(np.array([p.z]), np.array([u]))[0]
        d, s_star = segment_closest(W, A, B, s_lo, s_hi)
        # brute force over the segment
        ss = np.linspace(s_lo, s_hi, 4001)
        zz, _ = flow_z(np.full_like(ss, p.z, dtype=complex), np.full_like(ss, u, dtype=complex), ss)
        dd = hyp_distance_z(zz, w.z)
        assert d <= dd.min() + 1e-9
        assert abs(d - dd.min()) < 1e-6
        assert s_lo - 1e-12 <= s_star <= s_hi + 1e-12
