"""Propagation module: phases, amplitudes, bundles, validation integrator."""

import math

import numpy as np
import pytest

from hypwave.geometry import DiskPoint, FrameChart, flow_z, hyp_distance_z
from hypwave.lagrangian import (
    LagrangianState,
    amplitude_a0,
    busemann,
    busemann_grad_dir,
)
from hypwave.potential import build_net, eval_q
from hypwave.profiles import BumpProfile
from hypwave.surface import default_group
from hypwave import wkb

H = 0.05
BETA = 0.3


@pytest.fixture(scope="module")
def pot():
    return build_net(H, BETA, seed=11)


@pytest.fixture(scope="module")
def pot_symbol():
    return build_net(0.1, BETA, seed=12, case="symbol")


@pytest.fixture(scope="module")
def job(pot):
    return wkb.PropagationJob(potential=pot, state=LagrangianState(), t=1.2, delta=H**0.8)


def dense_theta_oracle(job, z_lift, n=32000):
    """Trapezoid on a dense independent grid along the backward ray."""
    s = np.linspace(0.0, job.t, n + 1)
    u = busemann_grad_dir(job.state.boundary_point, z_lift)
    zz, uu = flow_z(np.full(s.shape, z_lift), np.full(s.shape, u), -s)
    if job.potential.case == "symbol":
        vals = eval_q(job.potential, zz, directions=uu, group=job.group)
    else:
        vals = eval_q(job.potential, zz, group=job.group)
    return -float(np.trapezoid(vals, s))


class TestJobValidation:
    def test_good_job(self, pot):
        j = wkb.PropagationJob(potential=pot, state=LagrangianState(), t=1.0, delta=H**0.8)
        assert j.h == H and j.beta == BETA

    def test_horizon_enforced(self, pot):
        tmax = 0.5 * math.log(1.0 / H)
        with pytest.raises(ValueError, match="horizon"):
            wkb.PropagationJob(potential=pot, state=LagrangianState(), t=tmax + 0.05, delta=H**0.8)
        # and a larger constant admits the same time
        wkb.PropagationJob(
            potential=pot, state=LagrangianState(), t=tmax + 0.05, delta=H**0.8,
            horizon_const=0.8,
        )

    def test_delta_window(self, pot):
        state = LagrangianState()
        with pytest.raises(ValueError, match="admissibility"):
            wkb.PropagationJob(potential=pot, state=state, t=1.0, delta=10 * H**0.8)
        with pytest.raises(ValueError, match="admissibility"):
            wkb.PropagationJob(potential=pot, state=state, t=1.0, delta=H**2)
        # switched-off noise is always allowed
        wkb.PropagationJob(potential=pot, state=state, t=1.0, delta=0.0)

    def test_negative_time(self, pot):
        with pytest.raises(ValueError):
            wkb.PropagationJob(potential=pot, state=LagrangianState(), t=-0.1, delta=0.0)

    def test_quad_node_floor(self, job):
        assert job.n_quad_nodes() >= 64
        assert job.n_quad_nodes() % 2 == 0


class TestPhases:
    def test_phi_unperturbed_on_axis(self, job):
        # Busemann value along the radius toward p=1 is -s at distance s
        s = 0.7
        z = math.tanh(s / 2.0)
        val = wkb.phi_unperturbed(job, z)
        assert abs(val - (-s - job.t / 2.0)) < 1e-12

    def test_theta_linear_in_omega(self, job):
        z = 0.31 - 0.12j
        om = job.potential.omegas
        t1 = wkb.theta_phase(job, z, omegas=om)
        t2 = wkb.theta_phase(job, z, omegas=2.0 * om)
        t3 = wkb.theta_phase(job, z, omegas=np.zeros_like(om))
        assert abs(t2 - 2.0 * t1) < 1e-12 * max(1.0, abs(t1))
        assert t3 == 0.0

    def test_theta_bound(self, job):
        z = -0.2 + 0.33j
        th = wkb.theta_phase(job, z)
        s = np.linspace(0, job.t, 4001)
        u = busemann_grad_dir(job.state.boundary_point, z)
        zz, _ = flow_z(np.full(s.shape, z), np.full(s.shape, u), -s)
        qmax = float(np.max(np.abs(eval_q(job.potential, zz, group=job.group))))
        assert abs(th) <= job.t * qmax * (1.0 + 1e-9) + 1e-12

    def test_theta_refined_matches_oracle(self, job):
        rng = np.random.default_rng(5)
        for _ in range(5):
            z = (rng.uniform(-0.4, 0.4) + 1j * rng.uniform(-0.4, 0.4))
            th = wkb.theta_phase(job, z, tol=1e-10)
            assert abs(th - dense_theta_oracle(job, z)) < 5e-8

    def test_theta_symbol_case(self, pot_symbol):
        j = wkb.PropagationJob(
            potential=pot_symbol, state=LagrangianState(), t=1.0, delta=0.1**0.8
        )
        th = wkb.theta_phase(j, 0.25 + 0.1j, tol=1e-9)
        assert abs(th - dense_theta_oracle(j, 0.25 + 0.1j)) < 5e-7


class TestExcision:
    def test_empty_is_identity(self, job):
        z = 0.3 + 0.05j
        assert wkb.theta_phase_excised(job, z, []) == wkb.theta_phase(job, z)

    def test_full_interval_kills_phase(self, job):
        z = 0.3 + 0.05j
        assert wkb.theta_phase_excised(job, z, [(0.0, job.t)]) == 0.0

    def _complement_oracle(self, job, z, segs):
        u = busemann_grad_dir(job.state.boundary_point, z)
        total = 0.0
        for lo, hi in segs:
            s = np.linspace(lo, hi, 20001)
            zz, _ = flow_z(np.full(s.shape, z), np.full(s.shape, u), -s)
            total -= float(np.trapezoid(eval_q(job.potential, zz, group=job.group), s))
        return total

    def test_removed_piece_matches_oracle(self, job):
        z = 0.28 - 0.21j
        exc = wkb.theta_phase_excised(job, z, [(0.3, 0.65)], tol=1e-10)
        want = self._complement_oracle(job, z, [(0.0, 0.3), (0.65, job.t)])
        assert abs(exc - want) < 5e-7

    def test_two_intervals(self, job):
        z = 0.1 + 0.3j
        a = wkb.theta_phase_excised(job, z, [(0.1, 0.3), (0.5, 0.8)], tol=1e-10)
        want = self._complement_oracle(
            job, z, [(0.0, 0.1), (0.3, 0.5), (0.8, job.t)]
        )
        assert abs(a - want) < 5e-7

    def test_excised_vector_consistency(self, job):
        z = 0.22 + 0.14j
        om = job.potential.omegas
        vec = wkb.excised_line_integrals(job, z, [(0.2, 0.7)])
        direct = wkb.theta_phase_excised(job, z, [(0.2, 0.7)], omegas=om)
        assert abs(-(vec @ om) - direct) < 1e-12 * max(1.0, abs(direct))
        empty = wkb.excised_line_integrals(job, z, [])
        assert abs(-(empty @ om) - wkb.theta_phase(job, z)) < 1e-12

    def test_bad_intervals_raise(self, job):
        z = 0.2
        with pytest.raises(ValueError):
            wkb.theta_phase_excised(job, z, [(0.5, 0.2)])
        with pytest.raises(ValueError):
            wkb.theta_phase_excised(job, z, [(0.1, 0.5), (0.4, 0.7)])


class TestAmplitude:
    def test_forward_point_recovers_a0(self, job):
        state = job.state
        y = 0.1 + 0.02j
        u = busemann_grad_dir(state.boundary_point, y)
        zlift, _ = flow_z(y, u, job.t)
        b0 = wkb.amplitude_b0(job, complex(zlift))
        want = amplitude_a0(state, y) * math.exp(-job.t / 2.0)
        assert abs(b0 - want) < 1e-12 * max(1.0, want)

    def test_unit_time_ratio(self, pot):
        state = LagrangianState()
        y = 0.05 - 0.08j
        u = busemann_grad_dir(state.boundary_point, y)
        vals = []
        for t in (0.6, 1.6):
            j = wkb.PropagationJob(
                potential=pot, state=state, t=t, delta=0.0, horizon_const=0.6
            )
            zl, _ = flow_z(y, u, t)
            vals.append(wkb.amplitude_b0(j, complex(zl)))
        assert abs(vals[1] / vals[0] - math.exp(-0.5)) < 1e-6

    def test_fd_jacobian_matches_contraction(self, job):
        # contraction rate of horocyclic separation under the backward flow
        p = job.state.boundary_point
        y = 0.12 + 0.07j
        u = busemann_grad_dir(p, y)
        zl, _ = flow_z(y, u, job.t)
        zl = complex(zl)
        eps = 1e-5
        side, _ = flow_z(zl, 1j * busemann_grad_dir(p, zl), eps)
        # correct the sideways step back onto the horocycle of zl
        db = busemann(p, side) - busemann(p, zl)
        side, _ = flow_z(side, busemann_grad_dir(p, side), -db)
        d0 = hyp_distance_z(np.asarray(side), np.asarray(zl))
        back0, _ = flow_z(zl, busemann_grad_dir(p, zl), -job.t)
        back1, _ = flow_z(side, busemann_grad_dir(p, side), -job.t)
        d1 = hyp_distance_z(np.asarray(back1), np.asarray(back0))
        jac_fd = float(d1 / d0)
        assert abs(jac_fd - math.exp(-job.t)) < 2e-4
        b0 = wkb.amplitude_b0(job, zl)
        a0 = amplitude_a0(job.state, complex(back0))
        assert abs((b0 / a0) ** 2 - jac_fd) < 3e-4

    def test_sup_decay_slope(self):
        pot01 = build_net(0.01, BETA, seed=11)
        state = LagrangianState()
        ys = np.array([0.0, 0.1 + 0.05j, -0.08 + 0.11j])
        u = busemann_grad_dir(state.boundary_point, ys)
        ts = np.linspace(1.0, 5.0, 9)
        sup = []
        for t in ts:
            j = wkb.PropagationJob(
                potential=pot01, state=state, t=float(t), delta=0.01**0.8,
                horizon_const=1.2,
            )
            zl, _ = flow_z(ys, u, float(t))
            sup.append(max(wkb.amplitude_b0(j, z) for z in zl))
        slope = np.polyfit(ts, np.log(sup), 1)[0]
        assert abs(slope - (-0.5)) < 0.025


class TestDirection:
    def test_identity_reduction(self, job):
        z = 0.2 + 0.1j
        xi = wkb.xi_direction(job, z)
        assert abs(abs(xi) - 1.0) < 1e-12
        assert abs(xi - busemann_grad_dir(job.state.boundary_point, z)) < 1e-12

    def test_chart_components_rotate(self, job):
        z = 0.15 - 0.2j
        x = DiskPoint.from_z(z)
        c0 = wkb.xi_direction(job, z, chart=FrameChart.at(x, 0.0))
        a = 0.7
        ca = wkb.xi_direction(job, z, chart=FrameChart.at(x, a))
        want = (
            math.cos(a) * c0[0] + math.sin(a) * c0[1],
            -math.sin(a) * c0[0] + math.cos(a) * c0[1],
        )
        assert abs(ca[0] - want[0]) < 1e-10 and abs(ca[1] - want[1]) < 1e-10

    def test_pullback_matches_fd_gradient(self, job):
        # gradient direction of y -> B_p(g y) at x, against the analytic
        # derivative-phase rotation
        group = default_group()
        g = group.group_ball(4.0).maps()[3]
        x = 0.21 + 0.08j
        zlift = g.apply_z(np.asarray(x))
        xi = wkb.xi_direction(job, complex(zlift), reducing_map=g.inverse())
        eps = 1e-6
        p = job.state.boundary_point

        def phase_at(y):
            return busemann(p, g.apply_z(np.asarray(y)))

        gx = (phase_at(x + eps) - phase_at(x - eps)) / (2 * eps)
        gy = (phase_at(x + 1j * eps) - phase_at(x - 1j * eps)) / (2 * eps)
        fd = gx + 1j * gy
        fd /= abs(fd)
        assert abs(fd - xi) < 1e-5


class TestBundle:
    def test_matches_pointwise_ops(self, job):
        x = DiskPoint.from_z(0.3 + 0.21j)
        bundle = wkb.prepare_point(job, x)
        assert len(bundle.b0) == len(bundle.lifts)
        om = job.potential.omegas
        th = bundle.thetas(om)[0]
        for l in range(len(bundle.b0)):
            zl = complex(bundle.lifts.z_lift[l])
            assert abs(th[l] - wkb.theta_phase(job, zl, omegas=om)) < 1e-10
            assert abs(bundle.b0[l] - wkb.amplitude_b0(job, zl)) < 1e-13
            assert abs(bundle.phi0[l] - wkb.phi_unperturbed(job, zl)) < 1e-13
            assert abs(abs(bundle.xi[l]) - 1.0) < 1e-10

    def test_ensemble_matrix_shape(self, job):
        from hypwave.potential import ensemble_omegas

        bundle = wkb.prepare_point(job, DiskPoint.from_z(0.1 - 0.25j))
        draws = ensemble_omegas(job.potential, 7)
        th = bundle.thetas(draws)
        assert th.shape == (7, len(bundle.b0))
        assert np.allclose(th[0], bundle.thetas(job.potential.omegas)[0])

    def test_symbol_bundle(self, pot_symbol):
        j = wkb.PropagationJob(
            potential=pot_symbol, state=LagrangianState(), t=0.9, delta=0.1**0.8
        )
        bundle = wkb.prepare_point(j, DiskPoint.from_z(0.2 + 0.1j))
        om = pot_symbol.omegas
        th = bundle.thetas(om)[0]
        for l in range(min(3, len(bundle.b0))):
            zl = complex(bundle.lifts.z_lift[l])
            assert abs(th[l] - wkb.theta_phase(j, zl, omegas=om)) < 1e-9

    def test_propagate_contributions(self, job):
        # pick a point guaranteed to sit on the propagated support strip
        y = 0.1 + 0.05j
        u = busemann_grad_dir(job.state.boundary_point, y)
        zfwd, _ = flow_z(y, u, job.t)
        x, _ = default_group().reduce(DiskPoint.from_z(complex(zfwd)))
        out = wkb.propagate(job, x)
        assert len(out) >= 1
        assert max(c.b0 for c in out) > 0.0
        for c in out:
            assert c.b0 >= 0.0
            assert abs(abs(c.xi) - 1.0) < 1e-8
            assert c.theta_excised is None
        # total amplitude bounds the wave pointwise
        assert sum(c.b0 for c in out) < 10.0


class TestMassConservation:
    def test_unfolded_l2_mass(self, pot):
        # the propagated principal term carries unit mass: integrate
        # sum over lifts of b0^2 by unfolding to the disk
        state = LagrangianState()
        t = 1.3
        j = wkb.PropagationJob(potential=pot, state=state, t=t, delta=H**0.8)
        rmax = t + state.support_distance_to_origin() + state.amplitude_radius + 0.02
        lim = math.tanh(rmax / 2.0)
        n = 1400
        g1 = np.linspace(-lim, lim, n)
        xx, yy = np.meshgrid(g1, g1)
        zz = (xx + 1j * yy).ravel()
        zz = zz[np.abs(zz) < lim]
        b0 = wkb.amplitude_b0(j, zz)
        lam2 = (2.0 / (1.0 - np.abs(zz) ** 2)) ** 2
        da = (g1[1] - g1[0]) ** 2
        mass = float(np.sum(b0**2 * lam2) * da)
        assert abs(mass - state.amplitude_norm**2) < 0.01


class TestPerturbedRay:
    def test_reduces_to_geodesic(self, job):
        z0, u0 = 0.1 + 0.05j, np.exp(0.4j)
        z, u, _ = wkb.perturbed_ray(job, z0, u0, 1.4, n_steps=1500, delta=0.0)
        zw, uw = flow_z(z0, u0, 1.4)
        assert abs(z - zw) < 1e-8
        assert abs(u - uw) < 1e-7

    def test_time_reversal_round_trip(self, job):
        z0, u0 = 0.05 - 0.1j, np.exp(1.1j)
        t = 0.9
        z1, u1, xi1 = wkb.perturbed_ray(job, z0, u0, t, n_steps=1200)
        z2, u2, xi2 = wkb.perturbed_ray(job, z1, -u1, t, n_steps=1200, xi0=-xi1)
        assert abs(z2 - z0) < 1e-6
        assert abs(-u2 - u0) < 1e-5

    def test_energy_conserved(self, job):
        z0, u0 = 0.05 - 0.1j, np.exp(1.1j)

        def energy(z, xi):
            return (1 - abs(z) ** 2) / 2 * abs(xi) + job.delta * float(
                eval_q(job.potential, np.asarray(z), group=job.group)
            )

        lam0 = 2.0 / (1.0 - abs(z0) ** 2)
        e0 = energy(z0, lam0 * u0)
        z1, _, xi1 = wkb.perturbed_ray(job, z0, u0, 1.1, n_steps=1500)
        assert abs(energy(z1, xi1) - e0) < 1e-8

    def test_stays_near_unperturbed(self, job):
        z0, u0 = 0.12 + 0.02j, np.exp(-0.3j)
        t = 1.0
        z, _, _ = wkb.perturbed_ray(job, z0, u0, t, n_steps=1200)
        zw, _ = flow_z(z0, u0, t)
        drift = float(hyp_distance_z(np.asarray(z), np.asarray(zw)))
        bound = math.exp(3.0 * t) * job.delta * job.h ** (-job.beta)
        assert drift <= bound
