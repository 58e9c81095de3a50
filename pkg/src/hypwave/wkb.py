"""Effective WKB propagation of the Lagrangian state.

Over times t <= horizon_const * log(1/h) the propagated wave is, to principal
order, a sum over lifts x~ of the evaluation point:

    psi_t(x) = sum_lifts b0(x~) exp(i Theta(x~) / h),
    Theta    = phi0 + delta * theta,
    phi0     = B_p(x~) - t/2,
    b0       = a0(backward flow of x~ by t) * exp(-t/2),
    theta    = - integral_0^t q_omega(gamma(s)) ds

with gamma the backward unit-speed characteristic through x~ along grad B_p.
The potential enters only through theta, and theta is linear in the coupling
amplitudes: theta = -I @ omega where the line-integral matrix I depends on
the trajectory alone.  Ensembles over omega therefore reuse one I per
evaluation point, which is what makes large draw counts cheap.

Quadrature is composite Simpson with max(64, ceil(steps_per_unit * t)) nodes
(default steps_per_unit = 8 / h^beta); theta_phase can instead refine by
step-halving down to a requested tolerance.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .geometry import DiskPoint, MobiusMap, flow_z
from .lagrangian import (
    LagrangianState,
    amplitude_a0,
    busemann,
    busemann_grad_dir,
    enumerate_lifts,
)
from .potential import _sasaki_distance, eval_q
from .surface import default_group

__all__ = [
    "PropagationJob",
    "LiftContribution",
    "PropagationBundle",
    "phi_unperturbed",
    "segment_line_integrals",
    "excised_line_integrals",
    "theta_phase",
    "theta_phase_excised",
    "amplitude_b0",
    "xi_direction",
    "prepare_point",
    "propagate",
]

DEFAULT_HORIZON_CONST = 0.5


@dataclass(frozen=True)
class PropagationJob:
    """Validated parameter bundle for one propagation run.

    Construction enforces the admissibility inequalities linking the noise
    size delta to (h, beta, eps0) and the logarithmic time horizon; invalid
    combinations never produce a job.
    """

    potential: object
    state: LagrangianState
    t: float
    delta: float
    quadrature_steps_per_unit_time: int = 0  # 0: use 8 / h^beta
    horizon_const: float = DEFAULT_HORIZON_CONST
    eps0: float = 0.1
    group: object = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        h, beta = self.potential.h, self.potential.beta
        if not 0.0 < h < 1.0:
            raise ValueError("semiclassical parameter h must lie in (0, 1)")
        if self.t < 0.0:
            raise ValueError("propagation time must be nonnegative")
        tmax = self.horizon_const * math.log(1.0 / h)
        if self.t > tmax * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"t={self.t} beyond horizon {tmax:.6f}")
        d, e = self.delta, self.eps0
        slack = 1.0 + 1e-9
        if d < 0:
            raise ValueError("delta must be nonnegative")
        if d > 0 and not (
            d * h ** (-2.0 * beta - e) <= slack
            and d * d * h ** (beta - 2.0) >= h**-e / slack
            and d * h ** (beta - 1.0) <= h**e * slack
        ):
            raise ValueError(
                f"delta={d} violates the admissibility window for "
                f"h={h}, beta={beta}, eps0={e}"
            )
        if self.group is None:
            object.__setattr__(self, "group", default_group())

    @property
    def h(self):
        return self.potential.h

    @property
    def beta(self):
        return self.potential.beta

    def n_quad_nodes(self, t=None):
        t = self.t if t is None else t
        per_unit = self.quadrature_steps_per_unit_time
        if per_unit <= 0:
            per_unit = 8.0 / self.potential.h**self.potential.beta
        n = max(64, int(math.ceil(per_unit * max(t, 1e-9))))
        return n + (n % 2)


@dataclass(frozen=True)
class LiftContribution:
    """Principal-term data of one lift at one evaluation point."""

    lift: MobiusMap
    b0: float
    theta: float
    phi0: float
    xi: complex
    theta_excised: float = None

    def __post_init__(self):
        if self.b0 < 0:
            raise ValueError("amplitude must be nonnegative")
        if abs(abs(self.xi) - 1.0) > 1e-8:
            raise ValueError("xi must be a unit direction")


def phi_unperturbed(job, z):
    """Unperturbed phase at lifted point(s): Busemann minus t/2."""
    return busemann(job.state.boundary_point, z) - job.t / 2.0


def _simpson_weights(n, length):
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (length / (3.0 * n))


def segment_line_integrals(job, z_lift, lo, hi, n):
    """Per-center line integrals of the bump profile along the backward ray.

    Returns a vector v of length n_centers with
    integral_lo^hi chi(dist(gamma(s), center_j) / r) ds in v[j], so that the
    theta contribution of the segment is -v @ omega.  Trajectory nodes are
    folded into the fundamental domain before matching against the
    precomputed center images.
    """
    pot = job.potential
    s = np.linspace(lo, hi, n + 1)
    u = busemann_grad_dir(job.state.boundary_point, z_lift)
    zz, uu = flow_z(np.full(s.shape, z_lift), np.full(s.shape, u), -s)
    w = _simpson_weights(n, hi - lo)
    zr, ra, rb = job.group.reduce_batch(zz)
    out = np.zeros(pot.n_centers)
    if pot.case == "symbol":
        dph = 1.0 / (np.conj(rb) * zz + np.conj(ra)) ** 2
        ur = uu * dph / np.abs(dph)
        ds = _sasaki_distance(zr[:, None], ur[:, None], pot.img_z, pot.img_dir)
        chi = pot.profile(ds / pot.support_radius)
        np.add.at(out, pot.img_idx, w @ chi)
    else:
        kernels.accum_profile(
            zr, w, pot.img_z, pot.img_idx, pot.support_radius,
            pot.profile.kind_int, pot.profile.plateau_a, out,
        )
    return out


def theta_phase(job, z_lift, omegas=None, tol=None):
    """Perturbation phase theta at a lifted point (delta factored out).

    With tol set, the node count is doubled until the step-halving estimate
    |theta_2n - theta_n| / 15 drops below tol.
    """
    om = job.potential.omegas if omegas is None else np.asarray(omegas)
    n = job.n_quad_nodes()
    val = -float(segment_line_integrals(job, z_lift, 0.0, job.t, n) @ om)
    if tol is None or job.t == 0.0:
        return val
    for _ in range(10):
        val2 = -float(segment_line_integrals(job, z_lift, 0.0, job.t, 2 * n) @ om)
        if abs(val2 - val) / 15.0 <= tol:
            return val2
        n, val = 2 * n, val2
    return val


def _validate_intervals(intervals, t):
    prev = 0.0
    out = []
    for lo, hi in intervals:
        if lo > hi + 1e-15:
            raise ValueError(f"interval ({lo}, {hi}) reversed")
        if lo < prev - 1e-12:
            raise ValueError("intervals must be sorted and disjoint")
        lo, hi = max(0.0, lo), min(float(t), hi)
        if hi > lo:
            out.append((lo, hi))
            prev = hi
    return out


def _complement_segments(intervals, t):
    segs, pos = [], 0.0
    for lo, hi in intervals:
        if lo > pos + 1e-12:
            segs.append((pos, lo))
        pos = max(pos, hi)
    if t > pos + 1e-12:
        segs.append((pos, t))
    return segs


def excised_line_integrals(job, z_lift, intervals, per_unit=None):
    """Line-integral vector restricted to the complement of the intervals.

    theta_excised = -(this vector) @ omega; excising everything gives the
    zero vector, excising nothing reproduces the full-ray vector.
    """
    clean = _validate_intervals(intervals, job.t)
    if not clean:
        return segment_line_integrals(job, z_lift, 0.0, job.t, job.n_quad_nodes())
    if per_unit is None:
        per_unit = job.quadrature_steps_per_unit_time or (
            8.0 / job.potential.h**job.potential.beta
        )
    total = np.zeros(job.potential.n_centers)
    for lo, hi in _complement_segments(clean, job.t):
        n = max(32, int(math.ceil(per_unit * (hi - lo))))
        n += n % 2
        total += segment_line_integrals(job, z_lift, lo, hi, n)
    return total


def theta_phase_excised(job, z_lift, intervals, omegas=None, tol=None):
    """theta integrated only outside the close-approach intervals."""
    clean = _validate_intervals(intervals, job.t)
    om = job.potential.omegas if omegas is None else np.asarray(omegas)
    if not clean:
        return theta_phase(job, z_lift, omegas=om, tol=tol)
    per_unit = job.quadrature_steps_per_unit_time or (
        8.0 / job.potential.h**job.potential.beta
    )
    total = 0.0
    for lo, hi in _complement_segments(clean, job.t):
        n = max(32, int(math.ceil(per_unit * (hi - lo))))
        n += n % 2
        val = -float(segment_line_integrals(job, z_lift, lo, hi, n) @ om)
        if tol is not None:
            for _ in range(10):
                val2 = -float(segment_line_integrals(job, z_lift, lo, hi, 2 * n) @ om)
                if abs(val2 - val) / 15.0 <= tol:
                    val = val2
                    break
                n, val = 2 * n, val2
        total += val
    return total


def amplitude_b0(job, z_lift):
    """Principal amplitude carried to a lifted point."""
    back, _ = flow_z(
        np.asarray(z_lift, dtype=complex),
        busemann_grad_dir(job.state.boundary_point, np.asarray(z_lift, dtype=complex)),
        -job.t,
    )
    return amplitude_a0(job.state, back) * math.exp(-job.t / 2.0)


def xi_direction(job, z_lift, reducing_map=None, chart=None):
    """Unit phase-gradient direction at the base point.

    The gradient of the propagated phase at the lift is the Busemann
    direction; pushing it through the reducing group element rotates it by
    the derivative phase.  With a chart, returns components in the frame.
    """
    xi = busemann_grad_dir(job.state.boundary_point, np.asarray(z_lift, dtype=complex))
    if reducing_map is not None:
        dp = reducing_map.deriv_z(np.asarray(z_lift, dtype=complex))
        xi = xi * dp / np.abs(dp)
    if chart is None:
        return xi
    return (
        float(np.real(xi * np.conj(chart.e1_z))),
        float(np.real(xi * np.conj(chart.e2_z))),
    )


@dataclass(frozen=True, eq=False)
class PropagationBundle:
    """Omega-independent propagation data at one evaluation point."""

    x: DiskPoint
    lifts: object
    b0: np.ndarray
    phi0: np.ndarray
    xi: np.ndarray
    line_integrals: np.ndarray  # (n_lifts, n_centers)

    def thetas(self, omegas):
        """theta per lift; omegas may be a matrix (draws x centers)."""
        return -(np.atleast_2d(omegas) @ self.line_integrals.T)


def prepare_point(job, x):
    """Enumerate lifts at x and precompute all omega-independent pieces."""
    x_red, gmap = job.group.reduce(x if isinstance(x, DiskPoint) else DiskPoint.from_z(x))
    lifts = enumerate_lifts(job.group, x_red, job.t, job.state)
    nl = len(lifts)
    pot = job.potential
    ncen = pot.n_centers
    I = np.zeros((nl, ncen))
    n = job.n_quad_nodes()
    b0 = np.zeros(nl)
    phi0 = np.zeros(nl)
    xi = np.zeros(nl, dtype=complex)
    for l in range(nl):
        zl = complex(lifts.z_lift[l])
        I[l] = segment_line_integrals(job, zl, 0.0, job.t, n)
        b0[l] = float(amplitude_b0(job, zl))
        phi0[l] = float(phi_unperturbed(job, zl))
        # reducing element sends the lift back to x; it is the inverse of
        # the lift's group element
        g_inv = lifts.elements[l][0].inverse()
        xi[l] = complex(xi_direction(job, zl, reducing_map=g_inv))
    return PropagationBundle(x=x_red, lifts=lifts, b0=b0, phi0=phi0, xi=xi, line_integrals=I)


def propagate(job, x, omegas=None, intervals_per_lift=None):
    """Full per-lift contributions at one point for one amplitude draw."""
    bundle = prepare_point(job, x)
    omega = job.potential.omegas if omegas is None else omegas
    theta = bundle.thetas(omega)[0]
    out = []
    for l in range(len(bundle.b0)):
        exc = None
        if intervals_per_lift is not None and intervals_per_lift[l]:
            exc = theta_phase_excised(
                job, complex(bundle.lifts.z_lift[l]), intervals_per_lift[l], omegas=omega
            )
        out.append(
            LiftContribution(
                lift=bundle.lifts.elements[l][0],
                b0=float(bundle.b0[l]),
                theta=float(theta[l]),
                phi0=float(bundle.phi0[l]),
                xi=complex(bundle.xi[l]),
                theta_excised=exc,
            )
        )
    return out


# --- validation-mode perturbed ray integrator --------------------------------


def perturbed_ray(job, z0, u0, t, n_steps=2000, delta=None, xi0=None):
    """RK4 integration of the ray equations with the potential switched on.

    Hamiltonian |xi|_g + delta q(z) in euclidean disk coordinates; used only
    to validate the effective (unperturbed-characteristic) model, never in
    the propagation path.  Returns (z, u, xi) with u the unit direction and
    xi the transported covector; pass xi0 to continue an earlier ray (the
    covector norm drifts off the unit cosphere once delta > 0, so chaining
    legs through u alone would lose energy information).
    """
    delta = job.delta if delta is None else delta
    pot = job.potential
    group = job.group

    def grad_q(z):
        eps = 1e-6
        qu = (
            eval_q(pot, z + eps, group=group) - eval_q(pot, z - eps, group=group)
        ) / (2 * eps)
        qv = (
            eval_q(pot, z + 1j * eps, group=group) - eval_q(pot, z - 1j * eps, group=group)
        ) / (2 * eps)
        return qu + 1j * qv

    def rhs(state):
        z, xi = state
        lam_inv = (1.0 - abs(z) ** 2) / 2.0  # reciprocal conformal factor
        nxi = abs(xi)
        dz = lam_inv * xi / nxi
        # -grad_z of lam_inv*|xi| is +z|xi|; potential force is -delta grad q
        dxi = z * nxi - delta * grad_q(z)
        return np.array([dz, dxi])

    if xi0 is None:
        # start on the unit cosphere: |xi| equals the conformal factor
        xi0 = 2.0 / (1.0 - abs(z0) ** 2) * u0
    state = np.array([z0, xi0])
    dt = t / n_steps
    for _ in range(n_steps):
        k1 = rhs(state)
        k2 = rhs(state + dt / 2 * k1)
        k3 = rhs(state + dt / 2 * k2)
        k4 = rhs(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    z, xi = state
    return z, xi / abs(xi), xi
