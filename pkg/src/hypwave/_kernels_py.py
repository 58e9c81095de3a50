"""Pure NumPy implementations of the hot kernels.

Same call signatures as the compiled module `hypwave._kernels`; selected by
`hypwave.kernels` when the extension is unavailable or HYPWAVE_PURE is set.
"""

import numpy as np

BACKEND = "python"


class ReductionError(RuntimeError):
    pass


def _dist(z, w):
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(np.maximum(1.0 + num / den, 1.0))


def reduce_batch(z, ga, gb, max_steps=200, tie_tol=1e-9, decrease_tol=1e-13):
    """Greedy reduction of points to the Dirichlet domain about the origin.

    Repeatedly applies the inverse of the generator whose translate of the
    origin is nearest, while that strictly decreases the distance to the
    origin.  Among translates equidistant within tie_tol the smallest
    generator index is chosen.

    Returns (z_red, A, B) where (A[i], B[i]) is the applied group element g
    with z_red[i] = g(z[i]).
    """
    z = np.array(z, dtype=np.complex128)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    ga = np.asarray(ga, dtype=np.complex128)
    gb = np.asarray(gb, dtype=np.complex128)
    centers = gb / np.conj(ga)
    A = np.ones_like(z)
    B = np.zeros_like(z)
    active = np.arange(z.size)
    for _ in range(max_steps):
        if active.size == 0:
            break
        zs = z[active]
        d0 = _dist(zs, 0.0)
        D = _dist(zs[:, None], centers[None, :])
        dmin = D.min(axis=1)
        k = np.argmax(D <= (dmin + tie_tol)[:, None], axis=1)
        move = dmin < d0 - decrease_tol
        if not move.any():
            active = active[:0]
            break
        idx = active[move]
        kk = k[move]
        ak = ga[kk]
        bk = gb[kk]
        # apply g_k^{-1} to the point and to the accumulated element
        z[idx] = (np.conj(ak) * z[idx] - bk) / (-np.conj(bk) * z[idx] + ak)
        A2 = np.conj(ak) * A[idx] - bk * np.conj(B[idx])
        B2 = np.conj(ak) * B[idx] - bk * np.conj(A[idx])
        A[idx] = A2
        B[idx] = B2
        active = idx
    else:
        if active.size:
            raise ReductionError(
                f"reduction did not settle in {max_steps} steps at z={z[active[0]]}"
            )
    if scalar:
        return z[0], A[0], B[0]
    return z, A, B


def accum_profile(nodes, node_w, images, center_idx, r_supp, kind, plateau_a, out):
    """Accumulate weighted bump-profile sums along quadrature nodes.

    For each image point j (a translate of some bump center), adds
    sum_i node_w[i] * chi(d(nodes[i], images[j]) / r_supp) to
    out[center_idx[j]].  kind 0: chi(s) = (1-s^2)^4; kind 1: plateau,
    chi = 1 for s <= plateau_a, quartic rolloff above.
    """
    nodes = np.asarray(nodes, dtype=np.complex128)
    images = np.asarray(images, dtype=np.complex128)
    if nodes.size == 0 or images.size == 0:
        return out
    d = _dist(nodes[:, None], images[None, :])
    s = d / r_supp
    chi = profile_value(s, kind, plateau_a)
    vals = node_w @ chi
    np.add.at(out, np.asarray(center_idx, dtype=np.int64), vals)
    return out


def profile_value(s, kind, plateau_a):
    """Bump profile chi(s), vectorized, supported on s < 1."""
    s = np.abs(np.asarray(s, dtype=np.float64))
    if kind == 0:
        t = 1.0 - s * s
        return np.where(s < 1.0, t, 0.0) ** 4
    q = np.clip((s - plateau_a) / (1.0 - plateau_a), 0.0, None)
    t = 1.0 - q * q
    return np.where(q < 1.0, t, 0.0) ** 4
