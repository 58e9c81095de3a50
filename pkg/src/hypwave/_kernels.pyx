# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: domain reduction and bump-profile accumulation.

Mirrors hypwave._kernels_py; parity is enforced by tests.
"""

import numpy as np

from libc.math cimport acosh, cosh

BACKEND = "cython"


class ReductionError(RuntimeError):
    pass


cdef inline double complex cconj(double complex x) nogil:
    return x.conjugate()


cdef inline double _dist1(double complex z, double complex w) nogil:
    cdef double dz2 = (z.real - w.real) * (z.real - w.real) + \
                      (z.imag - w.imag) * (z.imag - w.imag)
    cdef double fz = 1.0 - (z.real * z.real + z.imag * z.imag)
    cdef double fw = 1.0 - (w.real * w.real + w.imag * w.imag)
    cdef double arg = 1.0 + 2.0 * dz2 / (fz * fw)
    if arg < 1.0:
        arg = 1.0
    return acosh(arg)


def reduce_batch(z_in, ga_in, gb_in, int max_steps=200, double tie_tol=1e-9,
                 double decrease_tol=1e-13):
    """See hypwave._kernels_py.reduce_batch."""
    z_arr = np.array(z_in, dtype=np.complex128)
    scalar = z_arr.ndim == 0
    z_arr = np.ascontiguousarray(np.atleast_1d(z_arr))
    ga_arr = np.ascontiguousarray(ga_in, dtype=np.complex128)
    gb_arr = np.ascontiguousarray(gb_in, dtype=np.complex128)
    centers_arr = gb_arr / np.conj(ga_arr)
    A_arr = np.ones_like(z_arr)
    B_arr = np.zeros_like(z_arr)

    cdef double complex[::1] z = z_arr
    cdef double complex[::1] ga = ga_arr
    cdef double complex[::1] gb = gb_arr
    cdef double complex[::1] centers = centers_arr
    cdef double complex[::1] A = A_arr
    cdef double complex[::1] B = B_arr
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t ng = ga.shape[0]
    cdef Py_ssize_t i, k, kbest, step
    cdef double d0, d, dmin
    cdef double complex zi, ak, bk, a2, b2
    cdef int stuck = 0
    cdef Py_ssize_t stuck_at = 0

    with nogil:
        for i in range(n):
            zi = z[i]
            for step in range(max_steps + 1):
                if step == max_steps:
                    stuck = 1
                    stuck_at = i
                    break
                d0 = _dist1(zi, 0)
                dmin = 1e300
                for k in range(ng):
                    d = _dist1(zi, centers[k])
                    if d < dmin:
                        dmin = d
                if dmin >= d0 - decrease_tol:
                    break
                # tie-break: smallest index within tie_tol of the minimum
                kbest = 0
                for k in range(ng):
                    if _dist1(zi, centers[k]) <= dmin + tie_tol:
                        kbest = k
                        break
                ak = ga[kbest]
                bk = gb[kbest]
                zi = (cconj(ak) * zi - bk) / (-cconj(bk) * zi + ak)
                a2 = cconj(ak) * A[i] - bk * cconj(B[i])
                b2 = cconj(ak) * B[i] - bk * cconj(A[i])
                A[i] = a2
                B[i] = b2
            if stuck:
                break
            z[i] = zi
    if stuck:
        raise ReductionError(
            f"reduction did not settle in {max_steps} steps at z={z_arr[stuck_at]}"
        )
    if scalar:
        return z_arr[0], A_arr[0], B_arr[0]
    return z_arr, A_arr, B_arr


def accum_profile(nodes_in, node_w_in, images_in, center_idx_in, double r_supp,
                  int kind, double plateau_a, out_in):
    """See hypwave._kernels_py.accum_profile."""
    nodes_arr = np.ascontiguousarray(nodes_in, dtype=np.complex128)
    w_arr = np.ascontiguousarray(node_w_in, dtype=np.float64)
    images_arr = np.ascontiguousarray(images_in, dtype=np.complex128)
    idx_arr = np.ascontiguousarray(center_idx_in, dtype=np.int64)
    if nodes_arr.size == 0 or images_arr.size == 0:
        return out_in

    cdef double complex[::1] nodes = nodes_arr
    cdef double[::1] w = w_arr
    cdef double complex[::1] images = images_arr
    cdef long[::1] cidx = idx_arr
    cdef double[::1] out = out_in
    cdef Py_ssize_t m = nodes.shape[0]
    cdef Py_ssize_t nj = images.shape[0]
    cdef Py_ssize_t i, j
    cdef double cosh_r = cosh(r_supp)
    cdef double fz, fw, dz2, arg, s, t, q, chi, acc
    cdef double complex zi, wj

    with nogil:
        for j in range(nj):
            wj = images[j]
            fw = 1.0 - (wj.real * wj.real + wj.imag * wj.imag)
            acc = 0.0
            for i in range(m):
                zi = nodes[i]
                fz = 1.0 - (zi.real * zi.real + zi.imag * zi.imag)
                dz2 = (zi.real - wj.real) * (zi.real - wj.real) + \
                      (zi.imag - wj.imag) * (zi.imag - wj.imag)
                arg = 1.0 + 2.0 * dz2 / (fz * fw)
                if arg >= cosh_r:
                    continue
                if arg < 1.0:
                    arg = 1.0
                s = acosh(arg) / r_supp
                if kind == 0:
                    t = 1.0 - s * s
                    if t <= 0.0:
                        continue
                    chi = t * t * t * t
                else:
                    if s <= plateau_a:
                        chi = 1.0
                    else:
                        q = (s - plateau_a) / (1.0 - plateau_a)
                        t = 1.0 - q * q
                        if t <= 0.0:
                            continue
                        chi = t * t * t * t
                acc += w[i] * chi
            out[cidx[j]] += acc
    return out_in
