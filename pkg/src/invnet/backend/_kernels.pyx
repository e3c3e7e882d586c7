# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (fused elementwise ops, Adam, stencil)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, pow, sqrt

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    cdef double z = exp(-fabs(x))
    if x >= 0.0:
        return 1.0 / (1.0 + z)
    return z / (1.0 + z)


def sigmoid(x):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(xa)
    cdef double[::1] xv = xa.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = _sigmoid(xv[i])
    return out


def silu(x):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(xa)
    cdef double[::1] xv = xa.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] * _sigmoid(xv[i])
    return out


def silu_vjp(x, g):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    ga = np.ascontiguousarray(g, dtype=np.float64)
    out = np.empty_like(xa)
    cdef double[::1] xv = xa.ravel()
    cdef double[::1] gv = ga.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double s
    for i in range(n):
        s = _sigmoid(xv[i])
        ov[i] = gv[i] * (s * (1.0 + xv[i] * (1.0 - s)))
    return out


def relu(x):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(xa)
    cdef double[::1] xv = xa.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] if xv[i] > 0.0 else 0.0
    return out


def relu_vjp(x, g):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    ga = np.ascontiguousarray(g, dtype=np.float64)
    out = np.empty_like(ga)
    cdef double[::1] xv = xa.ravel()
    cdef double[::1] gv = ga.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = gv[i] if xv[i] > 0.0 else 0.0
    return out


def adam_update(p, g, m, v, step, lr, beta1, beta2, eps, weight_decay):
    """One fused Adam step, in place on p, m, v (all C-contiguous float64)."""
    if not (p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
        raise ValueError("adam_update requires C-contiguous parameter arrays")
    ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[::1] pv = p.ravel()
    cdef const double[::1] gv = ga.ravel()  # grads may arrive read-only
    cdef double[::1] mv = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double b1 = beta1, b2 = beta2, e = eps, wd = weight_decay, rate = lr
    cdef double c1 = 1.0 - pow(b1, <double> step)
    cdef double c2 = 1.0 - pow(b2, <double> step)
    cdef double decay = 1.0 - rate * wd
    cdef double mh, vh
    for i in range(n):
        mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i]
        vv[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i]
        mh = mv[i] / c1
        vh = vv[i] / c2
        if wd != 0.0:
            pv[i] = pv[i] * decay
        pv[i] = pv[i] - rate * mh / (sqrt(vh) + e)


def rd_rhs(c, d1, d2, kappa, inv_h2):
    """Two-species reaction-diffusion RHS; see kernels_py.rd_rhs for the contract."""
    ca = np.ascontiguousarray(c, dtype=np.float64)
    squeeze = ca.ndim == 3
    if squeeze:
        ca = ca[None]
    if ca.ndim != 4 or ca.shape[1] != 2:
        raise ValueError("rd_rhs expects state shaped (B, 2, G, G) or (2, G, G)")
    cdef Py_ssize_t nb = ca.shape[0], ng = ca.shape[2]
    d1a = np.ascontiguousarray(np.broadcast_to(np.asarray(d1, dtype=np.float64), (nb,)))
    d2a = np.ascontiguousarray(np.broadcast_to(np.asarray(d2, dtype=np.float64), (nb,)))
    ka = np.ascontiguousarray(np.broadcast_to(np.asarray(kappa, dtype=np.float64), (nb,)))
    out = np.empty_like(ca)
    cdef const double[:, :, :, ::1] cv = ca
    cdef double[:, :, :, ::1] ov = out
    cdef const double[::1] d1v = d1a, d2v = d2a, kv = ka
    cdef double ih2 = inv_h2
    cdef Py_ssize_t b, i, j, iu, idn, jl, jr
    cdef double u1, u2, lap1, lap2
    for b in range(nb):
        for i in range(ng):
            iu = i - 1 if i > 0 else 0
            idn = i + 1 if i < ng - 1 else ng - 1
            for j in range(ng):
                jl = j - 1 if j > 0 else 0
                jr = j + 1 if j < ng - 1 else ng - 1
                u1 = cv[b, 0, i, j]
                u2 = cv[b, 1, i, j]
                lap1 = (cv[b, 0, iu, j] + cv[b, 0, idn, j] + cv[b, 0, i, jl]
                        + cv[b, 0, i, jr] - 4.0 * u1) * ih2
                lap2 = (cv[b, 1, iu, j] + cv[b, 1, idn, j] + cv[b, 1, i, jl]
                        + cv[b, 1, i, jr] - 4.0 * u2) * ih2
                ov[b, 0, i, j] = d1v[b] * lap1 + (u1 - u1 * u1 * u1 - kv[b] - u2)
                ov[b, 1, i, j] = d2v[b] * lap2 + (u1 - u2)
    if squeeze:
        return out[0]
    return out
