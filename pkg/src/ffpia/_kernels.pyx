# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the Monte Carlo and likelihood code.

Semantics match ``_kernels_py`` exactly; see that module for documentation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, log, M_PI

cnp.import_array()


def homodyne_feedforward(double[:, ::1] means, double[::1] c, double[::1] k,
                         long[::1] rest, double sigma, double[::1] z,
                         long[::1] tgt, double[::1] gain):
    cdef Py_ssize_t S = means.shape[0], D = means.shape[1]
    cdef Py_ssize_t R = rest.shape[0], T = tgt.shape[0]
    cdef Py_ssize_t s, d, r, t
    cdef double m, q
    out_arr = np.empty((S, R), dtype=np.float64)
    q_arr = np.empty(S, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] qo = q_arr
    with nogil:
        for s in range(S):
            m = 0.0
            for d in range(D):
                m += c[d] * means[s, d]
            q = m + sigma * z[s]
            qo[s] = q
            for r in range(R):
                out[s, r] = means[s, rest[r]] + k[r] * (q - m)
            for t in range(T):
                out[s, tgt[t]] += gain[t] * q
    return out_arr, q_arr


def scan_loglik(double[::1] phases, double[::1] q, double[::1] theta):
    cdef Py_ssize_t N = phases.shape[0], j, a, b
    cdef double mx = theta[0], mp = theta[1], vxx = theta[2], vpp = theta[3], vxp = theta[4]
    cdef double cs, sn, mu, V, r, iv, dmu, dV, hmm, hmV, hVV, ll = 0.0
    cdef double jm[5]
    cdef double jv[5]
    grad_arr = np.zeros(5)
    hess_arr = np.zeros((5, 5))
    cdef double[::1] g = grad_arr
    cdef double[:, ::1] h = hess_arr
    for a in range(5):
        jm[a] = 0.0
        jv[a] = 0.0
    with nogil:
        for j in range(N):
            cs = cos(phases[j])
            sn = sin(phases[j])
            mu = mx * cs + mp * sn
            V = vxx * cs * cs + vpp * sn * sn + 2.0 * vxp * sn * cs
            if V <= 0.0:
                ll = -1.0 / 0.0
                break
            r = q[j] - mu
            iv = 1.0 / V
            ll += -0.5 * log(2.0 * M_PI * V) - 0.5 * r * r * iv
            dmu = r * iv
            dV = 0.5 * iv * (r * r * iv - 1.0)
            hmm = -iv
            hmV = -r * iv * iv
            hVV = iv * iv * (0.5 - r * r * iv)
            jm[0] = cs
            jm[1] = sn
            jv[2] = cs * cs
            jv[3] = sn * sn
            jv[4] = 2.0 * sn * cs
            for a in range(5):
                g[a] += dmu * jm[a] + dV * jv[a]
                for b in range(5):
                    h[a, b] += (hmm * jm[a] * jm[b] + hmV * (jm[a] * jv[b] + jv[a] * jm[b])
                                + hVV * jv[a] * jv[b])
    return ll, grad_arr, hess_arr
