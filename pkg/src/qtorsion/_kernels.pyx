# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled P1 element kernels; same interface as ``_kernels_py``."""

import numpy as np
from libc.math cimport pow


def element_geometry(double[:, ::1] nodes, long[:, ::1] tris):
    cdef Py_ssize_t nt = tris.shape[0], t
    cdef double x0, y0, d1x, d1y, d2x, d2y, det
    area_np = np.empty(nt)
    grad_np = np.empty((nt, 3, 2))
    cdef double[::1] area = area_np
    cdef double[:, :, ::1] grad = grad_np
    for t in range(nt):
        x0 = nodes[tris[t, 0], 0]
        y0 = nodes[tris[t, 0], 1]
        d1x = nodes[tris[t, 1], 0] - x0
        d1y = nodes[tris[t, 1], 1] - y0
        d2x = nodes[tris[t, 2], 0] - x0
        d2y = nodes[tris[t, 2], 1] - y0
        det = d1x * d2y - d1y * d2x
        grad[t, 1, 0] = d2y / det
        grad[t, 1, 1] = -d2x / det
        grad[t, 2, 0] = -d1y / det
        grad[t, 2, 1] = d1x / det
        grad[t, 0, 0] = -grad[t, 1, 0] - grad[t, 2, 0]
        grad[t, 0, 1] = -grad[t, 1, 1] - grad[t, 2, 1]
        area[t] = 0.5 * det
    return area_np, grad_np


def element_gradients(double[:, :, ::1] grad, long[:, ::1] tris, double[::1] u):
    cdef Py_ssize_t nt = tris.shape[0], t, i
    g_np = np.zeros((nt, 2))
    cdef double[:, ::1] g = g_np
    cdef double ui
    for t in range(nt):
        for i in range(3):
            ui = u[tris[t, i]]
            g[t, 0] += grad[t, i, 0] * ui
            g[t, 1] += grad[t, i, 1] * ui
    return g_np


def energy(double[::1] area, double[:, ::1] g, double q, double eps):
    cdef Py_ssize_t nt = area.shape[0], t
    cdef double total = 0.0, s
    for t in range(nt):
        s = eps * eps + g[t, 0] * g[t, 0] + g[t, 1] * g[t, 1]
        total += area[t] * pow(s, 0.5 * q)
    return total / q


def assemble(double[:, :, ::1] grad, double[::1] area, double[:, ::1] g, long[:, ::1] tris,
             double q, double eps, long[:, ::1] entry_map, Py_ssize_t nnz,
             Py_ssize_t n_nodes, bint newton):
    cdef Py_ssize_t nt = tris.shape[0], t, i, j, slot
    data_np = np.zeros(nnz)
    flux_np = np.zeros(n_nodes)
    cdef double[::1] data = data_np
    cdef double[::1] flux = flux_np
    cdef double s, w, c, a, kij
    cdef double bg[3]
    cdef bint rank_one = newton and q != 2.0
    for t in range(nt):
        s = eps * eps + g[t, 0] * g[t, 0] + g[t, 1] * g[t, 1]
        if q == 2.0:
            w = 1.0
        else:
            w = pow(s, 0.5 * (q - 2.0))
        c = (q - 2.0) * w / s if rank_one else 0.0
        a = area[t]
        for i in range(3):
            bg[i] = grad[t, i, 0] * g[t, 0] + grad[t, i, 1] * g[t, 1]
            flux[tris[t, i]] += a * w * bg[i]
        for i in range(3):
            for j in range(3):
                slot = entry_map[t, 3 * i + j]
                if slot < 0:
                    continue
                kij = w * (grad[t, i, 0] * grad[t, j, 0] + grad[t, i, 1] * grad[t, j, 1])
                if rank_one:
                    kij += c * bg[i] * bg[j]
                data[slot] += a * kij
    return data_np, flux_np
