# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: ray/grid Simpson weights and RK4 transport."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef inline double _simpson_weight(Py_ssize_t k, Py_ssize_t nseg, double h):
    if k == 0 or k == nseg:
        return h / 3.0
    if k % 2 == 1:
        return 4.0 * h / 3.0
    return 2.0 * h / 3.0


def ray_grid_weights(double[:, ::1] start, double[:, ::1] xi, double[::1] length,
                     Py_ssize_t nseg, double[::1] origin, double spacing,
                     Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz):
    """CSR arrays of ``W[r, node] = int_ray hat_node(x(t)) dt`` (composite Simpson)."""
    cdef Py_ssize_t nray = start.shape[0]
    cdef Py_ssize_t nnode = nx * ny * nz
    cdef double[::1] acc = np.zeros(nnode)
    cdef cnp.int64_t[::1] touched = np.empty(8 * (nseg + 1), dtype=np.int64)
    cdef Py_ssize_t ntouched, r, k, t, cx, cy, cz, ix, iy, iz, node
    cdef double h, w, px, py, pz, ux, uy, uz, sx, sy, sz, wx, wy, wz, wt
    indptr = np.zeros(nray + 1, dtype=np.int64)
    chunks_idx = []
    chunks_val = []
    cdef cnp.int64_t[::1] ip = indptr
    cdef cnp.int64_t[::1] out_idx
    cdef double[::1] out_val
    cdef Py_ssize_t total = 0
    for r in range(nray):
        ntouched = 0
        h = length[r] / nseg
        for k in range(nseg + 1):
            w = _simpson_weight(k, nseg, h)
            px = start[r, 0] + k * h * xi[r, 0]
            py = start[r, 1] + k * h * xi[r, 1]
            pz = start[r, 2] + k * h * xi[r, 2]
            ux = (px - origin[0]) / spacing
            uy = (py - origin[1]) / spacing
            uz = (pz - origin[2]) / spacing
            ix = <Py_ssize_t> floor(ux)
            iy = <Py_ssize_t> floor(uy)
            iz = <Py_ssize_t> floor(uz)
            sx = ux - ix
            sy = uy - iy
            sz = uz - iz
            for cx in range(2):
                if ix + cx < 0 or ix + cx >= nx:
                    continue
                wx = sx if cx else 1.0 - sx
                for cy in range(2):
                    if iy + cy < 0 or iy + cy >= ny:
                        continue
                    wy = sy if cy else 1.0 - sy
                    for cz in range(2):
                        if iz + cz < 0 or iz + cz >= nz:
                            continue
                        wz = sz if cz else 1.0 - sz
                        wt = w * wx * wy * wz
                        if wt == 0.0:
                            continue
                        node = ((ix + cx) * ny + (iy + cy)) * nz + (iz + cz)
                        if acc[node] == 0.0:
                            touched[ntouched] = node
                            ntouched += 1
                        acc[node] += wt
        out_idx = np.empty(ntouched, dtype=np.int64)
        out_val = np.empty(ntouched)
        for t in range(ntouched):
            node = touched[t]
            out_idx[t] = node
            out_val[t] = acc[node]
            acc[node] = 0.0
        chunks_idx.append(np.asarray(out_idx))
        chunks_val.append(np.asarray(out_val))
        total += ntouched
        ip[r + 1] = total
    if nray:
        indices = np.concatenate(chunks_idx)
        data = np.concatenate(chunks_val)
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    return indptr, indices, data


cdef void _interp(double complex[:, :, :, :, ::1] vals, double[::1] origin, double spacing,
                  double px, double py, double pz, Py_ssize_t n, double complex* out) nogil:
    cdef Py_ssize_t nx = vals.shape[0], ny = vals.shape[1], nz = vals.shape[2]
    cdef double ux = (px - origin[0]) / spacing
    cdef double uy = (py - origin[1]) / spacing
    cdef double uz = (pz - origin[2]) / spacing
    cdef Py_ssize_t ix = <Py_ssize_t> floor(ux), iy = <Py_ssize_t> floor(uy), iz = <Py_ssize_t> floor(uz)
    cdef double sx = ux - ix, sy = uy - iy, sz = uz - iz, w
    cdef Py_ssize_t cx, cy, cz, a, b
    for a in range(n * n):
        out[a] = 0
    for cx in range(2):
        if ix + cx < 0 or ix + cx >= nx:
            continue
        for cy in range(2):
            if iy + cy < 0 or iy + cy >= ny:
                continue
            for cz in range(2):
                if iz + cz < 0 or iz + cz >= nz:
                    continue
                w = (sx if cx else 1.0 - sx) * (sy if cy else 1.0 - sy) * (sz if cz else 1.0 - sz)
                if w == 0.0:
                    continue
                for a in range(n):
                    for b in range(n):
                        out[a * n + b] += w * vals[ix + cx, iy + cy, iz + cz, a, b]


cdef void _project(double complex* f, double* xi, Py_ssize_t n, double complex* out) nogil:
    # out = pi f pi with pi = I - xi xi^T
    cdef double complex tmp[16]
    cdef double complex fx[4]
    cdef double complex xf[4]
    cdef double complex xfx = 0
    cdef Py_ssize_t a, b
    for a in range(n):
        fx[a] = 0
        xf[a] = 0
        for b in range(n):
            fx[a] += f[a * n + b] * xi[b]
            xf[a] += xi[b] * f[b * n + a]
    for a in range(n):
        xfx += xi[a] * fx[a]
    for a in range(n):
        for b in range(n):
            out[a * n + b] = f[a * n + b] - fx[a] * xi[b] - xi[a] * xf[b] + xi[a] * xi[b] * xfx


cdef void _matmul_add(double complex* A, double complex* U, double complex* out, Py_ssize_t n) nogil:
    cdef Py_ssize_t a, b, c
    cdef double complex s
    for a in range(n):
        for b in range(n):
            s = 0
            for c in range(n):
                s += A[a * n + c] * U[c * n + b]
            out[a * n + b] = s


cdef void _rk4_step(double complex* A0, double complex* Am, double complex* A1,
                    double complex* U, double h, Py_ssize_t n) nogil:
    cdef double complex Y[16]
    cdef double complex K[16]
    cdef double complex S[16]
    cdef Py_ssize_t a
    _matmul_add(A0, U, K, n)
    for a in range(n * n):
        S[a] = K[a]
        Y[a] = U[a] + 0.5 * h * K[a]
    _matmul_add(Am, Y, K, n)
    for a in range(n * n):
        S[a] += 2.0 * K[a]
        Y[a] = U[a] + 0.5 * h * K[a]
    _matmul_add(Am, Y, K, n)
    for a in range(n * n):
        S[a] += 2.0 * K[a]
        Y[a] = U[a] + h * K[a]
    _matmul_add(A1, Y, K, n)
    for a in range(n * n):
        U[a] += h / 6.0 * (S[a] + K[a])


cdef void _identity(double complex* U, Py_ssize_t n) nogil:
    cdef Py_ssize_t a
    for a in range(n * n):
        U[a] = 0
    for a in range(n):
        U[a * n + a] = 1


def rk4_grid(double complex[:, :, :, :, ::1] vals, double[::1] origin, double spacing,
             double[:, ::1] start, double[:, ::1] xi, double[::1] length, Py_ssize_t nsteps):
    """Exit matrices of ``U' = (P_xi f) U``, ``U(0) = E`` for each ray (classical RK4)."""
    cdef Py_ssize_t nray = start.shape[0], n = vals.shape[3]
    out = np.zeros((nray, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] res = out
    cdef double complex U[16]
    cdef double complex F[16]
    cdef double complex A0[16]
    cdef double complex Am[16]
    cdef double complex A1[16]
    cdef double d[4]
    cdef double h, t
    cdef Py_ssize_t r, s, a, b
    with nogil:
        for r in range(nray):
            for a in range(n):
                d[a] = xi[r, a]
            _identity(U, n)
            h = length[r] / nsteps
            _interp(vals, origin, spacing, start[r, 0], start[r, 1], start[r, 2], n, F)
            _project(F, d, n, A0)
            for s in range(nsteps):
                t = s * h
                _interp(vals, origin, spacing, start[r, 0] + (t + 0.5 * h) * d[0],
                        start[r, 1] + (t + 0.5 * h) * d[1], start[r, 2] + (t + 0.5 * h) * d[2], n, F)
                _project(F, d, n, Am)
                _interp(vals, origin, spacing, start[r, 0] + (t + h) * d[0],
                        start[r, 1] + (t + h) * d[1], start[r, 2] + (t + h) * d[2], n, F)
                _project(F, d, n, A1)
                _rk4_step(A0, Am, A1, U, h, n)
                for a in range(n * n):
                    A0[a] = A1[a]
            for a in range(n):
                for b in range(n):
                    res[r, a, b] = U[a * n + b]
    return out


def rk4_samples(double complex[:, :, :, ::1] vals, double[:, ::1] xi, double[::1] length,
                Py_ssize_t nsteps):
    """RK4 exit matrices from field values sampled at ``t_k = k h / 2``, ``k = 0..2 nsteps``."""
    cdef Py_ssize_t nray = vals.shape[0], n = vals.shape[2]
    if vals.shape[1] != 2 * nsteps + 1:
        raise ValueError("expected 2 * nsteps + 1 samples per ray")
    out = np.zeros((nray, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] res = out
    cdef double complex U[16]
    cdef double complex F[16]
    cdef double complex A0[16]
    cdef double complex Am[16]
    cdef double complex A1[16]
    cdef double d[4]
    cdef double h
    cdef Py_ssize_t r, s, a, b
    with nogil:
        for r in range(nray):
            for a in range(n):
                d[a] = xi[r, a]
            _identity(U, n)
            h = length[r] / nsteps
            _project(&vals[r, 0, 0, 0], d, n, A0)
            for s in range(nsteps):
                _project(&vals[r, 2 * s + 1, 0, 0], d, n, Am)
                _project(&vals[r, 2 * s + 2, 0, 0], d, n, A1)
                _rk4_step(A0, Am, A1, U, h, n)
                for a in range(n * n):
                    A0[a] = A1[a]
            for a in range(n):
                for b in range(n):
                    res[r, a, b] = U[a * n + b]
    return out
