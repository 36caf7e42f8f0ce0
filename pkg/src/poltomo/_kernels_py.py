"""Pure numpy versions of the compiled kernels (same signatures and results)."""
import numpy as np
from scipy import sparse

from .fields import Grid, trilinear


def simpson_weights(nseg):
    if nseg % 2:
        raise ValueError("Simpson rule needs an even number of segments")
    w = np.ones(nseg + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def ray_grid_weights(start, xi, length, nseg, origin, spacing, nx, ny, nz, chunk=256):
    dims = np.array([nx, ny, nz])
    strides = np.array([ny * nz, nz, 1])
    sw = simpson_weights(nseg)
    tt = np.arange(nseg + 1) / nseg
    blocks = []
    for lo in range(0, len(start), chunk):
        hi = min(lo + chunk, len(start))
        L = length[lo:hi]
        pts = start[lo:hi, None, :] + (tt[None, :, None] * L[:, None, None]) * xi[lo:hi, None, :]
        wq = sw[None, :] * (L / nseg)[:, None]
        u = (pts - np.asarray(origin)) / spacing
        i0 = np.floor(u).astype(np.int64)
        s = u - i0
        rows, cols, vals = [], [], []
        rid = np.broadcast_to(np.arange(lo, hi)[:, None], wq.shape)
        for c in np.ndindex(2, 2, 2):
            idx = i0 + np.array(c)
            ok = np.all((idx >= 0) & (idx < dims), axis=-1)
            w = wq.copy()
            for k in range(3):
                w *= s[..., k] if c[k] else 1.0 - s[..., k]
            ok &= w != 0.0
            rows.append(rid[ok])
            cols.append(idx[ok] @ strides)
            vals.append(w[ok])
        m = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows) - lo, np.concatenate(cols))),
            shape=(hi - lo, nx * ny * nz),
        )
        m.sum_duplicates()
        blocks.append(m)
    W = sparse.vstack(blocks, format="csr") if blocks else sparse.csr_matrix((0, nx * ny * nz))
    return W.indptr.astype(np.int64), W.indices.astype(np.int64), W.data


def rk4_grid(vals, origin, spacing, start, xi, length, nsteps):
    grid = Grid(tuple(vals.shape[:3]), tuple(origin), float(spacing))
    n = vals.shape[3]
    eye = np.eye(n)
    pi = eye - xi[:, :, None] * xi[:, None, :]
    h = length / nsteps

    def A(t):
        f = trilinear(vals, grid, start + t[:, None] * xi)
        return pi @ f @ pi

    U = np.broadcast_to(eye, (len(start), n, n)).astype(complex)
    A0 = A(np.zeros_like(h))
    hh = h[:, None, None]
    for s in range(nsteps):
        t = s * h
        Am = A(t + 0.5 * h)
        A1 = A(t + h)
        k1 = A0 @ U
        k2 = Am @ (U + 0.5 * hh * k1)
        k3 = Am @ (U + 0.5 * hh * k2)
        k4 = A1 @ (U + hh * k3)
        U = U + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        A0 = A1
    return U


def rk4_samples(vals, xi, length, nsteps):
    if vals.shape[1] != 2 * nsteps + 1:
        raise ValueError("expected 2 * nsteps + 1 samples per ray")
    n = vals.shape[-1]
    eye = np.eye(n)
    pi = eye - xi[:, :, None] * xi[:, None, :]
    h = (length / nsteps)[:, None, None]
    U = np.broadcast_to(eye, (len(vals), n, n)).astype(complex)
    A0 = pi @ vals[:, 0] @ pi
    for s in range(nsteps):
        Am = pi @ vals[:, 2 * s + 1] @ pi
        A1 = pi @ vals[:, 2 * s + 2] @ pi
        k1 = A0 @ U
        k2 = Am @ (U + 0.5 * h * k1)
        k3 = Am @ (U + 0.5 * h * k2)
        k4 = A1 @ (U + h * k3)
        U = U + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        A0 = A1
    return U
