"""Linearized reconstruction on a nodal (multilinear hat) basis.

The unknown field is ``f(x) = sum_node hat_node(x) F_node`` with
``F_node = sum_j c[node, j] B_j`` over a real basis ``B_j`` of the chosen
symmetry class. Boundary data per ray are the real and imaginary parts of
``int p (P_xi f) q dt``. With unit weights the operator factors as

    (A c)_r = pi_r ( sum_j (W c_j)_r B_j ) pi_r

where ``W`` is the scalar ray/grid Simpson matrix, which keeps memory at one
sparse scalar matrix regardless of the class. Row layout: ray-major, entries
row-major, ``(re, im)`` interleaved. Column layout: node-major, basis index
fastest.
"""
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import accel
from .fields import Grid, GridField, WeightField
from .geometry import BallDomain, rays_to_arrays
from .transport import TANGENT_CHORD, _segments, _simpson, linearized_data

SYMMETRY_CLASSES = ("real-symmetric", "skew-hermitian", "general")
_ALL_CLASSES = SYMMETRY_CLASSES + ("real-skew",)
MIN_SEGMENTS = 64
MEMORY_LIMIT = 2 * 1024**3
CGLS_TOL = 1e-8
CGLS_MAXITER = 2000
TRIPLET_MAGIC = b"PTSPARSE"

FIELD_SYMMETRY = {"real-symmetric": "symmetric", "skew-hermitian": "skew-hermitian",
                  "general": "general", "real-skew": "skew-hermitian"}


class AssemblyMemoryError(MemoryError):
    pass


def basis_matrices(n, cls):
    """Real basis of the class, orthonormal for ``<A, B> = Re tr(A* B)``; shape ``(nb, n, n)``."""
    if cls not in _ALL_CLASSES:
        raise ValueError(f"unknown symmetry class {cls!r}")
    s = 1.0 / math.sqrt(2.0)
    sym, skew = [], []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        sym.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = s
            sym.append(e)
            e = np.zeros((n, n))
            e[i, j], e[j, i] = s, -s
            skew.append(e)
    if cls == "real-symmetric":
        out = sym
    elif cls == "real-skew":
        out = skew
    elif cls == "skew-hermitian":
        out = skew + [1j * e for e in sym]
    else:
        out = []
        for i in range(n):
            for j in range(n):
                e = np.zeros((n, n))
                e[i, j] = 1.0
                out.append(e)
        out = out + [1j * e for e in out]
    return np.array(out, dtype=complex)


def hat_weights(points, grid):
    """Multilinear hat weights: node indices and weights of shape ``(P, 2**d)``; zero outside."""
    pts = np.asarray(points, dtype=float).reshape(-1, len(grid.dims))
    d = pts.shape[1]
    dims = np.asarray(grid.dims)
    u = (pts - np.asarray(grid.origin)) / grid.spacing
    i0 = np.floor(u).astype(np.int64)
    s = u - i0
    strides = np.cumprod(np.concatenate([dims[1:], [1]])[::-1])[::-1]
    idx = np.zeros((len(pts), 2**d), dtype=np.int64)
    w = np.ones((len(pts), 2**d))
    for corner in range(2**d):
        bits = [(corner >> (d - 1 - k)) & 1 for k in range(d)]
        node = i0 + np.array(bits)
        ok = np.all((node >= 0) & (node < dims), axis=1)
        for k, b in enumerate(bits):
            w[:, corner] *= s[:, k] if b else 1.0 - s[:, k]
        w[~ok, corner] = 0.0
        idx[:, corner] = np.where(ok[:, None], node, 0) @ strides
    return idx, w


def ray_grid_matrix(start, xi, length, nseg, grid, backend=None):
    """Scalar Simpson/hat matrix ``W`` (rays x nodes); compiled path for 3D grids."""
    if len(grid.dims) == 3:
        return accel.ray_grid_matrix(start, xi, length, nseg, grid, backend)
    w = _simpson(nseg)
    tt = np.arange(nseg + 1) / nseg
    rows, cols, vals = [], [], []
    chunk = max(1, 200000 // (nseg + 1))
    for lo in range(0, len(start), chunk):
        sl = slice(lo, lo + chunk)
        t = tt[None, :] * length[sl, None]
        pts = start[sl, None, :] + t[..., None] * xi[sl, None, :]
        idx, hw = hat_weights(pts, grid)
        qw = (w[None, :] * (length[sl] / nseg)[:, None]).reshape(-1, 1)
        r = np.repeat(np.arange(lo, lo + t.shape[0]), (nseg + 1) * idx.shape[1])
        rows.append(r)
        cols.append(idx.ravel())
        vals.append((hw * qw).ravel())
    W = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(start), grid.size)
    ).tocsr()
    W.sum_duplicates()
    W.eliminate_zeros()
    return W


def _projectors(xi):
    n = xi.shape[1]
    return np.eye(n) - xi[:, :, None] * xi[:, None, :]


def _estimate_scalar_nnz(length, nseg, grid):
    # a segment of length L crosses at most d (L/h + 1) cells, each touching 2^d nodes
    d = len(grid.dims)
    cells = d * (np.asarray(length) / grid.spacing + 1.0)
    return float(np.sum(np.minimum(2**d * cells, 2**d * (nseg + 1))))


@dataclass
class ForwardOperator:
    """Sparse real map from stacked field coefficients to stacked boundary data."""

    grid: Grid
    n: int
    cls: str
    basis: np.ndarray
    xi: np.ndarray
    W: sparse.csr_matrix = None  # factored unit-weight path
    M: sparse.csr_matrix = None  # explicit path
    segments: int = 0
    meta: dict = field(default_factory=dict)
    _packed: np.ndarray = field(default=None, repr=False)

    @property
    def nb(self):
        return len(self.basis)

    @property
    def nrays(self):
        return len(self.xi)

    @property
    def shape(self):
        return (self.nrays * 2 * self.n * self.n, self.grid.size * self.nb)

    def row_meta(self, row):
        """``(ray id, (a, b) entry, "re" | "im")`` of a data row."""
        ray, rem = divmod(int(row), 2 * self.n * self.n)
        entry, part = divmod(rem, 2)
        return ray, divmod(entry, self.n), ("re", "im")[part]

    def col_meta(self, col):
        """``(node multi-index, basis component)`` of an unknown."""
        node, comp = divmod(int(col), self.nb)
        return tuple(int(v) for v in np.unravel_index(node, self.grid.dims)), comp

    @property
    def packed_basis(self):
        """``G[r, j]`` = packed ``pi_r B_j pi_r`` (re/im interleaved), shape ``(rays, nb, 2 n^2)``."""
        if self._packed is None:
            pi = _projectors(self.xi)
            G = pi[:, None] @ self.basis[None] @ pi[:, None]
            self._packed = np.ascontiguousarray(np.stack([G.real, G.imag], axis=-1).reshape(self.nrays, self.nb, -1))
        return self._packed

    def matvec(self, c):
        c = np.asarray(c, dtype=float)
        if self.M is not None:
            return self.M @ c
        Wc = self.W @ c.reshape(self.grid.size, self.nb)
        return np.einsum("rj,rjk->rk", Wc, self.packed_basis).reshape(-1)

    def rmatvec(self, d):
        d = np.asarray(d, dtype=float)
        if self.M is not None:
            return self.M.T @ d
        Z = np.einsum("rk,rjk->rj", d.reshape(self.nrays, -1), self.packed_basis)
        return (self.W.T @ Z).reshape(-1)

    __matmul__ = matvec

    def column_norms_sq(self):
        """``|A e_j|^2`` for every column."""
        if self.M is not None:
            return np.asarray(self.M.multiply(self.M).sum(axis=0)).ravel()
        g = np.sum(self.packed_basis**2, axis=-1)
        return np.asarray(self.W.multiply(self.W).T @ g).reshape(-1)

    def frobenius_sq(self):
        return float(np.sum(self.column_norms_sq()))

    def to_sparse(self):
        """Explicit CSR matrix (small problems; the factored form never needs it)."""
        if self.M is not None:
            return self.M
        G = self.packed_basis
        coo = self.W.tocoo()
        k = G.shape[-1]
        vals = coo.data[:, None, None] * G[coo.row]  # (nnz, j, k)
        rows = coo.row[:, None, None] * k + np.arange(k)[None, None, :]
        cols = coo.col[:, None, None] * self.nb + np.arange(self.nb)[None, :, None]
        rows, cols = np.broadcast_arrays(rows, cols)
        keep = vals != 0
        M = sparse.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=self.shape)
        M.sum_duplicates()
        return M

    def coefficients(self, f):
        """Coefficient vector of the nodal samples of `f` (projected onto the class basis)."""
        vals = f(self.grid.points()).reshape(self.grid.size, self.n, self.n)
        return np.einsum("Nab,jab->Nj", vals, self.basis.conj()).real.reshape(-1)

    def field(self, c, name="estimate"):
        vals = np.einsum("Nj,jab->Nab", np.asarray(c).reshape(self.grid.size, self.nb), self.basis)
        return GridField(vals.reshape(tuple(self.grid.dims) + (self.n, self.n)), self.grid,
                         FIELD_SYMMETRY[self.cls], name, validate=False)

    def spill(self, path):
        write_triplets(path, self.to_sparse())


def assemble(grid, rays, p=None, q=None, step=None, cls="real-symmetric", memory_limit=MEMORY_LIMIT,
             backend=None):
    """Assemble the forward operator for the given rays and weights.

    ``step`` sets a common even Simpson segment count (at least 64 per chord).
    Weights other than the identity switch to explicit per-sample assembly;
    that path checks its memory estimate before allocating.
    """
    x, xi, tm, tp = rays_to_arrays(rays)
    n = xi.shape[1]
    if len(grid.dims) != n:
        raise ValueError(f"grid dimension {len(grid.dims)} does not match n = {n}")
    L = tp - tm
    nseg = max(_segments(L, step), MIN_SEGMENTS)
    start = x + tm[:, None] * xi
    L = np.where(L < TANGENT_CHORD, 0.0, L)
    basis = basis_matrices(n, cls)
    nb = len(basis)
    unit = all(w is None or getattr(w, "is_identity", False) for w in (p, q))
    est = _estimate_scalar_nnz(L, nseg, grid)
    meta = {"rays": len(rays), "segments": nseg, "class": cls, "weights": "unit" if unit else "general"}
    if unit:
        if est * 12 > memory_limit:
            raise AssemblyMemoryError(f"estimated {est * 12 / 2**20:.0f} MiB exceeds the limit")
        W = ray_grid_matrix(start, xi, L, nseg, grid, backend)
        return ForwardOperator(grid, n, cls, basis, xi, W=W, segments=nseg, meta=meta)
    need = est * nb * 2 * n * n * 12
    if need > memory_limit:
        raise AssemblyMemoryError(f"estimated {need / 2**20:.0f} MiB exceeds the limit")
    M = _assemble_weighted(grid, start, xi, L, nseg, basis, p, q)
    return ForwardOperator(grid, n, cls, basis, xi, M=M, segments=nseg, meta=meta)


def _assemble_weighted(grid, start, xi, L, nseg, basis, p, q):
    n = xi.shape[1]
    nb = len(basis)
    k = 2 * n * n
    w = _simpson(nseg)
    tt = np.arange(nseg + 1) / nseg
    rows, cols, vals = [], [], []
    for r in range(len(start)):
        if L[r] == 0.0:
            continue
        pts = start[r] + (tt * L[r])[:, None] * xi[r]
        dirs = np.broadcast_to(xi[r], pts.shape)
        pi = np.eye(n) - np.outer(xi[r], xi[r])
        G = pi @ basis @ pi  # (j, n, n)
        G = np.broadcast_to(G, (nseg + 1,) + G.shape)
        if p is not None and not getattr(p, "is_identity", False):
            pv = p(pts, dirs)
            WeightField.check(pv, dirs, "p")
            G = pv[:, None] @ G
        if q is not None and not getattr(q, "is_identity", False):
            qv = q(pts, dirs)
            WeightField.check(qv, dirs, "q")
            G = G @ qv[:, None]
        G = G * (w * L[r] / nseg)[:, None, None, None]
        G = np.stack([G.real, G.imag], axis=-1).reshape(nseg + 1, nb * k)
        idx, hw = hat_weights(pts, grid)
        nodes, inv = np.unique(idx.ravel(), return_inverse=True)
        H = sparse.csr_matrix((hw.ravel(), (np.repeat(np.arange(nseg + 1), idx.shape[1]), inv)),
                              shape=(nseg + 1, len(nodes)))
        block = (H.T @ G).reshape(len(nodes), nb, k)  # (node, j, entry)
        nz = np.nonzero(block)
        rows.append(r * k + nz[2])
        cols.append(nodes[nz[0]] * nb + nz[1])
        vals.append(block[nz])
    shape = (len(start) * k, grid.size * nb)
    if not rows:
        return sparse.csr_matrix(shape)
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)


# ---------------------------------------------------------------------------
# sparse triplet file

def write_triplets(path, M):
    """Little-endian: magic, int64 rows, cols, nnz, int64 row[nnz], int64 col[nnz], f64 val[nnz]."""
    coo = sparse.coo_matrix(M)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "wb") as fh:
        fh.write(TRIPLET_MAGIC)
        fh.write(struct.pack("<qqq", coo.shape[0], coo.shape[1], coo.nnz))
        fh.write(coo.row[order].astype("<i8").tobytes())
        fh.write(coo.col[order].astype("<i8").tobytes())
        fh.write(coo.data[order].astype("<f8").tobytes())


def read_triplets(path):
    with open(path, "rb") as fh:
        if fh.read(len(TRIPLET_MAGIC)) != TRIPLET_MAGIC:
            raise ValueError(f"{path}: not a sparse triplet file")
        nr, nc, nnz = struct.unpack("<qqq", fh.read(24))
        row = np.frombuffer(fh.read(8 * nnz), dtype="<i8")
        col = np.frombuffer(fh.read(8 * nnz), dtype="<i8")
        val = np.frombuffer(fh.read(8 * nnz), dtype="<f8")
    if len(val) != nnz:
        raise ValueError(f"{path}: truncated triplet file")
    return sparse.csr_matrix((val, (row, col)), shape=(nr, nc))


# ---------------------------------------------------------------------------
# Tikhonov least squares

@dataclass
class ReconstructionResult:
    coefficients: np.ndarray
    field: GridField
    lam: float
    misfit: float
    solution_norm: float
    iterations: int
    converged: bool
    history: list  # sqrt(|A c - d|^2 + lam |c|^2) per iteration, starting at c = 0
    misfit_history: list
    report: dict = field(default_factory=dict)

    def summary(self):
        return {
            "lambda": self.lam,
            "misfit": self.misfit,
            "solution_norm": self.solution_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            **self.report,
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True, default=float)


def _norm(v):
    return math.sqrt(float(np.dot(v, v)))


def cgls(A, d, lam, tol=CGLS_TOL, maxiter=CGLS_MAXITER):
    """CGLS for ``min |A c - d|^2 + lam |c|^2``.

    Stops when ``|A^T r - lam c| <= tol |A^T d|``. Returns
    ``(c, iterations, converged, history, misfit_history)``; `history` holds
    the square root of the minimized functional, which CG decreases monotonically.
    """
    d = np.asarray(d, dtype=float)
    ncol = A.shape[1]
    c = np.zeros(ncol)
    r = d.copy()
    s = A.rmatvec(r)
    norm0 = _norm(s)
    history = [_norm(r)]
    misfits = [_norm(r)]
    if norm0 == 0.0:
        return c, 0, True, history, misfits
    p = s.copy()
    gamma = norm0**2
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        qv = A.matvec(p)
        delta = float(np.dot(qv, qv)) + lam * float(np.dot(p, p))
        alpha = gamma / delta
        c += alpha * p
        r -= alpha * qv
        s = A.rmatvec(r) - lam * c
        misfit = _norm(r)
        misfits.append(misfit)
        history.append(math.sqrt(misfit**2 + lam * float(np.dot(c, c))))
        gamma_new = float(np.dot(s, s))
        if math.sqrt(gamma_new) <= tol * norm0:
            converged = True
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return c, it, converged, history, misfits


def tikhonov_solve(A, data, lam, tol=CGLS_TOL, maxiter=CGLS_MAXITER, name="estimate"):
    """Tikhonov-regularized least squares by CGLS; non-convergence is flagged, not raised."""
    if not lam > 0:
        raise ValueError("regularization parameter must be positive")
    data = np.asarray(data, dtype=float)
    if data.shape != (A.shape[0],):
        raise ValueError(f"data length {data.shape} does not match operator rows {A.shape[0]}")
    c, it, ok, hist, mis = cgls(A, data, lam, tol, maxiter)
    return ReconstructionResult(
        coefficients=c,
        field=A.field(c, name) if hasattr(A, "field") else None,
        lam=float(lam),
        misfit=mis[-1],
        solution_norm=_norm(c),
        iterations=it,
        converged=ok,
        history=hist,
        misfit_history=mis,
    )


def relative_lambda(A, lam_rel):
    """Absolute parameter ``lam_rel * |A|_F^2 / ncols`` (mean column energy)."""
    return lam_rel * A.frobenius_sq() / A.shape[1]


def lambda_sweep(A, data, lam_rel_grid, tol=CGLS_TOL, maxiter=CGLS_MAXITER):
    """Solve for each relative parameter of a fixed grid; returns results and a discrepancy table."""
    dnorm = _norm(np.asarray(data, dtype=float))
    results, table = [], []
    for lr in lam_rel_grid:
        res = tikhonov_solve(A, data, relative_lambda(A, lr), tol, maxiter)
        results.append(res)
        table.append({"lambda_rel": lr, "lambda": res.lam, "misfit": res.misfit,
                      "relative_misfit": res.misfit / dnorm if dnorm else 0.0,
                      "solution_norm": res.solution_norm, "iterations": res.iterations,
                      "converged": res.converged})
    return results, table


# ---------------------------------------------------------------------------
# the linearized nonlinear problem

@dataclass
class InversionConfig:
    nodes: int = 24
    half_width: float = 1.0
    segments: int = 1024
    cls: str = "real-symmetric"
    lam_rel: float = 1e-2
    lam_rel_grid: tuple = (1e-3, 1e-2, 1e-1)
    tol: float = CGLS_TOL
    maxiter: int = CGLS_MAXITER
    sweep: bool = False

    @property
    def grid(self):
        return Grid.cube(self.half_width, self.nodes)

    def step_for(self, rays):
        L = max(r.length for r in rays)
        return L / self.segments


def data_vector(dataset):
    """Stack a BoundaryDataSet in operator row order; failed rays become zero rows."""
    vals = np.where(dataset.failed[:, None, None], 0.0, dataset.values)
    return np.stack([vals.real, vals.imag], axis=-1).reshape(-1)


def reconstruct_nonlinear(phi1, phi2, config=None, truth=None, domain=None):
    """One linearization step: ``d = Phi_1^{-1} Phi_2 - E`` inverted with unit weights.

    Returns the estimate of ``f_2 - f_1``. With `truth` given, the closed parts
    of estimate and truth are compared on the ball nodes (3D only).
    """
    config = config or InversionConfig()
    domain = domain or BallDomain()
    lin = linearized_data(phi1, phi2)
    grid = config.grid
    A = assemble(grid, lin.rays, step=config.step_for(lin.rays), cls=config.cls)
    keep = np.repeat(~lin.failed, 2 * A.n * A.n)
    d = data_vector(lin)
    op = _RowMasked(A, keep) if not np.all(keep) else A
    res = tikhonov_solve(op, d[keep], relative_lambda(op, config.lam_rel), config.tol, config.maxiter)
    res.report.update({"lambda_rel": config.lam_rel, "rays": len(lin), "failed_rays": int(lin.failed.sum()),
                       "grid_nodes": config.nodes, "segments": A.segments, "class": config.cls,
                       "data_norm": _norm(d[keep])})
    if config.sweep:
        _, table = lambda_sweep(op, d[keep], config.lam_rel_grid, config.tol, config.maxiter)
        res.report["lambda_sweep"] = table
    if truth is not None:
        res.report.update(closed_part_error(res.field, truth, grid, domain))
    return res


class _RowMasked:
    """Operator restricted to a subset of rows (rays with failed data are dropped)."""

    def __init__(self, A, keep):
        self.A = A
        self.keep = keep
        self.shape = (int(keep.sum()), A.shape[1])

    def matvec(self, c):
        return self.A.matvec(c)[self.keep]

    def rmatvec(self, d):
        full = np.zeros(self.A.shape[0])
        full[self.keep] = d
        return self.A.rmatvec(full)

    def frobenius_sq(self):
        return self.A.frobenius_sq()

    def field(self, c, name="estimate"):
        return self.A.field(c, name)


def closed_part_error(estimate, truth, grid, domain=None):
    """Relative L2 error of closed parts on grid nodes inside the ball."""
    from .decomp3d import decompose

    domain = domain or BallDomain()
    pts = grid.points()
    inside = np.linalg.norm(pts - domain.c, axis=-1) < domain.radius
    x = pts[inside]
    lam_e, ce = decompose(estimate, grid, domain)
    lam_t, ct = decompose(truth, grid, domain)
    ve, vt = ce(x), ct(x)
    num = math.sqrt(float(np.sum(np.abs(ve - vt) ** 2)))
    den = math.sqrt(float(np.sum(np.abs(vt) ** 2)))
    return {
        "closed_error": num / den if den else num,
        "closed_truth_norm": den,
        "lambda_estimate_max": float(np.max(np.abs(lam_e.values))),
        "lambda_truth_max": float(np.max(np.abs(lam_t.values))),
    }


# ---------------------------------------------------------------------------
# diagnostics

def data_scale(A, c):
    """``max_r sum_node W[r, node] |F_node|``: worst integrated field magnitude over rays."""
    C = np.asarray(c).reshape(A.grid.size, A.nb)
    mags = np.linalg.norm(np.einsum("Nj,jab->Nab", C, A.basis).reshape(A.grid.size, -1), axis=1)
    return float(np.max(A.W @ mags))


def gauge_null_action(A, potential):
    """Relative data of a sampled potential field: ``max_r |(A c)_r| / data_scale``."""
    c = A.coefficients(potential)
    out = A.matvec(c).reshape(A.nrays, -1)
    return float(np.max(np.linalg.norm(out, axis=1))) / data_scale(A, c)


def interior_columns(A, radius=1.0):
    """Columns whose node lies strictly inside the ball of the given radius."""
    pts = A.grid.points().reshape(A.grid.size, -1)
    nodes = np.flatnonzero(np.linalg.norm(pts, axis=1) < radius)
    return (nodes[:, None] * A.nb + np.arange(A.nb)[None, :]).ravel()


def normal_spectrum(A, columns=None):
    """Eigenvalues and eigenvectors of ``A^T A`` restricted to `columns` (dense; small grids)."""
    M = A.to_sparse()
    if columns is not None:
        M = M[:, columns]
    N = (M.T @ M).toarray()
    return np.linalg.eigh(N)


def _potential_span(A, columns, max_degree=3):
    """Orthonormal basis of sampled potential fields ``L_{grad lam}``, ``lam = (1 - |x|^2) x^alpha``."""
    import itertools

    from .fields import polynomial_scalar, potential_field

    vecs = []
    for al in itertools.product(range(max_degree + 1), repeat=3):
        if sum(al) > max_degree:
            continue
        terms = {al: 1.0}
        for k in range(3):
            b = list(al)
            b[k] += 2
            terms[tuple(b)] = terms.get(tuple(b), 0.0) - 1.0
        vecs.append(A.coefficients(potential_field(polynomial_scalar(terms)))[columns])
    Q, _ = np.linalg.qr(np.array(vecs).T)
    return Q


def gauge_spectrum_probe(n, nodes, rays, seed, segments=128, probe=4):
    """Smallest eigenvalues of the real-skew normal operator on interior nodes.

    Eigenvalues are reported relative to the median eigenvalue. For n = 3 the
    fraction of each of the `probe` lowest eigenvectors lying in a span of
    sampled potential fields is included.
    """
    from .geometry import sample_inward_boundary

    domain = BallDomain((0.0,) * n, 1.0)
    A = assemble(Grid.cube(1.0, nodes, dim=n), sample_inward_boundary(domain, rays, seed),
                 step=2.0 / segments, cls="real-skew")
    cols = interior_columns(A)
    w, V = normal_spectrum(A, cols)
    med = float(np.median(w))
    rel = w / med
    out = {
        "n": n,
        "nodes": nodes,
        "rays": rays,
        "unknowns": int(len(cols)),
        "min_relative": float(rel[0]),
        "smallest_relative": [float(v) for v in rel[:probe]],
        "count_below_1e-2": int(np.sum(rel < 1e-2)),
    }
    if n == 3:
        Q = _potential_span(A, cols)
        out["potential_alignment"] = [float(np.linalg.norm(Q.T @ V[:, k]) ** 2) for k in range(probe)]
    return out
