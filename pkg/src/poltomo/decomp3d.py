"""Potential / closed decomposition ``f = L_{grad lam} + f_closed`` on the ball.

``lam`` solves ``Laplace(lam) = -(d1 f-_23 + d2 f-_31 + d3 f-_12)`` with
``lam = 0`` on the sphere. The discretization is staggered: ``lam`` lives on
grid nodes, the k-th component of its gradient on the midpoints of k-edges,
and the divergence on the right-hand side is taken from field values at the
same edge midpoints. Divergence of the discrete gradient is then exactly the
7-point Laplacian, so the closed part of a closed part has ``lam = 0`` up to
solver tolerance.
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .fields import GaussPolyField, Grid, MatrixField, ScalarField, potential_field, trilinear
from .geometry import BallDomain
from .tensorcore import cross_operator, sym_skew_split

CG_RTOL = 1e-10
FD_STEP = 1e-3


class ConvergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class ScalarGridField:
    values: np.ndarray
    grid: Grid
    mask: np.ndarray  # True on interior unknowns; False nodes hold the Dirichlet value 0

    def __call__(self, x):
        return trilinear(self.values, self.grid, x)

    def gradient(self):
        """Edge-midpoint differences ``(lam[i + e_k] - lam[i]) / h`` for k = 0, 1, 2."""
        h = self.grid.spacing
        return [np.diff(self.values, axis=k) / h for k in range(3)]


def closedness_residual(f):
    """``d1 f-_23 + d2 f-_31 + d3 f-_12`` as a scalar field.

    Exact for the Gaussian-polynomial family, central differences otherwise.
    """
    if isinstance(f, GaussPolyField):
        p = f.poly
        w = [(p[1, 2] - p[2, 1]) * 0.5, (p[2, 0] - p[0, 2]) * 0.5, (p[0, 1] - p[1, 0]) * 0.5]
        div = w[0].diff(0) + w[1].diff(1) + w[2].diff(2)
        return ScalarField(div, name=f"closedness({f.name})")

    def func(x):
        out = 0.0
        for k, (a, b) in enumerate(((1, 2), (2, 0), (0, 1))):
            e = np.zeros(3)
            e[k] = FD_STEP
            fp, fm = f(x + e), f(x - e)
            out = out + ((fp[..., a, b] - fp[..., b, a]) - (fm[..., a, b] - fm[..., b, a])) / (4 * FD_STEP)
        return out

    return ScalarField(func, name=f"closedness({f.name})")


def _edge_grid(grid, k):
    dims = list(grid.dims)
    dims[k] -= 1
    origin = list(grid.origin)
    origin[k] += 0.5 * grid.spacing
    return Grid(tuple(dims), tuple(origin), grid.spacing)


def _interior_mask(grid, domain):
    pts = grid.points()
    r = np.linalg.norm(pts - domain.c, axis=-1)
    return r < domain.radius * (1 - 1e-12)


def _laplacian(mask, h):
    """Negative 7-point Laplacian on the masked nodes with zero Dirichlet data."""
    idx = -np.ones(mask.shape, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    n = int(mask.sum())
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 6.0)]
    for k in range(3):
        for shift in (1, -1):
            nb = np.roll(idx, -shift, axis=k)
            # np.roll wraps; wrapped neighbours sit on the cube faces which are never interior
            ok = mask & (nb >= 0)
            rows.append(idx[ok])
            cols.append(nb[ok])
            vals.append(np.full(int(ok.sum()), -1.0))
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A / h**2, idx


def staggered_rhs(f, grid):
    """``d1 w1 + d2 w2 + d3 w3`` at nodes by centered differences of edge-midpoint samples,
    ``w = (f-_23, f-_31, f-_12)``. Zero on the outer layer of nodes."""
    h = grid.spacing
    comps = ((1, 2), (2, 0), (0, 1))
    out = np.zeros(grid.dims)
    for k, (a, b) in enumerate(comps):
        eg = _edge_grid(grid, k)
        v = f(eg.points())
        w = 0.5 * (v[..., a, b] - v[..., b, a])
        if np.iscomplexobj(w) and np.all(w.imag == 0):
            w = w.real
        out = out.astype(np.result_type(out, w))
        d = np.diff(w, axis=k) / h  # value at interior nodes along k
        sl = [slice(None)] * 3
        sl[k] = slice(1, -1)
        out[tuple(sl)] += d
    return out


def _cg(A, b, rtol, maxiter):
    history = []

    def cb(xk):
        history.append(float(np.linalg.norm(b - A @ xk)))

    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, callback=cb)
    if info != 0:
        raise ConvergenceError(f"CG did not converge (info={info})", history)
    return x, history


def solve_dirichlet(rhs, grid, domain=None, rtol=CG_RTOL, maxiter=20000):
    """Solve ``Laplace(lam) = rhs`` on interior ball nodes with ``lam = 0`` elsewhere."""
    domain = domain or BallDomain()
    mask = _interior_mask(grid, domain)
    A, _ = _laplacian(mask, grid.spacing)
    b = -rhs[mask]
    lam = np.zeros(grid.dims, dtype=np.result_type(rhs, float))
    if np.any(b != 0):
        if np.iscomplexobj(b):
            xr, _ = _cg(A, b.real.copy(), rtol, maxiter)
            xi, _ = _cg(A, b.imag.copy(), rtol, maxiter)
            lam[mask] = xr + 1j * xi
        else:
            lam[mask], _ = _cg(A, b, rtol, maxiter)
    return ScalarGridField(lam, grid, mask)


class ClosedPart(MatrixField):
    """``f - L_{grad lam}`` with the staggered gradient interpolated trilinearly."""

    def __init__(self, f, lam):
        self.base = f
        self.lam = lam
        self.edge_grids = [_edge_grid(lam.grid, k) for k in range(3)]
        self.edge_grad = lam.gradient()
        sym = f.symmetry if f.symmetry != "skew-hermitian" or np.isrealobj(lam.values) else "general"
        super().__init__(self._eval, f.n, f.support_radius, sym, f"closed({f.name})", validate=False)

    def grad_lambda(self, x):
        return np.stack([trilinear(g, eg, x) for g, eg in zip(self.edge_grad, self.edge_grids)], axis=-1)

    def _eval(self, x):
        return self.base(x) - cross_operator(self.grad_lambda(x))


def decompose(f, grid, domain=None, rtol=CG_RTOL):
    """Split `f` into ``(lam, f_closed)``; ``lam`` is a :class:`ScalarGridField`."""
    if f.n != 3:
        raise ValueError("the potential/closed decomposition is three-dimensional")
    rhs = staggered_rhs(f, grid)
    lam = solve_dirichlet(-rhs, grid, domain, rtol)
    return lam, ClosedPart(f, lam)


def discrete_closedness(f, grid, domain=None):
    """Staggered closedness residual at interior nodes (what :func:`decompose` drives to zero)."""
    domain = domain or BallDomain()
    mask = _interior_mask(grid, domain)
    return staggered_rhs(f, grid)[mask]
