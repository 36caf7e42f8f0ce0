"""Integral moments ``mu_jk,alpha = int x^alpha f_jk dx`` and the moment
combinations recoverable from the trace transform."""
import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .fields import GaussPolyField, GridField

DEFAULT_NODES = 129
PAIRS = [(j, k) for j in range(3) for k in range(j, 3)]


def multi_indices(m):
    return [a for a in itertools.product(range(m + 1), repeat=3) if sum(a) == m][::-1]


@dataclass
class MomentTable:
    order: int
    values: dict  # (j, k, alpha) -> complex, j <= k, 0-based

    def __getitem__(self, key):
        j, k, alpha = key
        if j > k:
            j, k = k, j
        return self.values[(j, k, tuple(alpha))]

    def first(self, j, k, l):
        """First-order moment ``mu_jk,l`` with 0-based ``l``."""
        alpha = [0, 0, 0]
        alpha[l] = 1
        return self[j, k, alpha]

    def array(self):
        return np.array([self.values[key] for key in sorted(self.values)])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "j", "k", "a1", "a2", "a3", "re", "im"])
            for (j, k, alpha), v in sorted(self.values.items()):
                w.writerow([self.order, j + 1, k + 1, *alpha, repr(float(v.real)), repr(float(v.imag))])


def simpson_1d(nodes):
    if nodes % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of nodes")
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _separable_moments(f, m, half_width, nodes):
    """Product Simpson evaluated term by term: the family is a sum of separable products."""
    poly = f.poly
    x = np.linspace(-half_width, half_width, nodes)
    h = x[1] - x[0]
    w = simpson_1d(nodes) * h
    D = poly.degree
    env = [np.exp(-poly.a * (x - poly.center[k]) ** 2) if poly.a else np.ones_like(x) for k in range(3)]
    out = {}
    for alpha in multi_indices(m):
        # S[k][p] = sum_i w_i x_i^(p + alpha_k) env_k(x_i)
        S = [np.array([np.sum(w * x ** (p + alpha[k]) * env[k]) for p in range(D + 1)]) for k in range(3)]
        for j, k in PAIRS:
            c = poly.coef[j, k]
            out[(j, k, alpha)] = complex(np.einsum("pqr,p,q,r->", c, S[0], S[1], S[2]))
    return out


def _generic_moments(f, m, half_width, nodes):
    x = np.linspace(-half_width, half_width, nodes)
    h = x[1] - x[0]
    w = simpson_1d(nodes) * h
    alphas = multi_indices(m)
    acc = {(j, k, a): 0j for j, k in PAIRS for a in alphas}
    Y, Z = np.meshgrid(x, x, indexing="ij")
    wyz = np.outer(w, w)
    for i, xi in enumerate(x):
        pts = np.stack([np.full_like(Y, xi), Y, Z], axis=-1)
        vals = f(pts)
        for a in alphas:
            mono = xi ** a[0] * Y ** a[1] * Z ** a[2] * wyz * w[i]
            for j, k in PAIRS:
                acc[(j, k, a)] += np.sum(mono * vals[..., j, k])
    return acc


def _grid_moments(f, m):
    g = f.grid
    ax = g.axes()
    ws = []
    for d in g.dims:
        ws.append(simpson_1d(d) * g.spacing if d % 2 else np.full(d, g.spacing) * np.r_[0.5, np.ones(d - 2), 0.5])
    out = {}
    for a in multi_indices(m):
        wx = [ws[k] * ax[k] ** a[k] for k in range(3)]
        for j, k in PAIRS:
            out[(j, k, a)] = complex(np.einsum("ijk,i,j,k->", f.values[..., j, k], *wx))
    return out


def moments(f, m, half_width=None, nodes=DEFAULT_NODES):
    """Moments of order `m` by product composite Simpson on ``[-L, L]^3``.

    ``L`` defaults to the field's support radius. Grid fields integrate their
    own nodes (Simpson for odd node counts, trapezoid otherwise).
    """
    if isinstance(f, GridField):
        return MomentTable(m, _grid_moments(f, m))
    L = half_width if half_width is not None else f.support_radius
    if isinstance(f, GaussPolyField):
        return MomentTable(m, _separable_moments(f, m, L, nodes))
    return MomentTable(m, _generic_moments(f, m, L, nodes))


def moment_scale(f, m, half_width=None, nodes=65):
    """``max_jk int |x|^m |f_jk| dx`` (coarse Simpson), the reference size for moment residuals."""
    if isinstance(f, GridField):
        vals, pts = f.values, f.grid.points()
        dv = f.grid.spacing ** 3
        r = np.linalg.norm(pts, axis=-1) ** m
        return float(max(np.sum(r * np.abs(vals[..., j, k])) * dv for j, k in PAIRS))
    L = half_width if half_width is not None else f.support_radius
    x = np.linspace(-L, L, nodes)
    w = simpson_1d(nodes) * (x[1] - x[0])
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
    vals = f(pts)
    r = np.linalg.norm(pts, axis=-1) ** m
    W = np.einsum("i,j,k->ijk", w, w, w)
    return float(max(np.sum(W * r * np.abs(vals[..., j, k])) for j, k in PAIRS))


COMBO_INDICES = [(i, j, k) for i in range(3) for j in range(i, 3) for k in range(3) if not (i == j == k)]


def first_order_combos(f=None, table=None, **kw):
    """The 15 first-order combinations
    ``mu_ij,k + d_ij mu_kk,k - d_ik mu_jj,j - d_jk mu_ii,i``
    in lexicographic ``(i, j, k)`` order with ``i <= j`` (0-based indices in :data:`COMBO_INDICES`).
    """
    t = table if table is not None else moments(f, 1, **kw)
    d = lambda a, b: 1.0 if a == b else 0.0
    return np.array(
        [
            t.first(i, j, k) + d(i, j) * t.first(k, k, k) - d(i, k) * t.first(j, j, j) - d(j, k) * t.first(i, i, i)
            for i, j, k in COMBO_INDICES
        ]
    )


# first-order moments of a kernel field in terms of (a1, a2, a3):
# key (j, k, l) 0-based -> coefficient vector on (a1, a2, a3)
KERNEL_TABLE = {
    (0, 0, 0): (1, 0, 0), (0, 1, 0): (0, 1, 0), (0, 2, 0): (0, 0, 1),
    (1, 1, 0): (-1, 0, 0), (1, 2, 0): (0, 0, 0), (2, 2, 0): (-1, 0, 0),
    (0, 0, 1): (0, -1, 0), (0, 1, 1): (1, 0, 0), (0, 2, 1): (0, 0, 0),
    (1, 1, 1): (0, 1, 0), (1, 2, 1): (0, 0, 1), (2, 2, 1): (0, -1, 0),
    (0, 0, 2): (0, 0, -1), (0, 1, 2): (0, 0, 0), (0, 2, 2): (1, 0, 0),
    (1, 1, 2): (0, 0, -1), (1, 2, 2): (0, 1, 0), (2, 2, 2): (0, 0, 1),
}
ZERO_ENTRIES = [(1, 2, 0), (0, 2, 1), (0, 1, 2)]


@dataclass
class MomentFit:
    a: np.ndarray
    residual: float
    zero_entries: np.ndarray
    applicable: bool = True


def _is_kernel(f):
    from .saintvenant import kernel_residuals

    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, (64, 3)) * min(f.support_radius, 3.0) / 2
    return bool(kernel_residuals(f, pts).reduced_verdict)


def kernel_moment_fit(f=None, table=None, check=True, **kw):
    """Least-squares fit of the 18 first-order moments to the kernel parametrization."""
    if check and f is not None and isinstance(f, GaussPolyField) and not _is_kernel(f):
        return MomentFit(np.full(3, np.nan), float("nan"), np.full(3, np.nan), applicable=False)
    t = table if table is not None else moments(f, 1, **kw)
    keys = sorted(KERNEL_TABLE)
    A = np.array([KERNEL_TABLE[k] for k in keys], dtype=float)
    b = np.array([t.first(*k) for k in keys])
    a, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.linalg.norm(A @ a - b))
    zeros = np.array([t.first(*k) for k in ZERO_ENTRIES])
    return MomentFit(a, residual, zeros)


def zero_order_recovery_check(f, tol=1e-6, check=True, **kw):
    """Verify that all zero-order moments of a kernel field vanish."""
    if check and isinstance(f, GaussPolyField) and not _is_kernel(f):
        return {"verdict": "not applicable"}
    t = moments(f, 0, **kw)
    vals = t.array()
    scale = moment_scale(f, 0, kw.get("half_width"))
    worst = float(np.max(np.abs(vals)))
    return {
        "verdict": "pass" if worst <= tol * scale else "fail",
        "max_abs": worst,
        "scale": scale,
        "tolerance": tol,
    }
