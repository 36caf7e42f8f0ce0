"""Matrix-valued fields on R^3 (and R^n for callables).

Three kinds are provided:

* :class:`MatrixField` wraps an arbitrary vectorized callable.
* :class:`GaussPolyField` is the closed-form family ``P(x) exp(-a |x - c|^2)``
  with polynomial coefficients, closed under exact differentiation.
* :class:`GridField` holds samples on a regular grid and interpolates
  trilinearly; it is zero outside the bounding box.
"""
from dataclasses import dataclass
import math

import numpy as np

from .tensorcore import adjoint, cross_operator

SYMMETRY_CLASSES = ("general", "symmetric", "skew-hermitian")
_SYM_TOL = 1e-10


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"points must have last axis {n}, got shape {x.shape}")
    return x


def symmetry_defect(values, symmetry):
    if symmetry == "symmetric":
        d = values - np.swapaxes(values, -1, -2)
    elif symmetry == "skew-hermitian":
        d = values + adjoint(values)
    else:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
    return float(np.max(np.abs(d), initial=0.0)) / scale


class MatrixField:
    """Complex ``n x n`` matrix field given by a vectorized callable.

    ``func(points)`` receives an array of shape ``(..., n)`` and returns
    ``(..., n, n)``. The declared `symmetry` is validated at sample points
    inside ``support_radius`` on construction.
    """

    kind = "analytic"

    def __init__(self, func, n=3, support_radius=1.0, symmetry="general", name="field", validate=True):
        if symmetry not in SYMMETRY_CLASSES:
            raise ValueError(f"unknown symmetry class {symmetry!r}")
        self._func = func
        self.n = n
        self.support_radius = float(support_radius)
        self.symmetry = symmetry
        self.name = name
        if validate:
            self.validate_symmetry()

    def __call__(self, x):
        x = _as_points(x, self.n)
        return np.asarray(self._func(x), dtype=complex)

    def validate_symmetry(self, count=64, seed=12345):
        if self.symmetry == "general":
            return
        rng = np.random.default_rng(seed)
        # unbounded or very wide fields are checked in the unit ball
        radius = self.support_radius if self.support_radius <= 10.0 else 1.0
        pts = rng.uniform(-1.0, 1.0, size=(count, self.n)) * radius / math.sqrt(self.n)
        defect = symmetry_defect(self(pts), self.symmetry)
        if defect > _SYM_TOL:
            raise ValueError(f"field {self.name!r} is not {self.symmetry} (defect {defect:.3e})")

    def __add__(self, other):
        sym = self.symmetry if self.symmetry == other.symmetry else "general"
        return MatrixField(
            lambda x, a=self, b=other: a(x) + b(x),
            self.n,
            max(self.support_radius, other.support_radius),
            sym,
            f"{self.name}+{other.name}",
            validate=False,
        )

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, s):
        sym = self.symmetry
        if sym == "skew-hermitian" and np.imag(s) != 0:
            sym = "general"
        return MatrixField(
            lambda x, a=self: s * a(x), self.n, self.support_radius, sym, f"{s}*{self.name}", validate=False
        )

    def __mul__(self, s):
        return self.scaled(s)

    __rmul__ = __mul__


class ScalarField:
    """Vectorized scalar function with optional gradient."""

    def __init__(self, func, grad=None, n=3, name="scalar"):
        self._func = func
        self._grad = grad
        self.n = n
        self.name = name

    def __call__(self, x):
        return np.asarray(self._func(_as_points(x, self.n)))

    def gradient(self, x):
        if self._grad is None:
            raise ValueError(f"scalar field {self.name!r} has no gradient")
        return np.asarray(self._grad(_as_points(x, self.n)))


# ---------------------------------------------------------------------------
# Gaussian-polynomial family

class GaussPoly:
    """Tensor-valued ``P(x) exp(-a |x - c|^2)`` on R^3.

    ``coef`` has shape ``shape + (D+1, D+1, D+1)``; ``coef[..., i, j, k]``
    multiplies ``x1^i x2^j x3^k``. ``a = 0`` gives a plain polynomial.
    """

    def __init__(self, coef, a=1.0, center=(0.0, 0.0, 0.0)):
        coef = np.asarray(coef, dtype=complex)
        if coef.ndim < 3 or not (coef.shape[-1] == coef.shape[-2] == coef.shape[-3]):
            raise ValueError("coefficient array must end with three equal polynomial axes")
        self.coef = coef
        self.a = float(a)
        self.center = np.asarray(center, dtype=float)

    @property
    def shape(self):
        return self.coef.shape[:-3]

    @property
    def degree(self):
        return self.coef.shape[-1] - 1

    @classmethod
    def zeros(cls, shape, degree, a=1.0, center=(0.0, 0.0, 0.0)):
        return cls(np.zeros(tuple(shape) + (degree + 1,) * 3, dtype=complex), a, center)

    def _compatible(self, other):
        return self.a == other.a and np.array_equal(self.center, other.center)

    def _padded(self, degree):
        pad = degree - self.degree
        if pad == 0:
            return self.coef
        width = [(0, 0)] * len(self.shape) + [(0, pad)] * 3
        return np.pad(self.coef, width)

    def __add__(self, other):
        if not self._compatible(other):
            raise ValueError("GaussPoly terms need equal envelopes to be added")
        d = max(self.degree, other.degree)
        return GaussPoly(self._padded(d) + other._padded(d), self.a, self.center)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, s):
        return GaussPoly(self.coef * s, self.a, self.center)

    __rmul__ = __mul__

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return GaussPoly(self.coef[idx], self.a, self.center)

    def with_shape_coef(self, coef):
        return GaussPoly(coef, self.a, self.center)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        pts = x.reshape(-1, 3)
        d = self.degree
        # powers[k][i] = x_k^i as contiguous vectors
        powers = []
        for k in range(3):
            col = np.ascontiguousarray(pts[:, k])
            pw = [np.ones(len(pts))]
            for _ in range(d):
                pw.append(pw[-1] * col)
            powers.append(pw)
        m = np.empty(((d + 1) ** 3, len(pts)))
        row = 0
        for i in range(d + 1):
            for j in range(d + 1):
                xy = powers[0][i] * powers[1][j]
                for k in range(d + 1):
                    np.multiply(xy, powers[2][k], out=m[row])
                    row += 1
        c = self.coef.reshape(-1, m.shape[0])
        if not np.any(c.imag):
            t = (c.real @ m).T.astype(complex)
        else:
            t = (c @ m).T
        if self.a != 0.0:
            r2 = np.sum((pts - self.center) ** 2, axis=-1)
            t = t * np.exp(-self.a * r2)[:, None]
        return t.reshape(lead + self.shape)

    def _times_coordinate(self, coef, axis, deg_out):
        """Coefficients of ``x_axis * P`` (degree grows by one)."""
        ax = coef.ndim - 3 + axis
        out = np.zeros(coef.shape[:-3] + (deg_out + 1,) * 3, dtype=complex)
        src = [slice(None)] * coef.ndim
        dst = [slice(None)] * coef.ndim
        d = coef.shape[-1] - 1
        for k in range(3):
            dst[coef.ndim - 3 + k] = slice(0, d + 1)
        dst[ax] = slice(1, d + 2)
        out[tuple(dst)] = coef
        return out

    def diff(self, axis):
        """Exact partial derivative ``d/dx_axis``."""
        d = self.degree
        nd = d + 1 if self.a != 0.0 else d
        nd = max(nd, 0)
        ax = self.coef.ndim - 3 + axis
        out = np.zeros(self.shape + (nd + 1,) * 3, dtype=complex)
        # dP/dx_axis
        if d > 0:
            dp = np.moveaxis(self.coef, ax, -1)[..., 1:] * np.arange(1, d + 1)
            dp = np.moveaxis(dp, -1, ax)
            idx = [slice(None)] * out.ndim
            for k in range(3):
                idx[out.ndim - 3 + k] = slice(0, d + 1)
            idx[ax] = slice(0, d)
            out[tuple(idx)] += dp
        if self.a != 0.0:
            # -2a (x - c) P
            xp = self._times_coordinate(self.coef, axis, nd)
            idx = [slice(None)] * out.ndim
            for k in range(3):
                idx[out.ndim - 3 + k] = slice(0, d + 1)
            out -= 2.0 * self.a * xp
            out[tuple(idx)] += 2.0 * self.a * self.center[axis] * self.coef
        return GaussPoly(out, self.a, self.center)

    def grad(self):
        """Gradient as a GaussPoly of shape ``shape + (3,)``."""
        parts = [self.diff(k) for k in range(3)]
        d = max(p.degree for p in parts)
        return GaussPoly(np.stack([p._padded(d) for p in parts], axis=len(self.shape)), self.a, self.center)

    def support_radius(self, tol=1e-14):
        """Radius beyond which the field is below `tol` times its coefficient scale."""
        if self.a == 0.0:
            return math.inf
        cmax = max(float(np.max(np.abs(self.coef))), 1e-300)
        m = 3 * self.degree
        r = 1.0
        for _ in range(50):
            # log of sum_k r^k, safe for very small a (huge r)
            lr = math.log(max(r, 1.0))
            log_poly = m * lr + math.log(sum(math.exp(-j * lr) for j in range(m + 1)))
            r_new = math.sqrt(max(log_poly - math.log(tol), 1.0) / self.a)
            if abs(r_new - r) < 1e-9:
                break
            r = r_new
        return r + float(np.linalg.norm(self.center))


def gauss_scalar(a=1.0, center=(0.0, 0.0, 0.0), amplitude=1.0):
    c = np.zeros((1, 1, 1), dtype=complex)
    c[0, 0, 0] = amplitude
    return GaussPoly(c, a, center)


def polynomial_scalar(terms, degree=None):
    """Scalar polynomial from a mapping ``{(i, j, k): coefficient}``."""
    degree = degree if degree is not None else max(sum(t) for t in terms) if terms else 0
    degree = max(degree, max(max(t) for t in terms))
    c = np.zeros((degree + 1,) * 3, dtype=complex)
    for (i, j, k), v in terms.items():
        c[i, j, k] += v
    return GaussPoly(c, a=0.0)


def quadratic_lambda():
    """``1 - |x|^2``: its gradient is linear, so multilinear interpolation reproduces it."""
    return polynomial_scalar({(0, 0, 0): 1.0, (2, 0, 0): -1.0, (0, 2, 0): -1.0, (0, 0, 2): -1.0})


def bump_lambda():
    """``(1 - |x|^2)^2``, vanishing to second order on the unit sphere."""
    terms = {}
    # 1 - 2 r^2 + r^4
    terms[(0, 0, 0)] = 1.0
    for k in range(3):
        e = [0, 0, 0]
        e[k] = 2
        terms[tuple(e)] = terms.get(tuple(e), 0.0) - 2.0
    for k in range(3):
        for l in range(3):
            e = [0, 0, 0]
            e[k] += 2
            e[l] += 2
            terms[tuple(e)] = terms.get(tuple(e), 0.0) + 1.0
    return polynomial_scalar(terms)


class GaussPolyField(MatrixField):
    """Matrix field in the Gaussian-polynomial family with exact derivatives."""

    def __init__(self, poly, symmetry="general", name="gausspoly", support_radius=None, validate=True):
        if poly.shape[-2:] != poly.shape[-2:] or len(poly.shape) != 2:
            raise ValueError("GaussPolyField needs a matrix-shaped GaussPoly")
        self.poly = poly
        sr = support_radius if support_radius is not None else poly.support_radius()
        super().__init__(poly, n=poly.shape[0], support_radius=sr, symmetry=symmetry, name=name, validate=validate)

    def __call__(self, x):
        return np.asarray(self.poly(_as_points(x, self.n)), dtype=complex)

    def derivative(self, k):
        return GaussPolyField(self.poly.diff(k), self.symmetry, f"d{k}{self.name}", self.support_radius, validate=False)

    def second_derivative(self, k, l):
        """``d^2 f / dx_k dx_l`` as a GaussPoly."""
        return self.poly.diff(k).diff(l)

    def __add__(self, other):
        if isinstance(other, GaussPolyField) and self.poly._compatible(other.poly):
            sym = self.symmetry if self.symmetry == other.symmetry else "general"
            return GaussPolyField(
                self.poly + other.poly, sym, f"{self.name}+{other.name}",
                max(self.support_radius, other.support_radius), validate=False,
            )
        return super().__add__(other)

    def scaled(self, s):
        sym = self.symmetry
        if sym == "skew-hermitian" and np.imag(s) != 0:
            sym = "general"
        return GaussPolyField(self.poly * s, sym, f"{s}*{self.name}", self.support_radius, validate=False)

    def trace_poly(self):
        return sum((self.poly[i, i] for i in range(1, self.n)), self.poly[0, 0])


def random_gausspoly_field(rng, degree=2, a=1.0, symmetric=True, real=True, scale=1.0, center=(0.0, 0.0, 0.0)):
    """Random symmetric (or general) Gaussian-polynomial matrix field."""
    shape = (3, 3) + (degree + 1,) * 3
    c = rng.standard_normal(shape)
    if not real:
        c = c + 1j * rng.standard_normal(shape)
    # damp high-order terms so the field is O(1) on the envelope scale
    i, j, k = np.indices((degree + 1,) * 3)
    tot = i + j + k
    c = np.where(tot <= degree, c / np.vectorize(math.factorial)(tot), 0.0)
    if symmetric:
        c = 0.5 * (c + np.swapaxes(c, 0, 1))
    poly = GaussPoly(scale * c, a, center)
    return GaussPolyField(poly, "symmetric" if symmetric else "general", "random-gausspoly")


def random_vector_gausspoly(rng, degree=2, a=1.0, scale=1.0, center=(0.0, 0.0, 0.0)):
    shape = (3,) + (degree + 1,) * 3
    c = rng.standard_normal(shape)
    i, j, k = np.indices((degree + 1,) * 3)
    tot = i + j + k
    c = np.where(tot <= degree, c / np.vectorize(math.factorial)(tot), 0.0)
    return GaussPoly(scale * c, a, center)


def lambda_identity_field(lam, name="lambda-E"):
    """``lam(x) * E`` for a scalar GaussPoly ``lam``."""
    eye = np.eye(3)[:, :, None, None, None]
    coef = eye * np.asarray(lam.coef)[None, None]
    sr = lam.support_radius() if lam.a != 0.0 else 1.0
    return GaussPolyField(GaussPoly(coef, lam.a, lam.center), "symmetric", name, support_radius=sr)


def potential_field(lam, name="potential"):
    """Skew field ``L_{grad lam}`` for a scalar GaussPoly ``lam``."""
    g = lam.grad()  # shape (3,)
    coef = g.coef
    out = np.zeros((3, 3) + coef.shape[-3:], dtype=complex)
    out[0, 1] = -coef[2]
    out[0, 2] = coef[1]
    out[1, 0] = coef[2]
    out[1, 2] = -coef[0]
    out[2, 0] = -coef[1]
    out[2, 1] = coef[0]
    sr = lam.support_radius() if lam.a != 0.0 else 1.0
    return GaussPolyField(GaussPoly(out, g.a, g.center), "skew-hermitian", name, support_radius=sr)


def potential_field_from_callable(grad_lam, support_radius=1.0, name="potential"):
    return MatrixField(lambda x: cross_operator(grad_lam(x)), 3, support_radius, "general", name, validate=False)


# ---------------------------------------------------------------------------
# grid fields

@dataclass(frozen=True)
class Grid:
    """Regular grid: node ``(i, j, k)`` sits at ``origin + spacing * (i, j, k)``."""

    dims: tuple
    origin: tuple
    spacing: float

    @classmethod
    def cube(cls, half_width, nodes, dim=3):
        h = 2.0 * half_width / (nodes - 1)
        return cls((nodes,) * dim, (-half_width,) * dim, h)

    @property
    def dim(self):
        return len(self.dims)

    @property
    def size(self):
        return int(np.prod(self.dims))

    def axes(self):
        return [self.origin[k] + self.spacing * np.arange(self.dims[k]) for k in range(len(self.dims))]

    def points(self):
        ax = self.axes()
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)


def trilinear(values, grid, x):
    """Trilinear interpolation of node `values` (shape ``dims + tail``); zero outside."""
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    pts = x.reshape(-1, 3)
    tail = values.shape[3:]
    u = (pts - np.asarray(grid.origin)) / grid.spacing
    dims = np.asarray(grid.dims)
    i0 = np.floor(u).astype(np.int64)
    s = u - i0
    out = np.zeros((len(pts),) + tail, dtype=values.dtype)
    flat = values.reshape((-1,) + tail)
    strides = np.array([dims[1] * dims[2], dims[2], 1])
    for cx in (0, 1):
        for cy in (0, 1):
            for cz in (0, 1):
                idx = i0 + np.array([cx, cy, cz])
                ok = np.all((idx >= 0) & (idx < dims), axis=-1)
                w = (
                    np.where(cx, s[:, 0], 1 - s[:, 0])
                    * np.where(cy, s[:, 1], 1 - s[:, 1])
                    * np.where(cz, s[:, 2], 1 - s[:, 2])
                )
                w = np.where(ok, w, 0.0)
                lin = np.where(ok[:, None], idx, 0) @ strides
                out += w.reshape((-1,) + (1,) * len(tail)) * flat[lin]
    return out.reshape(lead + tail)


class GridField(MatrixField):
    kind = "grid"

    def __init__(self, values, grid, symmetry="general", name="grid", validate=True):
        values = np.ascontiguousarray(values, dtype=complex)
        if values.shape[:3] != tuple(grid.dims):
            raise ValueError("grid values do not match grid dims")
        self.values = values
        self.grid = grid
        half = max(abs(o) + grid.spacing * (d - 1) for o, d in zip(grid.origin, grid.dims))
        self.n = values.shape[-1]
        self.symmetry = symmetry
        self.name = name
        self.support_radius = half * math.sqrt(3.0)
        self._func = None
        if validate and symmetry != "general":
            defect = symmetry_defect(values, symmetry)
            if defect > _SYM_TOL:
                raise ValueError(f"grid field {name!r} is not {symmetry} (defect {defect:.3e})")

    def __call__(self, x):
        return trilinear(self.values, self.grid, _as_points(x, 3))

    @classmethod
    def sample(cls, field, grid, name=None):
        vals = field(grid.points())
        return cls(vals, grid, field.symmetry, name or field.name, validate=False)


# ---------------------------------------------------------------------------
# weights on the phase space

class WeightField:
    """Matrix weight ``(x, xi) -> p(x, xi)`` used in the weighted linear problem."""

    def __init__(self, func, n=3, name="weight"):
        self._func = func
        self.n = n
        self.name = name

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        x, xi = np.broadcast_arrays(x, xi)
        return np.asarray(self._func(x, xi), dtype=complex)

    @classmethod
    def identity(cls, n=3):
        return cls(lambda x, xi: np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)), n, "unit")

    @property
    def is_identity(self):
        return self.name == "unit"

    @staticmethod
    def check(values, xi, role, tol=1e-10):
        """Verify ``p* xi = xi`` (role "p") or ``q xi = xi`` (role "q")."""
        xi = np.asarray(xi, dtype=float)
        m = adjoint(values) if role == "p" else values
        defect = np.max(np.abs(np.einsum("...ij,...j->...i", m, xi) - xi), initial=0.0)
        if defect > tol:
            raise ValueError(f"weight violates {role}-condition (defect {defect:.3e})")
        return defect
