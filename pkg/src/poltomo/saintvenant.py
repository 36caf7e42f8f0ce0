"""Kernel of the trace transform: inner derivatives, the Saint-Venant operator
and the space- and Fourier-domain compatibility systems."""
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .fields import GaussPoly, GaussPolyField, GridField

KERNEL_THRESHOLD = 1e-6
SPACE_THRESHOLD = 1e-10


def inner_derivative(v):
    """Symmetrized gradient ``(dv)_ij = (d_j v_i + d_i v_j) / 2`` of a GaussPoly vector field."""
    if v.shape != (3,):
        raise ValueError("inner derivative expects a 3-vector GaussPoly")
    parts = [v.diff(j) for j in range(3)]  # parts[j][i] = d_j v_i
    d = max(p.degree for p in parts)
    grad = np.stack([p._padded(d) for p in parts], axis=1)  # [i, j] = d_j v_i
    sym = 0.5 * (grad + np.swapaxes(grad, 0, 1))
    return GaussPolyField(GaussPoly(sym, v.a, v.center), "symmetric", "dv", validate=False)


def kernel_field_from_potential(v):
    """Symmetric ``f`` with ``f - (tr f) E = dv``, i.e. ``f = dv - (tr dv / 2) E``."""
    dv = inner_derivative(v)
    tr = dv.trace_poly()
    eye = np.eye(3)[:, :, None, None, None]
    coef = dv.poly.coef - 0.5 * eye * tr.coef[None, None]
    return GaussPolyField(GaussPoly(coef, v.a, v.center), "symmetric", "kernel-v", validate=False)


def _hessian(poly):
    """``H[k][l] = d^2 poly / dx_k dx_l`` as GaussPoly objects (shape of poly)."""
    first = [poly.diff(k) for k in range(3)]
    return [[first[k].diff(l) for l in range(3)] for k in range(3)]


def saint_venant_tensor(h, x):
    """All 81 components ``(Rh)_ijkl`` at points ``x``; ``4 (Rh)_ijkl = h_ik;jl - h_jk;il - h_il;jk + h_jl;ik``."""
    poly = h.poly if isinstance(h, GaussPolyField) else h
    H = _hessian(poly)
    d2 = np.stack([np.stack([H[k][l](x) for l in range(3)], axis=-1) for k in range(3)], axis=-2)
    # d2[..., a, b, k, l] = h_ab;kl
    R = (
        np.einsum("...ikjl->...ijkl", d2)
        - np.einsum("...jkil->...ijkl", d2)
        - np.einsum("...iljk->...ijkl", d2)
        + np.einsum("...jlik->...ijkl", d2)
    )
    return R / 4.0


SV_INDEX = ((0, 1, 0, 1), (0, 2, 0, 2), (1, 2, 1, 2), (0, 1, 0, 2), (1, 0, 1, 2), (0, 2, 1, 2))


def saint_venant_R(h):
    """The six independent components of ``Rh`` as GaussPoly scalars.

    Order: (Rh)_1212, (Rh)_1313, (Rh)_2323, (Rh)_1213, (Rh)_2123, (Rh)_1323.
    """
    poly = h.poly if isinstance(h, GaussPolyField) else h
    H = _hessian(poly)

    def comp(i, j, k, l):
        terms = [H[j][l][i, k], H[i][l][j, k] * -1.0, H[j][k][i, l] * -1.0, H[i][k][j, l]]
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out * 0.25

    return [comp(*idx) for idx in SV_INDEX]


def space_residual_polys(f):
    """``R_1[f] .. R_6[f]`` of the substituted second-order system, as GaussPoly scalars."""
    poly = f.poly if isinstance(f, GaussPolyField) else f
    H = _hessian(poly)

    def d(i, j, k, l):
        return H[k - 1][l - 1][i - 1, j - 1]

    def combo(*terms):
        out = None
        for c, idx in terms:
            t = d(*idx) * c
            out = t if out is None else out + t
        return out

    R1 = combo((1, (1, 1, 1, 1)), (2, (1, 2, 1, 2)), (1, (2, 2, 2, 2)), (1, (3, 3, 1, 1)), (1, (3, 3, 2, 2)))
    R2 = combo((1, (1, 1, 1, 1)), (2, (1, 3, 1, 3)), (1, (2, 2, 1, 1)), (1, (2, 2, 3, 3)), (1, (3, 3, 3, 3)))
    R3 = combo((1, (1, 1, 2, 2)), (1, (1, 1, 3, 3)), (2, (2, 3, 2, 3)), (1, (2, 2, 2, 2)), (1, (3, 3, 3, 3)))
    R4 = combo((1, (1, 2, 1, 3)), (1, (1, 3, 1, 2)), (1, (2, 2, 2, 3)), (-1, (2, 3, 1, 1)), (1, (3, 3, 2, 3)))
    R5 = combo((1, (1, 1, 1, 3)), (1, (1, 2, 2, 3)), (-1, (1, 3, 2, 2)), (1, (2, 3, 1, 2)), (1, (3, 3, 1, 3)))
    R6 = combo((1, (1, 1, 1, 2)), (-1, (1, 2, 3, 3)), (1, (1, 3, 2, 3)), (1, (2, 2, 1, 2)), (1, (2, 3, 1, 3)))
    return [R1, R2, R3, R4, R5, R6]


def second_derivative_scale(f, x):
    """Natural scale for second-order residuals: max |f_ij;kl| over the sample points."""
    H = _hessian(f.poly)
    return max(float(np.max(np.abs(H[k][l](x)))) for k in range(3) for l in range(3))


@dataclass
class KernelReport:
    space: list = None
    space_scale: float = None
    fourier: list = None
    fourier_scale: float = None
    relations: list = None
    thresholds: dict = field(default_factory=lambda: {"space": SPACE_THRESHOLD, "fourier": KERNEL_THRESHOLD})
    boundary_magnitude: float = None

    def _rel(self, vals, scale):
        return [v / scale if scale else v for v in vals]

    @property
    def space_relative(self):
        return None if self.space is None else self._rel(self.space, self.space_scale)

    @property
    def fourier_relative(self):
        return None if self.fourier is None else self._rel(self.fourier, self.fourier_scale)

    @property
    def reduced_verdict(self):
        """In-kernel verdict from the first three space residuals."""
        if self.space is None:
            return None
        return max(self.space_relative[:3]) <= self.thresholds["space"]

    @property
    def full_verdict(self):
        if self.space is None:
            return None
        return max(self.space_relative) <= self.thresholds["space"]

    @property
    def fourier_verdict(self):
        if self.fourier is None:
            return None
        return max(self.fourier_relative[:3]) <= self.thresholds["fourier"]

    def merge(self, other):
        for k, v in asdict(other).items():
            if v is not None and k != "thresholds":
                setattr(self, k, v)
        return self

    def to_dict(self):
        d = asdict(self)
        d.update(
            space_relative=self.space_relative,
            fourier_relative=self.fourier_relative,
            reduced_verdict=self.reduced_verdict,
            full_verdict=self.full_verdict,
            fourier_verdict=self.fourier_verdict,
        )
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def kernel_residuals(f, points):
    """Max-abs values of ``R_1[f] .. R_6[f]`` at `points`, with the second-derivative scale."""
    if not isinstance(f, GaussPolyField):
        raise TypeError("space residuals need a field with exact second derivatives")
    points = np.asarray(points, dtype=float)
    res = [float(np.max(np.abs(R(points)))) for R in space_residual_polys(f)]
    scale = second_derivative_scale(f, points)
    return KernelReport(space=res, space_scale=scale)


def frequency_grid(grid):
    """Angular frequencies (``2 pi k / L``) matching ``numpy.fft.fftn`` of node samples."""
    return [2.0 * np.pi * np.fft.fftfreq(d, grid.spacing) for d in grid.dims]


def fourier_system(g, w):
    """``R^_1 .. R^_6`` evaluated on Fourier data ``g[a][b]`` at frequencies ``w = (w1, w2, w3)``."""
    x1, x2, x3 = w
    g11, g12, g13 = g[0][0], g[0][1], g[0][2]
    g22, g23, g33 = g[1][1], g[1][2], g[2][2]
    R1 = x1**2 * g11 + 2 * x1 * x2 * g12 + x2**2 * g22 + (x1**2 + x2**2) * g33
    R2 = x1**2 * g11 + 2 * x1 * x3 * g13 + (x1**2 + x3**2) * g22 + x3**2 * g33
    R3 = (x2**2 + x3**2) * g11 + x2**2 * g22 + 2 * x2 * x3 * g23 + x3**2 * g33
    R4 = x1 * x3 * g12 + x1 * x2 * g13 + x2 * x3 * g22 - x1**2 * g23 + x2 * x3 * g33
    R5 = x1 * x3 * g11 + x2 * x3 * g12 - x2**2 * g13 + x1 * x2 * g23 + x1 * x3 * g33
    R6 = x1 * x2 * g11 - x3**2 * g12 + x2 * x3 * g13 + x1 * x2 * g22 + x1 * x3 * g23
    return [R1, R2, R3, R4, R5, R6]


def field_spectrum(f):
    """DFT (``e^{-i<w, x>}`` convention, origin phase corrected) of the six components."""
    vals = f.values
    grid = f.grid
    w = np.meshgrid(*frequency_grid(grid), indexing="ij")
    phase = np.exp(-1j * sum(wk * o for wk, o in zip(w, grid.origin)))
    dv = grid.spacing ** 3
    g = [[None] * 3 for _ in range(3)]
    for a in range(3):
        for b in range(a, 3):
            g[a][b] = np.fft.fftn(vals[..., a, b]) * phase * dv
            g[b][a] = g[a][b]
    return g, w


def boundary_magnitude(f):
    v = np.abs(f.values)
    faces = [v[0], v[-1], v[:, 0], v[:, -1], v[:, :, 0], v[:, :, -1]]
    return float(max(np.max(x) for x in faces)) / max(float(np.max(v)), 1e-300)


def fourier_residuals(f, boundary_tol=1e-8):
    """Fourier-domain residuals of the six-equation system for a grid-sampled symmetric field."""
    if not isinstance(f, GridField):
        raise TypeError("Fourier residuals need a grid field")
    bm = boundary_magnitude(f)
    if bm > boundary_tol:
        warnings.warn(f"field is not negligible at the grid boundary (relative magnitude {bm:.3e})")
    g, w = field_spectrum(f)
    R = fourier_system(g, w)
    res = [float(np.max(np.abs(r))) for r in R]
    gmax = max(float(np.max(np.abs(g[a][b]))) for a in range(3) for b in range(3))
    wmax2 = float(np.max(sum(wk**2 for wk in w)))
    return KernelReport(fourier=res, fourier_scale=gmax * wmax2, boundary_magnitude=bm)


def fourier_relation_check(g, w):
    """Residuals of the three identities linking the last three equations to the first three.

    ``2 w2 w3 R4 = w3^2 R1 + w2^2 R2 - w1^2 R3``,
    ``2 w1 w3 R5 = w3^2 R1 - w2^2 R2 + w1^2 R3``,
    ``2 w1 w2 R6 = -w3^2 R1 + w2^2 R2 + w1^2 R3``.
    Residuals are relative to ``max|g| * max|w|^4``.
    """
    x1, x2, x3 = w
    R1, R2, R3, R4, R5, R6 = fourier_system(g, w)
    rel = [
        2 * x2 * x3 * R4 - (x3**2 * R1 + x2**2 * R2 - x1**2 * R3),
        2 * x1 * x3 * R5 - (x3**2 * R1 - x2**2 * R2 + x1**2 * R3),
        2 * x1 * x2 * R6 - (-(x3**2) * R1 + x2**2 * R2 + x1**2 * R3),
    ]
    gmax = max(float(np.max(np.abs(g[a][b]))) for a in range(3) for b in range(3))
    wmax4 = float(np.max(sum(wk**2 for wk in w))) ** 2
    scale = gmax * wmax4 if gmax > 0 else 1.0
    return [float(np.max(np.abs(r))) / scale for r in rel]


def kernel_check(f, seed, points=256, lines=64, grid_nodes=64, segments=4096):
    """Space, trace-transform and Fourier tests of ``f in ker S`` with their verdicts.

    Space residuals use seeded points in the ball of radius ``min(support, 3)``;
    ``S`` uses seeded lines through the support and is compared with the
    largest line integral of ``|f|``; the Fourier system uses a ``grid_nodes^3``
    sampling of the support cube.
    """
    from .fields import Grid
    from .geometry import tangent_bundle_lines
    from .xray import LineSample, line_magnitude, s_transform

    rng = np.random.default_rng(seed)
    R = min(f.support_radius, 3.0)
    x = rng.standard_normal((points, 3))
    x *= (R * rng.random(points) ** (1 / 3) / np.linalg.norm(x, axis=1))[:, None]
    rep = kernel_residuals(f, x)
    L = f.support_radius
    grid = Grid.cube(L, grid_nodes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep.merge(fourier_residuals(GridField.sample(f, grid)))
    ls = [LineSample.for_field(f, p, d) for p, d in tangent_bundle_lines(0.5 * R, lines, seed + 1)]
    s_vals = np.abs(s_transform(f, ls, segments))
    s_scale = float(np.max(line_magnitude(f, ls, segments)))
    s_max = float(np.max(s_vals))
    out = rep.to_dict()
    out.update(
        s_max=s_max,
        s_scale=s_scale,
        s_relative=s_max / s_scale if s_scale else s_max,
        s_threshold=KERNEL_THRESHOLD,
        s_verdict=s_max <= KERNEL_THRESHOLD * s_scale,
    )
    verdicts = [out["reduced_verdict"], out["s_verdict"], out["fourier_verdict"]]
    out["consistent"] = len(set(verdicts)) == 1
    out["verdict"] = "in-kernel" if all(verdicts) else ("not-in-kernel" if not any(verdicts) else "inconsistent")
    return out
