"""Line transforms over full lines of R^3: the trace transform S and the ray transform I."""
import csv
from dataclasses import dataclass

import numpy as np

from .fields import GaussPolyField, MatrixField, ScalarField, lambda_identity_field

DEFAULT_SEGMENTS = 4096


@dataclass
class LineSample:
    x: np.ndarray
    xi: np.ndarray
    T: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if abs(np.linalg.norm(self.xi) - 1.0) > 1e-12:
            raise ValueError("line direction is not a unit vector")
        if abs(np.dot(self.x, self.xi)) > 1e-12:
            raise ValueError("line base point must satisfy <x, xi> = 0")

    @classmethod
    def for_field(cls, f, x, xi):
        x = np.asarray(x, dtype=float)
        return cls(x, xi, f.support_radius + float(np.linalg.norm(x)))


def _as_lines(lines):
    single = isinstance(lines, LineSample)
    return ([lines] if single else list(lines)), single


def _line_integral(f, lines, segments, integrand):
    lines, single = _as_lines(lines)
    if segments % 2:
        raise ValueError("Simpson rule needs an even segment count")
    w = np.ones(segments + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0
    s = np.linspace(-1.0, 1.0, segments + 1)
    out = np.empty(len(lines), dtype=complex)
    for i, ln in enumerate(lines):
        t = ln.T * s
        vals = f(ln.x + t[:, None] * ln.xi)
        out[i] = (integrand(vals, ln.xi) @ w) * (2.0 * ln.T / segments)
    return out[0] if single else out


def _tr_projected(vals, xi):
    return np.trace(vals, axis1=-2, axis2=-1) - np.einsum("a,kab,b->k", xi, vals, xi)


def _longitudinal(vals, xi):
    return np.einsum("a,kab,b->k", xi, vals, xi)


def s_transform(f, lines, segments=DEFAULT_SEGMENTS):
    """``int tr(pi_xi f(x + t xi) pi_xi) dt`` over ``[-T, T]`` for symmetric `f`."""
    if f.symmetry != "symmetric":
        raise ValueError("the trace transform is defined for symmetric fields")
    return _line_integral(f, lines, segments, _tr_projected)


def ray_transform(f, lines, segments=DEFAULT_SEGMENTS):
    """``int f_ij(x + t xi) xi^i xi^j dt`` over ``[-T, T]``."""
    return _line_integral(f, lines, segments, _longitudinal)


def line_magnitude(f, lines, segments=DEFAULT_SEGMENTS):
    """``int |f(x + t xi)|_F dt``: the reference size for transform values on a line."""
    return _line_integral(f, lines, segments, lambda vals, xi: np.linalg.norm(vals.reshape(len(vals), -1), axis=1)).real


def trace_split(f):
    """``f = f_tilde + lam E`` with ``lam = tr f / 3`` and ``tr f_tilde = 0``."""
    if f.symmetry != "symmetric":
        raise ValueError("trace split expects a symmetric field")
    n = f.n
    if isinstance(f, GaussPolyField):
        lam_poly = f.trace_poly() * (1.0 / n)
        lam_e = lambda_identity_field(lam_poly)
        ft = GaussPolyField(f.poly - lam_e.poly, "symmetric", f"{f.name}~", f.support_radius, validate=False)
        return ft, ScalarField(lam_poly, name=f"tr({f.name})/3")

    def lam(x):
        return np.trace(f(x), axis1=-2, axis2=-1) / n

    def ft(x):
        v = f(x)
        return v - lam(x)[..., None, None] * np.eye(n)

    return (
        MatrixField(ft, n, f.support_radius, "symmetric", f"{f.name}~", validate=False),
        ScalarField(lam, name=f"tr({f.name})/3"),
    )


def write_sinogram_csv(path, lines, s_values, i_values):
    n = len(lines[0].x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i+1}" for i in range(n)] + [f"xi{i+1}" for i in range(n)] + ["S_re", "S_im", "I_re", "I_im"])
        for ln, s, v in zip(lines, s_values, i_values):
            w.writerow([repr(float(z)) for z in (*ln.x, *ln.xi, s.real, s.imag, v.real, v.imag)])
