"""Forward solvers along chords of the ball.

* :func:`solve_transport` integrates ``U' = (P_xi f) U`` with classical RK4.
* :func:`solve_weighted_linear` evaluates ``int p (P_xi f) q dt`` by Simpson.
* :func:`s_data` integrates ``tr(pi f pi)``.
* :func:`linearized_data` forms ``Phi_1^{-1} Phi_2 - E`` ray by ray.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import accel
from .fields import GridField, WeightField
from .geometry import Ray, chord_times, rays_to_arrays
from .tensorcore import cross_operator, right_handed_frame

DEFAULT_SEGMENTS = 2048
TANGENT_CHORD = 1e-6
SAMPLE_BUDGET = 1 << 18


class IntegrationError(RuntimeError):
    def __init__(self, message, t=None, ray_index=None):
        super().__init__(message)
        self.t = t
        self.ray_index = ray_index


def _segments(length, step):
    """Common even segment count so that every chord is split with spacing <= step."""
    if step is None:
        return DEFAULT_SEGMENTS
    if not step > 0:
        raise ValueError("step must be positive")
    m = int(math.ceil(float(np.max(length, initial=0.0)) / step - 1e-12))
    m = max(m, 2)
    return m + (m % 2)


def _projected(f_vals, xi):
    n = xi.shape[-1]
    pi = np.eye(n) - xi[..., :, None] * xi[..., None, :]
    return pi @ f_vals @ pi


def _check_finite(vals, t, index_offset=0):
    bad = ~np.all(np.isfinite(vals), axis=(-2, -1))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        ti = float(np.atleast_1d(t)[i] if np.ndim(t) else t)
        raise IntegrationError(f"non-finite field value at t={ti:.6g}", t=ti, ray_index=i + index_offset)


def transport_batch(f, start, xi, length, nsteps, sample_every=None):
    """RK4 for a batch of rays starting at `start` (t = 0) with chord `length`.

    Returns exit matrices ``(N, n, n)``; with ``sample_every`` also the
    intermediate solutions every that many steps, shape ``(N, K, n, n)``.
    """
    start = np.atleast_2d(np.asarray(start, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    length = np.atleast_1d(np.asarray(length, dtype=float))
    n = xi.shape[-1]
    if isinstance(f, GridField) and sample_every is None:
        return accel.rk4_grid(f.values, f.grid, start, xi, length, nsteps)
    if sample_every is None:
        return _transport_sampled(f, start, xi, length, nsteps)
    h = length / nsteps
    hh = h[:, None, None]

    def A(t):
        vals = f(start + t[:, None] * xi)
        _check_finite(vals, t)
        return _projected(vals, xi)

    U = np.broadcast_to(np.eye(n, dtype=complex), (len(start), n, n)).copy()
    samples = [U.copy()] if sample_every else None
    A0 = A(np.zeros_like(h))
    for s in range(nsteps):
        t = s * h
        Am = A(t + 0.5 * h)
        A1 = A(t + h)
        k1 = A0 @ U
        k2 = Am @ (U + 0.5 * hh * k1)
        k3 = Am @ (U + 0.5 * hh * k2)
        k4 = A1 @ (U + hh * k3)
        U = U + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        A0 = A1
        if sample_every and (s + 1) % sample_every == 0:
            samples.append(U.copy())
    if sample_every:
        return U, np.stack(samples, axis=1)
    return U


def _transport_sampled(f, start, xi, length, nsteps):
    # evaluate the field in large blocks of rays, then integrate in the kernel
    n = xi.shape[-1]
    per_ray = 2 * nsteps + 1
    chunk = max(1, SAMPLE_BUDGET // per_ray)
    tt = np.arange(per_ray) / (2.0 * nsteps)

    def run(lo):
        sl = slice(lo, lo + chunk)
        t = tt[None, :] * length[sl, None]
        vals = f(start[sl, None, :] + t[..., None] * xi[sl, None, :])
        bad = ~np.all(np.isfinite(vals), axis=(-2, -1))
        if np.any(bad):
            r, k = np.argwhere(bad)[0]
            raise IntegrationError(f"non-finite field value at t={t[r, k]:.6g}", t=float(t[r, k]), ray_index=lo + int(r))
        return accel.rk4_samples(vals, xi[sl], length[sl], nsteps)

    parts = accel.map_chunks(run, list(range(0, len(start), chunk)))
    if not parts:
        return np.empty((0, n, n), dtype=complex)
    return np.concatenate(parts)


def solve_transport(f, ray, step=None, t0=None, t1=None, samples=False):
    """Solve ``U' = (P_xi f(x + t xi)) U`` on ``[t0, t1]`` (default the chord), ``U(t0) = E``.

    With ``samples=True`` also returns ``(t_nodes, U(t_nodes))`` at every RK step.
    Near-tangent chords shorter than 1e-6 return ``E``.
    """
    t0 = ray.tau_minus if t0 is None else t0
    t1 = ray.tau_plus if t1 is None else t1
    n = len(ray.xi)
    L = t1 - t0
    if L < TANGENT_CHORD:
        U = np.eye(n, dtype=complex)
        return (U, (np.array([t0]), U[None])) if samples else U
    m = _segments(np.array([L]), step)
    start = ray.x + t0 * ray.xi
    if samples:
        U, path = transport_batch(f, start, ray.xi, [L], m, sample_every=1)
        return U[0], (t0 + L * np.arange(m + 1) / m, path[0])
    return transport_batch(f, start, ray.xi, [L], m)[0]


def transport_to_points(f, domain, x, xi, step=None):
    """``U(x, xi)``: the solution started at the entry point of the line through x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    tm, _ = chord_times(domain, x, xi)
    tm = np.atleast_1d(tm)
    L = -tm
    out = np.broadcast_to(np.eye(xi.shape[-1], dtype=complex), (len(x),) + (xi.shape[-1],) * 2).copy()
    live = L >= TANGENT_CHORD
    if np.any(live):
        m = _segments(L[live], step)
        out[live] = transport_batch(f, x[live] + tm[live, None] * xi[live], xi[live], L[live], m)
    return out


def transport_weight(f, domain, step=None, inverse=False, name=None):
    """Weight field ``U(x, xi)`` (or ``U(x, xi)^{-1}``) of the transport solution for `f`."""

    def func(x, xi):
        shape = x.shape[:-1]
        U = transport_to_points(f, domain, x.reshape(-1, x.shape[-1]), xi.reshape(-1, xi.shape[-1]), step)
        if inverse:
            U = np.linalg.inv(U)
        return U.reshape(shape + U.shape[-2:])

    return WeightField(func, xi_dim(f), name or (f"U^-1[{f.name}]" if inverse else f"U[{f.name}]"))


def xi_dim(f):
    return getattr(f, "n", 3)


# ---------------------------------------------------------------------------
# boundary data sets

@dataclass
class BoundaryDataSet:
    rays: list
    values: np.ndarray  # (N, n, n) complex
    meta: dict = field(default_factory=dict)
    failed: np.ndarray = None

    def __post_init__(self):
        if self.failed is None:
            self.failed = np.zeros(len(self.rays), dtype=bool)

    @property
    def n(self):
        return self.values.shape[-1]

    def __len__(self):
        return len(self.rays)

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.dumps())

    def dumps(self):
        n = self.n
        header = dict(self.meta)
        header.update({"n": n, "count": len(self.rays)})
        buf = io.StringIO()
        buf.write(json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = [f"x{i+1}" for i in range(n)] + [f"xi{i+1}" for i in range(n)] + ["tau_minus", "tau_plus"]
        for a in range(n):
            for b in range(n):
                cols += [f"re{a+1}{b+1}", f"im{a+1}{b+1}"]
        cols.append("failed")
        w.writerow(cols)
        for r, V, bad in zip(self.rays, self.values, self.failed):
            row = [*r.x, *r.xi, r.tau_minus, r.tau_plus]
            for z in V.reshape(-1):
                row += [z.real, z.imag]
            w.writerow([repr(float(v)) for v in row] + [int(bad)])
        return buf.getvalue()

    @classmethod
    def read(cls, path):
        with open(path, newline="") as fh:
            header = json.loads(fh.readline())
            rows = list(csv.reader(fh))
        n = header["n"]
        rays, vals, failed = [], [], []
        for row in rows[1:]:
            v = [float(s) for s in row[:-1]]
            rays.append(Ray(np.array(v[:n]), np.array(v[n:2 * n]), v[2 * n], v[2 * n + 1]))
            z = np.array(v[2 * n + 2:])
            vals.append((z[0::2] + 1j * z[1::2]).reshape(n, n))
            failed.append(bool(int(row[-1])))
        meta = {k: v for k, v in header.items() if k not in ("n", "count")}
        return cls(rays, np.array(vals).reshape(-1, n, n), meta, np.array(failed, dtype=bool))


def forward_data(f, rays, step=None, batch=2048):
    """Nonlinear data ``Phi[f]``: exit values of the transport solution on each ray.

    Rays are processed in vectorized batches; a batch that raises is retried
    ray by ray so that failing rays get flagged while the rest complete.
    """
    x, xi, tm, tp = rays_to_arrays(rays)
    n = xi.shape[-1]
    L = tp - tm
    m = _segments(L, step)
    out = np.broadcast_to(np.eye(n, dtype=complex), (len(rays), n, n)).copy()
    failed = np.zeros(len(rays), dtype=bool)
    errors = {}
    live = np.flatnonzero(L >= TANGENT_CHORD)
    for lo in range(0, len(live), batch):
        idx = live[lo:lo + batch]
        try:
            out[idx] = transport_batch(f, x[idx] + tm[idx, None] * xi[idx], xi[idx], L[idx], m)
        except IntegrationError:
            for i in idx:
                try:
                    out[i] = transport_batch(f, x[i] + tm[i] * xi[i], xi[i], L[i:i + 1], m)[0]
                except IntegrationError as exc:
                    failed[i] = True
                    out[i] = np.nan
                    errors[int(i)] = str(exc)
    meta = {"field": f.name, "step": float(np.max(L, initial=0.0) / m), "segments": m, "solver": "rk4", "kind": "transport"}
    if errors:
        meta["errors"] = errors
    return BoundaryDataSet(list(rays), out, meta, failed)


def _simpson(nseg):
    w = np.ones(nseg + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def solve_weighted_linear(f, p, q, ray, step=None):
    """``u(tau+) = int p (P_xi f) q dt`` along `ray` by composite Simpson."""
    return weighted_linear_batch(f, p, q, [ray], step)[0]


def weighted_linear_batch(f, p, q, rays, step=None, batch=512):
    x, xi, tm, tp = rays_to_arrays(rays)
    n = xi.shape[-1]
    L = tp - tm
    m = _segments(L, step)
    w = _simpson(m)
    tt = np.arange(m + 1) / m
    out = np.zeros((len(rays), n, n), dtype=complex)
    for lo in range(0, len(rays), batch):
        sl = slice(lo, lo + batch)
        t = tm[sl, None] + tt[None, :] * L[sl, None]
        pts = x[sl, None, :] + t[..., None] * xi[sl, None, :]
        dirs = np.broadcast_to(xi[sl, None, :], pts.shape)
        vals = f(pts)
        _check_finite(vals.reshape(-1, n, n), t.reshape(-1), lo)
        integrand = _projected(vals, dirs)
        if p is not None and not getattr(p, "is_identity", False):
            pv = p(pts, dirs)
            WeightField.check(pv, dirs, "p")
            integrand = pv @ integrand
        if q is not None and not getattr(q, "is_identity", False):
            qv = q(pts, dirs)
            WeightField.check(qv, dirs, "q")
            integrand = integrand @ qv
        out[sl] = np.einsum("k,rkab->rab", w, integrand) * (L[sl] / m)[:, None, None]
    out[L < TANGENT_CHORD] = 0.0
    return out


def linear_forward_data(f, rays, p=None, q=None, step=None):
    vals = weighted_linear_batch(f, p, q, rays, step)
    m = _segments(np.array([r.length for r in rays]), step)
    meta = {"field": f.name, "segments": m, "solver": "simpson", "kind": "linear",
            "p": getattr(p, "name", "unit"), "q": getattr(q, "name", "unit")}
    return BoundaryDataSet(list(rays), vals, meta)


def linearized_data(phi1, phi2, cond_limit=1e12):
    """Per-ray ``Phi_1^{-1} Phi_2 - E``; singular records are flagged with their condition number."""
    if len(phi1) != len(phi2):
        raise ValueError("data sets cover different ray lists")
    for r1, r2 in zip(phi1.rays, phi2.rays):
        if not (np.allclose(r1.x, r2.x, atol=1e-12) and np.allclose(r1.xi, r2.xi, atol=1e-12)):
            raise ValueError("data sets cover different ray lists")
    n = phi1.n
    out = np.zeros_like(phi2.values)
    failed = phi1.failed | phi2.failed
    errors = {}
    for i in range(len(phi1)):
        if failed[i]:
            out[i] = np.nan
            continue
        c = np.linalg.cond(phi1.values[i])
        if not np.isfinite(c) or c > cond_limit:
            failed[i] = True
            out[i] = np.nan
            errors[i] = f"singular record (cond={c:.3e})"
            continue
        out[i] = np.linalg.solve(phi1.values[i], phi2.values[i]) - np.eye(n)
    meta = {"kind": "linearized", "field": f"{phi1.meta.get('field')}->{phi2.meta.get('field')}"}
    if errors:
        meta["errors"] = errors
    return BoundaryDataSet(list(phi1.rays), out, meta, failed)


def s_data(f, ray, step=None):
    """``S[f] = int tr(pi f pi) dt`` along the chord (direct Simpson, no logarithm)."""
    return s_data_batch(f, [ray], step)[0]


def s_data_batch(f, rays, step=None):
    x, xi, tm, tp = rays_to_arrays(rays)
    L = tp - tm
    m = _segments(L, step)
    w = _simpson(m)
    tt = np.arange(m + 1) / m
    t = tm[:, None] + tt[None, :] * L[:, None]
    pts = x[:, None, :] + t[..., None] * xi[:, None, :]
    vals = f(pts)
    # tr(pi f pi) = tr f - <f xi, xi>
    tr = np.trace(vals, axis1=-2, axis2=-1) - np.einsum("ra,rkab,rb->rk", xi, vals, xi)
    out = (tr @ w) * (L / m)
    out[L < TANGENT_CHORD] = 0.0
    return out


def rotation_closed_form(lam, x, xi):
    """Rotation by angle ``lam(x)`` about the axis `xi` (right-handed), for stacks of points."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 3:
        raise ValueError("the rotation closed form exists only for n = 3")
    angle = np.asarray(lam(x))
    frame = right_handed_frame(xi)
    c, s = np.cos(angle), np.sin(angle)
    block = np.zeros(np.shape(angle) + (3, 3), dtype=np.result_type(angle, float))
    block[..., 0, 0] = c
    block[..., 0, 1] = -s
    block[..., 1, 0] = s
    block[..., 1, 1] = c
    block[..., 2, 2] = 1.0
    return frame @ block @ np.swapaxes(frame, -1, -2)
