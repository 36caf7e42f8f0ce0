"""Euclidean ball domain, straight-line chords and sphere quadrature."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .tensorcore import UNIT_TOL, random_unit_vectors


@dataclass(frozen=True)
class BallDomain:
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def n(self):
        return len(self.center)

    @property
    def c(self):
        return np.asarray(self.center)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.c, axis=-1) <= self.radius + tol


@dataclass
class Ray:
    """Segment ``t -> x + t xi`` for ``t`` in ``[tau_minus, tau_plus]``."""

    x: np.ndarray
    xi: np.ndarray
    tau_minus: float
    tau_plus: float

    @property
    def length(self):
        return self.tau_plus - self.tau_minus

    @property
    def entry(self):
        return self.x + self.tau_minus * self.xi

    @property
    def exit(self):
        return self.x + self.tau_plus * self.xi

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.x + t[..., None] * self.xi


@dataclass
class SphereQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    tag: str = ""

    @property
    def n(self):
        return self.nodes.shape[1]

    @property
    def omega(self):
        return sphere_area(self.n)

    def integrate(self, values):
        """Sum ``w_k * values[k]`` over the node axis (axis 0)."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def mean(self, values):
        return self.integrate(values) / self.omega


def sphere_area(n):
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def chord_times(domain, x, xi):
    """Roots ``tau- <= tau+`` of ``|x + t xi - c|^2 = r^2``.

    Works on stacks. Lines missing the ball (only possible for tangent input
    on the boundary, up to rounding) get the degenerate chord ``tau- = tau+``.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if not np.all(np.abs(np.linalg.norm(xi, axis=-1) - 1.0) <= UNIT_TOL):
        raise ValueError("direction is not a unit vector")
    y = x - domain.c
    b = np.sum(y * xi, axis=-1)
    disc = b * b - (np.sum(y * y, axis=-1) - domain.radius ** 2)
    root = np.sqrt(np.maximum(disc, 0.0))
    tm, tp = -b - root, -b + root
    if np.ndim(tm) == 0:
        return float(tm), float(tp)
    return tm, tp


def make_rays(domain, x, xi):
    tm, tp = chord_times(domain, x, xi)
    tm, tp = np.atleast_1d(tm), np.atleast_1d(tp)
    x = np.atleast_2d(x)
    xi = np.atleast_2d(xi)
    return [Ray(x[i].copy(), xi[i].copy(), float(tm[i]), float(tp[i])) for i in range(len(tm))]


def _hemisphere_directions(rng, normals):
    """Uniform directions on the hemisphere ``<xi, normal> < 0``."""
    count, n = normals.shape
    xi = random_unit_vectors(rng, count, n)
    dot = np.sum(xi * normals, axis=-1)
    xi[dot > 0] *= -1.0
    # measure-zero tangent draws
    tangent = np.abs(dot) < 1e-12
    while np.any(tangent):
        redraw = random_unit_vectors(rng, int(tangent.sum()), n)
        d = np.sum(redraw * normals[tangent], axis=-1)
        redraw[d > 0] *= -1.0
        xi[tangent] = redraw
        tangent = np.abs(np.sum(xi * normals, axis=-1)) < 1e-12
    return xi


def sample_inward_boundary(domain, count, seed):
    """Seeded sample of inward boundary rays.

    Base points are uniform on the sphere, directions uniform over the inward
    hemisphere. Every returned ray starts on the boundary (``tau- = 0``).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    base, xi = sample_inward_arrays(domain, count, seed)
    y = base - domain.c
    tp = -2.0 * np.sum(y * xi, axis=-1)
    return [Ray(base[i], xi[i], 0.0, float(tp[i])) for i in range(count)]


def sample_inward_arrays(domain, count, seed):
    """Array form of :func:`sample_inward_boundary`: ``(base points, directions)``."""
    rng = np.random.default_rng(seed)
    nu = random_unit_vectors(rng, count, domain.n)
    base = domain.c + domain.radius * nu
    xi = _hemisphere_directions(rng, nu)
    return base, xi


def mean_inward_cosine(n):
    """Exact mean of ``<xi, nu>`` for uniform directions on the inward hemisphere."""
    return -math.gamma(n / 2) / (math.sqrt(math.pi) * math.gamma((n + 1) / 2))


def rays_to_arrays(rays):
    x = np.array([r.x for r in rays])
    xi = np.array([r.xi for r in rays])
    tm = np.array([r.tau_minus for r in rays])
    tp = np.array([r.tau_plus for r in rays])
    return x, xi, tm, tp


def write_rays_csv(path, rays):
    n = len(rays[0].x)
    header = [f"x{i+1}" for i in range(n)] + [f"xi{i+1}" for i in range(n)] + ["tau_minus", "tau_plus"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rays:
            w.writerow([repr(float(v)) for v in (*r.x, *r.xi, r.tau_minus, r.tau_plus)])


def read_rays_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(1 for h in header if h.startswith("x") and not h.startswith("xi"))
    rays = []
    for row in body:
        v = [float(s) for s in row]
        rays.append(Ray(np.array(v[:n]), np.array(v[n:2 * n]), v[2 * n], v[2 * n + 1]))
    return rays


def _s2_product(order):
    m = order // 2 + 1
    k = order + 1
    z, wz = special.roots_legendre(m)
    phi = 2.0 * np.pi * np.arange(k) / k
    s = np.sqrt(1.0 - z * z)
    nodes = np.stack(
        [np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(z, np.ones(k))], axis=-1
    ).reshape(-1, 3)
    weights = np.outer(wz, np.full(k, 2.0 * np.pi / k)).reshape(-1)
    return nodes, weights


def _s3_product(order):
    # xi = (sqrt(1 - t^2) eta, t), d omega_3 = sqrt(1 - t^2) dt d omega_2(eta)
    m = order // 2 + 1
    t, wt = special.roots_chebyu(m)
    eta, weta = _s2_product(order)
    s = np.sqrt(1.0 - t * t)
    nodes = np.concatenate(
        [s[:, None, None] * eta[None, :, :], np.broadcast_to(t[:, None, None], (m, len(eta), 1))], axis=-1
    ).reshape(-1, 4)
    weights = np.outer(wt, weta).reshape(-1)
    return nodes, weights


def sphere_quadrature(n=3, rule="product", order=8, size=None, seed=0):
    """Quadrature on the unit sphere of R^n.

    ``rule="product"``: Gauss-Legendre in the polar cosine times a uniform
    azimuth grid (n=3), extended to n=4 by a Gauss-Chebyshev (2nd kind) factor.
    Exact for polynomials in the Cartesian components of degree <= `order`.

    ``rule="montecarlo"``: `size` uniform random nodes with equal weights.
    """
    if n not in (3, 4):
        raise ValueError(f"sphere quadrature supports n in (3, 4), got {n}")
    if rule == "product":
        nodes, weights = _s2_product(order) if n == 3 else _s3_product(order)
        tag = f"product-{order}"
    elif rule == "montecarlo":
        size = size or 20000
        rng = np.random.default_rng(seed)
        nodes = random_unit_vectors(rng, size, n)
        weights = np.full(size, sphere_area(n) / size)
        tag = f"montecarlo-{size}"
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return SphereQuadrature(nodes, weights, tag)


def tangent_bundle_lines(support_radius, count, seed, n=3):
    """Seeded lines ``t -> x + t xi`` with ``<x, xi> = 0`` and ``|x| <= support_radius``.

    ``x`` is uniform in the disc of radius `support_radius` inside ``xi^perp``.
    """
    if not support_radius > 0:
        raise ValueError("support_radius must be positive")
    rng = np.random.default_rng(seed)
    xi = random_unit_vectors(rng, count, n)
    w = rng.standard_normal((count, n))
    w -= np.sum(w * xi, axis=-1, keepdims=True) * xi
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    rad = support_radius * rng.random(count) ** (1.0 / (n - 1))
    x = rad[:, None] * w
    x -= np.sum(x * xi, axis=-1, keepdims=True) * xi
    return [(x[i], xi[i]) for i in range(count)]
