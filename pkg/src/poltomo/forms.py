"""Quadratic forms on second-rank tensors integrated over directions.

``B(f, f) = int (n-1)|P_xi f|^2 - 2(|pi f xi|^2 + |pi f* xi|^2) d omega``
``Q(f, f) = int |f|^2 - 2|f xi|^2 d omega``
"""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import sphere_quadrature
from .tensorcore import adjoint, frob2

# closed-form Rayleigh quotients on skew tensors (divided by omega)
def skew_constant_B(n):
    return (n * n - 3 * n - 2) / n


SKEW_CONSTANT_Q = 1.0 / 3.0


@dataclass
class FormValue:
    value: float
    n: int
    quadrature: str
    normalized: bool = False
    imag: float = 0.0

    def __float__(self):
        return self.value


def _vecs(m, xi):
    return np.einsum("...ab,kb->k...a", m, xi)


def _form_B_integrand(f, xi):
    f = np.asarray(f, dtype=complex)
    pi = np.eye(xi.shape[1]) - xi[:, :, None] * xi[:, None, :]
    n = xi.shape[1]
    pfp = pi @ f @ pi
    fx = np.einsum("kab,kb->ka", pi @ f, xi)
    fsx = np.einsum("kab,kb->ka", pi @ adjoint(f), xi)
    return (n - 1) * frob2(pfp) - 2.0 * (np.sum(np.abs(fx) ** 2, -1) + np.sum(np.abs(fsx) ** 2, -1))


def form_B(f, n=None, quad=None, normalize=False):
    f = np.asarray(f)
    n = n or f.shape[-1]
    quad = quad or sphere_quadrature(n, "product", 8)
    if quad.n != n or f.shape[-1] != n:
        raise ValueError(f"dimension mismatch: tensor {f.shape}, quadrature n={quad.n}, n={n}")
    vals = _form_B_integrand(np.broadcast_to(f, (len(quad.weights), n, n)), quad.nodes)
    v = complex(quad.integrate(vals))
    if normalize:
        v /= quad.omega
    return FormValue(v.real, n, quad.tag, normalize, v.imag)


def form_Q(f, quad=None, normalize=False):
    f = np.asarray(f, dtype=complex)
    quad = quad or sphere_quadrature(3, "product", 8)
    if quad.n != 3 or f.shape != (3, 3):
        raise ValueError("Q is defined for n = 3")
    fx = np.einsum("ab,kb->ka", f, quad.nodes)
    vals = frob2(f) - 2.0 * np.sum(np.abs(fx) ** 2, -1)
    v = float(quad.integrate(vals))
    if normalize:
        v /= quad.omega
    return FormValue(v, 3, quad.tag, normalize)


def tensor_basis(n, cls):
    """Orthonormal (Frobenius) real basis of the symmetric, skew or full tensor space."""
    basis = []
    if cls in ("symmetric", "general"):
        for i in range(n):
            e = np.zeros((n, n))
            e[i, i] = 1.0
            basis.append(e)
        for i in range(n):
            for j in range(i + 1, n):
                e = np.zeros((n, n))
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
                basis.append(e)
    if cls in ("skew", "general"):
        for i in range(n):
            for j in range(i + 1, n):
                e = np.zeros((n, n))
                e[i, j] = 1.0 / np.sqrt(2.0)
                e[j, i] = -1.0 / np.sqrt(2.0)
                basis.append(e)
    if cls not in ("symmetric", "skew", "general"):
        raise ValueError(f"unknown tensor class {cls!r}")
    return basis


def gram_matrix(n, cls, quad=None, form="B"):
    quad = quad or sphere_quadrature(n, "product", 8)
    basis = tensor_basis(n, cls)
    q = (lambda f: form_B(f, n, quad).value) if form == "B" else (lambda f: form_Q(f, quad).value)
    diag = [q(e) for e in basis]
    G = np.diag(diag)
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            G[i, j] = G[j, i] = 0.5 * (q(basis[i] + basis[j]) - diag[i] - diag[j])
    return G / quad.omega, basis


def positivity_scan(n, cls, quad=None, form="B"):
    """Smallest Rayleigh quotient ``B(f,f) / (omega |f|^2)`` over the class, and its minimizer."""
    G, basis = gram_matrix(n, cls, quad, form)
    w, V = np.linalg.eigh(G)
    worst = sum(c * e for c, e in zip(V[:, 0], basis))
    return float(w[0]), worst


def moment_identity_check(f, quad=None):
    """``| (1/omega) int |f xi|^2 d omega - |f|^2 / n |`` for a tensor ``f``."""
    f = np.asarray(f)
    n = f.shape[-1]
    quad = quad or sphere_quadrature(n, "product", 8)
    fx = np.einsum("ab,kb->ka", f, quad.nodes)
    mean = float(quad.mean(np.sum(np.abs(fx) ** 2, -1)))
    return abs(mean - float(frob2(f)) / n)


def forms_report(n, quad=None):
    """Report dict: measured skew constants and class minima next to their closed forms."""
    quad = quad or sphere_quadrature(n, "product", 8)
    rep = {"n": n, "quadrature": quad.tag, "entries": []}
    skew_min, _ = positivity_scan(n, "skew", quad)
    rep["entries"].append(
        {"quantity": "B/(omega|f|^2) on skew", "measured": skew_min, "target": skew_constant_B(n), "tolerance": 1e-10,
         "pass": abs(skew_min - skew_constant_B(n)) <= 1e-10}
    )
    if n == 3:
        qmin, _ = positivity_scan(3, "skew", quad, form="Q")
        rep["entries"].append(
            {"quantity": "Q/(omega|f|^2) on skew", "measured": qmin, "target": SKEW_CONSTANT_Q, "tolerance": 1e-10,
             "pass": abs(qmin - SKEW_CONSTANT_Q) <= 1e-10}
        )
    sym_min, _ = positivity_scan(n, "symmetric", quad)
    rep["entries"].append({"quantity": "min B quotient on symmetric", "measured": sym_min, "target": "> 0", "pass": sym_min > 0})
    gen_min, _ = positivity_scan(n, "general", quad)
    entry = {"quantity": "min B quotient on all tensors", "measured": gen_min}
    if n >= 4:
        entry.update(target="> 0", **{"pass": gen_min > 0})
    rep["entries"].append(entry)
    rep["pass"] = all(e.get("pass", True) for e in rep["entries"])
    return rep
