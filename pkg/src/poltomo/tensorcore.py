"""Small dense matrix algebra on C^n: projections, the cross-product operator,
symmetric/skew splits and norms.

Every function broadcasts over leading axes, so a stack of directions of shape
``(N, n)`` produces a stack of matrices of shape ``(N, n, n)``.
"""
import numpy as np

UNIT_TOL = 1e-12


def _check_unit(xi, tol=UNIT_TOL):
    xi = np.asarray(xi, dtype=float)
    norms = np.linalg.norm(xi, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        raise ValueError(f"direction is not a unit vector (|xi| = {norms})")
    return xi


def frob2(u):
    """Squared Frobenius norm ``sum |u_ij|^2`` over the last two axes."""
    u = np.asarray(u)
    return np.sum((u * np.conj(u)).real, axis=(-2, -1))


def frob(u):
    return np.sqrt(frob2(u))


def adjoint(u):
    """Hermitian adjoint ``u*_ij = conj(u_ji)``."""
    return np.conj(np.swapaxes(u, -1, -2))


def project_orthogonal(xi):
    """Orthogonal projector ``I - xi xi^T`` onto the hyperplane orthogonal to `xi`."""
    xi = _check_unit(xi)
    n = xi.shape[-1]
    return np.eye(n) - xi[..., :, None] * xi[..., None, :]


def p_xi(f, xi):
    """Two-sided projection ``pi f pi``."""
    pi = project_orthogonal(xi)
    return pi @ np.asarray(f) @ pi


def q_xi(f, xi):
    """Trace-free part of :func:`p_xi` on the hyperplane ``xi^perp``.

    ``Q f = P f - tr(P f) / (n - 1) * pi``.
    """
    xi = _check_unit(xi)
    n = xi.shape[-1]
    pi = project_orthogonal(xi)
    pf = pi @ np.asarray(f) @ pi
    tr = np.trace(pf, axis1=-2, axis2=-1)
    return pf - (tr / (n - 1))[..., None, None] * pi


def cross_operator(v):
    """Matrix of ``eta -> v x eta`` for (possibly complex) 3-vectors ``v``."""
    v = np.asarray(v)
    if v.shape[-1] != 3:
        raise ValueError(f"cross operator needs 3-vectors, got dimension {v.shape[-1]}")
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=np.result_type(v, float))
    v1, v2, v3 = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -v3
    out[..., 0, 2] = v2
    out[..., 1, 0] = v3
    out[..., 1, 2] = -v1
    out[..., 2, 0] = -v2
    out[..., 2, 1] = v1
    return out


def sym_skew_split(f):
    """Return ``(f+, f-)`` with ``f+ = (f + f^T)/2`` and ``f- = (f - f^T)/2``."""
    f = np.asarray(f)
    ft = np.swapaxes(f, -1, -2)
    return 0.5 * (f + ft), 0.5 * (f - ft)


def herm_skew_split(f):
    """Hermitian / skew-Hermitian split ``f = (f + f*)/2 + (f - f*)/2``."""
    f = np.asarray(f)
    fa = adjoint(f)
    return 0.5 * (f + fa), 0.5 * (f - fa)


def right_handed_frame(xi):
    """Orthonormal frame ``(e1, e2, xi)`` with ``e1 x e2 = xi`` for unit 3-vectors.

    Returns an array of shape ``(..., 3, 3)`` whose columns are e1, e2, xi.
    """
    xi = _check_unit(xi, tol=1e-10)
    # helper axis: the coordinate axis least aligned with xi
    idx = np.argmin(np.abs(xi), axis=-1)
    helper = np.zeros_like(xi)
    np.put_along_axis(helper, idx[..., None], 1.0, axis=-1)
    e1 = helper - np.sum(helper * xi, axis=-1, keepdims=True) * xi
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(xi, e1)
    return np.stack([e1, e2, xi], axis=-1)


def random_unit_vectors(rng, count, n=3):
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
