import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poltomo.decomp3d import (
    ConvergenceError,
    closedness_residual,
    decompose,
    discrete_closedness,
    solve_dirichlet,
    staggered_rhs,
)
from poltomo.fields import (
    Grid,
    GridField,
    MatrixField,
    bump_lambda,
    gauss_scalar,
    potential_field,
    random_gausspoly_field,
)
from poltomo.geometry import BallDomain


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_symmetric_fields_are_closed(seed):
    rng = np.random.default_rng(seed)
    f = random_gausspoly_field(rng, degree=2, a=1.0)
    x = rng.uniform(-1, 1, (20, 3))
    assert np.max(np.abs(closedness_residual(f)(x))) <= 1e-12
    lam, closed = decompose(f, Grid.cube(1.0, 9))
    assert np.max(np.abs(lam.values)) == 0.0
    assert np.allclose(closed(x), f(x))


def test_closedness_of_potential_is_minus_laplacian(rng):
    # lam = exp(-4|x|^2): Laplace(lam) = (64 r^2 - 24) lam, residual = -Laplace(lam)
    f = potential_field(gauss_scalar(4.0))
    x = rng.uniform(-1, 1, (30, 3))
    r2 = np.sum(x * x, axis=1)
    lap = (64 * r2 - 24) * np.exp(-4 * r2)
    assert np.allclose(closedness_residual(f)(x), -lap, atol=1e-12)
    wrapped = MatrixField(f, 3, f.support_radius, validate=False)
    assert np.allclose(closedness_residual(wrapped)(x), -lap, atol=1e-5)


def test_manufactured_potential_converges_second_order():
    lam0 = bump_lambda()
    f = potential_field(lam0)
    errs = []
    for N in (9, 17, 33):
        grid = Grid.cube(1.0, N)
        lam, closed = decompose(f, grid)
        P = grid.points()
        errs.append(np.sqrt(np.mean(np.abs(lam.values[lam.mask] - lam0(P[lam.mask])) ** 2)))
        inside = P[np.linalg.norm(P, axis=-1) < 0.8]
        assert np.max(np.abs(closed(inside))) <= 10 * np.max(np.abs(f(inside))) / N
    assert 3.0 <= errs[1] / errs[2] <= 4.5


def test_idempotence(rng):
    f = random_gausspoly_field(rng, degree=2, a=2.0, symmetric=False)
    grid = Grid.cube(1.0, 17)
    lam, closed = decompose(f, grid)
    lam2, _ = decompose(closed, grid)
    scale = np.max(np.abs(f(grid.points())))
    assert np.max(np.abs(lam.values)) > 1e-3 * scale
    assert np.max(np.abs(lam2.values)) <= 1e-6 * scale
    assert np.max(np.abs(discrete_closedness(closed, grid))) <= 1e-6 * scale


def test_grid_input_and_complex_rhs(rng):
    f = random_gausspoly_field(rng, degree=1, a=2.0, symmetric=False, real=False)
    grid = Grid.cube(1.0, 13)
    rhs = staggered_rhs(f, grid)
    assert np.iscomplexobj(rhs)
    lam = solve_dirichlet(rhs, grid)
    re = solve_dirichlet(rhs.real, grid)
    im = solve_dirichlet(rhs.imag, grid)
    assert np.allclose(lam.values, re.values + 1j * im.values, atol=1e-12)
    assert np.all(lam.values[~lam.mask] == 0)


def test_errors():
    f = potential_field(bump_lambda())
    grid = Grid.cube(1.0, 17)
    with pytest.raises(ConvergenceError) as err:
        solve_dirichlet(staggered_rhs(f, grid), grid, maxiter=2)
    assert len(err.value.history) == 2
    g = GridField(np.zeros((3, 3, 3, 4, 4)), Grid.cube(1.0, 3))
    with pytest.raises(ValueError):
        decompose(g, Grid.cube(1.0, 3))


def test_shifted_ball():
    dom = BallDomain((0.2, 0.0, -0.1), 0.7)
    # lam0 = (r^2 - |x - c|^2)^2 vanishes to second order on the sphere
    lam0 = lambda x: (0.49 - np.sum((x - dom.c) ** 2, axis=-1)) ** 2
    grad = lambda x: (-4 * (0.49 - np.sum((x - dom.c) ** 2, axis=-1)))[..., None] * (x - dom.c)
    f = MatrixField(lambda x: np.einsum("...k,kab->...ab", grad(x), _levi()), validate=False)
    grid = Grid.cube(1.0, 33)
    lam, _ = decompose(f, grid, dom)
    P = grid.points()
    assert np.max(np.abs(lam.values[lam.mask] - lam0(P[lam.mask]))) <= 2e-2 * np.max(lam0(P[lam.mask]))


def _levi():
    # L_v = sum_k v_k E_k with E_k the cross-product generators
    from poltomo.tensorcore import cross_operator

    return np.stack([cross_operator(e) for e in np.eye(3)])
