import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from poltomo.fields import (
    GaussPoly,
    GaussPolyField,
    Grid,
    GridField,
    MatrixField,
    WeightField,
    bump_lambda,
    gauss_scalar,
    lambda_identity_field,
    polynomial_scalar,
    potential_field,
    quadratic_lambda,
    random_gausspoly_field,
    trilinear,
)
from poltomo.tensorcore import cross_operator

pts_strategy = arrays(float, (6, 3), elements=st.floats(-1.5, 1.5))


def test_gausspoly_evaluation_matches_formula(rng):
    f = random_gausspoly_field(rng, degree=2, a=1.3, center=(0.1, -0.2, 0.3))
    x = rng.uniform(-1, 1, (20, 3))
    c = f.poly.coef
    ref = np.zeros((20, 3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                ref += c[:, :, i, j, k] * (x[:, 0] ** i * x[:, 1] ** j * x[:, 2] ** k)[:, None, None]
    ref *= np.exp(-1.3 * np.sum((x - [0.1, -0.2, 0.3]) ** 2, axis=1))[:, None, None]
    assert np.allclose(f(x), ref, atol=1e-14)


@given(st.integers(0, 2), st.floats(0.0, 2.0), pts_strategy)
def test_exact_derivative_matches_finite_difference(axis, a, x):
    rng = np.random.default_rng(1)
    f = random_gausspoly_field(rng, degree=2, a=a)
    d = f.poly.diff(axis)
    h = 1e-6
    e = np.zeros(3)
    e[axis] = h
    fd = (f(x + e) - f(x - e)) / (2 * h)
    assert np.allclose(d(x), fd, atol=1e-6 * (1 + np.abs(fd).max()))


def test_gradient_and_arithmetic(rng):
    lam = bump_lambda()
    x = rng.uniform(-1, 1, (10, 3))
    r2 = np.sum(x * x, axis=1)
    assert np.allclose(lam(x), (1 - r2) ** 2)
    assert np.allclose(lam.grad()(x), (-4 * (1 - r2))[:, None] * x)
    q = quadratic_lambda()
    assert np.allclose(q(x), 1 - r2)
    assert np.allclose((q + q * 2.0)(x), 3 * (1 - r2))
    assert np.allclose((lam - lam)(x), 0.0)
    g = gauss_scalar(2.0, amplitude=3.0)
    assert np.allclose(g(x), 3 * np.exp(-2 * r2))
    with pytest.raises(ValueError):
        g + q  # different envelopes
    p = polynomial_scalar({(1, 0, 0): 2.0, (0, 0, 3): 1.0})
    assert np.allclose(p(x), 2 * x[:, 0] + x[:, 2] ** 3)


def test_support_radius_bounds_field(rng):
    f = random_gausspoly_field(rng, degree=2, a=2.0)
    R = f.support_radius
    d = rng.standard_normal((50, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    assert np.max(np.abs(f(R * d))) <= 1e-12 * np.abs(f.poly.coef).max()


def test_potential_field_is_cross_operator_of_gradient(rng):
    lam = bump_lambda()
    f = potential_field(lam)
    x = rng.uniform(-1, 1, (10, 3))
    assert f.symmetry == "skew-hermitian"
    assert np.allclose(f(x), cross_operator(lam.grad()(x)))
    # L at grad(1 - |x|^2) = -2x
    fq = potential_field(quadratic_lambda())
    assert np.allclose(fq(x), cross_operator(-2 * x))


def test_symmetry_validation():
    skew = MatrixField(lambda x: cross_operator(x), symmetry="skew-hermitian")
    assert skew.symmetry == "skew-hermitian"
    with pytest.raises(ValueError):
        MatrixField(lambda x: cross_operator(x), symmetry="symmetric")
    with pytest.raises(ValueError):
        MatrixField(lambda x: cross_operator(x), symmetry="hermitian-ish")
    assert skew.scaled(1j).symmetry == "general"
    assert skew.scaled(2.0).symmetry == "skew-hermitian"
    assert (skew + skew).symmetry == "skew-hermitian"


def test_lambda_identity_field(rng):
    f = lambda_identity_field(bump_lambda())
    x = rng.uniform(-1, 1, (5, 3))
    assert np.allclose(f(x), bump_lambda()(x)[:, None, None] * np.eye(3))


@given(arrays(float, (4,), elements=st.floats(-3, 3)), pts_strategy)
def test_trilinear_reproduces_affine_functions(c, x):
    grid = Grid.cube(2.0, 9)
    P = grid.points()
    vals = c[0] + P @ c[1:]
    inside = np.all(np.abs(x) <= 2.0, axis=1)
    got = trilinear(vals, grid, x)
    assert np.allclose(got[inside], (c[0] + x @ c[1:])[inside], atol=1e-12)


def test_trilinear_zero_outside_box():
    grid = Grid.cube(1.0, 5)
    vals = np.ones(grid.dims)
    assert trilinear(vals, grid, np.array([[2.0, 0.0, 0.0], [0.0, 0.0, -1.5]])).tolist() == [0.0, 0.0]


def test_grid_field_sampling(rng):
    f = random_gausspoly_field(rng, degree=1, a=1.0)
    grid = Grid.cube(1.0, 7)
    gf = GridField.sample(f, grid)
    assert gf.values.shape == (7, 7, 7, 3, 3)
    assert np.allclose(gf(grid.points()[2, 3, 4]), f(grid.points()[2, 3, 4]))
    with pytest.raises(ValueError):
        GridField(np.zeros((3, 3, 3, 3, 3)), grid)
    bad = np.zeros((7, 7, 7, 3, 3))
    bad[..., 0, 1] = 1.0
    with pytest.raises(ValueError):
        GridField(bad, grid, "symmetric")
    g4 = Grid.cube(1.0, 3, dim=4)
    assert g4.points().shape == (3, 3, 3, 3, 4) and g4.dim == 4


def test_weight_field_conditions(rng):
    xi = np.array([[0.0, 0.0, 1.0]])
    unit = WeightField.identity()
    assert unit.is_identity
    v = unit(np.zeros((1, 3)), xi)
    assert WeightField.check(v, xi, "p") == 0.0
    rot = np.array([[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]])
    WeightField.check(rot, xi, "q")
    with pytest.raises(ValueError):
        WeightField.check(rot, np.array([[1.0, 0.0, 0.0]]), "q")
