import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poltomo import accel
from poltomo.fields import (
    Grid,
    GridField,
    WeightField,
    bump_lambda,
    potential_field,
    quadratic_lambda,
    random_gausspoly_field,
)
from poltomo.geometry import BallDomain, sample_inward_boundary
from poltomo.inversion import (
    AssemblyMemoryError,
    InversionConfig,
    assemble,
    basis_matrices,
    cgls,
    closed_part_error,
    data_vector,
    gauge_null_action,
    gauge_spectrum_probe,
    hat_weights,
    lambda_sweep,
    read_triplets,
    reconstruct_nonlinear,
    relative_lambda,
    tikhonov_solve,
    write_triplets,
)
from poltomo.transport import BoundaryDataSet, forward_data, linear_forward_data, solve_weighted_linear

DOM = BallDomain()


def _step(rays, A):
    # the step that reproduces the operator's common segment count
    return max(r.length for r in rays) / A.segments
CLASSES = ["real-symmetric", "skew-hermitian", "general", "real-skew"]


@pytest.fixture(scope="module")
def small():
    grid = Grid.cube(1.0, 6)
    rays = sample_inward_boundary(DOM, 40, 5)
    return grid, rays


@pytest.mark.parametrize("cls, count", [("real-symmetric", 6), ("skew-hermitian", 9), ("general", 18),
                                        ("real-skew", 3)])
def test_basis_orthonormal(cls, count):
    B = basis_matrices(3, cls)
    assert len(B) == count
    G = np.einsum("iab,jab->ij", B.conj(), B).real
    assert np.allclose(G, np.eye(count))
    with pytest.raises(ValueError):
        basis_matrices(3, "hermitian")


@settings(max_examples=20)
@given(st.integers(2, 4), st.integers(0, 10_000))
def test_hat_weights_partition_of_unity(d, seed):
    rng = np.random.default_rng(seed)
    grid = Grid.cube(1.0, 5, dim=d)
    x = rng.uniform(-1, 1, (30, d))
    idx, w = hat_weights(x, grid)
    assert np.allclose(w.sum(axis=1), 1.0)
    # affine functions are reproduced exactly
    c = rng.standard_normal(d)
    nodal = grid.points().reshape(-1, d) @ c
    assert np.allclose(np.sum(w * nodal[idx], axis=1), x @ c)


def test_ray_matrix_row_sums_and_backends(small):
    grid, rays = small
    A = assemble(grid, rays, step=0.05)
    L = np.array([r.length for r in rays])
    assert np.allclose(np.asarray(A.W.sum(axis=1)).ravel(), L, atol=1e-12)
    if accel.HAVE_COMPILED:
        B = assemble(grid, rays, step=0.05, backend="numpy")
        assert abs(A.W - B.W).max() <= 1e-14


@pytest.mark.parametrize("cls", CLASSES)
def test_adjoint_consistency(cls, small, rng):
    grid, rays = small
    A = assemble(grid, rays, step=0.05, cls=cls)
    c = rng.standard_normal(A.shape[1])
    d = rng.standard_normal(A.shape[0])
    assert np.dot(A.matvec(c), d) == pytest.approx(np.dot(c, A.rmatvec(d)), rel=1e-12)
    M = A.to_sparse()
    assert np.allclose(M @ c, A.matvec(c), atol=1e-13)
    assert np.allclose(A.column_norms_sq(), np.asarray(M.multiply(M).sum(axis=0)).ravel())


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    grid = Grid.cube(1.0, 5)
    A = assemble(grid, sample_inward_boundary(DOM, 10, 1), step=0.1)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, A.shape[1]))
    assert np.allclose(A.matvec(a * x + b * y), a * A.matvec(x) + b * A.matvec(y), atol=1e-12)


@pytest.mark.parametrize("cls", ["real-symmetric", "skew-hermitian"])
def test_column_matches_direct_solver(cls, small):
    grid, rays = small
    A = assemble(grid, rays, step=0.05, cls=cls)
    node = np.ravel_multi_index((2, 3, 2), grid.dims)
    for j in range(A.nb):
        e = np.zeros(A.shape[1])
        e[node * A.nb + j] = 1.0
        col = A.matvec(e).reshape(A.nrays, 3, 3, 2)
        field = A.field(e)
        direct = np.array([solve_weighted_linear(field, None, None, r, step=r.length / A.segments) for r in rays])
        assert np.max(np.abs(col[..., 0] + 1j * col[..., 1] - direct)) <= 1e-8
    r, entry, part = A.row_meta(2 * 9 + 5)
    assert (r, entry, part) == (1, (0, 2), "im")
    assert A.col_meta(node * A.nb + 1) == ((2, 3, 2), 1)


def test_weighted_path(small, rng):
    grid, rays = small
    unit = assemble(grid, rays, step=0.05)
    # identity weight not flagged as such goes through explicit assembly
    eye = WeightField(lambda x, xi: np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)), name="eye")
    expl = assemble(grid, rays, p=eye, q=eye, step=0.05)
    assert expl.M is not None
    c = rng.standard_normal(unit.shape[1])
    assert np.allclose(expl.matvec(c), unit.matvec(c), atol=1e-13)

    def rot(x, xi):
        # rotation about xi by angle x1: p* xi = xi and q xi = xi
        from poltomo.transport import rotation_closed_form

        return rotation_closed_form(lambda y: y[..., 0], x, xi)

    q = WeightField(rot, name="rot")
    A = assemble(grid, rays, q=q, step=0.05)
    e = np.zeros(A.shape[1])
    e[np.ravel_multi_index((3, 2, 2), grid.dims) * A.nb + 4] = 1.0
    col = A.matvec(e).reshape(A.nrays, 3, 3, 2)
    direct = np.array([solve_weighted_linear(A.field(e), None, q, r, step=r.length / A.segments) for r in rays])
    assert np.max(np.abs(col[..., 0] + 1j * col[..., 1] - direct)) <= 1e-8
    assert np.dot(A.matvec(c), A.matvec(c)) > 0
    d = rng.standard_normal(A.shape[0])
    assert np.dot(A.matvec(c), d) == pytest.approx(np.dot(c, A.rmatvec(d)), rel=1e-12)


def test_memory_guard(small):
    grid, rays = small
    with pytest.raises(AssemblyMemoryError):
        assemble(grid, rays, step=0.05, memory_limit=1000)
    eye = WeightField(lambda x, xi: np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)), name="eye")
    with pytest.raises(AssemblyMemoryError):
        assemble(grid, rays, p=eye, step=0.05, memory_limit=10**5)


def test_triplet_round_trip(small, tmp_path):
    grid, rays = small
    A = assemble(grid, rays, step=0.05)
    A.spill(tmp_path / "a.bin")
    M = read_triplets(tmp_path / "a.bin")
    assert (M != A.to_sparse()).nnz == 0
    write_triplets(tmp_path / "b.bin", M)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    (tmp_path / "c.bin").write_bytes(b"NOTSPARSE")
    with pytest.raises(ValueError):
        read_triplets(tmp_path / "c.bin")


def test_zero_data_gives_zero_solution(small):
    grid, rays = small
    A = assemble(grid, rays, step=0.05)
    res = tikhonov_solve(A, np.zeros(A.shape[0]), 1e-3)
    assert res.converged and res.iterations == 0
    assert not np.any(res.coefficients)
    with pytest.raises(ValueError):
        tikhonov_solve(A, np.zeros(A.shape[0]), 0.0)
    with pytest.raises(ValueError):
        tikhonov_solve(A, np.zeros(3), 1.0)


def test_cgls_matches_normal_equations(small, rng):
    grid, rays = small
    A = assemble(grid, rays, step=0.05)
    d = rng.standard_normal(A.shape[0])
    lam = relative_lambda(A, 1e-2)
    c, it, ok, hist, mis = cgls(A, d, lam, tol=1e-12, maxiter=5000)
    M = A.to_sparse().toarray()
    ref = np.linalg.solve(M.T @ M + lam * np.eye(M.shape[1]), M.T @ d)
    assert ok
    assert np.linalg.norm(c - ref) <= 1e-8 * np.linalg.norm(ref)
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])


def test_inverse_crime():
    rng = np.random.default_rng(1)
    f = random_gausspoly_field(rng, degree=2, a=2.0)
    grid = Grid.cube(1.0, 12)
    A = assemble(grid, sample_inward_boundary(DOM, 3000, 3), step=2.0 / 128)
    c0 = A.coefficients(f)
    res = tikhonov_solve(A, A.matvec(c0), relative_lambda(A, 1e-3))
    assert res.converged
    inside = np.linalg.norm(grid.points().reshape(-1, 3), axis=1) < 1.0
    C, C0 = res.coefficients.reshape(-1, 6), c0.reshape(-1, 6)
    assert np.linalg.norm((C - C0)[inside]) / np.linalg.norm(C0[inside]) <= 0.05
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])


def test_lambda_sweep_is_ordered(small, rng):
    grid, rays = small
    A = assemble(grid, rays, step=0.05)
    d = A.matvec(rng.standard_normal(A.shape[1])) + 0.1 * rng.standard_normal(A.shape[0])
    _, table = lambda_sweep(A, d, [1e-3, 1e-2, 1e-1])
    norms = [t["solution_norm"] for t in table]
    misfits = [t["misfit"] for t in table]
    assert norms[0] > norms[1] > norms[2]
    assert misfits[0] < misfits[1] < misfits[2]


def test_gauge_null_action():
    grid = Grid.cube(1.0, 12)
    rays = sample_inward_boundary(DOM, 200, 2)
    A = assemble(grid, rays, step=2.0 / 256, cls="skew-hermitian")
    # the gradient of 1 - |x|^2 is linear, so its nodal samples are exact
    assert gauge_null_action(A, potential_field(quadratic_lambda())) <= 1e-12
    # for (1 - |x|^2)^2 the interpolation error decays like h^2
    coarse = gauge_null_action(A, potential_field(bump_lambda()))
    fine = gauge_null_action(assemble(Grid.cube(1.0, 23), rays, step=2.0 / 256, cls="skew-hermitian"),
                             potential_field(bump_lambda()))
    assert coarse / fine >= 3.0


def test_gauge_spectrum_probe_n3():
    rep = gauge_spectrum_probe(3, 9, 4000, seed=1)
    # the smallest eigenvalues are orders of magnitude below the median and
    # their eigenvectors lie mostly in the span of sampled potential fields
    assert rep["min_relative"] < 1e-2
    assert rep["count_below_1e-2"] >= 3
    assert min(rep["potential_alignment"][:3]) >= 0.8


def test_gauge_spectrum_probe_n4():
    rep = gauge_spectrum_probe(4, 6, 5000, seed=1)
    assert rep["min_relative"] > 1e-2
    assert rep["count_below_1e-2"] == 0


def _small_config():
    return InversionConfig(nodes=10, segments=128, lam_rel=1e-2)


def test_reconstruct_nonlinear_small_and_masked():
    rng = np.random.default_rng(11)
    f = random_gausspoly_field(rng, degree=2, a=4.0)
    f = f.scaled(0.05 / np.max(np.abs(f(Grid.cube(1.0, 9).points()))))
    rays = sample_inward_boundary(DOM, 2000, 7)
    phi2 = forward_data(f, rays, step=2.0 / 128)
    phi1 = BoundaryDataSet(rays, np.broadcast_to(np.eye(3), (len(rays), 3, 3)).astype(complex))
    res = reconstruct_nonlinear(phi1, phi2, _small_config(), truth=f)
    assert res.report["closed_error"] < 0.5
    assert res.report["failed_rays"] == 0
    phi2.failed[:10] = True
    phi2.values[:10] = np.nan
    masked = reconstruct_nonlinear(phi1, phi2, _small_config(), truth=f)
    assert masked.report["failed_rays"] == 10
    assert np.all(np.isfinite(masked.coefficients))
    assert abs(masked.report["closed_error"] - res.report["closed_error"]) < 0.05


def test_error_grows_with_noise():
    rng = np.random.default_rng(11)
    f = random_gausspoly_field(rng, degree=2, a=4.0)
    f = f.scaled(0.05 / np.max(np.abs(f(Grid.cube(1.0, 9).points()))))
    rays = sample_inward_boundary(DOM, 2000, 7)
    clean = forward_data(f, rays, step=2.0 / 128)
    phi1 = BoundaryDataSet(rays, np.broadcast_to(np.eye(3), (len(rays), 3, 3)).astype(complex))
    scale = np.sqrt(np.mean(np.abs(clean.values - np.eye(3)) ** 2))
    errs = []
    noise = np.random.default_rng(0).standard_normal(clean.values.shape)
    for level in (0.0, 0.1, 0.3, 1.0):
        noisy = BoundaryDataSet(rays, clean.values + level * scale * noise)
        errs.append(reconstruct_nonlinear(phi1, noisy, _small_config(), truth=f).report["closed_error"])
    assert all(a < b for a, b in zip(errs, errs[1:])), errs


def test_closed_part_error_of_truth_is_zero():
    f = random_gausspoly_field(np.random.default_rng(2), degree=1, a=2.0)
    grid = Grid.cube(1.0, 9)
    gf = GridField.sample(f, grid)
    assert closed_part_error(gf, gf, grid)["closed_error"] == 0.0


def test_data_vector_layout():
    rays = sample_inward_boundary(DOM, 2, 1)
    vals = np.arange(18).reshape(2, 3, 3) + 1j * np.arange(18).reshape(2, 3, 3) * 10
    d = data_vector(BoundaryDataSet(rays, vals))
    assert d[:4].tolist() == [0.0, 0.0, 1.0, 10.0]
    f = random_gausspoly_field(np.random.default_rng(2), degree=1, a=2.0)
    grid = Grid.cube(1.0, 8)
    A = assemble(grid, rays, step=2.0 / 64)
    lin = linear_forward_data(A.field(A.coefficients(f)), rays, step=_step(rays, A))
    assert np.allclose(data_vector(lin), A.matvec(A.coefficients(f)), atol=1e-12)
