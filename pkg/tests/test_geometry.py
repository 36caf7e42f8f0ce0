import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poltomo.geometry import (
    BallDomain,
    chord_times,
    make_rays,
    mean_inward_cosine,
    read_rays_csv,
    sample_inward_boundary,
    sphere_area,
    sphere_quadrature,
    tangent_bundle_lines,
    write_rays_csv,
)


def test_sphere_area():
    assert math.isclose(sphere_area(3), 4 * math.pi)
    assert math.isclose(sphere_area(4), 2 * math.pi**2)


@pytest.mark.parametrize("n", [3, 4])
def test_quadrature_second_moments(n):
    q = sphere_quadrature(n, "product", 8)
    assert abs(q.weights.sum() - q.omega) <= 1e-12 * q.omega
    M = q.mean(q.nodes[:, :, None] * q.nodes[:, None, :])
    assert np.max(np.abs(M - np.eye(n) / n)) <= 1e-12
    # off-diagonal and diagonal cases separately
    assert abs(M[0, 1]) <= 1e-12
    assert abs(M[n - 1, n - 1] - 1.0 / n) <= 1e-12


@pytest.mark.parametrize("n, x4, x2y2", [(3, 4 * math.pi / 5, 4 * math.pi / 15),
                                          (4, math.pi**2 / 4, math.pi**2 / 12)])
def test_quadrature_fourth_moments(n, x4, x2y2):
    # int x1^4 = 3 omega / (n (n + 2)), int x1^2 x2^2 = omega / (n (n + 2))
    q = sphere_quadrature(n, "product", 8)
    x = q.nodes
    assert math.isclose(q.integrate(x[:, 0] ** 4), x4, rel_tol=1e-12)
    assert math.isclose(q.integrate(x[:, 0] ** 2 * x[:, 1] ** 2), x2y2, rel_tol=1e-12)
    assert abs(q.integrate(x[:, 0] ** 3 * x[:, 1])) <= 1e-12


def test_quadrature_montecarlo_and_errors():
    q = sphere_quadrature(3, "montecarlo", size=4000, seed=3)
    assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0)
    assert math.isclose(q.weights.sum(), 4 * math.pi)
    with pytest.raises(ValueError):
        sphere_quadrature(5)
    with pytest.raises(ValueError):
        sphere_quadrature(3, "lebedev")


@given(st.integers(0, 2**31 - 1))
def test_inward_rays_start_on_sphere_and_point_inward(seed):
    dom = BallDomain()
    rays = sample_inward_boundary(dom, 16, seed)
    for r in rays:
        assert r.tau_minus == 0.0
        assert abs(np.linalg.norm(r.entry) - 1.0) <= 1e-12
        assert abs(np.linalg.norm(r.exit) - 1.0) <= 1e-12
        assert np.dot(r.xi, r.entry) < 0
        assert r.length > 0


def test_sampler_is_seeded():
    a = sample_inward_boundary(BallDomain(), 5, 11)
    b = sample_inward_boundary(BallDomain(), 5, 11)
    c = sample_inward_boundary(BallDomain(), 5, 12)
    assert all(np.array_equal(r.x, s.x) and np.array_equal(r.xi, s.xi) for r, s in zip(a, b))
    assert not np.array_equal(a[0].x, c[0].x)
    with pytest.raises(ValueError):
        sample_inward_boundary(BallDomain(), 0, 1)


@pytest.mark.parametrize("n", [3, 4])
def test_inward_mean_cosine(n):
    # uniform directions on the inward hemisphere: mean <xi, nu> = -1/2 for n = 3, -4/(3 pi) for n = 4
    exact = {3: -0.5, 4: -4.0 / (3.0 * math.pi)}[n]
    assert math.isclose(mean_inward_cosine(n), exact, rel_tol=1e-14)
    dom = BallDomain((0.0,) * n)
    rays = sample_inward_boundary(dom, 10_000, 5)
    cos = np.mean([np.dot(r.xi, r.x) for r in rays])
    assert abs(cos - exact) < 0.02


def test_chords_of_shifted_ball():
    dom = BallDomain((1.0, -2.0, 0.5), 2.0)
    x = np.array([[1.0, -2.0, 0.5], [1.0, -1.5, 0.5]])
    xi = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]])
    tm, tp = chord_times(dom, x, xi)
    assert np.allclose([tm[0], tp[0]], [-2.0, 2.0])
    for i in range(2):
        for t in (tm[i], tp[i]):
            assert math.isclose(np.linalg.norm(x[i] + t * xi[i] - dom.c), 2.0, rel_tol=1e-12)
    rays = make_rays(dom, x, xi)
    assert math.isclose(rays[0].length, 4.0)
    with pytest.raises(ValueError):
        BallDomain(radius=0.0)


def test_rays_csv_round_trip(tmp_path):
    rays = sample_inward_boundary(BallDomain(), 7, 1)
    write_rays_csv(tmp_path / "r.csv", rays)
    back = read_rays_csv(tmp_path / "r.csv")
    for r, s in zip(rays, back):
        assert np.array_equal(r.x, s.x) and np.array_equal(r.xi, s.xi)
        assert r.tau_plus == s.tau_plus


def test_tangent_bundle_lines():
    lines = tangent_bundle_lines(0.7, 200, 4)
    for x, xi in lines:
        assert abs(np.dot(x, xi)) <= 1e-14
        assert np.linalg.norm(x) <= 0.7 + 1e-14
        assert abs(np.linalg.norm(xi) - 1) <= 1e-14
