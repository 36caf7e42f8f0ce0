"""Polarization tomography toolkit.

Matrix transport along chords of the ball, the weighted linear and trace
transforms, the trace-transform kernel, the potential/closed decomposition,
quadratic forms over directions and a linearized Tikhonov inversion.
"""
from .accel import BACKEND, HAVE_COMPILED
from .fields import (
    GaussPoly,
    GaussPolyField,
    Grid,
    GridField,
    MatrixField,
    WeightField,
    bump_lambda,
    lambda_identity_field,
    potential_field,
    quadratic_lambda,
    random_gausspoly_field,
)
from .geometry import BallDomain, Ray, sample_inward_boundary, sphere_quadrature
from .transport import (
    BoundaryDataSet,
    IntegrationError,
    forward_data,
    linear_forward_data,
    linearized_data,
    s_data,
    solve_transport,
    solve_weighted_linear,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "BallDomain",
    "BoundaryDataSet",
    "GaussPoly",
    "GaussPolyField",
    "Grid",
    "GridField",
    "IntegrationError",
    "MatrixField",
    "Ray",
    "WeightField",
    "bump_lambda",
    "forward_data",
    "lambda_identity_field",
    "linear_forward_data",
    "linearized_data",
    "potential_field",
    "quadratic_lambda",
    "random_gausspoly_field",
    "s_data",
    "sample_inward_boundary",
    "solve_transport",
    "solve_weighted_linear",
    "sphere_quadrature",
]
