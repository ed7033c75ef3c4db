import math

import numpy as np
import pytest

from projgeo import catalog
from projgeo.derivative import dp_fd, dp_formula, dp_norm_bound, dp_report, grad_delta_squared
from projgeo.errors import (
    BoundViolationError,
    OutsideTubeError,
    PreconditionError,
    SingularResolventError,
)
from projgeo.manifolds import normal_frame, normal_ray, tangent_frame
from projgeo.projection import project


def test_dp_at_manifold_point_is_tangent_projector(circle):
    Dp = dp_formula(circle, [1.0, 0.0])
    assert np.allclose(Dp, np.diag([0.0, 1.0]), atol=1e-12)


def test_dp_circle_outside(circle):
    Dp = dp_formula(circle, [2.0, 0.0])
    assert np.allclose(Dp, [[0.0, 0.0], [0.0, 0.5]], atol=1e-10)
    fd = dp_fd(circle, [2.0, 0.0])
    assert np.max(np.abs(fd - Dp)) <= 1e-5


def test_dp_flat_line(flat_line):
    Dp = dp_formula(flat_line, [0.0, 3.0])
    assert np.allclose(Dp, np.diag([1.0, 0.0]), atol=1e-12)
    fd = dp_fd(flat_line, [0.0, 3.0])
    assert np.max(np.abs(fd - Dp)) <= 1e-7


def test_dp_sphere(sphere2):
    Dp = dp_formula(sphere2, [3.0, 0.0, 0.0])
    expect = np.diag([0.0, 2.0 / 3.0, 2.0 / 3.0])
    assert np.max(np.abs(Dp - expect)) <= 1e-9
    fd = dp_fd(sphere2, [3.0, 0.0, 0.0])
    assert np.max(np.abs(fd - expect)) <= 1e-5


def test_grad_delta_squared(circle, hp):
    assert np.allclose(grad_delta_squared(circle, [2.0, 0.0]), [2.0, 0.0], atol=1e-10)
    assert np.allclose(grad_delta_squared(circle, [1.0, 0.0]), [0.0, 0.0], atol=1e-9)
    assert np.allclose(grad_delta_squared(hp, [0.0, 0.25]), [0.0, 0.5], atol=1e-10)


def test_grad_delta_squared_matches_fd(circle, torus25, rng):
    from projgeo.projection import distance

    cases = [(circle, [0.3, 0.4]), (circle, [1.7, -0.6]), (torus25, [2.2, 0.2, 0.3])]
    for M, x in cases:
        x = np.asarray(x, dtype=float)
        g = grad_delta_squared(M, x)
        h = 1e-6 * (1 + np.linalg.norm(x))
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            fd = (distance(M, x + e) ** 2 - distance(M, x - e) ** 2) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_dp_norm_bound_circle(circle):
    bound = dp_norm_bound(circle, [0.5, 0.0], 1.0)
    assert bound == pytest.approx(2.0, abs=1e-9)
    assert np.linalg.norm(dp_formula(circle, [0.5, 0.0]), 2) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(OutsideTubeError):
        dp_norm_bound(circle, [2.0, 0.0], 1.0)
    # on the manifold: bound 1, norm 1
    assert dp_norm_bound(circle, [1.0, 0.0], 1.0) == pytest.approx(1.0)


def test_dp_norm_bound_violation_flag(circle):
    # eps0 far above reach makes the bound too optimistic inside the tube
    with pytest.raises(BoundViolationError):
        dp_norm_bound(circle, [0.05, 0.0], 40.0)


def test_singular_resolvent_at_center_of_curvature(para):
    with pytest.raises(SingularResolventError):
        dp_formula(para, [0.0, 0.5])


def test_kernel_and_range_invariants(circle, sphere2, torus25, rng):
    cases = [(circle, [1.7, 0.9]), (sphere2, [2.5, 0.4, -0.8]), (torus25, [2.6, 0.3, 0.1])]
    for M, x in cases:
        Dp = dp_formula(M, x)
        res = project(M, x)
        m0 = res.minima[0]
        chart = M.charts[m0.chart_index]
        tf = tangent_frame(chart, m0.chart_coords)
        nf = normal_frame(chart, m0.chart_coords)
        # formula_matrix (x - xi) = 0 and Dp vanishes on every normal vector
        assert np.linalg.norm(Dp @ (np.asarray(x) - res.foot)) <= 1e-8
        for n in nf.vectors:
            assert np.linalg.norm(Dp @ n) <= 1e-8
        # range inside the tangent space: P_T Dp = Dp
        P = tf.vectors.T @ tf.vectors
        assert np.max(np.abs(P @ Dp - Dp)) <= 1e-8
        # idempotent composition with the tangent projector
        assert np.max(np.abs(Dp @ P - Dp)) <= 1e-8


def test_formula_matches_fd_on_random_interior_points(circle, torus25, rng):
    for M, gen in [
        (circle, lambda: (lambda t, r: (1 - r) * np.array([math.cos(t), math.sin(t)]))(
            rng.uniform(0, 2 * math.pi), rng.uniform(0.05, 0.7)
        )),
        (torus25, None),
    ]:
        for _ in range(15):
            if gen is not None:
                x = gen()
            else:
                u, v = rng.uniform(0, 2 * math.pi, 2)
                foot = np.array(
                    [
                        (2 + 0.5 * math.cos(v)) * math.cos(u),
                        (2 + 0.5 * math.cos(v)) * math.sin(u),
                        0.5 * math.sin(v),
                    ]
                )
                normal = np.array(
                    [math.cos(v) * math.cos(u), math.cos(v) * math.sin(u), math.sin(v)]
                )
                x = foot + rng.uniform(-0.35, 0.35) * normal
            rep = dp_report(M, x)
            assert rep.rel_error <= 1e-4


def test_dp_report_serializes(circle):
    doc = dp_report(circle, [2.0, 0.0], eps0=None).to_dict()
    assert doc["norm_bound"] == "inf"
    assert doc["rel_error"] < 1e-4
