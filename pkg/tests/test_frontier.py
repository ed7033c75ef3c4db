import math

import numpy as np
import pytest

from projgeo import catalog
from projgeo.errors import (
    FiberOverflowError,
    FootMismatchError,
    PreconditionError,
)
from projgeo.frontier import (
    ReachSampling,
    bundle_chart,
    bundle_chart_inverse,
    frontier,
    frontier_batch,
    reach,
    theta_bar,
    theta_profile,
    theta_under,
)
from projgeo.manifolds import NormalRay, normal_frame, normal_ray
from projgeo.utils import UNBOUNDED, Unbounded, is_unbounded


def test_frontier_half_parabola_endpoint(hp):
    ray = normal_ray(hp, 0, [0.0], [0.0, 1.0])
    est = frontier(hp, ray, r_max=4.0, tol=1e-4)
    assert not est.unbounded
    assert est.theta_lo >= 0.5 - 1e-4
    assert est.theta_hi <= 0.5 + 1e-4


def test_frontier_circle(circle):
    inward = normal_ray(circle, 0, [1.2], [-math.cos(1.2), -math.sin(1.2)])
    est = frontier(circle, inward, r_max=4.0, tol=1e-4)
    assert est.theta_lo == pytest.approx(1.0, abs=2e-4)
    outward = normal_ray(circle, 0, [1.2], [math.cos(1.2), math.sin(1.2)])
    est = frontier(circle, outward, r_max=10.0, tol=1e-4)
    assert est.unbounded
    assert est.unbounded_beyond == 10.0
    assert est.theta_lo == 10.0 and math.isinf(est.theta_hi)


def test_frontier_trace_is_monotone(circle):
    ray = normal_ray(circle, 0, [0.0], [-1.0, 0.0])
    est = frontier(circle, ray, r_max=4.0, tol=1e-4)
    seen_false = False
    for r, ok in est.predicate_trace:
        if not ok:
            seen_false = True
        elif seen_false:
            assert r >= est.theta_lo - 1e-4
    # every trace point below theta_lo agrees with the foot
    for r, ok in est.predicate_trace:
        if r < est.theta_lo:
            assert ok


def test_frontier_validates_arguments(circle):
    ray = normal_ray(circle, 0, [0.0], [-1.0, 0.0])
    with pytest.raises(PreconditionError):
        frontier(circle, ray, r_max=-1.0)
    with pytest.raises(PreconditionError):
        frontier(circle, ray, r_max=1.0, tol=0.5)


def test_foot_mismatch_detected(circle):
    fake = NormalRay(
        foot=np.array([0.5, 0.0]),  # not on the circle
        chart_index=0,
        chart_coords=np.array([0.0]),
        direction=np.array([0.0, 1.0]),
    )
    with pytest.raises(FootMismatchError):
        frontier(circle, fake, r_max=2.0, tol=1e-4)
    # non-strict batches skip instead
    assert frontier_batch(circle, [fake], r_max=2.0, tol=1e-4, strict=False) == [None]


def test_theta_bar_and_under():
    assert theta_bar(1.0, 0.5) == pytest.approx(2.0)
    assert theta_bar(UNBOUNDED, 123.0) == 1.0
    assert theta_bar(math.inf, 5.0) == 1.0
    assert theta_bar(2.0, 0.0) == 1.0
    assert theta_under(1.0, 1.0) == pytest.approx(0.5)
    assert theta_under(UNBOUNDED, 7.0) == 1.0
    assert theta_under(3.0, 0.0) == 1.0
    with pytest.raises(FiberOverflowError):
        theta_bar(1.0, 1.0)
    with pytest.raises(FiberOverflowError):
        theta_bar(1.0, 2.0)


def test_bundle_chart_circle(circle):
    img = bundle_chart(circle, [0.5, 0.0])
    assert abs(img.theta - 1.0) <= 1e-6
    assert np.allclose(img.w, [-1.0, 0.0], atol=1e-5)
    back = bundle_chart_inverse(circle, img)
    assert np.allclose(back, [0.5, 0.0], atol=1e-9)


def test_bundle_chart_on_manifold_point(circle):
    img = bundle_chart(circle, [1.0, 0.0])
    assert np.allclose(img.w, 0.0)
    assert img.ray is None


def test_bundle_chart_round_trip(circle, hp, rng):
    specs = [(circle, 2.0), (hp, 3.0)]
    count = 0
    for M, box in specs:
        pts = rng.uniform(-box, box, size=(60, 2))
        for x in pts:
            if count >= 50:
                break
            try:
                img = bundle_chart(M, x, r_max=8.0, tol=1e-8)
            except (FiberOverflowError, PreconditionError):
                continue
            if img.ray is None:
                continue
            back = bundle_chart_inverse(M, img, r_max=8.0, tol=1e-8)
            assert np.linalg.norm(back - x) <= 1e-6
            count += 1
    assert count >= 50


def test_reach_circle(circle):
    rep = reach(circle, ReachSampling(feet_per_dim=64, r_max=4.0, tol=1e-4))
    assert abs(rep.reach_estimate - 1.0) <= 1e-3
    assert rep.argmin_ray is not None
    for est in rep.samples:
        if not est.unbounded:
            assert rep.reach_estimate <= est.theta_lo + 1e-4


def test_reach_unbounded_for_flat_segment():
    seg = catalog.line(half_extent=1.0)
    rep = reach(seg, ReachSampling(feet_per_dim=8, r_max=4.0, tol=1e-3))
    assert is_unbounded(rep.reach_estimate)
    assert rep.argmin_ray is None
    for est in rep.samples:
        assert est.unbounded_beyond == 4.0


def test_reach_parallel_jobs_matches(circle):
    sampling = ReachSampling(feet_per_dim=16, r_max=4.0, tol=1e-3)
    a = reach(circle, sampling, jobs=1)
    b = reach(circle, sampling, jobs=4)
    assert a.reach_estimate == b.reach_estimate
    assert a.argmin_index == b.argmin_index


def test_theta_profile_lip1(lip1):
    chart = lip1.charts[0]

    def up_ray(x):
        nf = normal_frame(chart, [x])
        v = nf.vectors[0] if nf.vectors[0][1] > 0 else -nf.vectors[0]
        return normal_ray(lip1, 0, [x], v)

    lefts = [-0.5, -0.25, -0.1]
    apexes = [3.0 ** (-2 * k) for k in (1, 2, 3)]
    table = theta_profile(lip1, [up_ray(x) for x in lefts + apexes], r_max=4.0, tol=1e-3)
    for est in table[:3]:
        assert est.theta_lo >= 2.0 - 1e-2
    for est in table[3:]:
        assert not est.unbounded
        assert est.theta_hi <= 0.5 + 1e-2


def test_theta_profile_circle_constant(circle):
    rays = []
    for t in np.linspace(0.0, 2 * math.pi, 16, endpoint=False):
        rays.append(normal_ray(circle, 0, [t], [-math.cos(t), -math.sin(t)]))
    table = theta_profile(circle, rays, r_max=4.0, tol=1e-4)
    values = np.array([est.midpoint for est in table])
    assert np.max(np.abs(values - 1.0)) <= 2e-4


def test_theta_le_rho_smoke(circle, para):
    from projgeo.curvature import shape_operator

    for M, rays in [
        (circle, [normal_ray(M0, 0, [t], [-math.cos(t), -math.sin(t)]) for M0, t in [(circle, 0.3), (circle, 2.0)]]),
    ]:
        for ray in rays:
            rho = shape_operator(M, ray).rho
            est = frontier(M, ray, r_max=6.0, tol=1e-4)
            if not isinstance(rho, Unbounded) and not est.unbounded:
                assert est.theta_hi <= rho * (1 + 1e-3)
