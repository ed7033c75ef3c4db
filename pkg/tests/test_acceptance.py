"""Acceptance suite: every criterion runs at its stated tolerance and prints
one PASS/FAIL line.  Shared heavy computations are cached per module.

Criterion 1b asserts a literal target value for the projection of (0, 1)
onto the half-parabola that fails first-order optimality (the dense-grid
oracle places the nearest point at (sqrt(1/2), 1/2), strictly closer); it
is kept verbatim and is expected to fail.  Its oracle-corrected twin 1b'
passes.
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from projgeo import catalog
from projgeo.cli import run
from projgeo.curvature import shape_operator, shape_operator_fd_oracle
from projgeo.derivative import dp_fd, dp_formula, dp_norm_bound
from projgeo.frontier import ReachSampling, frontier_batch, reach
from projgeo.manifolds import normal_frame, normal_ray, tangent_frame
from projgeo.projection import (
    DEFAULT_OPTS,
    Multiplicity,
    brute_force_project,
    classify,
    project,
    project_batch,
)
from projgeo.skeleton import (
    convex_hull_halfspaces,
    e_complement_check,
    medial_recover_batch,
    skeleton_sample,
)
from projgeo.utils import Region, Unbounded, is_unbounded


def _report(tag: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"{tag} failed {detail}"


# ---------------------------------------------------------------------------
# shared fixtures

C2_CATALOG = {
    "circle": catalog.unit_circle,
    "sphere": lambda: catalog.sphere(2.0, 3),
    "torus": lambda: catalog.torus(2.0, 0.5),
    "helix": catalog.helix,
    "line": catalog.line,
    "parabola": catalog.parabola,
    "half_parabola": catalog.half_parabola,
}


@pytest.fixture(scope="module")
def manifolds():
    return {k: v() for k, v in C2_CATALOG.items()}


@pytest.fixture(scope="module")
def reach_estimates(manifolds):
    """Sampled reach per manifold, reused by criteria 5-7."""
    # odd feet counts keep the extreme-curvature parameters (t = 0 on the
    # parabolas) in the sample, so the estimates never exceed the true reach
    plans = {
        "circle": ReachSampling(feet_per_dim=64, r_max=4.0, tol=1e-4),
        "sphere": ReachSampling(feet_per_dim=9, r_max=8.0, tol=1e-3),
        "torus": ReachSampling(feet_per_dim=11, r_max=6.0, tol=1e-3),
        "helix": ReachSampling(feet_per_dim=17, r_max=8.0, tol=1e-3),
        "line": ReachSampling(feet_per_dim=9, r_max=4.0, tol=1e-3),
        "parabola": ReachSampling(feet_per_dim=101, r_max=6.0, tol=1e-3),
        "half_parabola": ReachSampling(feet_per_dim=51, r_max=6.0, tol=1e-3),
    }
    return {k: reach(manifolds[k], plans[k]) for k in plans}


def _up_ray(M, chart_index, coords):
    chart = M.charts[chart_index]
    nf = normal_frame(chart, np.atleast_1d(coords))
    v = nf.vectors[0]
    if v[-1] < 0:
        v = -v
    return normal_ray(M, chart_index, np.atleast_1d(coords), v)


def _ray_grid(M, n, rng, margin=0.03):
    """Deterministic ray sample: feet grid x (+/-) normal frame vectors."""
    rays = []
    for ci, chart in enumerate(M.charts):
        per_dim = max(2, int(math.ceil(n ** (1.0 / chart.param_dim))))
        for y in chart.grid(per_dim, margin=margin):
            nf = normal_frame(chart, y)
            for v in nf.vectors:
                rays.append(normal_ray(M, ci, y, v))
                rays.append(normal_ray(M, ci, y, -v))
    idx = rng.permutation(len(rays))[:n]
    return [rays[i] for i in idx]


# ---------------------------------------------------------------------------
# criterion 1: half-parabola closed forms


def test_criterion_1a_endpoint_axis_feet(hp):
    for y in (0.1, 0.25, 0.49):
        res = project(hp, [0.0, y])
        assert res.multiplicity is Multiplicity.UNIQUE
        assert np.linalg.norm(res.foot - np.array([0.0, 0.0])) <= 1e-7, y
    _report("1a half-parabola p((0,y)) = (0,0) on [0,1/2)", True)


def test_criterion_1b_axis_projection_literal_value(hp):
    """Asserts p((0,1)) == (0.5, 0.25) verbatim.  The target value is not a
    minimizer: ||(0,1)-(0.5,0.25)|| = 0.901 while ||(0,1)-(sqrt(.5),.5)|| =
    0.866, so this check fails; see its oracle-corrected twin below."""
    res = project(hp, [0.0, 1.0])
    ok = np.linalg.norm(res.foot - np.array([0.5, 0.25])) <= 1e-7
    _report("1b half-parabola p((0,1)) literal target (0.5, 0.25)", ok)


def test_criterion_1b_axis_projection_oracle_value(hp):
    res = project(hp, [0.0, 1.0])
    oracle = brute_force_project(hp, [0.0, 1.0], 400001)
    t = math.sqrt(0.5)
    assert abs(oracle.global_distance - math.sqrt(0.75)) <= 1e-8
    ok = (
        np.linalg.norm(res.foot - np.array([t, 0.5])) <= 1e-7
        and abs(res.global_distance - oracle.global_distance) <= 1e-7
    )
    _report("1b' half-parabola p((0,1)) = (sqrt(1/2), 1/2) via grid oracle", ok)


def test_criterion_1c_endpoint_frontier(hp):
    est = frontier_batch(hp, [_up_ray(hp, 0, [0.0])], r_max=4.0, tol=1e-4)[0]
    theta = est.midpoint
    _report("1c theta((0,0),(0,1)) = 1/2", abs(theta - 0.5) <= 1e-3, f"theta={theta:.6f}")


def test_criterion_1d_e_complement_curve(hp):
    region = Region([-3.0, 0.0], [3.0, 5.0])
    rep = e_complement_check(hp, region, 400)
    xs = np.linspace(-3.3, 0.0, 6000)
    curve = np.stack([xs, (1.0 + 3.0 * np.cbrt(xs**2)) / 2.0], axis=-1)
    from scipy.spatial import cKDTree

    assert rep.set_a.shape[0] > 100
    gap = float(np.max(cKDTree(curve).query(rep.set_a)[0]))
    # and the sampled curve is covered within 2 cells as well
    inside = curve[(curve[:, 0] >= -3.0) & (curve[:, 1] <= 5.0)]
    cover = float(np.max(cKDTree(rep.set_a).query(inside)[0]))
    ok = gap <= 2.0 * rep.spacing and cover <= 2.0 * rep.spacing
    _report(
        "1d half-parabola E(M)^c within 2 cells of the closed-form curve",
        ok,
        f"gap={gap:.4f} cover={cover:.4f} cell={rep.spacing:.4f}",
    )


# ---------------------------------------------------------------------------
# criterion 2: the Lipschitz-graph discontinuity gap


def test_criterion_2_lip1_theta_gap(lip1):
    flat_rays = [_up_ray(lip1, 0, [x]) for x in (-0.5, -0.1, -0.01)]
    apex_rays = [_up_ray(lip1, 0, [3.0 ** (-2 * k)]) for k in (1, 2, 3)]
    table = frontier_batch(lip1, flat_rays + apex_rays, r_max=4.0, tol=1e-3)
    flat = [est.theta_lo for est in table[:3]]
    apex = [est.theta_hi for est in table[3:]]
    ok_flat = all(t >= 2.0 - 1e-2 for t in flat)
    ok_apex = all(t <= 0.5 + 1e-2 for t in apex)
    _report(
        "2 lip1 frontier gap (>=2 on the flat side, <=1/2 at the valleys)",
        ok_flat and ok_apex,
        f"flat={np.round(flat, 4).tolist()} apex={np.round(apex, 4).tolist()}",
    )


# ---------------------------------------------------------------------------
# criterion 3: shape operator versus the finite-difference oracle


def test_criterion_3_curvature(manifolds, rng):
    worst = 0.0
    for name in ("circle", "sphere", "torus", "parabola"):
        M = manifolds[name]
        for ray in _ray_grid(M, 20, rng):
            rep = shape_operator(M, ray)
            L = shape_operator_fd_oracle(M, ray)
            err = float(np.linalg.norm(rep.matrix - L))
            assert err <= 1e-4, (name, ray.foot)
            worst = max(worst, err)
    rep = shape_operator(manifolds["parabola"], _up_ray(manifolds["parabola"], 0, [0.0]))
    assert abs(rep.rho - 0.5) <= 1e-6
    out_ray = normal_ray(manifolds["circle"], 0, [0.0], [1.0, 0.0])
    rho_out = shape_operator(manifolds["circle"], out_ray).rho
    assert isinstance(rho_out, Unbounded)
    _report("3 shape operator vs FD oracle; rho spot values", True, f"worst={worst:.2e}")


# ---------------------------------------------------------------------------
# criterion 4: theta <= rho on the C^2 catalog


def test_criterion_4_theta_le_rho(manifolds, rng):
    r_max = 8.0
    checked = 0
    for name, M in manifolds.items():
        rays = _ray_grid(M, 50, rng)
        estimates = frontier_batch(M, rays, r_max=r_max, tol=1e-3)
        for ray, est in zip(rays, estimates):
            rho = shape_operator(M, ray).rho
            if is_unbounded(rho):
                continue
            if est.unbounded:
                assert est.unbounded_beyond <= rho * (1 + 1e-3), (name, ray.foot)
            else:
                assert est.theta_hi <= rho * (1 + 1e-3), (name, ray.foot, est.theta_hi, rho)
            checked += 1
    # equality where curvature is the binding constraint
    circle = manifolds["circle"]
    for t in (0.0, 1.3, 3.9):
        ray = normal_ray(circle, 0, [t], [-math.cos(t), -math.sin(t)])
        est = frontier_batch(circle, [ray], r_max=4.0, tol=1e-4)[0]
        assert abs(est.midpoint - 1.0) <= 1e-3
    para = manifolds["parabola"]
    est = frontier_batch(para, [_up_ray(para, 0, [0.0])], r_max=4.0, tol=1e-4)[0]
    assert abs(est.midpoint - 0.5) <= 1e-3
    _report("4 theta <= rho on the C2 catalog, equality at curvature-bound rays", True,
            f"{checked} bounded rays checked")


# ---------------------------------------------------------------------------
# criterion 5: reach values


def test_criterion_5_reach(reach_estimates):
    got = {k: reach_estimates[k].reach_estimate for k in ("circle", "sphere", "torus")}
    ok = (
        abs(got["circle"] - 1.0) <= 1e-3
        and abs(got["sphere"] - 2.0) <= 1e-2
        and abs(got["torus"] - 0.5) <= 1e-2
    )
    _report("5 reach: circle 1, sphere(2,3) 2, torus(2,1/2) 1/2", ok, f"{got}")


# ---------------------------------------------------------------------------
# criterion 6: the projection derivative formula


def _interior_points(M, reach_est, rng, count, r_max=8.0):
    """Random points strictly inside the tube, generated along normal rays."""
    rays = _ray_grid(M, count, rng, margin=0.05)
    cap = 0.85 * reach_est if not is_unbounded(reach_est) else 2.0
    estimates = frontier_batch(M, rays, r_max=r_max, tol=1e-3, strict=False)
    pts = []
    for ray, est in zip(rays, estimates):
        if est is None:
            continue
        theta = est.theta_lo
        r = rng.uniform(0.1, 0.85) * min(theta, cap)
        if r <= 1e-4:
            continue
        pts.append((ray.foot + r * ray.direction, r))
    return pts


def test_criterion_6_dp_formula(manifolds, reach_estimates, rng):
    circle = manifolds["circle"]
    Dp = dp_formula(circle, [2.0, 0.0])
    assert np.max(np.abs(Dp - np.array([[0.0, 0.0], [0.0, 0.5]]))) <= 1e-9

    worst_rel = 0.0
    for name, M in manifolds.items():
        reach_est = reach_estimates[name].reach_estimate
        pts = _interior_points(M, reach_est, rng, 100)
        assert len(pts) >= 100 * 0.8, name
        eps0 = None if is_unbounded(reach_est) else float(reach_est)
        for x, r in pts[:100]:
            res = project(M, x)
            formula = dp_formula(M, x, res=res)
            fd = dp_fd(M, x, res=res)
            rel = np.linalg.norm(formula - fd) / (1.0 + np.linalg.norm(fd))
            assert rel <= 1e-4, (name, x, rel)
            worst_rel = max(worst_rel, rel)
            # kernel/range invariants
            m0 = res.minima[0]
            chart = M.charts[m0.chart_index]
            tf = tangent_frame(chart, m0.chart_coords)
            nf = normal_frame(chart, m0.chart_coords)
            assert np.linalg.norm(formula @ (np.asarray(x) - res.foot)) <= 1e-8
            for nvec in nf.vectors:
                assert np.linalg.norm(formula @ nvec) <= 1e-8
            P = tf.vectors.T @ tf.vectors
            assert np.max(np.abs(P @ formula - formula)) <= 1e-8
            # Neumann bound inside M^eps for eps = 0.9 reach
            if eps0 is not None and r < 0.9 * eps0:
                dp_norm_bound(M, x, eps0, res=res, formula=formula)  # raises on violation
    _report("6 Dp formula vs FD oracle, invariants, Neumann bound", True,
            f"worst rel err {worst_rel:.2e}")


# ---------------------------------------------------------------------------
# criterion 7: segment and extension lemmas as bulk properties


def test_criterion_7_segment_and_extension(manifolds, reach_estimates, rng):
    extra = {"lip1": catalog.lip1_example(), "quarter": catalog.quarter_circle_with_rays()}
    boxes = {
        "circle": 2.0, "sphere": 3.5, "torus": 3.5, "helix": 3.0, "line": 4.0,
        "parabola": 3.0, "half_parabola": 3.0, "lip1": 2.0, "quarter": 3.0,
    }
    all_m = dict(manifolds)
    all_m.update(extra)
    names = list(all_m)
    trials = 0
    segment_checks = 0
    extension_checks = 0
    while trials < 500:
        name = names[trials % len(names)]
        M = all_m[name]
        d = M.ambient_dim
        x = rng.uniform(-boxes[name], boxes[name], size=d)
        trials += 1
        res = project(M, x)
        if res.multiplicity is not Multiplicity.UNIQUE or res.global_distance < 1e-6:
            continue
        foot = res.foot
        lams = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
        seg_pts = x[None, :] + lams[:, None] * (foot - x)[None, :]
        seg = project_batch(M, seg_pts)
        assert np.all(seg.mult_code == 1), (name, x)
        assert np.max(np.linalg.norm(seg.foot - foot[None, :], axis=-1)) <= 1e-6, (name, x)
        segment_checks += 1

        # extension: reach-positive manifolds, points well inside the tube
        rest = reach_estimates.get(name)
        reach_val = None if rest is None else rest.reach_estimate
        if name in ("lip1", "quarter"):
            continue
        if not is_unbounded(reach_val) and res.global_distance > 0.9 * reach_val / 1.01:
            continue
        ext = foot + 1.01 * (x - foot)
        eres = project(M, ext)
        assert np.linalg.norm(eres.foot - foot) <= 1e-6, (name, x)
        extension_checks += 1
    _report(
        "7 segment/extension properties over 500 random trials",
        segment_checks >= 200 and extension_checks >= 100,
        f"segment={segment_checks} extension={extension_checks}",
    )


# ---------------------------------------------------------------------------
# criterion 8: skeleton decomposition and medial recovery


def test_criterion_8_skeleton_and_recovery(manifolds, hp):
    gaps = {}
    for name, M, region, grid_n in (
        ("circle", manifolds["circle"], Region([-2, -2], [2, 2]), 100),
        ("half_parabola", hp, Region([-3, 0], [3, 5]), 120),
        ("two_lines", catalog.parallel_lines(1.0, 10.0), Region([-2, -2], [2, 2]), 100),
    ):
        rep = e_complement_check(M, region, grid_n)
        assert rep.symmetric_gap <= 2.0 * rep.spacing, name
        gaps[name] = rep.symmetric_gap / rep.spacing

    circle = manifolds["circle"]
    region = Region([-2, -2], [2, 2])
    cloud = skeleton_sample(circle, region, 100)
    hs = convex_hull_halfspaces(circle, 256)
    grid = region.grid(200)
    spacing = region.spacing(200)
    ind = medial_recover_batch(cloud, hs, grid)
    radius = np.linalg.norm(grid, axis=-1)
    away = np.abs(radius - 1.0) > 2.0 * spacing
    truth = radius != 1.0
    mismatches = int(np.sum(ind[away] != truth[away]))
    _report(
        "8 E(M)^c decomposition gap <= 2 cells; circle recovery exact off M",
        mismatches == 0,
        f"gaps/cell={ {k: round(v, 3) for k, v in gaps.items()} } mismatches={mismatches}",
    )


# ---------------------------------------------------------------------------
# criterion 9: determinism


def test_criterion_9_determinism(tmp_path):
    import json

    man = tmp_path / "circle.json"
    from projgeo.manifest import save_manifold

    save_manifold(catalog.unit_circle(), man)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        code = run(
            [
                "--manifest", str(man), "--out", str(out), "--rmax", "4",
                "--seed", "123", "reach", "--feet", "24",
            ]
        )
        assert code == 0
        outs.append((out / "reach_samples.csv").read_bytes())
    ok = outs[0] == outs[1]
    for sub in ("c", "d"):
        out = tmp_path / sub
        assert run(["--out", str(out), "--seed", "123", "demo", "lip1-theta"]) == 0
    ok = ok and (
        (tmp_path / "c" / "theta_profile.csv").read_bytes()
        == (tmp_path / "d" / "theta_profile.csv").read_bytes()
    )
    _report("9 fixed seed gives byte-identical CSV output", ok)
