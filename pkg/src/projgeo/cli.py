"""Command-line front end: run projection-geometry experiments on manifests.

Subcommands: project, frontier, reach, curvature, dpcheck, skeleton,
recover, ecomp, theta-profile, demo.  Outputs are deterministic for a fixed
seed: CSV is RFC-4180 with 17 significant digits, JSON is key-sorted.
Exit codes: 0 success, 2 validation/usage error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import catalog
from .curvature import shape_operator, shape_operator_fd_oracle
from .derivative import dp_report
from .errors import ProjGeoError, SolverFailureError
from .frontier import ReachSampling, frontier, reach, theta_profile
from .manifest import load_manifold
from .manifolds import ManifoldSpec, normal_frame, normal_ray
from .projection import DEFAULT_OPTS, ProjectOptions, project
from .skeleton import (
    LABEL_BOUNDARY,
    LABEL_NO_NEAREST,
    LABEL_SKELETON,
    convex_hull_halfspaces,
    e_complement_check,
    medial_recover_batch,
    skeleton_sample,
)
from .svgout import write_svg
from .utils import Region, fmt_float, is_unbounded


@dataclass
class RunConfig:
    """Everything a subcommand run depends on; fixed seed => fixed bytes."""

    manifest: str | None = None
    out: str = "."
    tol: float = 1e-4
    rmax: float = 8.0
    grid: int = 100
    region: tuple | None = None
    jobs: int = 0  # 0: use all cores
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0 or self.rmax <= 0 or self.grid < 2:
            raise ValueError("tolerances, rmax and grid must be positive")

    @property
    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def options(self) -> ProjectOptions:
        return dataclasses.replace(DEFAULT_OPTS, seed=self.seed)


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _parse_region(text: str, d: int) -> Region:
    vals = _parse_floats(text)
    if len(vals) != 2 * d:
        raise ValueError(f"region needs {2 * d} numbers lo0,hi0,lo1,hi1,...")
    lo = vals[0::2]
    hi = vals[1::2]
    return Region(lo, hi)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load(cfg: RunConfig) -> ManifoldSpec:
    if not cfg.manifest:
        raise ValueError("--manifest is required for this subcommand")
    return load_manifold(cfg.manifest)


def _ray_from_args(M: ManifoldSpec, args) -> "normal_ray":
    coords = _parse_floats(args.coords)
    if args.dir:
        direction = np.asarray(_parse_floats(args.dir))
    else:
        nf = normal_frame(M.charts[args.chart], np.asarray(coords))
        direction = -nf.vectors[0] if args.flip else nf.vectors[0]
    return normal_ray(M, args.chart, coords, direction)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_project(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    res = project(M, np.asarray(_parse_floats(args.point)), cfg.options())
    doc = res.to_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.save:
        _write_json(Path(cfg.out) / "projection.json", doc)
    return 0


def _cmd_frontier(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    ray = _ray_from_args(M, args)
    est = frontier(M, ray, r_max=cfg.rmax, tol=cfg.tol, opts=cfg.options())
    print(
        f"theta in [{est.theta_lo:.10g}, {est.theta_hi:.10g}]"
        + (f" (unbounded beyond {est.unbounded_beyond})" if est.unbounded else "")
    )
    rows = [
        list(map(float, ray.chart_coords))
        + list(map(float, ray.direction))
        + [float(est.theta_lo), float(est.theta_hi), int(est.unbounded)]
    ]
    hdr = (
        [f"coord{i}" for i in range(len(ray.chart_coords))]
        + [f"dir{i}" for i in range(len(ray.direction))]
        + ["theta_lo", "theta_hi", "unbounded"]
    )
    _write_csv(Path(cfg.out) / "frontier.csv", hdr, rows)
    return 0


def _cmd_reach(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    sampling = ReachSampling(feet_per_dim=args.feet, r_max=cfg.rmax, tol=cfg.tol)
    rep = reach(M, sampling, opts=cfg.options(), jobs=cfg.effective_jobs)
    value = "inf" if is_unbounded(rep.reach_estimate) else f"{rep.reach_estimate:.10g}"
    print(f"reach({M.name or 'manifold'}) = {value}  ({len(rep.samples)} rays)")
    rows = []
    for est in rep.samples:
        rows.append(
            [int(est.ray.chart_index)]
            + list(map(float, est.ray.chart_coords))
            + list(map(float, est.ray.direction))
            + [float(est.theta_lo), float(est.theta_hi), int(est.unbounded)]
        )
    m, d = M.param_dim, M.ambient_dim
    hdr = (
        ["chart"]
        + [f"coord{i}" for i in range(m)]
        + [f"dir{i}" for i in range(d)]
        + ["theta_lo", "theta_hi", "unbounded"]
    )
    _write_csv(Path(cfg.out) / "reach_samples.csv", hdr, rows)
    return 0


def _cmd_curvature(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    ray = _ray_from_args(M, args)
    rep = shape_operator(M, ray)
    doc = rep.to_dict()
    if args.oracle:
        doc["fd_oracle"] = shape_operator_fd_oracle(M, ray).tolist()
    print(json.dumps(doc, indent=2, sort_keys=True))
    _write_json(Path(cfg.out) / "curvature.json", doc)
    return 0


def _cmd_dpcheck(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    rep = dp_report(M, np.asarray(_parse_floats(args.point)), eps0=args.eps0, opts=cfg.options())
    doc = rep.to_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    _write_json(Path(cfg.out) / "dpcheck.json", doc)
    return 0


def _region_for(cfg: RunConfig, M: ManifoldSpec) -> Region:
    if cfg.region is None:
        raise ValueError("--region is required for grid sweeps")
    return _parse_region(cfg.region, M.ambient_dim) if isinstance(cfg.region, str) else cfg.region


def _cmd_skeleton(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    region = _region_for(cfg, M)
    cloud = skeleton_sample(M, region, cfg.grid, opts=cfg.options(), jobs=cfg.effective_jobs)
    rows = []
    for b in sorted(cloud.balls, key=lambda b: tuple(b.center)):
        rows.append(
            list(map(float, b.center))
            + [float(b.radius), len(b.witness_feet), b.certificate or ""]
        )
    d = M.ambient_dim
    hdr = [f"center{i}" for i in range(d)] + ["radius", "n_witnesses", "certificate"]
    _write_csv(Path(cfg.out) / "skeleton.csv", hdr, rows)
    print(f"{len(cloud.balls)} maximal balls, {cloud.adjacent.shape[0]} adjacent points")
    if args.svg and d == 2:
        write_svg(
            Path(cfg.out) / "skeleton.svg",
            scatter_layers=[
                (M.sample_points(256), "#888888", 1.0),
                (np.array([b.center for b in cloud.balls]), "#cc2222", 2.0),
            ],
        )
    return 0


def _cmd_recover(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    region = _region_for(cfg, M)
    cloud = skeleton_sample(M, region, cfg.grid, opts=cfg.options(), jobs=cfg.effective_jobs)
    hs = convex_hull_halfspaces(M, args.hull_samples)
    if args.query:
        q = np.asarray(_parse_floats(args.query))
        inside = bool(medial_recover_batch(cloud, hs, q[None, :])[0])
        print("complement" if inside else "not-complement")
        return 0
    pts = region.grid(cfg.grid)
    ind = medial_recover_batch(cloud, hs, pts)
    rows = [list(map(float, p)) + [int(v)] for p, v in zip(pts, ind)]
    hdr = [f"x{i}" for i in range(M.ambient_dim)] + ["in_complement"]
    _write_csv(Path(cfg.out) / "recover.csv", hdr, rows)
    print(f"recovered indicator on {pts.shape[0]} grid points")
    return 0


def _cmd_ecomp(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    region = _region_for(cfg, M)
    rep = e_complement_check(M, region, cfg.grid, opts=cfg.options(), jobs=cfg.effective_jobs)
    names = {LABEL_BOUNDARY: "boundary", LABEL_SKELETON: "skeleton", LABEL_NO_NEAREST: "no_nearest"}
    rows = []
    for p, lab in zip(rep.points, rep.labels):
        if lab:
            rows.append(list(map(float, p)) + [names[int(lab)]])
    hdr = [f"x{i}" for i in range(M.ambient_dim)] + ["label"]
    _write_csv(Path(cfg.out) / "ecomp.csv", hdr, rows)
    _write_json(
        Path(cfg.out) / "ecomp_summary.json",
        {
            "grid": cfg.grid,
            "spacing": rep.spacing,
            "gap_a_to_b": rep.gap_a_to_b if math.isfinite(rep.gap_a_to_b) else "inf",
            "gap_b_to_a": rep.gap_b_to_a if math.isfinite(rep.gap_b_to_a) else "inf",
            "set_a_size": int(rep.set_a.shape[0]),
            "set_b_size": int(rep.set_b.shape[0]),
        },
    )
    print(
        f"|a|={rep.set_a.shape[0]} |b|={rep.set_b.shape[0]} "
        f"gaps=({rep.gap_a_to_b:.6g}, {rep.gap_b_to_a:.6g}) vs 2*spacing={2 * rep.spacing:.6g}"
    )
    return 0


def _cmd_theta_profile(cfg: RunConfig, args) -> int:
    M = _load(cfg)
    chart = M.charts[args.chart]
    rays = []
    for text in args.params.split(";"):
        coords = np.asarray([float(t) for t in text.split(",")])
        nf = normal_frame(chart, coords)
        v = -nf.vectors[0] if args.flip else nf.vectors[0]
        rays.append(normal_ray(M, args.chart, coords, v))
    table = theta_profile(M, rays, r_max=cfg.rmax, tol=cfg.tol, opts=cfg.options())
    rows = []
    for est in table:
        rows.append(
            list(map(float, est.ray.chart_coords))
            + list(map(float, est.ray.foot))
            + [float(est.theta_lo), float(est.theta_hi), int(est.unbounded)]
        )
    hdr = (
        [f"coord{i}" for i in range(M.param_dim)]
        + [f"foot{i}" for i in range(M.ambient_dim)]
        + ["theta_lo", "theta_hi", "unbounded"]
    )
    _write_csv(Path(cfg.out) / "theta_profile.csv", hdr, rows)
    for est in table:
        print(
            f"foot={np.array2string(est.ray.foot, precision=6)} "
            f"theta=[{est.theta_lo:.6g}, {est.theta_hi:.6g}]"
            + (" unbounded" if est.unbounded else "")
        )
    return 0


# ---------------------------------------------------------------------------
# demos reproducing the worked examples end to end


def _demo_half_parabola(cfg: RunConfig) -> int:
    M = catalog.half_parabola()
    ray = normal_ray(M, 0, [0.0], [0.0, 1.0])
    est = frontier(M, ray, r_max=4.0, tol=1e-3, opts=cfg.options())
    theta = est.midpoint
    print(f"theta((0,0),(0,1)) = {theta:.6f}")
    assert abs(theta - 0.5) <= 2e-3, "frontier at the parabola endpoint is off"

    region = Region([-3.0, 0.0], [3.0, 5.0])
    rep = e_complement_check(M, region, cfg.grid, opts=cfg.options(), jobs=cfg.effective_jobs)
    rows = [list(map(float, p)) for p in rep.set_a]
    _write_csv(Path(cfg.out) / "eM_boundary.csv", ["x", "y"], rows)

    xs = np.linspace(-3.2, 0.0, 2000)
    curve = np.stack([xs, (1.0 + 3.0 * np.cbrt(xs**2)) / 2.0], axis=-1)
    from scipy.spatial import cKDTree

    if rep.set_a.shape[0]:
        gap = float(np.max(cKDTree(curve).query(rep.set_a)[0]))
        print(f"estimated E(M)^c within {gap:.4f} of the closed-form curve "
              f"(2 cells = {2 * rep.spacing:.4f})")
        assert gap <= 2.0 * rep.spacing, "E(M)^c estimate strays from the curve"
    write_svg(
        Path(cfg.out) / "half_parabola.svg",
        scatter_layers=[(rep.set_a, "#cc2222", 2.0)],
        curve_layers=[(curve, "#2255cc", 1.0), (M.sample_points(400), "#333333", 1.0)],
    )
    return 0


def _demo_lip1_theta(cfg: RunConfig) -> int:
    M = catalog.lip1_example()
    chart = M.charts[0]
    lefts = [-0.5, -0.25, -0.1, -0.05, -0.01]
    apexes = [3.0 ** (-2 * k) for k in range(1, 6)]
    rays = []
    for x in lefts + apexes:
        nf = normal_frame(chart, [x])
        v = nf.vectors[0] if nf.vectors[0][1] > 0 else -nf.vectors[0]
        rays.append(normal_ray(M, 0, [x], v))
    table = theta_profile(M, rays, r_max=4.0, tol=1e-3, opts=cfg.options())
    rows = []
    for est in table:
        rows.append(
            [float(est.ray.chart_coords[0]), float(est.ray.foot[1])]
            + [float(est.theta_lo), float(est.theta_hi), int(est.unbounded)]
        )
    _write_csv(
        Path(cfg.out) / "theta_profile.csv",
        ["x", "foot_height", "theta_lo", "theta_hi", "unbounded"],
        rows,
    )
    left_thetas = [est.theta_lo for est in table[: len(lefts)]]
    apex_thetas = [est.theta_hi for est in table[len(lefts) :]]
    print("theta on the flat side :", [round(t, 4) for t in left_thetas])
    print("theta at the valleys   :", [round(t, 4) for t in apex_thetas])
    assert min(left_thetas) >= 2.0 - 1e-2, "flat-side frontier dropped below 2"
    assert max(apex_thetas) <= 0.5 + 1e-2, "valley frontier exceeded 1/2"

    xs = np.linspace(-0.2, 1.1, 4000)
    f = catalog.lip1_height(xs)
    fp = catalog.lip1_slope(xs)
    write_svg(
        Path(cfg.out) / "lip1_height.svg",
        curve_layers=[(np.stack([xs, f], axis=-1), "#2255cc", 1.0)],
    )
    write_svg(
        Path(cfg.out) / "lip1_slope.svg",
        curve_layers=[(np.stack([xs, fp], axis=-1), "#cc2222", 1.0)],
    )
    print("theta gap 1/2 vs 2 confirmed; wrote theta_profile.csv and SVG plots")
    return 0


def _demo_voronoi(cfg: RunConfig) -> int:
    sites = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.7], [2.2, 2.1], [-0.4, 1.9]])
    M = catalog.finite_point_set(sites)
    region = Region([-1.5, -1.5], [3.0, 3.0])
    cloud = skeleton_sample(M, region, max(cfg.grid, 48), opts=cfg.options(), jobs=cfg.effective_jobs)
    rows = []
    bad = 0
    for b in sorted(cloud.balls, key=lambda b: tuple(b.center)):
        dd = np.sort(np.linalg.norm(sites - b.center, axis=1))
        bad += (dd[1] - dd[0]) > 1e-3
        rows.append(list(map(float, b.center)) + [float(b.radius)])
    _write_csv(Path(cfg.out) / "voronoi_skeleton.csv", ["x", "y", "radius"], rows)
    print(f"{len(cloud.balls)} Voronoi-boundary samples, {bad} not equidistant")
    assert bad == 0, "a sampled center is not on a Voronoi boundary"
    write_svg(
        Path(cfg.out) / "voronoi.svg",
        scatter_layers=[
            (sites, "#2255cc", 4.0),
            (np.array([b.center for b in cloud.balls]), "#cc2222", 1.5),
        ],
    )
    return 0


DEMOS = {
    "half-parabola": _demo_half_parabola,
    "lip1-theta": _demo_lip1_theta,
    "voronoi": _demo_voronoi,
}


def _cmd_demo(cfg: RunConfig, args) -> int:
    return DEMOS[args.name](cfg)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projgeo", description=__doc__)
    p.add_argument("--manifest", help="manifold manifest JSON")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--rmax", type=float, default=8.0)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--region", help="lo0,hi0,lo1,hi1,... sweep box")
    p.add_argument("--jobs", type=int, default=0, help="worker threads (0 = all cores)")
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("project", help="project one point onto the manifold")
    sp.add_argument("--point", required=True)
    sp.add_argument("--save", action="store_true")
    sp.set_defaults(handler=_cmd_project)

    sp = sub.add_parser("frontier", help="frontier value along one normal ray")
    sp.add_argument("--chart", type=int, default=0)
    sp.add_argument("--coords", required=True)
    sp.add_argument("--dir", help="ambient direction; defaults to the normal frame")
    sp.add_argument("--flip", action="store_true")
    sp.set_defaults(handler=_cmd_frontier)

    sp = sub.add_parser("reach", help="reach estimate over sampled normal rays")
    sp.add_argument("--feet", type=int, default=16, help="feet per chart dimension")
    sp.set_defaults(handler=_cmd_reach)

    sp = sub.add_parser("curvature", help="shape operator report at a ray")
    sp.add_argument("--chart", type=int, default=0)
    sp.add_argument("--coords", required=True)
    sp.add_argument("--dir")
    sp.add_argument("--flip", action="store_true")
    sp.add_argument("--oracle", action="store_true", help="include the FD oracle")
    sp.set_defaults(handler=_cmd_curvature)

    sp = sub.add_parser("dpcheck", help="projection derivative: formula vs differences")
    sp.add_argument("--point", required=True)
    sp.add_argument("--eps0", type=float, default=None)
    sp.set_defaults(handler=_cmd_dpcheck)

    sp = sub.add_parser("skeleton", help="sample maximal-ball centers in a region")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(handler=_cmd_skeleton)

    sp = sub.add_parser("recover", help="medial-axis-transform complement indicator")
    sp.add_argument("--query")
    sp.add_argument("--hull-samples", type=int, default=256)
    sp.set_defaults(handler=_cmd_recover)

    sp = sub.add_parser("ecomp", help="E(M)^c decomposition check on a grid")
    sp.set_defaults(handler=_cmd_ecomp)

    sp = sub.add_parser("theta-profile", help="frontier along a family of rays")
    sp.add_argument("--chart", type=int, default=0)
    sp.add_argument("--params", required=True, help="semicolon-separated chart coords")
    sp.add_argument("--flip", action="store_true")
    sp.set_defaults(handler=_cmd_theta_profile)

    sp = sub.add_parser("demo", help="reproduce a worked example end to end")
    sp.add_argument("name", choices=sorted(DEMOS))
    sp.set_defaults(handler=_cmd_demo)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(
            manifest=args.manifest,
            out=args.out,
            tol=args.tol,
            rmax=args.rmax,
            grid=args.grid,
            region=args.region,
            jobs=args.jobs,
            seed=args.seed,
        )
        return args.handler(cfg, args)
    except SolverFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except AssertionError as exc:
        print(f"demo assertion failed: {exc}", file=sys.stderr)
        return 3
    except (ProjGeoError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
