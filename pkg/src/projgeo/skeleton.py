"""Topological skeleton sampling, medial-axis recovery, and the E(M)^c split.

Skeleton detection is grid-based: the foot field of the projection is
evaluated on a regular grid and discontinuities between neighboring nodes
(or genuinely multiple projections) mark skeleton crossings.  Each crossing
is then refined by running the frontier bisection along the normal ray
through the offending node, which lands on the maximal-ball center; phantom
crossings (fast but continuous foot rotation near codimension-2 centers)
collapse onto the same center and are deduped away.

The dedupe/multiplicity tolerances are adapted to the grid spacing here:
pointwise multiplicity at default tolerances is a measure-zero event a grid
essentially never hits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import DegenerateHullError, PreconditionError
from .frontier import FOOT_TOL, frontier_batch
from .manifolds import ManifoldSpec, NormalRay
from .projection import (
    SWEEP_OPTS,
    BatchProjection,
    ProjectOptions,
    merge_batches,
    _project_block,
)
from .utils import Region, chunked, parallel_map

LABEL_INTERIOR = 0
LABEL_BOUNDARY = 1
LABEL_SKELETON = 2
LABEL_NO_NEAREST = 3


@dataclass
class MaximalBall:
    """Center and radius of a ball maximal in the complement of M."""

    center: np.ndarray
    radius: float
    witness_feet: list
    certificate: str | None = None  # set when only one witness is available


@dataclass
class SkeletonCloud:
    balls: list
    region: Region
    resolution: float
    adjacent: np.ndarray  # extension-scan failures: skeleton-adjacent points


@dataclass
class HalfSpaceSet:
    """Supporting half-spaces <z, u> <= b containing the manifold samples."""

    normals: np.ndarray  # (H, d) unit outward
    offsets: np.ndarray  # (H,)
    thickened: bool = False


@dataclass
class SweepField:
    region: Region
    grid_n: int
    spacing: float
    points: np.ndarray  # (N, d)
    batch: BatchProjection
    jump_mask: np.ndarray  # (N,) incident to a foot-field discontinuity
    loose_multi: np.ndarray  # (N,) second basin within one cell of global
    ext_fail: np.ndarray  # (N,) extension probe left the basin
    jump_edges: list  # (index_a, index_b) grid-neighbor pairs


@dataclass
class EComplementReport:
    region: Region
    grid_n: int
    spacing: float
    labels: np.ndarray  # (N,) LABEL_* codes
    points: np.ndarray  # (N, d)
    set_a: np.ndarray  # not-interior estimate: boundary/skeleton/no-nearest
    set_b: np.ndarray  # skeleton/no-nearest estimate
    gap_a_to_b: float
    gap_b_to_a: float

    @property
    def symmetric_gap(self) -> float:
        return max(self.gap_a_to_b, self.gap_b_to_a)


def _sweep_options(opts: ProjectOptions, spacing: float) -> ProjectOptions:
    return replace(opts, basin_sep_abs=max(opts.basin_sep_abs, 2.0 * spacing))


def sweep_projection(
    M: ManifoldSpec,
    region: Region,
    grid_n: int,
    opts: ProjectOptions = SWEEP_OPTS,
    jobs: int = 1,
    jump_factor: float = 8.0,
    extension_scan: bool = True,
) -> SweepField:
    """Project a regular grid and mark the discontinuities of its foot field."""
    if region.dim != M.ambient_dim:
        raise PreconditionError("region dimension must match the ambient space")
    pts = region.grid(grid_n)
    spacing = region.spacing(grid_n)
    opts = _sweep_options(opts, spacing)
    batch = _batched(M, pts, opts, jobs)

    shape = (grid_n,) * region.dim
    feet = batch.foot.reshape(shape + (M.ambient_dim,))
    flat_index = np.arange(pts.shape[0]).reshape(shape)
    jump_mask = np.zeros(pts.shape[0], bool)
    edges: list = []
    for axis in range(region.dim):
        sl_a = [slice(None)] * region.dim
        sl_b = [slice(None)] * region.dim
        sl_a[axis] = slice(0, -1)
        sl_b[axis] = slice(1, None)
        jump = (
            np.linalg.norm(feet[tuple(sl_b)] - feet[tuple(sl_a)], axis=-1)
            > jump_factor * spacing
        )
        ia = flat_index[tuple(sl_a)][jump]
        ib = flat_index[tuple(sl_b)][jump]
        jump_mask[ia] = True
        jump_mask[ib] = True
        edges.extend(zip(ia.tolist(), ib.tolist()))

    gap = batch.second_distance - batch.distance
    loose_multi = np.isfinite(batch.second_distance) & (gap < spacing)

    ext_fail = np.zeros(pts.shape[0], bool)
    if extension_scan:
        unique = batch.mult_code == 1
        offs = pts[unique] - batch.foot[unique]
        probes = batch.foot[unique] + 1.01 * offs
        pb = _batched(M, probes, opts, jobs)
        foot_tol = FOOT_TOL * (1.0 + np.linalg.norm(batch.foot[unique], axis=-1))
        moved = np.linalg.norm(pb.foot - batch.foot[unique], axis=-1) > foot_tol
        bad = moved | (pb.mult_code != 1)
        # points on M itself extend trivially
        bad &= batch.distance[unique] > spacing * 1e-6
        ext_fail[np.nonzero(unique)[0][bad]] = True

    return SweepField(
        region=region,
        grid_n=grid_n,
        spacing=spacing,
        points=pts,
        batch=batch,
        jump_mask=jump_mask,
        loose_multi=loose_multi,
        ext_fail=ext_fail,
        jump_edges=sorted(edges),
    )


def _batched(M, pts, opts, jobs, chunk: int = 2048) -> BatchProjection:
    blocks = [pts[a:b] for a, b in chunked(pts.shape[0], chunk)]
    pieces = parallel_map(lambda blk: _project_block(M, blk, opts), blocks, jobs=jobs)
    return merge_batches(pieces)


def classify_sweep(field: SweepField) -> np.ndarray:
    """Grid labels from the sweep: the discrete surrogate of ``classify``."""
    labels = np.full(field.points.shape[0], LABEL_INTERIOR, dtype=np.int8)
    skeletonish = (field.batch.mult_code == 2) | field.loose_multi | field.jump_mask
    labels[field.ext_fail] = LABEL_BOUNDARY
    labels[skeletonish] = LABEL_SKELETON
    labels[field.batch.mult_code == 0] = LABEL_NO_NEAREST
    return labels


def skeleton_sample(
    M: ManifoldSpec,
    region: Region,
    grid_n: int,
    opts: ProjectOptions = SWEEP_OPTS,
    jobs: int = 1,
    jump_factor: float = 8.0,
    max_refinements: int = 4096,
    field: SweepField | None = None,
) -> SkeletonCloud:
    """Maximal-ball centers of the complement of M inside the region.

    Grid points with multiple projections become balls directly; foot-field
    jump edges are refined by a frontier bisection along the ray through
    one endpoint, which lands the center on the skeleton to bisection
    accuracy rather than grid accuracy.
    """
    if field is None:
        field = sweep_projection(
            M, region, grid_n, opts=opts, jobs=jobs, jump_factor=jump_factor
        )
    batch = field.batch
    spacing = field.spacing
    opts = _sweep_options(opts, spacing)
    scale = 1.0 + np.linalg.norm(field.points, axis=-1)

    balls: list[MaximalBall] = []

    def add_ball(ball: MaximalBall) -> None:
        for b in balls:
            if np.linalg.norm(b.center - ball.center) <= 0.5 * spacing:
                return
        balls.append(ball)

    # (1) honestly multiple grid points
    for i in np.nonzero(batch.mult_code == 2)[0]:
        reps = batch.reps.get(int(i))
        feet = [r.point for r in (reps or [])]
        if len(feet) < 2:
            feet = [batch.foot[i], batch.second_foot[i]]
        add_ball(
            MaximalBall(
                center=field.points[i].copy(),
                radius=float(batch.distance[i]),
                witness_feet=[f.copy() for f in feet],
            )
        )

    # (2) refine jump edges along the normal ray through the nearer endpoint
    seeds = []
    for a, b in field.jump_edges[:max_refinements]:
        seeds.append(a if batch.distance[a] <= batch.distance[b] else b)
    seeds = sorted(set(int(s) for s in seeds))
    rays, ray_rmax = [], []
    for i in seeds:
        dist = float(batch.distance[i])
        if dist <= 4.0 * FOOT_TOL:
            continue
        v = field.points[i] - batch.foot[i]
        nrm = np.linalg.norm(v)
        if nrm <= 0:
            continue
        rays.append(
            NormalRay(
                foot=batch.foot[i],
                chart_index=int(batch.chart_index[i]),
                chart_coords=batch.coords[i].copy(),
                direction=v / nrm,
            )
        )
        ray_rmax.append(2.0 * dist + 6.0 * spacing)
    if rays:
        tol = max(1e-6, 1e-3 * spacing)
        r_max = float(max(ray_rmax))
        estimates = frontier_batch(M, rays, r_max=r_max, tol=tol, opts=opts, strict=False)
        centers, beyond = [], []
        kept = []
        for est in estimates:
            if est is None or est.unbounded:
                continue
            theta = est.theta_lo
            centers.append(est.ray.foot + theta * est.ray.direction)
            beyond.append(est.ray.foot + (est.theta_hi + max(8.0 * tol, 1e-3 * theta)) * est.ray.direction)
            kept.append(est)
        if centers:
            centers = np.asarray(centers)
            pb_center = _batched(M, centers, opts, jobs)
            pb_beyond = _batched(M, np.asarray(beyond), opts, jobs)
            for k, est in enumerate(kept):
                c = centers[k]
                radius = float(pb_center.distance[k])
                w1 = est.ray.foot.copy()
                w2 = pb_beyond.foot[k].copy()
                sep_req = max(1e-2 * radius, 1e-5 * (1.0 + np.linalg.norm(c)))
                if np.linalg.norm(w2 - w1) > sep_req:
                    add_ball(MaximalBall(center=c, radius=radius, witness_feet=[w1, w2]))
                else:
                    add_ball(
                        MaximalBall(
                            center=c,
                            radius=radius,
                            witness_feet=[w1],
                            certificate="extension-failure",
                        )
                    )

    inside = [
        b
        for b in balls
        if np.all(b.center >= region.lo - spacing) and np.all(b.center <= region.hi + spacing)
    ]
    return SkeletonCloud(
        balls=inside,
        region=region,
        resolution=spacing,
        adjacent=field.points[field.ext_fail],
    )


def e_complement_check(
    M: ManifoldSpec,
    region: Region,
    grid_n: int,
    opts: ProjectOptions = SWEEP_OPTS,
    jobs: int = 1,
    jump_factor: float = 8.0,
) -> EComplementReport:
    """Compare the not-interior estimate with the skeleton/no-foot estimate.

    Set (a) collects grid points that fail the interior test (foot-field
    discontinuity, failed extension probe, or no nearest point); set (b)
    collects skeleton candidates and no-nearest-point points.  For closed
    manifolds the two should coincide up to grid resolution.
    """
    field = sweep_projection(
        M, region, grid_n, opts=opts, jobs=jobs, jump_factor=jump_factor
    )
    labels = classify_sweep(field)
    pts = field.points
    mask_b = (labels == LABEL_SKELETON) | (labels == LABEL_NO_NEAREST)
    mask_a = mask_b | (labels == LABEL_BOUNDARY)
    set_a, set_b = pts[mask_a], pts[mask_b]
    gap_ab = _one_sided_gap(set_a, set_b)
    gap_ba = _one_sided_gap(set_b, set_a)
    return EComplementReport(
        region=region,
        grid_n=grid_n,
        spacing=field.spacing,
        labels=labels,
        points=pts,
        set_a=set_a,
        set_b=set_b,
        gap_a_to_b=gap_ab,
        gap_b_to_a=gap_ba,
    )


def _one_sided_gap(A: np.ndarray, B: np.ndarray) -> float:
    if A.shape[0] == 0:
        return 0.0
    if B.shape[0] == 0:
        return math.inf
    tree = cKDTree(B)
    dd, _ = tree.query(A)
    return float(np.max(dd))


# ---------------------------------------------------------------------------
# medial axis transform


def convex_hull_halfspaces(M: ManifoldSpec, n_samples: int = 256) -> HalfSpaceSet:
    """Supporting half-spaces of the convex hull of manifold samples.

    Degenerate (affinely dependent) samples are thickened by 1e-9 along
    every axis and flagged.
    """
    d = M.ambient_dim
    if d not in (2, 3):
        raise PreconditionError("hull construction is implemented for d in {2, 3}")
    per_dim = max(2, int(round(n_samples ** (1.0 / M.param_dim)))) if M.param_dim else 1
    pts = M.sample_points(per_dim)
    thickened = False
    try:
        hull = ConvexHull(pts)
    except QhullError:
        thickened = True
        eps = 1e-9
        shifts = np.concatenate([np.eye(d) * eps, -np.eye(d) * eps], axis=0)
        fat = (pts[:, None, :] + shifts[None, :, :]).reshape(-1, d)
        try:
            hull = ConvexHull(fat)
        except QhullError as exc:
            raise DegenerateHullError("samples remain degenerate after thickening") from exc
        pts = fat
    normals = hull.equations[:, :d]
    offsets = -hull.equations[:, d]
    if np.max(pts @ normals.T - offsets[None, :]) > 1e-8:
        raise DegenerateHullError("hull half-spaces do not contain the samples")
    return HalfSpaceSet(normals=normals, offsets=offsets, thickened=thickened)


def medial_recover_batch(
    cloud: SkeletonCloud, hs: HalfSpaceSet, queries: np.ndarray
) -> np.ndarray:
    """Indicator of the complement of M recovered from balls + half-spaces."""
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.zeros(Q.shape[0], bool)
    if hs.normals.size:
        out |= np.any(Q @ hs.normals.T > hs.offsets[None, :] + 1e-12, axis=1)
    for b in cloud.balls:
        out |= np.linalg.norm(Q - b.center[None, :], axis=-1) < b.radius - 1e-12
    return out


def medial_recover(M: ManifoldSpec, cloud: SkeletonCloud, hs: HalfSpaceSet, query) -> bool:
    """True iff the query is recovered as lying in the complement of M."""
    return bool(medial_recover_batch(cloud, hs, np.asarray(query, dtype=float)[None, :])[0])
