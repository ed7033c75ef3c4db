"""Metric projection: nearest points, distance, and domain classification.

The solver minimizes ``||psi(y) - x||^2`` over every chart box with a
multistart damped Newton iteration (Levenberg-style lambda control, box
clamping).  Everything is vectorized over (point, start) pairs, which keeps
grid sweeps and frontier bisections fast.

Results carry every deduped global minimizer, a multiplicity tag, and
solver diagnostics; points whose minimizers all sit on truncation facets of
an unbounded chart (and want to leave the box) are classified as having no
nearest point at all.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .errors import PreconditionError, SolverFailureError
from .manifolds import ManifoldSpec, NormalRay, normal_ray
from .utils import chunked

log = logging.getLogger(__name__)


class Multiplicity(enum.Enum):
    UNIQUE = "unique"
    MULTIPLE = "multiple"
    NONE = "none"


class PointLabel(enum.Enum):
    INTERIOR_E = "InteriorE"
    BOUNDARY_OR_OUTSIDE_E = "BoundaryOrOutsideE"
    SKELETON_CANDIDATE = "SkeletonCandidate"
    NO_NEAREST_POINT = "NoNearestPoint"


@dataclass(frozen=True)
class ProjectOptions:
    """Tunables for the multistart projection solver.

    Dedupe tolerances scale with 1 + ||x||; two minima are distinct when
    their ambient feet differ by more than ``tol_sep`` while both distances
    are within ``tol_dist`` of the global minimum.
    """

    grid_starts: int = 5  # per parameter dimension
    qr_starts: int = 32  # quasi-random (Halton) starts per chart
    seed: int = 0
    max_iter: int = 200
    step_tol: float = 1e-12
    tol_dist_rel: float = 1e-7
    tol_sep_rel: float = 1e-5
    basin_sep_abs: float = 1e-3  # separation defining a "different basin"
    max_reps: int = 8
    probe_eps_rel: float = 1e-3
    continuity_factor: float = 10.0
    raise_on_failure: bool = True

    def tol_dist(self, scale: float) -> float:
        return self.tol_dist_rel * scale

    def tol_sep(self, scale: float) -> float:
        return self.tol_sep_rel * scale


DEFAULT_OPTS = ProjectOptions()
SWEEP_OPTS = replace(DEFAULT_OPTS, qr_starts=8, raise_on_failure=False)


@dataclass
class Minimum:
    chart_index: int
    chart_coords: np.ndarray
    point: np.ndarray
    distance: float


@dataclass
class Diagnostics:
    starts_used: int
    converged_fraction: float
    warning: str = ""


@dataclass
class ProjectionResult:
    """All global minimizers of the distance to M from one query point."""

    minima: list
    global_distance: float
    multiplicity: Multiplicity
    diagnostics: Diagnostics

    @property
    def foot(self) -> np.ndarray:
        return self.minima[0].point

    def to_dict(self) -> dict:
        return {
            "global_distance": self.global_distance,
            "multiplicity": self.multiplicity.value,
            "minima": [
                {
                    "chart_index": m.chart_index,
                    "chart_coords": [float(v) for v in m.chart_coords],
                    "point": [float(v) for v in m.point],
                    "distance": m.distance,
                }
                for m in self.minima
            ],
            "diagnostics": {
                "starts_used": self.diagnostics.starts_used,
                "converged_fraction": self.diagnostics.converged_fraction,
                "warning": self.diagnostics.warning,
            },
        }


@dataclass
class PointClass:
    label: PointLabel
    witness: ProjectionResult


# ---------------------------------------------------------------------------
# start generation


def chart_starts(chart, opts: ProjectOptions) -> np.ndarray:
    """Deterministic multistart set: coarse grid plus scrambled Halton."""
    if chart.param_dim == 0:
        return np.zeros((1, 0))
    grid = chart.grid(opts.grid_starts)
    if opts.qr_starts > 0:
        sampler = qmc.Halton(d=chart.param_dim, scramble=True, seed=opts.seed)
        u = sampler.random(opts.qr_starts)
        qr = chart.lo + u * (chart.hi - chart.lo)
        return np.concatenate([grid, qr], axis=0)
    return grid


# ---------------------------------------------------------------------------
# batched damped-Newton least squares


def _solve_chart(chart, X: np.ndarray, Y0: np.ndarray, opts: ProjectOptions):
    """Minimize ||psi(y) - x||^2 for every (point, start) pair of one chart.

    Returns final coords (P,S,m), feet (P,S,d), squared distances (P,S),
    convergence flags (P,S) and outward-escape flags (P,S).
    """
    P, d = X.shape
    S, m = Y0.shape
    Q = P * S
    y = np.broadcast_to(Y0[None, :, :], (P, S, m)).reshape(Q, m).copy()
    x = np.broadcast_to(X[:, None, :], (P, S, d)).reshape(Q, d)

    if m == 0:
        feet = chart.value(y)
        cost = np.sum((feet - x) ** 2, axis=-1)
        conv = np.ones(Q, bool)
        esc = np.zeros(Q, bool)
        return (
            y.reshape(P, S, m),
            feet.reshape(P, S, d),
            cost.reshape(P, S),
            conv.reshape(P, S),
            esc.reshape(P, S),
            esc.reshape(P, S).copy(),
            esc.reshape(P, S).copy(),
        )

    eye = np.eye(m)

    def full_eval(yy, xx):
        v, J, H = chart.evaluate(yy, order=2)
        r = v - xx
        cost = np.sum(r * r, axis=-1)
        g = 2.0 * np.einsum("qdm,qd->qm", J, r)
        hess = 2.0 * (
            np.einsum("qdi,qdj->qij", J, J) + np.einsum("qdij,qd->qij", H, r)
        )
        return cost, g, hess

    cost, g, hess = full_eval(y, x)
    hscale = np.abs(hess).max(axis=(1, 2)) + 1e-300
    lam = 1e-3 * (1.0 + hscale)
    active = np.ones(Q, bool)
    converged = np.zeros(Q, bool)

    width = np.maximum(chart.hi - chart.lo, 1e-300)
    btol = 1e-9 * (1.0 + width)

    def projected_gradient(yy, gg):
        """Zero the gradient components that point out of the box."""
        pg = gg.copy()
        pg[(yy <= chart.lo + btol) & (gg > 0)] = 0.0
        pg[(yy >= chart.hi - btol) & (gg < 0)] = 0.0
        return pg

    for _ in range(opts.max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        A = hess[idx] + lam[idx, None, None] * eye
        gi = g[idx]
        try:
            delta = -np.linalg.solve(A, gi[..., None])[..., 0]
        except np.linalg.LinAlgError:
            A = A + (1e-8 * (1.0 + np.abs(A).max())) * eye
            delta = -np.linalg.solve(A, gi[..., None])[..., 0]
        trial = np.clip(y[idx] + delta, chart.lo, chart.hi)
        step = np.linalg.norm(trial - y[idx], axis=-1)
        vt = chart.value(trial)
        cost_t = np.sum((vt - x[idx]) ** 2, axis=-1)
        # first-order criticality of the current iterate; only critical
        # states may accept float-stagnant steps (slack) or declare
        # convergence, otherwise corner-clipped junk steps would "converge"
        pgn = np.linalg.norm(projected_gradient(y[idx], gi), axis=-1)
        crit = pgn <= 1e-7 * (1.0 + cost[idx])
        slack = 16.0 * np.finfo(float).eps * (1.0 + np.abs(cost[idx]))
        accept = (cost_t < cost[idx]) | (crit & (cost_t <= cost[idx] + slack))

        acc = idx[accept]
        y[acc] = trial[accept]
        cost[acc] = cost_t[accept]
        # the damping floor tracks the Hessian scale so flat (degenerate)
        # basins keep contracting at the Newton rate
        lam[acc] = np.maximum(lam[acc] / 3.0, 1e-11 * hscale[acc])
        lam[idx[~accept]] *= 4.0

        done = np.zeros(idx.size, bool)
        done[accept] = (step[accept] < opts.step_tol) & crit[accept]
        newly = idx[done]
        converged[newly] = True
        active[newly] = False
        stuck = idx[lam[idx] > 1e16 * (1.0 + hscale[idx])]
        active[stuck] = False

        # re-linearize only where we actually moved and keep iterating
        moving = np.setdiff1d(acc, newly, assume_unique=False)
        if moving.size:
            c2, g2, h2 = full_eval(y[moving], x[moving])
            cost[moving] = c2
            g[moving] = g2
            hess[moving] = h2
            hscale[moving] = np.abs(h2).max(axis=(1, 2)) + 1e-300

    feet = chart.value(y)

    # Endpoints that are not first-order critical are not minima at all.
    # Endpoints pinned to a facet with the gradient pointing outward are
    # genuine minima on a true-boundary facet, witnesses of non-attainment
    # on a truncated facet (esc), and box artifacts on a seam/join facet
    # (art, dropped from the minima).
    pg_final = projected_gradient(y, g)
    noncritical = np.linalg.norm(pg_final, axis=-1) > 1e-7 * (1.0 + cost)
    # declaring non-attainment needs clear outward pressure; discarding a
    # seam endpoint only needs it to exceed rounding noise
    gtol_esc = 1e-8 * (1.0 + cost)[:, None]
    gtol_art = 1e-12 * (1.0 + cost)[:, None]
    t_lo = np.array(chart.truncated_lo, bool)
    t_hi = np.array(chart.truncated_hi, bool)
    b_lo = np.array(chart.boundary_lo, bool)
    b_hi = np.array(chart.boundary_hi, bool)
    seam_lo = ~t_lo & ~b_lo
    seam_hi = ~t_hi & ~b_hi
    at_hi = y >= chart.hi - btol
    at_lo = y <= chart.lo + btol
    esc = np.any(
        (at_hi & t_hi[None, :] & (g < -gtol_esc))
        | (at_lo & t_lo[None, :] & (g > gtol_esc)),
        axis=-1,
    )
    art = noncritical | np.any(
        (at_hi & seam_hi[None, :] & (g < -gtol_art))
        | (at_lo & seam_lo[None, :] & (g > gtol_art)),
        axis=-1,
    )

    # chart degeneracy at the endpoint (e.g. spherical poles): the facet
    # collapses to one ambient point and box-stationarity proves nothing
    _, Jf = chart.evaluate(y, order=1)
    sv = np.linalg.svd(Jf, compute_uv=False)
    rankdef = sv[..., -1] < 1e-8 * (sv[..., 0] + 1e-300)

    return (
        y.reshape(P, S, m),
        feet.reshape(P, S, d),
        cost.reshape(P, S),
        converged.reshape(P, S),
        esc.reshape(P, S),
        art.reshape(P, S),
        rankdef.reshape(P, S),
    )


# ---------------------------------------------------------------------------
# batch aggregation


@dataclass
class BatchProjection:
    """Vectorized projection answers for a batch of query points."""

    x: np.ndarray  # (P, d)
    distance: np.ndarray  # (P,)
    foot: np.ndarray  # (P, d)
    chart_index: np.ndarray  # (P,)
    coords: np.ndarray  # (P, m)
    mult_code: np.ndarray  # (P,) 0=none 1=unique 2=multiple
    n_reps: np.ndarray  # (P,)
    converged_fraction: np.ndarray  # (P,)
    suspect: np.ndarray  # (P,) bool
    second_distance: np.ndarray  # (P,) distance of nearest distinct basin
    second_foot: np.ndarray  # (P, d)
    reps: dict = field(default_factory=dict)  # point index -> list[Minimum]

    def multiplicity(self, i: int) -> Multiplicity:
        return (Multiplicity.NONE, Multiplicity.UNIQUE, Multiplicity.MULTIPLE)[
            int(self.mult_code[i])
        ]

    def result(self, i: int, starts_used: int = 0) -> ProjectionResult:
        minima = self.reps.get(i)
        if minima is None:
            minima = [
                Minimum(
                    chart_index=int(self.chart_index[i]),
                    chart_coords=self.coords[i].copy(),
                    point=self.foot[i].copy(),
                    distance=float(self.distance[i]),
                )
            ]
        warning = "low multistart convergence" if self.suspect[i] else ""
        return ProjectionResult(
            minima=minima,
            global_distance=float(self.distance[i]),
            multiplicity=self.multiplicity(i),
            diagnostics=Diagnostics(
                starts_used=starts_used,
                converged_fraction=float(self.converged_fraction[i]),
                warning=warning,
            ),
        )


def project_batch(
    M: ManifoldSpec, X: np.ndarray, opts: ProjectOptions = DEFAULT_OPTS, chunk: int = 2048
) -> BatchProjection:
    """Project many points at once; see ``project`` for the contract."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P, d = X.shape
    if d != M.ambient_dim:
        raise PreconditionError("query points have the wrong ambient dimension")
    if not np.all(np.isfinite(X)):
        raise PreconditionError("query points must be finite")

    pieces = []
    for start, stop in chunked(P, chunk):
        pieces.append(_project_block(M, X[start:stop], opts))
    return merge_batches(pieces)


def merge_batches(pieces: list) -> BatchProjection:
    """Concatenate per-chunk batch results, preserving point order."""
    if len(pieces) == 1:
        return pieces[0]
    off = 0
    reps = {}
    for piece in pieces:
        n = piece.x.shape[0]
        for k, v in piece.reps.items():
            reps[k + off] = v
        off += n
    return BatchProjection(
        x=np.concatenate([p.x for p in pieces]),
        distance=np.concatenate([p.distance for p in pieces]),
        foot=np.concatenate([p.foot for p in pieces]),
        chart_index=np.concatenate([p.chart_index for p in pieces]),
        coords=np.concatenate([p.coords for p in pieces]),
        mult_code=np.concatenate([p.mult_code for p in pieces]),
        n_reps=np.concatenate([p.n_reps for p in pieces]),
        converged_fraction=np.concatenate([p.converged_fraction for p in pieces]),
        suspect=np.concatenate([p.suspect for p in pieces]),
        second_distance=np.concatenate([p.second_distance for p in pieces]),
        second_foot=np.concatenate([p.second_foot for p in pieces]),
        reps=reps,
    )


def _project_block(M: ManifoldSpec, X: np.ndarray, opts: ProjectOptions) -> BatchProjection:
    P, d = X.shape
    m = M.param_dim

    dist_all, feet_all, coords_all, conv_all, esc_all, art_all, rd_all, chart_ids = (
        [], [], [], [], [], [], [], [],
    )
    for ci, chart in enumerate(M.charts):
        Y0 = chart_starts(chart, opts)
        y, feet, cost, conv, esc, art, rankdef = _solve_chart(chart, X, Y0, opts)
        S = Y0.shape[0]
        dist_all.append(np.sqrt(np.maximum(cost, 0.0)))
        feet_all.append(feet)
        coords_all.append(y)
        conv_all.append(conv)
        esc_all.append(esc)
        art_all.append(art)
        rd_all.append(rankdef)
        chart_ids.append(np.full(S, ci, dtype=int))

    dist = np.concatenate(dist_all, axis=1)  # (P, T)
    feet = np.concatenate(feet_all, axis=1)  # (P, T, d)
    coords = np.concatenate(coords_all, axis=1)  # (P, T, m)
    conv = np.concatenate(conv_all, axis=1)
    esc = np.concatenate(esc_all, axis=1)
    art = np.concatenate(art_all, axis=1)
    rankdef = np.concatenate(rd_all, axis=1)
    chart_id = np.concatenate(chart_ids)  # (T,)
    T = dist.shape[1]

    # Drop seam artifacts.  Endpoints at chart-degenerate parameters count
    # only when strictly closer than every full-rank candidate (a pole that
    # merely ties a nearby regular foot is a phantom basin, but a pole that
    # clearly wins is a genuine foot).
    finite_dist = dist
    scale = 1.0 + np.linalg.norm(X, axis=1)
    tol_dist = opts.tol_dist_rel * scale
    fullrank_dist = np.where(art | rankdef, np.inf, dist).min(axis=1)
    phantom = rankdef & (dist >= (fullrank_dist - tol_dist)[:, None])
    dist = np.where(art | phantom, np.inf, dist)
    all_dropped = np.all(~np.isfinite(dist), axis=1)
    if np.any(all_dropped):
        dist[all_dropped] = finite_dist[all_dropped]

    tol_sep = opts.tol_sep_rel * scale

    order = np.argsort(dist, axis=1, kind="stable")
    rows = np.arange(P)[:, None]
    dist_s = dist[rows, order]
    feet_s = feet[rows, order]
    conv_s = conv[rows, order]
    esc_s = esc[rows, order]

    d0 = dist_s[:, 0]
    foot0 = feet_s[:, 0]
    best_prob = order[:, 0]
    chart0 = chart_id[best_prob]
    coords0 = coords[rows[:, 0], best_prob]

    # nearest distinct basin (macroscopic separation), fully vectorized
    sep_from_best = np.linalg.norm(feet_s - foot0[:, None, :], axis=-1)
    basin_mask = sep_from_best > np.maximum(opts.basin_sep_abs, 4.0 * tol_sep)[:, None]
    second_distance = np.where(basin_mask, dist_s, np.inf).min(axis=1)
    second_idx = np.where(basin_mask, dist_s, np.inf).argmin(axis=1)
    second_foot = feet_s[rows[:, 0], second_idx]

    # multiplicity: how many separated representatives at global distance
    near = dist_s <= (d0 + tol_dist)[:, None]
    near_count = near.sum(axis=1)
    near_spread = np.where(near, sep_from_best, 0.0).max(axis=1)
    needs_walk = (near_count >= 2) & (near_spread > tol_sep)

    n_reps = np.ones(P, dtype=int)
    reps: dict[int, list] = {}
    esc_flag = esc_s[:, 0].copy()
    for i in np.nonzero(needs_walk)[0]:
        kept: list[Minimum] = []
        kept_esc = []
        for k in range(T):
            if not near[i, k]:
                break
            f = feet_s[i, k]
            if any(np.linalg.norm(f - km.point) <= tol_sep[i] for km in kept):
                continue
            prob = order[i, k]
            kept.append(
                Minimum(
                    chart_index=int(chart_id[prob]),
                    chart_coords=coords[i, prob].copy(),
                    point=f.copy(),
                    distance=float(dist_s[i, k]),
                )
            )
            kept_esc.append(bool(esc_s[i, k]))
            if len(kept) >= opts.max_reps:
                break
        n_reps[i] = len(kept)
        reps[i] = kept
        esc_flag[i] = all(kept_esc)

    mult_code = np.where(n_reps >= 2, 2, 1).astype(np.int8)
    mult_code[esc_flag] = 0  # every global minimizer pushes past a truncation facet

    conv_frac = conv.mean(axis=1)
    has_conv_at_global = np.any(conv_s & (dist_s <= (d0 + tol_dist)[:, None]), axis=1)
    suspect = (conv_frac < 0.5) & ~has_conv_at_global

    return BatchProjection(
        x=X,
        distance=d0,
        foot=foot0,
        chart_index=chart0,
        coords=coords0,
        mult_code=mult_code,
        n_reps=n_reps,
        converged_fraction=conv_frac,
        suspect=suspect,
        second_distance=second_distance,
        second_foot=second_foot,
        reps=reps,
    )


def _starts_used(M: ManifoldSpec, opts: ProjectOptions) -> int:
    return sum(chart_starts(c, opts).shape[0] for c in M.charts)


def project(M: ManifoldSpec, x, opts: ProjectOptions = DEFAULT_OPTS) -> ProjectionResult:
    """All global minimizers of ``y -> ||psi(y) - x||`` over every chart.

    Raises SolverFailureError when fewer than half of the starts converged
    and no converged start reaches the global distance.
    """
    batch = project_batch(M, np.asarray(x, dtype=float)[None, :], opts)
    res = batch.result(0, starts_used=_starts_used(M, opts))
    if batch.suspect[0]:
        if opts.raise_on_failure:
            raise SolverFailureError(
                f"only {batch.converged_fraction[0]:.0%} of starts converged and the "
                "best minima disagree"
            )
        log.warning("projection suspect at %s", x)
    return res


def distance(M: ManifoldSpec, x, opts: ProjectOptions = DEFAULT_OPTS) -> float:
    """The distance function delta_M."""
    return project(M, x, opts).global_distance


def brute_force_project(M: ManifoldSpec, x, grid_n: int) -> ProjectionResult:
    """Nearest sample on a dense tensor grid of every chart domain.

    This is the independent oracle used to validate the solver; it never
    iterates, so its only error is the grid resolution.
    """
    if grid_n < 2:
        raise PreconditionError("grid_n must be at least 2")
    x = np.asarray(x, dtype=float)
    scale = 1.0 + np.linalg.norm(x)
    best: list[Minimum] = []
    d0 = np.inf
    for ci, chart in enumerate(M.charts):
        Y = chart.grid(grid_n)
        for start, stop in chunked(Y.shape[0], 1 << 20):
            block = Y[start:stop]
            pts = chart.value(block)
            dd = np.linalg.norm(pts - x, axis=-1)
            d0 = min(d0, float(dd.min()))
            cand = np.nonzero(dd <= d0 + 1e-9 * scale)[0]
            if cand.size > 512:  # equidistant plateaus: a spread sample suffices
                cand = cand[:: max(1, cand.size // 512)]
            for k in cand:
                best.append(
                    Minimum(
                        chart_index=ci,
                        chart_coords=block[k].copy(),
                        point=pts[k].copy(),
                        distance=float(dd[k]),
                    )
                )
    best = [m for m in best if m.distance <= d0 + 1e-9 * scale]
    best.sort(key=lambda m: (m.distance, m.chart_index))
    tol_sep = 1e-5 * scale
    kept: list[Minimum] = []
    for mzero in best:
        if all(np.linalg.norm(mzero.point - km.point) > tol_sep for km in kept):
            kept.append(mzero)
        if len(kept) >= 16:
            break
    mult = Multiplicity.MULTIPLE if len(kept) >= 2 else Multiplicity.UNIQUE
    total = sum(chart.grid(grid_n).shape[0] for chart in M.charts)
    return ProjectionResult(
        minima=kept,
        global_distance=d0,
        multiplicity=mult,
        diagnostics=Diagnostics(starts_used=total, converged_fraction=1.0),
    )


def classify(
    M: ManifoldSpec,
    x,
    probe_eps: float | None = None,
    opts: ProjectOptions = DEFAULT_OPTS,
) -> PointClass:
    """Locate x relative to E(M), the skeleton, and F(M).

    A point with a unique nearest point is accepted as interior only when
    all 2d axis probes of an eps-ball are unique as well and their feet move
    by at most ``continuity_factor * probe_eps``; this is a computable
    surrogate for the open condition and can misclassify within
    ``probe_eps`` of the true frontier.
    """
    x = np.asarray(x, dtype=float)
    if probe_eps is None:
        probe_eps = opts.probe_eps_rel * (1.0 + np.linalg.norm(x))
    if probe_eps <= 0:
        raise PreconditionError("probe_eps must be positive")
    res = project(M, x, opts)
    if res.multiplicity is Multiplicity.MULTIPLE:
        return PointClass(PointLabel.SKELETON_CANDIDATE, res)
    if res.multiplicity is Multiplicity.NONE:
        return PointClass(PointLabel.NO_NEAREST_POINT, res)

    d = x.size
    probes = np.repeat(x[None, :], 2 * d, axis=0)
    for i in range(d):
        probes[2 * i, i] += probe_eps
        probes[2 * i + 1, i] -= probe_eps
    pb = project_batch(M, probes, opts)
    if np.any(pb.mult_code != 1):
        return PointClass(PointLabel.BOUNDARY_OR_OUTSIDE_E, res)
    drift = np.linalg.norm(pb.foot - res.foot[None, :], axis=-1).max()
    if drift > opts.continuity_factor * probe_eps:
        return PointClass(PointLabel.BOUNDARY_OR_OUTSIDE_E, res)
    return PointClass(PointLabel.INTERIOR_E, res)


def ray_through(M: ManifoldSpec, x, opts: ProjectOptions = DEFAULT_OPTS) -> NormalRay:
    """Normal ray whose endpoint map reaches x: foot p(x), direction towards x."""
    res = project(M, x, opts)
    if res.multiplicity is not Multiplicity.UNIQUE:
        raise PreconditionError("ray_through needs a unique projection")
    foot = res.foot
    v = np.asarray(x, dtype=float) - foot
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise PreconditionError("x lies on M; the ray direction is undetermined")
    m0 = res.minima[0]
    return normal_ray(M, m0.chart_index, m0.chart_coords, v / nrm)
