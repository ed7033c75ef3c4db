"""Frontier function, fiber scaling maps, bundle chart, and reach.

The frontier value theta(xi, v) is bracketed by bisection on the predicate
"the projection of xi + r v is unique with foot xi".  Inside the frontier
this holds exactly; past it the foot switches basin (or the projection goes
multiple), so the predicate is monotone up to solver noise, which is
checked and reported.  Many rays are processed in lockstep so each
bisection step is a single batched projection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FiberOverflowError,
    FootMismatchError,
    PreconditionError,
    PredicateNoiseError,
)
from .manifolds import ManifoldSpec, NormalRay, endpoint, normal_frame
from .projection import (
    DEFAULT_OPTS,
    ProjectOptions,
    project,
    project_batch,
    ray_through,
)
from .utils import UNBOUNDED, Unbounded, extended_to_float, parallel_map

FOOT_TOL = 1e-6


@dataclass
class FrontierEstimate:
    """Bracketed frontier value along one normal ray."""

    ray: NormalRay
    theta_lo: float
    theta_hi: float  # math.inf when unbounded
    unbounded_beyond: float | None
    predicate_trace: list = field(default_factory=list)  # (r, foot_agrees)

    @property
    def unbounded(self) -> bool:
        return self.unbounded_beyond is not None

    @property
    def midpoint(self) -> float:
        return self.theta_lo if self.unbounded else 0.5 * (self.theta_lo + self.theta_hi)


@dataclass
class ReachReport:
    samples: list  # FrontierEstimate per sampled ray
    reach_estimate: float | Unbounded
    argmin_index: int | None

    @property
    def argmin_ray(self) -> NormalRay | None:
        return None if self.argmin_index is None else self.samples[self.argmin_index].ray


class _RayState:
    __slots__ = ("ray", "lo", "hi", "r_max", "phase", "next_r", "trace", "estimate")

    def __init__(self, ray: NormalRay, r_max: float):
        self.ray = ray
        self.lo = 0.0
        self.hi = math.inf
        self.r_max = r_max
        self.phase = "check0"
        self.next_r = 0.0
        self.trace: list = []
        self.estimate: FrontierEstimate | None = None


def _verify_monotone(state: _RayState, tol: float):
    """Trace must be true on a prefix, false on a suffix, up to one cell."""
    trace = sorted(state.trace)
    max_true = max((r for r, ok in trace if ok), default=-math.inf)
    min_false = min((r for r, ok in trace if not ok), default=math.inf)
    if max_true > min_false + tol:
        raise PredicateNoiseError(
            f"frontier predicate not monotone along ray at {state.ray.foot}: "
            f"agrees at r={max_true} but fails at r={min_false}",
            trace=trace,
        )


def frontier_batch(
    M: ManifoldSpec,
    rays,
    r_max: float = 8.0,
    tol: float = 1e-4,
    opts: ProjectOptions = DEFAULT_OPTS,
    r0: float = 1e-3,
    strict: bool = True,
) -> list:
    """Frontier estimates for many rays, bisected in lockstep.

    With ``strict=False`` a ray whose predicate misbehaves (foot mismatch
    at the origin, non-monotone trace) yields None instead of raising,
    which lets sweeps skip pathological rays.
    """
    if r_max <= 0 or tol <= 0:
        raise PreconditionError("r_max and tol must be positive")
    if r_max <= 16.0 * tol:
        raise PreconditionError("r_max must exceed 16*tol")
    states = [_RayState(ray, r_max) for ray in rays]
    for st in states:
        st.next_r = min(16.0 * tol, st.r_max)

    while True:
        act = [st for st in states if st.phase != "done"]
        if not act:
            break
        pts = np.stack([endpoint(st.ray, st.next_r) for st in act])
        pb = project_batch(M, pts, opts)
        for i, st in enumerate(act):
            foot_ok = (
                pb.mult_code[i] == 1
                and np.linalg.norm(pb.foot[i] - st.ray.foot)
                <= FOOT_TOL * (1.0 + np.linalg.norm(st.ray.foot))
            )
            r = st.next_r
            st.trace.append((r, bool(foot_ok)))
            if st.phase == "check0":
                if not foot_ok:
                    if strict:
                        raise FootMismatchError(
                            f"projection of foot + {r} v does not return the foot "
                            f"{st.ray.foot}; the ray foot is off-manifold or the solver failed"
                        )
                    st.phase = "done"
                    continue
                st.lo = r
                st.phase = "double"
                st.next_r = max(r0, 2.0 * r)
                if st.next_r >= st.r_max:
                    st.next_r = st.r_max
                continue
            if st.phase == "double":
                if foot_ok:
                    st.lo = r
                    if r >= st.r_max:
                        st.estimate = FrontierEstimate(
                            ray=st.ray,
                            theta_lo=st.r_max,
                            theta_hi=math.inf,
                            unbounded_beyond=st.r_max,
                            predicate_trace=sorted(st.trace),
                        )
                        st.phase = "done"
                        continue
                    st.next_r = min(2.0 * r, st.r_max)
                else:
                    st.hi = r
                    st.phase = "bisect"
                    st.next_r = 0.5 * (st.lo + st.hi)
                continue
            # bisect
            if foot_ok:
                st.lo = r
            else:
                st.hi = r
            if st.hi - st.lo <= tol:
                try:
                    _verify_monotone(st, tol)
                except PredicateNoiseError:
                    if strict:
                        raise
                    st.phase = "done"
                    continue
                st.estimate = FrontierEstimate(
                    ray=st.ray,
                    theta_lo=st.lo,
                    theta_hi=st.hi,
                    unbounded_beyond=None,
                    predicate_trace=sorted(st.trace),
                )
                st.phase = "done"
            else:
                st.next_r = 0.5 * (st.lo + st.hi)

    return [st.estimate for st in states]


def frontier(
    M: ManifoldSpec,
    ray: NormalRay,
    r_max: float = 8.0,
    tol: float = 1e-4,
    opts: ProjectOptions = DEFAULT_OPTS,
) -> FrontierEstimate:
    """How far one can travel along the ray while the foot stays put."""
    return frontier_batch(M, [ray], r_max=r_max, tol=tol, opts=opts)[0]


# ---------------------------------------------------------------------------
# fiber scaling maps


def theta_bar(theta, v_norm: float) -> float:
    """Outward fiber rescaling theta/(theta - |v|); 1 on unbounded fibers."""
    if v_norm < 0:
        raise PreconditionError("norm must be nonnegative")
    if is_unbounded_theta(theta) or v_norm == 0.0:
        return 1.0
    theta = float(theta)
    if v_norm >= theta:
        raise FiberOverflowError(f"|v|={v_norm} reaches past the frontier {theta}")
    return theta / (theta - v_norm)


def theta_under(theta, w_norm: float) -> float:
    """Inverse fiber rescaling theta/(theta + |w|); 1 on unbounded fibers."""
    if w_norm < 0:
        raise PreconditionError("norm must be nonnegative")
    if is_unbounded_theta(theta) or w_norm == 0.0:
        return 1.0
    return float(theta) / (float(theta) + w_norm)


def is_unbounded_theta(theta) -> bool:
    return isinstance(theta, Unbounded) or (
        isinstance(theta, float) and math.isinf(theta)
    )


# ---------------------------------------------------------------------------
# bundle chart


@dataclass
class BundleImage:
    ray: NormalRay | None  # None when x lies on M
    w: np.ndarray
    theta: float | Unbounded


def bundle_chart(
    M: ManifoldSpec,
    x,
    r_max: float = 8.0,
    tol: float = 1e-8,
    opts: ProjectOptions = DEFAULT_OPTS,
) -> BundleImage:
    """phi(x) = (foot, theta_bar * (x - foot)): straightens E(M) fibers."""
    x = np.asarray(x, dtype=float)
    res = project(M, x, opts)
    v = x - res.foot
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return BundleImage(ray=None, w=np.zeros_like(x), theta=UNBOUNDED)
    ray = ray_through(M, x, opts)
    est = frontier(M, ray, r_max=r_max, tol=tol, opts=opts)
    theta: float | Unbounded = UNBOUNDED if est.unbounded else est.theta_lo
    scale = theta_bar(theta, nrm)  # raises FiberOverflow outside the fiber
    return BundleImage(ray=ray, w=scale * v, theta=theta)


def bundle_chart_inverse(
    M: ManifoldSpec,
    image: BundleImage,
    r_max: float = 8.0,
    tol: float = 1e-8,
    opts: ProjectOptions = DEFAULT_OPTS,
) -> np.ndarray:
    """phi^{-1}(foot, w) = foot + theta_under * w."""
    if image.ray is None:
        raise PreconditionError("inverse at a manifold point needs its ray context")
    w = np.asarray(image.w, dtype=float)
    nrm = float(np.linalg.norm(w))
    if nrm == 0.0:
        return image.ray.foot.copy()
    est = frontier(M, image.ray, r_max=r_max, tol=tol, opts=opts)
    theta: float | Unbounded = UNBOUNDED if est.unbounded else est.theta_lo
    return image.ray.foot + theta_under(theta, nrm) * w


# ---------------------------------------------------------------------------
# reach


@dataclass(frozen=True)
class ReachSampling:
    """Finite nu_1(M) sample: chart-parameter grid x normal directions."""

    feet_per_dim: int = 16
    margin: float = 1e-3  # fractional inset of each chart box
    r_max: float = 8.0
    tol: float = 1e-4
    fibonacci_count: int = 64  # used when codimension is 3

    def directions(self, frame: np.ndarray) -> np.ndarray:
        codim = frame.shape[0]
        if codim <= 2:
            return np.concatenate([frame, -frame], axis=0)
        if codim == 3:
            k = np.arange(self.fibonacci_count)
            golden = (1.0 + 5.0**0.5) / 2.0
            z = 1.0 - (2.0 * k + 1.0) / self.fibonacci_count
            phi = 2.0 * math.pi * k / golden
            s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
            coeff = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)
            return coeff @ frame
        return np.concatenate([frame, -frame], axis=0)


def sample_unit_normal_bundle(
    M: ManifoldSpec, sampling: ReachSampling = ReachSampling()
) -> list:
    """Deterministic rays (feet grid x normal sphere discretization)."""
    rays = []
    for ci, chart in enumerate(M.charts):
        if chart.param_dim == 0:
            continue
        for y in chart.grid(sampling.feet_per_dim, margin=sampling.margin):
            nf = normal_frame(chart, y)
            for v in sampling.directions(nf.vectors):
                rays.append(
                    NormalRay(
                        foot=nf.base_point,
                        chart_index=ci,
                        chart_coords=np.atleast_1d(y),
                        direction=v / np.linalg.norm(v),
                    )
                )
    return rays


def reach(
    M: ManifoldSpec,
    sampling: ReachSampling = ReachSampling(),
    opts: ProjectOptions = DEFAULT_OPTS,
    jobs: int = 1,
) -> ReachReport:
    """Minimum of the frontier function over a sampled unit normal bundle.

    For compact catalog manifolds this converges to reach(M) as the
    sampling refines.
    """
    rays = sample_unit_normal_bundle(M, sampling)
    if not rays:
        raise PreconditionError("no rays sampled; manifold has no positive-dim charts")
    if jobs > 1:
        groups = np.array_split(np.arange(len(rays)), jobs)
        results = parallel_map(
            lambda g: frontier_batch(
                M, [rays[i] for i in g], r_max=sampling.r_max, tol=sampling.tol, opts=opts
            ),
            [g for g in groups if g.size],
            jobs=jobs,
        )
        samples = [est for grp in results for est in grp]
    else:
        samples = frontier_batch(M, rays, r_max=sampling.r_max, tol=sampling.tol, opts=opts)

    best_idx = None
    best = math.inf
    for i, est in enumerate(samples):
        if est.unbounded:
            continue
        val = est.theta_lo
        if val < best:  # strict: ties keep the smallest ray index
            best = val
            best_idx = i
    if best_idx is None:
        return ReachReport(samples=samples, reach_estimate=UNBOUNDED, argmin_index=None)
    return ReachReport(samples=samples, reach_estimate=best, argmin_index=best_idx)


def theta_profile(
    M: ManifoldSpec,
    rays,
    r_max: float = 8.0,
    tol: float = 1e-4,
    opts: ProjectOptions = DEFAULT_OPTS,
) -> list:
    """Frontier estimates along a parametrized family of rays."""
    return frontier_batch(M, list(rays), r_max=r_max, tol=tol, opts=opts)
