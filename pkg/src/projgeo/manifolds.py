"""Charts, submanifold specs, tangent/normal frames, and the endpoint map.

A submanifold of R^d is represented by parametrized charts with derivative
evaluators up to second order.  Evaluators broadcast over a leading batch
axis: value (..., m) -> (..., d), jacobian -> (..., d, m), hessian
-> (..., d, m, m).  Chart domains are closed boxes; evaluating outside
raises instead of extrapolating, and unbounded manifolds are represented by
explicitly truncated charts (the truncated facets are flagged).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ChartDomainError,
    DimensionMismatchError,
    RankDeficientError,
)

_RANK_RTOL = 1e-10
_PARALLEL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Chart:
    """One parametrized patch y -> psi(y) of a submanifold.

    ``value``/``jacobian``/``hessian`` are batched callables; ``fused``
    optionally returns all three in one pass (used by the projection
    solver).  ``truncated_lo``/``truncated_hi`` flag the domain facets where
    the underlying manifold continues beyond the box.
    """

    param_dim: int
    ambient_dim: int
    lo: np.ndarray
    hi: np.ndarray
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fused: Optional[Callable[[np.ndarray], tuple]] = None
    derivative_mode: str = "analytic"
    # facet meaning: truncated = M continues beyond the box (cut off);
    # boundary = M genuinely ends here and the facet points belong to M;
    # neither = a seam or chart join (another parameter range covers it)
    truncated_lo: tuple = ()
    truncated_hi: tuple = ()
    boundary_lo: tuple = ()
    boundary_hi: tuple = ()
    expr_components: Optional[tuple] = None
    builtin_payload: Optional[dict] = None

    def __post_init__(self):
        if self.param_dim >= self.ambient_dim:
            raise DimensionMismatchError("charts require m < d")
        lo = np.asarray(self.lo, dtype=float).reshape(self.param_dim)
        hi = np.asarray(self.hi, dtype=float).reshape(self.param_dim)
        if np.any(hi < lo):
            raise ChartDomainError("chart domain box has hi < lo")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        for name in ("truncated_lo", "truncated_hi", "boundary_lo", "boundary_hi"):
            if not getattr(self, name):
                object.__setattr__(self, name, (False,) * self.param_dim)

    # -- domain handling ---------------------------------------------------
    def contains(self, y: np.ndarray, tol: float = 0.0) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lo - tol) and np.all(y <= self.hi + tol))

    def require_inside(self, y: np.ndarray, tol: float = 1e-9):
        if not self.contains(y, tol):
            raise ChartDomainError(f"parameter {y!r} outside chart box")

    def clip(self, y: np.ndarray) -> np.ndarray:
        return np.clip(y, self.lo, self.hi)

    def grid(self, n: int, margin: float = 0.0) -> np.ndarray:
        """Tensor grid of the domain, inset by ``margin`` (fraction of width)."""
        if self.param_dim == 0:
            return np.zeros((1, 0))
        width = self.hi - self.lo
        lo = self.lo + margin * width
        hi = self.hi - margin * width
        axes = [np.linspace(lo[i], hi[i], n) for i in range(self.param_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    # -- evaluation --------------------------------------------------------
    def evaluate(self, y: np.ndarray, order: int = 0, domain_tol: float = 1e-9):
        """Return (value[, jacobian[, hessian]]) for batched y inside the box.

        ``domain_tol`` admits slight overshoot (finite-difference probes of
        boundary feet); anything beyond it raises instead of extrapolating.
        """
        y = np.asarray(y, dtype=float)
        if y.size and (
            np.any(y < self.lo - domain_tol) or np.any(y > self.hi + domain_tol)
        ):
            raise ChartDomainError("evaluation outside the chart box")
        if order >= 2 and self.hessian is None:
            from .errors import NotC2Error

            raise NotC2Error("chart provides no second derivatives")
        if order == 0:
            return (self.value(y),)
        if self.fused is not None and order == 2:
            return self.fused(y)
        if order == 1:
            return self.value(y), self.jacobian(y)
        return self.value(y), self.jacobian(y), self.hessian(y)


def finite_difference_derivatives(value_fn, m: int):
    """Central-difference jacobian/hessian builders for a batched value fn.

    First-order steps use h1 = eps^(1/3) * max(1, |y_i|), second-order
    h2 = eps^(1/4) * max(1, |y_i|).
    """
    eps = np.finfo(float).eps
    c1, c2 = eps ** (1.0 / 3.0), eps ** 0.25

    def jacobian(y):
        y = np.asarray(y, dtype=float)
        h = c1 * np.maximum(1.0, np.abs(y))
        cols = []
        for i in range(m):
            e = np.zeros_like(y)
            e[..., i] = h[..., i]
            cols.append((value_fn(y + e) - value_fn(y - e)) / (2.0 * h[..., i])[..., None])
        return np.stack(cols, axis=-1)

    def hessian(y):
        y = np.asarray(y, dtype=float)
        h = c2 * np.maximum(1.0, np.abs(y))
        f0 = value_fn(y)
        d = f0.shape[-1]
        out = np.zeros(y.shape[:-1] + (d, m, m))
        for i in range(m):
            ei = np.zeros_like(y)
            ei[..., i] = h[..., i]
            out[..., i, i] = (value_fn(y + ei) - 2.0 * f0 + value_fn(y - ei)) / (
                h[..., i] ** 2
            )[..., None]
            for j in range(i + 1, m):
                ej = np.zeros_like(y)
                ej[..., j] = h[..., j]
                mixed = (
                    value_fn(y + ei + ej)
                    - value_fn(y + ei - ej)
                    - value_fn(y - ei + ej)
                    + value_fn(y - ei - ej)
                ) / (4.0 * h[..., i] * h[..., j])[..., None]
                out[..., i, j] = mixed
                out[..., j, i] = mixed
        return out

    return jacobian, hessian


def chart_from_callable(value_fn, m, d, lo, hi, jacobian=None, hessian=None, **kwargs):
    """Build a chart from a batched value callable, differencing what's missing."""
    fd_jac, fd_hess = finite_difference_derivatives(value_fn, m)
    mode = "analytic" if (jacobian is not None and hessian is not None) else "finite-difference"
    return Chart(
        param_dim=m,
        ambient_dim=d,
        lo=lo,
        hi=hi,
        value=value_fn,
        jacobian=jacobian or fd_jac,
        hessian=hessian or fd_hess,
        derivative_mode=mode,
        **kwargs,
    )


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    """A submanifold given by one or more charts sharing (m, d)."""

    charts: tuple
    name: str = ""
    smoothness_claim: int = 2
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        charts = tuple(self.charts)
        if not charts:
            raise DimensionMismatchError("a manifold needs at least one chart")
        m, d = charts[0].param_dim, charts[0].ambient_dim
        for c in charts:
            if (c.param_dim, c.ambient_dim) != (m, d):
                raise DimensionMismatchError("all charts must share (m, d)")
        object.__setattr__(self, "charts", charts)

    @property
    def param_dim(self) -> int:
        return self.charts[0].param_dim

    @property
    def ambient_dim(self) -> int:
        return self.charts[0].ambient_dim

    def sample_points(self, n_per_dim: int, margin: float = 0.0) -> np.ndarray:
        """Ambient samples from a tensor grid of every chart, stacked."""
        pts = [c.value(c.grid(n_per_dim, margin)) for c in self.charts]
        return np.concatenate(pts, axis=0)


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal tangent vectors (rows) at a base point."""

    base_point: np.ndarray
    vectors: np.ndarray  # (m, d)


@dataclass(frozen=True)
class NormalFrame:
    """Orthonormal normal vectors (rows) at a base point."""

    base_point: np.ndarray
    vectors: np.ndarray  # (d - m, d)


@dataclass(frozen=True)
class NormalRay:
    """A foot on M together with a unit normal direction.

    The foot is located both in ambient space and in chart coordinates so
    downstream operations can evaluate derivatives there.
    """

    foot: np.ndarray
    chart_index: int
    chart_coords: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        foot = np.asarray(self.foot, dtype=float)
        coords = np.asarray(self.chart_coords, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "foot", foot)
        object.__setattr__(self, "chart_coords", coords)
        object.__setattr__(self, "direction", direction)
        if abs(np.linalg.norm(direction) - 1.0) > 1e-12:
            raise DimensionMismatchError("ray direction must be a unit vector")


def _jacobian_at(chart: Chart, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(chart.param_dim)
    chart.require_inside(y)
    return chart.jacobian(y[None])[0]


def _qr_frame(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR with positive diagonal: identical to Gram-Schmidt in column order."""
    Q, R = np.linalg.qr(J)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs[None, :], R * signs[:, None]


def check_rank(J: np.ndarray):
    if J.shape[1] == 0:
        return
    s = np.linalg.svd(J, compute_uv=False)
    if s[-1] < _RANK_RTOL * s[0] or s[0] == 0.0:
        raise RankDeficientError(
            f"chart jacobian is rank deficient (singular values {s})"
        )


def tangent_frame(chart: Chart, y: np.ndarray) -> TangentFrame:
    """Gram-Schmidt orthonormalization of the jacobian columns, in order."""
    J = _jacobian_at(chart, y)
    check_rank(J)
    Q, _ = _qr_frame(J)
    base = chart.value(np.asarray(y, dtype=float).reshape(1, chart.param_dim))[0]
    return TangentFrame(base_point=base, vectors=Q.T.copy())


def normal_frame(chart: Chart, y: np.ndarray) -> NormalFrame:
    """Complete the tangent frame to an orthonormal basis of R^d.

    Canonical basis vectors are tried in index order; near-parallel
    candidates (residual below 1e-6) are rejected, which makes the frame
    deterministic.
    """
    tf = tangent_frame(chart, y)
    d = chart.ambient_dim
    basis = [v for v in tf.vectors]
    normals = []
    for k in range(d):
        if len(basis) == d:
            break
        cand = np.zeros(d)
        cand[k] = 1.0
        r = cand.copy()
        for _ in range(2):  # re-orthogonalize for numerical hygiene
            for b in basis:
                r -= (r @ b) * b
        nr = np.linalg.norm(r)
        if nr > _PARALLEL_TOL:
            r /= nr
            basis.append(r)
            normals.append(r)
    if len(normals) != d - chart.param_dim:
        raise RankDeficientError("frame completion failed; tangent frame suspect")
    return NormalFrame(base_point=tf.base_point, vectors=np.array(normals))


def normal_ray(M: ManifoldSpec, chart_index: int, y, direction) -> NormalRay:
    """Validated constructor: checks the foot and v _|_ T_xi(M)."""
    chart = M.charts[chart_index]
    y = np.asarray(y, dtype=float).reshape(chart.param_dim)
    direction = np.asarray(direction, dtype=float)
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:
        raise DimensionMismatchError("ray direction must be nonzero")
    direction = direction / nrm
    tf = tangent_frame(chart, y)
    if tf.vectors.size and np.max(np.abs(tf.vectors @ direction)) > 1e-8:
        raise DimensionMismatchError("ray direction is not normal to the manifold")
    return NormalRay(
        foot=tf.base_point, chart_index=chart_index, chart_coords=y, direction=direction
    )


def endpoint(ray: NormalRay, r: float) -> np.ndarray:
    """The endpoint map: foot + r * direction, exactly."""
    return ray.foot + float(r) * ray.direction


@dataclass(frozen=True)
class SubspaceDistanceReport:
    """Chord-length subspace distance plus the principal-angle variants."""

    chord: float
    max_angle: float
    arcsin_variant: float


def _as_basis(T: np.ndarray) -> np.ndarray:
    B = np.asarray(T, dtype=float)
    if B.ndim != 2:
        raise DimensionMismatchError("basis must be a 2-d array of row vectors")
    return B


def subspace_distance_report(T1, T2) -> SubspaceDistanceReport:
    """Distance between equal-dimensional subspaces via principal angles.

    The sup-inf chord definition evaluates to 2 sin(theta_max / 2) where
    theta_max is the largest principal angle; the angle is recovered from
    both its sine (residual of T1 against T2, accurate near 0) and its
    cosine (Gram singular values, accurate near pi/2).  The arcsin variant
    2 arcsin(theta_max / 2) is reported alongside for diagnostics.
    """
    B1, B2 = _as_basis(T1), _as_basis(T2)
    if B1.shape != B2.shape:
        raise DimensionMismatchError("subspaces must share dimension and ambient space")
    gram = B1 @ B2.T
    cos_max = float(np.clip(np.linalg.svd(gram, compute_uv=False).min(), -1.0, 1.0))
    resid = B1 - gram @ B2
    sin_max = float(np.clip(np.linalg.svd(resid, compute_uv=False).max(), 0.0, 1.0))
    theta = math.atan2(sin_max, cos_max)
    return SubspaceDistanceReport(
        chord=2.0 * math.sin(theta / 2.0),
        max_angle=theta,
        arcsin_variant=2.0 * math.asin(theta / 2.0),
    )


def subspace_distance(T1, T2) -> float:
    """Hausdorff distance of unit spheres of two m-dimensional subspaces."""
    return subspace_distance_report(T1, T2).chord
