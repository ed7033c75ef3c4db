"""Closed-form derivative of the projection and the gradient of distance^2.

On the interior of the projection domain, Dp(x) acts as the resolvent
(I - ||x-p(x)|| L)^-1 on the tangent space at the foot and vanishes on the
normal space; the resolvent is inverted in the m-dimensional orthonormal
tangent frame and conjugated back.  A finite-difference oracle with
basin-jump detection validates the formula, and the Neumann-series bound
(1 - eps/eps0)^-1 is asserted inside tubes of radius eps0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import shape_operator
from .errors import (
    BoundViolationError,
    FootJumpError,
    NonNormalOffsetError,
    OutsideTubeError,
    PreconditionError,
    SingularResolventError,
)
from .manifolds import ManifoldSpec, NormalRay, _qr_frame, check_rank
from .projection import DEFAULT_OPTS, Multiplicity, ProjectOptions, project, project_batch
from .utils import Unbounded


@dataclass
class DpReport:
    x: np.ndarray
    foot: np.ndarray
    formula_matrix: np.ndarray
    fd_matrix: np.ndarray
    rel_error: float
    norm_bound: float | Unbounded

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "foot": [float(v) for v in self.foot],
            "formula_matrix": self.formula_matrix.tolist(),
            "fd_matrix": self.fd_matrix.tolist(),
            "rel_error": self.rel_error,
            "norm_bound": (
                "inf" if isinstance(self.norm_bound, Unbounded) else float(self.norm_bound)
            ),
        }


def _foot_frame(M: ManifoldSpec, x, opts: ProjectOptions, res=None):
    x = np.asarray(x, dtype=float)
    if res is None:
        res = project(M, x, opts)
    if res.multiplicity is not Multiplicity.UNIQUE:
        raise PreconditionError(
            f"projection at {x} is {res.multiplicity.value}; Dp needs a unique foot"
        )
    m0 = res.minima[0]
    chart = M.charts[m0.chart_index]
    y = np.asarray(m0.chart_coords, dtype=float).reshape(1, chart.param_dim)
    _, J = chart.evaluate(y, order=1)
    check_rank(J[0])
    Q, _ = _qr_frame(J[0])
    return x, res, m0, chart, Q


def dp_formula(M: ManifoldSpec, x, opts: ProjectOptions = DEFAULT_OPTS, res=None) -> np.ndarray:
    """The d x d derivative of the projection at an interior point.

    Acts as (I_T - ||x-xi|| L_{xi,v})^{-1} on the tangent space and as 0 on
    its complement, with v the unit offset direction (irrelevant when x is
    on M, where Dp is the tangent projector).  A precomputed projection
    result may be passed to avoid re-solving.
    """
    x, res, m0, chart, Q = _foot_frame(M, x, opts, res)
    d = M.ambient_dim
    dist = res.global_distance
    scale = 1.0 + float(np.linalg.norm(x))
    if dist <= 1e-12 * scale:
        return Q @ Q.T
    v = (x - m0.point) / dist
    if Q.size and np.max(np.abs(Q.T @ v)) > 1e-6:
        raise NonNormalOffsetError(
            "x - p(x) is not normal to M at the foot (boundary-basin point)"
        )
    ray = NormalRay(
        foot=m0.point, chart_index=m0.chart_index, chart_coords=m0.chart_coords, direction=v
    )
    S = shape_operator(M, ray).matrix
    m = S.shape[0]
    A = np.eye(m) - dist * S
    eig = np.linalg.eigvalsh(dist * S)
    if np.any(np.abs(1.0 - eig) < 1e-10):
        raise SingularResolventError(
            "||x-p(x)|| L has eigenvalue 1: x sits at a center of curvature"
        )
    resolvent = np.linalg.solve(A, np.eye(m))
    Dp = Q @ resolvent @ Q.T
    return 0.5 * (Dp + Dp.T) if d == 1 else Dp


def dp_fd(
    M: ManifoldSpec,
    x,
    h: float | None = None,
    opts: ProjectOptions = DEFAULT_OPTS,
    res=None,
) -> np.ndarray:
    """Central differences of the projection feet; the independent oracle.

    Probes must stay in the basin of the foot: a probe foot drifting by
    more than a tenth of the offset distance aborts with FootJumpError.
    """
    x = np.asarray(x, dtype=float)
    if res is None:
        res = project(M, x, opts)
    if res.multiplicity is not Multiplicity.UNIQUE:
        raise PreconditionError("dp_fd needs a unique projection")
    foot = res.foot
    dist = res.global_distance
    d = x.size
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
    probes = np.repeat(x[None, :], 2 * d, axis=0)
    for i in range(d):
        probes[2 * i, i] += h
        probes[2 * i + 1, i] -= h
    pb = project_batch(M, probes, opts)
    jump_tol = max(0.1 * dist, 1e3 * h)
    drift = np.linalg.norm(pb.foot - foot[None, :], axis=-1)
    if np.any(pb.mult_code != 1) or np.any(drift > jump_tol):
        raise FootJumpError(f"a probe at step {h} left the projection basin of {foot}")
    cols = [(pb.foot[2 * i] - pb.foot[2 * i + 1]) / (2.0 * h) for i in range(d)]
    return np.stack(cols, axis=1)


def grad_delta_squared(M: ManifoldSpec, x, opts: ProjectOptions = DEFAULT_OPTS) -> np.ndarray:
    """Gradient of the squared distance: 2 (x - p(x))."""
    x = np.asarray(x, dtype=float)
    res = project(M, x, opts)
    if res.multiplicity is not Multiplicity.UNIQUE:
        raise PreconditionError("grad_delta_squared needs a unique projection")
    return 2.0 * (x - res.foot)


def dp_norm_bound(
    M: ManifoldSpec, x, eps0: float, opts: ProjectOptions = DEFAULT_OPTS, res=None, formula=None
) -> float:
    """Neumann bound (1 - ||x-p(x)||/eps0)^{-1} for the operator norm of Dp.

    eps0 must not exceed the reach; the computed operator norm is asserted
    against the bound and a violation raises BoundViolationError.
    """
    if eps0 <= 0:
        raise PreconditionError("eps0 must be positive")
    x = np.asarray(x, dtype=float)
    if res is None:
        res = project(M, x, opts)
    dist = res.global_distance
    if dist >= eps0:
        raise OutsideTubeError(f"||x - p(x)|| = {dist} is not below eps0 = {eps0}")
    bound = 1.0 / (1.0 - dist / eps0)
    if formula is None:
        formula = dp_formula(M, x, opts, res=res)
    op_norm = float(np.linalg.norm(formula, 2))
    if op_norm > bound + 1e-8:
        raise BoundViolationError(
            f"||Dp|| = {op_norm} exceeds the Neumann bound {bound}"
        )
    return bound


def dp_report(
    M: ManifoldSpec,
    x,
    eps0: float | None = None,
    h: float | None = None,
    opts: ProjectOptions = DEFAULT_OPTS,
) -> DpReport:
    """Formula and finite-difference derivative side by side."""
    x = np.asarray(x, dtype=float)
    res = project(M, x, opts)
    formula = dp_formula(M, x, opts, res=res)
    fd = dp_fd(M, x, h=h, opts=opts, res=res)
    rel = float(np.linalg.norm(formula - fd) / (1.0 + np.linalg.norm(fd)))
    bound: float | Unbounded
    if eps0 is None:
        from .utils import UNBOUNDED

        bound = UNBOUNDED
    else:
        bound = dp_norm_bound(M, x, eps0, opts, res=res, formula=formula)
    return DpReport(
        x=x,
        foot=res.foot,
        formula_matrix=formula,
        fd_matrix=fd,
        rel_error=rel,
        norm_bound=bound,
    )
