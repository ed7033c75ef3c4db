"""Shape operator, principal curvatures, radius and centers of curvature.

The operator -P_T Dn at a foot is computed two ways: analytically from the
chart's second derivatives (second fundamental form pulled into the
orthonormal tangent frame), and by differencing an explicitly constructed
unit normal field.  Both express the matrix in the same Gram-Schmidt
tangent frame so they are comparable entry by entry.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NotC2Error, PreconditionError
from .manifolds import ManifoldSpec, NormalRay, _qr_frame, check_rank
from .utils import UNBOUNDED, Unbounded

log = logging.getLogger(__name__)

SINGULAR = "singular"
REGULAR = "regular"

_POS_EIG_TOL = 1e-12


@dataclass
class ShapeOperatorReport:
    """Shape operator at a normal ray, in orthonormal tangent coordinates."""

    ray: NormalRay
    matrix: np.ndarray  # (m, m), symmetrized
    eigenvalues: np.ndarray  # sorted descending
    rho: float | Unbounded  # radius of curvature, 1/max(0, lambda_1)
    centers: list  # xi + v / lambda for every positive eigenvalue
    asymmetry: float  # ||raw - raw^T||_F before symmetrization

    def to_dict(self) -> dict:
        return {
            "foot": [float(v) for v in self.ray.foot],
            "direction": [float(v) for v in self.ray.direction],
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "rho": "inf" if isinstance(self.rho, Unbounded) else float(self.rho),
            "centers": [[float(v) for v in c] for c in self.centers],
            "asymmetry": self.asymmetry,
        }


def _frame_and_derivs(M: ManifoldSpec, ray: NormalRay):
    chart = M.charts[ray.chart_index]
    y = np.asarray(ray.chart_coords, dtype=float).reshape(1, chart.param_dim)
    if chart.hessian is None:
        raise NotC2Error("shape operator needs second chart derivatives")
    v, J, H = chart.evaluate(y, order=2)
    J, H = J[0], H[0]
    check_rank(J)
    Q, R = _qr_frame(J)
    return chart, Q, R, H


def shape_operator(M: ManifoldSpec, ray: NormalRay) -> ShapeOperatorReport:
    """Analytic shape operator L_{xi,v} from the chart's Hessian.

    With B_ij = <d2 psi / dy_i dy_j, v> and Dpsi = Q R (Gram-Schmidt), the
    matrix in the orthonormal frame Q is R^-T B R^-1; it is symmetrized
    after the residual asymmetry is measured.
    """
    chart, Q, R, H = _frame_and_derivs(M, ray)
    m = chart.param_dim
    B = np.einsum("dij,d->ij", H, ray.direction)
    Rinv = np.linalg.solve(R, np.eye(m))
    raw = Rinv.T @ B @ Rinv
    asym = float(np.linalg.norm(raw - raw.T))
    if asym > 1e-8:
        log.warning("shape operator asymmetry %.3e at %s", asym, ray.foot)
    S = 0.5 * (raw + raw.T)
    eig = np.linalg.eigvalsh(S)[::-1].copy()
    lam_scale = 1.0 + float(np.abs(eig).max(initial=0.0))
    positive = eig[eig > _POS_EIG_TOL * lam_scale]
    rho: float | Unbounded
    rho = UNBOUNDED if positive.size == 0 else 1.0 / float(positive[0])
    centers = [ray.foot + ray.direction / lam for lam in positive]
    return ShapeOperatorReport(
        ray=ray, matrix=S, eigenvalues=eig, rho=rho, centers=centers, asymmetry=asym
    )


def shape_operator_fd_oracle(M: ManifoldSpec, ray: NormalRay, h: float | None = None) -> np.ndarray:
    """-P_T times finite differences of a constructed unit normal field.

    The field n(psi(y)) = normalize(v - P_T(y) v) is smooth near the foot
    and equals v there; differencing it along the tangent frame directions
    gives an independent check of ``shape_operator``.  The raw (possibly
    slightly asymmetric) matrix is returned.
    """
    chart, Q, R, _ = _frame_and_derivs(M, ray)
    m = chart.param_dim
    y0 = np.asarray(ray.chart_coords, dtype=float)
    v = ray.direction
    if h is None:
        h = float(np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.linalg.norm(y0)))

    def unit_normal(y):
        _, Jy = chart.evaluate(y.reshape(1, m), order=1, domain_tol=4.0 * h)
        Qy, _ = _qr_frame(Jy[0])
        r = v - Qy @ (Qy.T @ v)
        nrm = np.linalg.norm(r)
        if nrm < 1e-8:
            raise PreconditionError("normal field degenerates within the step")
        return r / nrm

    # chart directions mapping to the orthonormal frame: Dpsi a_j = q_j
    A = np.linalg.solve(R, np.eye(m))
    L = np.zeros((m, m))
    for j in range(m):
        a = A[:, j]
        n_plus = unit_normal(y0 + h * a)
        n_minus = unit_normal(y0 - h * a)
        dn = (n_plus - n_minus) / (2.0 * h)
        L[:, j] = -(Q.T @ dn)
    return L


def endpoint_singularity_check(M: ManifoldSpec, ray: NormalRay, r: float) -> str:
    """Whether xi + r v is a center of curvature (endpoint map singular)."""
    if r <= 0:
        raise PreconditionError("r must be positive")
    rep = shape_operator(M, ray)
    inv_r = 1.0 / float(r)
    for lam in rep.eigenvalues:
        if lam > 0 and abs(inv_r - lam) <= 1e-6 * inv_r:
            return SINGULAR
    return REGULAR
