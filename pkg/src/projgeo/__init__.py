"""Geometry of the nearest-point projection onto submanifolds of R^d.

Computes and empirically verifies: the metric projection and its maximal
open domain, the frontier function along normal rays, reach, shape
operators and curvature radii, the closed-form projection derivative, and
medial-axis skeletons of the complement.
"""

from .catalog import (
    BUILTIN_MANIFOLDS,
    affine_subspace,
    circle,
    expression_chart,
    finite_point_set,
    graph_curve,
    half_parabola,
    helix,
    line,
    lip1_example,
    parabola,
    parallel_lines,
    quarter_circle_with_rays,
    sphere,
    torus,
    unit_circle,
)
from .curvature import ShapeOperatorReport, endpoint_singularity_check, shape_operator, shape_operator_fd_oracle
from .derivative import DpReport, dp_fd, dp_formula, dp_norm_bound, dp_report, grad_delta_squared
from .expressions import Jet2, eval_jet2, eval_value, parse
from .frontier import (
    FrontierEstimate,
    ReachReport,
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
from .manifest import load_manifold, manifold_from_dict, manifold_to_dict, save_manifold
from .manifolds import (
    Chart,
    ManifoldSpec,
    NormalFrame,
    NormalRay,
    TangentFrame,
    endpoint,
    normal_frame,
    normal_ray,
    subspace_distance,
    subspace_distance_report,
    tangent_frame,
)
from .projection import (
    Multiplicity,
    PointClass,
    PointLabel,
    ProjectOptions,
    ProjectionResult,
    brute_force_project,
    classify,
    distance,
    project,
    project_batch,
    ray_through,
)
from .skeleton import (
    EComplementReport,
    HalfSpaceSet,
    MaximalBall,
    SkeletonCloud,
    convex_hull_halfspaces,
    e_complement_check,
    medial_recover,
    medial_recover_batch,
    skeleton_sample,
    sweep_projection,
)
from .utils import UNBOUNDED, Region, Unbounded, is_unbounded

__version__ = "0.1.0"
