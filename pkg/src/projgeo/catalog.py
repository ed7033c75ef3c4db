"""Built-in manifolds: reference shapes used by tests, demos, and manifests.

Most catalog charts are generated as expression charts so their derivatives
come from the exact jet evaluator.  The Lipschitz-tangent counterexample
graph needs piecewise formulas and is written out by hand; see
``lip1_example``.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatchError, ManifestError
from .expressions import eval_jet2, eval_value, eval_value_grad, max_param_index, parse
from .manifolds import Chart, ManifoldSpec, chart_from_callable


def expression_chart(components, m, lo, hi, **kwargs) -> Chart:
    """Chart whose d components are expressions in y0..y{m-1}."""
    components = tuple(str(c) for c in components)
    asts = tuple(parse(src) for src in components)
    d = len(asts)
    if d <= m:
        raise DimensionMismatchError("need more components than parameters")
    for src, ast in zip(components, asts):
        if max_param_index(ast) >= m:
            raise ManifestError(f"expression {src!r} uses parameters beyond y{m - 1}")

    def value(y):
        y = np.asarray(y, dtype=float)
        return np.stack([np.broadcast_to(eval_value(a, y), y.shape[:-1]) for a in asts], axis=-1)

    def jacobian(y):
        y = np.asarray(y, dtype=float)
        grads = [eval_value_grad(a, y)[1] for a in asts]
        return np.stack(grads, axis=-2)

    def hessian(y):
        y = np.asarray(y, dtype=float)
        hs = [eval_jet2(a, y).hess for a in asts]
        return np.stack(hs, axis=-3)

    def fused(y):
        y = np.asarray(y, dtype=float)
        jets = [eval_jet2(a, y) for a in asts]
        v = np.stack([np.broadcast_to(j.value, y.shape[:-1]) for j in jets], axis=-1)
        J = np.stack([j.grad for j in jets], axis=-2)
        H = np.stack([j.hess for j in jets], axis=-3)
        return v, J, H

    return Chart(
        param_dim=m,
        ambient_dim=d,
        lo=lo,
        hi=hi,
        value=value,
        jacobian=jacobian,
        hessian=hessian,
        fused=fused,
        expr_components=components,
        **kwargs,
    )


def _c(v) -> str:
    """Embed a numeric constant into expression source."""
    return f"({float(v)!r})"


# ---------------------------------------------------------------------------
# smooth closed shapes


def circle(radius: float = 1.0, center=(0.0, 0.0)) -> ManifoldSpec:
    cx, cy = (float(c) for c in center)
    chart = expression_chart(
        [f"{_c(cx)} + {_c(radius)}*cos(y0)", f"{_c(cy)} + {_c(radius)}*sin(y0)"],
        m=1,
        lo=[0.0],
        hi=[2.0 * math.pi],
    )
    return ManifoldSpec(charts=(chart,), name="circle", smoothness_claim=3)


def unit_circle() -> ManifoldSpec:
    return circle(1.0)


def sphere(radius: float = 1.0, d: int = 3) -> ManifoldSpec:
    """Round sphere of the given radius in R^d (hyperspherical chart)."""
    if d < 3:
        raise DimensionMismatchError("sphere(R, d) requires d >= 3; use circle for d=2")
    m = d - 1
    # pole on the last axis: x_d = R cos(y0); each next component peels a sine
    comps = []
    for i in range(d - 1, -1, -1):
        depth = d - 1 - i  # number of leading sine factors
        factors = [_c(radius)] + [f"sin(y{j})" for j in range(depth)]
        if i != 0:
            factors.append(f"cos(y{depth})")
        comps.append("*".join(factors))
    comps = comps[::-1]
    lo = [0.0] * m
    hi = [math.pi] * (m - 1) + [2.0 * math.pi]
    chart = expression_chart(comps, m=m, lo=lo, hi=hi)
    return ManifoldSpec(charts=(chart,), name=f"sphere(R={radius},d={d})", smoothness_claim=3)


def torus(R: float = 2.0, r: float = 0.5) -> ManifoldSpec:
    """Torus of revolution about the z axis; R is the tube-center radius."""
    if not 0 < r < R:
        raise DimensionMismatchError("torus needs 0 < r < R")
    tube = f"({_c(R)} + {_c(r)}*cos(y1))"
    chart = expression_chart(
        [f"{tube}*cos(y0)", f"{tube}*sin(y0)", f"{_c(r)}*sin(y1)"],
        m=2,
        lo=[0.0, 0.0],
        hi=[2.0 * math.pi, 2.0 * math.pi],
    )
    return ManifoldSpec(charts=(chart,), name=f"torus(R={R},r={r})", smoothness_claim=3)


def helix(turns: float = 2.0) -> ManifoldSpec:
    T = 2.0 * math.pi * float(turns)
    chart = expression_chart(
        ["cos(y0)", "sin(y0)", "y0"],
        m=1,
        lo=[-T],
        hi=[T],
        truncated_lo=(True,),
        truncated_hi=(True,),
    )
    return ManifoldSpec(charts=(chart,), name="helix", smoothness_claim=3)


# ---------------------------------------------------------------------------
# flat pieces


def _affine_chart(origin, directions, half_extent: float) -> Chart:
    origin = np.asarray(origin, dtype=float)
    D = np.atleast_2d(np.asarray(directions, dtype=float))  # (m, d)
    m, d = D.shape
    comps = []
    for i in range(d):
        terms = [_c(origin[i])] + [f"{_c(D[j, i])}*y{j}" for j in range(m)]
        comps.append(" + ".join(terms))
    return expression_chart(
        comps,
        m=m,
        lo=[-half_extent] * m,
        hi=[half_extent] * m,
        truncated_lo=(True,) * m,
        truncated_hi=(True,) * m,
    )


def affine_subspace(origin, directions, half_extent: float = 10.0) -> ManifoldSpec:
    chart = _affine_chart(origin, directions, half_extent)
    return ManifoldSpec(charts=(chart,), name="affine", smoothness_claim=3)


def line(origin=(0.0, 0.0), direction=(1.0, 0.0), half_extent: float = 10.0) -> ManifoldSpec:
    spec = affine_subspace(origin, [direction], half_extent)
    return ManifoldSpec(charts=spec.charts, name="line", smoothness_claim=3)


def parallel_lines(offset: float = 1.0, half_extent: float = 10.0) -> ManifoldSpec:
    """Two horizontal lines y = +-offset; the classic mid-line skeleton."""
    c1 = _affine_chart((0.0, offset), [(1.0, 0.0)], half_extent)
    c2 = _affine_chart((0.0, -offset), [(1.0, 0.0)], half_extent)
    return ManifoldSpec(charts=(c1, c2), name="parallel_lines", smoothness_claim=3)


# ---------------------------------------------------------------------------
# graphs of curves


def parabola(half_extent: float = 8.0) -> ManifoldSpec:
    chart = expression_chart(
        ["y0", "y0^2"],
        m=1,
        lo=[-half_extent],
        hi=[half_extent],
        truncated_lo=(True,),
        truncated_hi=(True,),
    )
    return ManifoldSpec(charts=(chart,), name="parabola", smoothness_claim=3)


def half_parabola(hi: float = 8.0) -> ManifoldSpec:
    """The set {(x, x^2) : x >= 0}; its endpoint (0,0) is a true boundary."""
    chart = expression_chart(
        ["y0", "y0^2"],
        m=1,
        lo=[0.0],
        hi=[hi],
        boundary_lo=(True,),
        truncated_hi=(True,),
    )
    return ManifoldSpec(charts=(chart,), name="half_parabola", smoothness_claim=2)


def graph_curve(f, df=None, d2f=None, lo: float = -5.0, hi: float = 5.0) -> ManifoldSpec:
    """Graph {(t, f(t))} of a scalar numpy-vectorized callable.

    Analytic derivatives are used when supplied, otherwise central
    differences.
    """

    def value(y):
        t = np.asarray(y, dtype=float)[..., 0]
        return np.stack([t, f(t)], axis=-1)

    jac = hess = None
    if df is not None:

        def jac(y):
            t = np.asarray(y, dtype=float)[..., 0]
            return np.stack([np.ones_like(t), df(t)], axis=-1)[..., None]

    if d2f is not None:

        def hess(y):
            t = np.asarray(y, dtype=float)[..., 0]
            return np.stack([np.zeros_like(t), d2f(t)], axis=-1)[..., None, None]

    chart = chart_from_callable(
        value,
        m=1,
        d=2,
        lo=[lo],
        hi=[hi],
        jacobian=jac,
        hessian=hess,
        truncated_lo=(True,),
        truncated_hi=(True,),
    )
    return ManifoldSpec(charts=(chart,), name="graph_curve", smoothness_claim=2)


# ---------------------------------------------------------------------------
# the Lipschitz-tangent counterexample graph

_LOG3 = math.log(3.0)


def lip1_breakpoint(j: int) -> float:
    """Right endpoint 2*3^-j of the j-th oscillation interval."""
    return 2.0 * 3.0 ** (-j)


def lip1_height(x, k_max: int = 12):
    """Graph height of the counterexample; vectorized."""
    return _lip1_fgh(np.asarray(x, dtype=float), k_max)[0]


def lip1_slope(x, k_max: int = 12):
    return _lip1_fgh(np.asarray(x, dtype=float), k_max)[1]


def _lip1_fgh(x: np.ndarray, k_max: int):
    """Piecewise-quadratic height, slope, and curvature of the graph.

    On (2*3^-(j+1), 2*3^-j] the height is sigma_j ((x - 3^-j)^2 - 3^-2j / 5)
    with sigma_j = +1 for even j (valleys at 3^-j) and -1 for odd j (peaks).
    Oscillations are truncated below 2*3^-(2*k_max+2); the height is flat
    (-1/5) for x > 1 and 0 for x <= 0.
    """
    jmax = 2 * k_max + 1
    x_min = 2.0 * 3.0 ** (-(jmax + 1))
    f = np.zeros_like(x)
    fp = np.zeros_like(x)
    fpp = np.zeros_like(x)
    top = x > 1.0
    f[top] = -0.2
    mid = (x > x_min) & ~top
    if np.any(mid):
        xm = x[mid]
        j = np.floor(np.log(2.0 / xm) / _LOG3).astype(int)
        j = np.clip(j, 0, jmax)
        c = np.power(3.0, -j.astype(float))
        sigma = np.where(j % 2 == 0, 1.0, -1.0)
        t = xm - c
        f[mid] = sigma * (t * t - c * c / 5.0)
        fp[mid] = 2.0 * sigma * t
        fpp[mid] = 2.0 * sigma
    return f, fp, fpp


def lip1_example(k_max: int = 12, half_extent: float = 2.0) -> ManifoldSpec:
    """Graph manifold whose frontier function is discontinuous at the origin.

    The tangent map is Lipschitz but the graph oscillates between parabolic
    valleys of curvature radius 1/2 (accumulating at 0) and a flat left
    half-line, so the frontier function jumps from >= 2 to <= 1/2.
    """

    def value(y):
        t = np.asarray(y, dtype=float)[..., 0]
        return np.stack([t, _lip1_fgh(t, k_max)[0]], axis=-1)

    def jacobian(y):
        t = np.asarray(y, dtype=float)[..., 0]
        return np.stack([np.ones_like(t), _lip1_fgh(t, k_max)[1]], axis=-1)[..., None]

    def hessian(y):
        t = np.asarray(y, dtype=float)[..., 0]
        return np.stack([np.zeros_like(t), _lip1_fgh(t, k_max)[2]], axis=-1)[..., None, None]

    def fused(y):
        t = np.asarray(y, dtype=float)[..., 0]
        f, fp, fpp = _lip1_fgh(t, k_max)
        one, zero = np.ones_like(t), np.zeros_like(t)
        v = np.stack([t, f], axis=-1)
        J = np.stack([one, fp], axis=-1)[..., None]
        H = np.stack([zero, fpp], axis=-1)[..., None, None]
        return v, J, H

    chart = Chart(
        param_dim=1,
        ambient_dim=2,
        lo=[-half_extent],
        hi=[half_extent],
        value=value,
        jacobian=jacobian,
        hessian=hessian,
        fused=fused,
        truncated_lo=(True,),
        truncated_hi=(True,),
        builtin_payload={"key": "lip1_graph", "params": {"k_max": k_max, "half_extent": half_extent}},
    )
    return ManifoldSpec(charts=(chart,), name="lip1_example", smoothness_claim=1)


def quarter_circle_with_rays(extent: float = 10.0) -> ManifoldSpec:
    """Two half-lines joined C^1 by a quarter circle around (1,1).

    Lipschitz tangents but not C^2; its frontier function is continuous.
    """
    ray_x = expression_chart(
        ["(1.0) + y0", "0"],
        m=1,
        lo=[0.0],
        hi=[extent],
        truncated_hi=(True,),
    )
    arc = expression_chart(
        ["(1.0) + cos(y0)", "(1.0) + sin(y0)"],
        m=1,
        lo=[math.pi],
        hi=[1.5 * math.pi],
    )
    ray_y = expression_chart(
        ["0", "(1.0) + y0"],
        m=1,
        lo=[0.0],
        hi=[extent],
        truncated_hi=(True,),
    )
    return ManifoldSpec(
        charts=(ray_x, arc, ray_y), name="quarter_circle_with_rays", smoothness_claim=1
    )


# ---------------------------------------------------------------------------
# degenerate point "manifolds" (Voronoi illustration)


def _point_chart(p: np.ndarray, d: int) -> Chart:
    p = np.asarray(p, dtype=float).reshape(d)

    def value(y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(p, y.shape[:-1] + (d,)).copy()

    def jacobian(y):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape[:-1] + (d, 0))

    def hessian(y):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape[:-1] + (d, 0, 0))

    return Chart(
        param_dim=0,
        ambient_dim=d,
        lo=np.zeros(0),
        hi=np.zeros(0),
        value=value,
        jacobian=jacobian,
        hessian=hessian,
        builtin_payload={"key": "point", "params": {"coords": [float(v) for v in p]}},
    )


def finite_point_set(points) -> ManifoldSpec:
    """Finite site set as an m=0 manifold; projection is exhaustive nearest."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    charts = tuple(_point_chart(p, pts.shape[1]) for p in pts)
    return ManifoldSpec(charts=charts, name="finite_point_set", smoothness_claim=1)


# ---------------------------------------------------------------------------
# registry used by manifests

BUILTIN_MANIFOLDS = {
    "unit_circle": unit_circle,
    "circle": circle,
    "sphere": sphere,
    "torus": torus,
    "helix": helix,
    "line": line,
    "affine": affine_subspace,
    "parallel_lines": parallel_lines,
    "parabola": parabola,
    "half_parabola": half_parabola,
    "lip1_example": lip1_example,
    "quarter_circle_with_rays": quarter_circle_with_rays,
}


def builtin_chart(key: str, params: dict, domain=None) -> Chart:
    """Chart-level builtin payloads accepted in manifests."""
    params = dict(params or {})
    if key == "lip1_graph":
        return lip1_example(**params).charts[0]
    if key == "point":
        coords = params["coords"]
        return _point_chart(np.asarray(coords, dtype=float), len(coords))
    if key in BUILTIN_MANIFOLDS:
        spec = BUILTIN_MANIFOLDS[key](**params)
        if len(spec.charts) != 1:
            raise ManifestError(
                f"builtin {key!r} has several charts; list it at top level instead"
            )
        return spec.charts[0]
    raise ManifestError(f"unknown builtin chart key {key!r}")
