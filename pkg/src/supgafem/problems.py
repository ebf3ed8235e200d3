"""Benchmark problem registry: layer, L-shape, and consistency cases.

Every entry returns a fully populated ProblemSpec together with its initial
mesh.  Initial meshes are built from unit squares cut into four congruent
triangles by both diagonals (16 triangles on the unit square, 12 on the
L-shape), with the longest edge as refinement edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, assign_refinement_edges
from .problem import ExactSolution, ProblemSpec, constant_field, constant_scalar

BENCHMARKS = ("smooth_layer", "lshape_singular", "lshape_practical",
              "consistency_linear", "consistency_quadratic")


def _criss_cross_mesh(squares, size, boundary_label):
    """Union of axis-aligned squares, each cut into 4 congruent triangles by
    both diagonals (newest vertex at the center, square side as refinement
    edge).  ``squares`` lists lower-left corners, ``boundary_label(mid)`` maps
    a boundary-edge midpoint to "D"/"N"."""
    scale = round(4.0 / size)
    vindex = {}
    vertices = []

    def vid(x, y):
        key = (round(x * scale), round(y * scale))
        if key not in vindex:
            vindex[key] = len(vertices)
            vertices.append((x, y))
        return vindex[key]

    elements = []
    edge_use = {}
    for (x0, y0) in squares:
        c = vid(x0 + size / 2, y0 + size / 2)
        corners = [vid(x0, y0), vid(x0 + size, y0),
                   vid(x0 + size, y0 + size), vid(x0, y0 + size)]
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            elements.append((c, a, b))
            key = tuple(sorted((a, b)))
            edge_use[key] = edge_use.get(key, 0) + 1
    vertices = np.array(vertices, dtype=float)
    elements = np.array(elements, dtype=np.int64)
    bedges = []
    blabels = []
    for (a, b), count in sorted(edge_use.items()):
        if count == 1:
            mid = 0.5 * (vertices[a] + vertices[b])
            bedges.append((a, b))
            blabels.append(boundary_label(mid))
    elements = assign_refinement_edges(vertices, elements)
    return Mesh(vertices, elements, np.array(bedges), blabels)


def _square_mesh_16(boundary_label):
    squares = [(x, y) for x in (0.0, 0.5) for y in (0.0, 0.5)]
    return _criss_cross_mesh(squares, 0.5, boundary_label)


def _lshape_mesh_12(boundary_label):
    return _criss_cross_mesh([(-1.0, -1.0), (-1.0, 0.0), (0.0, 0.0)], 1.0,
                             boundary_label)


def _smooth_layer():
    eps = 1e-4
    k = 2.0 / np.sqrt(eps)

    def parts(x):
        x1, x2 = x[:, 0], x[:, 1]
        bub = 16.0 * x1 * (1 - x1) * x2 * (1 - x2)
        bx = 16.0 * (1 - 2 * x1) * x2 * (1 - x2)
        by = 16.0 * x1 * (1 - x1) * (1 - 2 * x2)
        bxx = -32.0 * x2 * (1 - x2)
        byy = -32.0 * x1 * (1 - x1)
        s = 0.0625 - (x1 - 0.5) ** 2 - (x2 - 0.5) ** 2
        sx = -2.0 * (x1 - 0.5)
        sy = -2.0 * (x2 - 0.5)
        den = 1.0 + (k * s) ** 2
        A = 0.5 + np.arctan(k * s) / np.pi
        Ax = k * sx / (np.pi * den)
        Ay = k * sy / (np.pi * den)
        Axx = k * (-2.0 * den - 2.0 * k**2 * s * sx**2) / (np.pi * den**2)
        Ayy = k * (-2.0 * den - 2.0 * k**2 * s * sy**2) / (np.pi * den**2)
        return bub, bx, by, bxx, byy, A, Ax, Ay, Axx, Ayy

    def u(x):
        x = np.atleast_2d(x)
        bub, _, _, _, _, A, _, _, _, _ = parts(x)
        return bub * A

    def grad(x):
        x = np.atleast_2d(x)
        bub, bx, by, _, _, A, Ax, Ay, _, _ = parts(x)
        return np.column_stack([bx * A + bub * Ax, by * A + bub * Ay])

    def laplace(x):
        bub, bx, by, bxx, byy, A, Ax, Ay, Axx, Ayy = parts(x)
        return (bxx + byy) * A + 2 * (bx * Ax + by * Ay) + bub * (Axx + Ayy)

    def f(x):
        x = np.atleast_2d(x)
        g = grad(x)
        return -eps * laplace(x) + 2.0 * g[:, 0] + 3.0 * g[:, 1] + 2.0 * u(x)

    problem = ProblemSpec(
        eps=eps,
        alpha=constant_field(2.0, 3.0),
        div_alpha=constant_scalar(0.0),
        beta=constant_scalar(2.0),
        gamma=2.0,
        c_beta=1.0,
        f=f,
        dirichlet=constant_scalar(0.0),
        exact=ExactSolution(u=u, grad=grad),
        alpha_max=float(np.hypot(2.0, 3.0)),
    )
    mesh = _square_mesh_16(lambda mid: "D")
    return problem, mesh


def _corner_u(x):
    x = np.atleast_2d(x)
    r = np.hypot(x[:, 0], x[:, 1])
    phi = np.arctan2(x[:, 1], x[:, 0])
    phi = np.where(phi < 0, phi + 2 * np.pi, phi)
    return r ** (2.0 / 3.0) * np.sin(2.0 * phi / 3.0)


def _corner_grad(x):
    x = np.atleast_2d(x)
    r = np.hypot(x[:, 0], x[:, 1])
    phi = np.arctan2(x[:, 1], x[:, 0])
    phi = np.where(phi < 0, phi + 2 * np.pi, phi)
    with np.errstate(divide="ignore"):
        scale = (2.0 / 3.0) * r ** (-1.0 / 3.0)
    return np.column_stack([-scale * np.sin(phi / 3.0), scale * np.cos(phi / 3.0)])


def _lshape_singular():
    eps = 1e-3

    def f(x):
        g = _corner_grad(np.atleast_2d(x))
        return 2.0 * g[:, 0] + 3.0 * g[:, 1] + 2.0 * _corner_u(x)

    def g_neumann(x, n):
        return eps * np.sum(_corner_grad(np.atleast_2d(x)) * np.atleast_2d(n), axis=1)

    def label(mid):
        on_top = abs(mid[1] - 1.0) < 1e-12
        on_right = abs(mid[0] - 1.0) < 1e-12 and mid[1] > 0
        return "N" if (on_top or on_right) else "D"

    problem = ProblemSpec(
        eps=eps,
        alpha=constant_field(2.0, 3.0),
        div_alpha=constant_scalar(0.0),
        beta=constant_scalar(2.0),
        gamma=2.0,
        c_beta=1.0,
        f=f,
        dirichlet=_corner_u,
        g=g_neumann,
        exact=ExactSolution(u=_corner_u, grad=_corner_grad),
        alpha_max=float(np.hypot(2.0, 3.0)),
    )
    return problem, _lshape_mesh_12(label)


def _lshape_practical():
    eps = 1e-3

    def f(x):
        x = np.atleast_2d(x)
        inside = ((x[:, 0] >= -0.7) & (x[:, 0] <= -0.3)
                  & (x[:, 1] >= -0.7) & (x[:, 1] <= -0.3))
        return np.where(inside, 5.0, 0.0)

    def g_neumann(x, n):
        return np.full(len(np.atleast_2d(x)), 1e-3)

    def label(mid):
        on_slit = abs(mid[0]) < 1e-12 and mid[1] < 0
        on_right = abs(mid[0] - 1.0) < 1e-12 and mid[1] > 0
        on_top_right = abs(mid[1] - 1.0) < 1e-12 and mid[0] > 0
        return "N" if (on_slit or on_right or on_top_right) else "D"

    problem = ProblemSpec(
        eps=eps,
        alpha=constant_field(3.0, 2.0),
        div_alpha=constant_scalar(0.0),
        beta=constant_scalar(1.0),
        gamma=1.0,
        c_beta=1.0,
        f=f,
        dirichlet=constant_scalar(0.0),
        g=g_neumann,
        alpha_max=float(np.hypot(3.0, 2.0)),
    )
    return problem, _lshape_mesh_12(label)


def _consistency(kind):
    if kind == "linear":
        def u(x):
            x = np.atleast_2d(x)
            return x[:, 0] + x[:, 1]

        def grad(x):
            x = np.atleast_2d(x)
            return np.column_stack([np.ones(len(x)), np.ones(len(x))])

        def f(x):
            x = np.atleast_2d(x)
            return 2.0 + x[:, 0] + x[:, 1]
    else:
        def u(x):
            x = np.atleast_2d(x)
            return x[:, 0] * x[:, 1]

        def grad(x):
            x = np.atleast_2d(x)
            return np.column_stack([x[:, 1], x[:, 0]])

        def f(x):
            x = np.atleast_2d(x)
            return x[:, 1] + x[:, 0] + x[:, 0] * x[:, 1]

    problem = ProblemSpec(
        eps=1.0,
        alpha=constant_field(1.0, 1.0),
        div_alpha=constant_scalar(0.0),
        beta=constant_scalar(1.0),
        gamma=1.0,
        c_beta=1.0,
        f=f,
        dirichlet=u,
        exact=ExactSolution(u=u, grad=grad),
        alpha_max=float(np.sqrt(2.0)),
    )
    return problem, _square_mesh_16(lambda mid: "D")


def build(benchmark_id: str):
    """ProblemSpec and initial mesh for a benchmark id."""
    if benchmark_id == "smooth_layer":
        return _smooth_layer()
    if benchmark_id == "lshape_singular":
        return _lshape_singular()
    if benchmark_id == "lshape_practical":
        return _lshape_practical()
    if benchmark_id == "consistency_linear":
        return _consistency("linear")
    if benchmark_id == "consistency_quadratic":
        return _consistency("quadratic")
    raise ValueError(f"unknown benchmark id '{benchmark_id}'; "
                     f"choose one of {', '.join(BENCHMARKS)}")


@dataclass
class DataReport:
    max_grad_mismatch: float
    max_f_mismatch: float
    worst_point: np.ndarray
    n_points: int

    @property
    def ok(self) -> bool:
        return self.max_grad_mismatch <= 1.0 and self.max_f_mismatch <= 1.0


def _interior_samples(benchmark_id, rng, n):
    """Random interior points away from layers, corners, and data jumps."""
    pts = []
    while len(pts) < n:
        if benchmark_id in ("smooth_layer", "consistency_linear", "consistency_quadratic"):
            x = rng.random(2) * 0.9 + 0.05
            if benchmark_id == "smooth_layer":
                s = 0.0625 - (x[0] - 0.5) ** 2 - (x[1] - 0.5) ** 2
                if abs(s) < 0.05:
                    continue
        else:
            x = rng.random(2) * 2.0 - 1.0
            if x[0] > -0.05 and x[1] < 0.05:     # slit quadrant plus margin
                continue
            if np.hypot(x[0], x[1]) < 0.25:
                continue
            if np.max(np.abs(x)) > 0.95:
                continue
            if benchmark_id == "lshape_practical":
                if -0.75 < x[0] < -0.25 and -0.75 < x[1] < -0.25:
                    continue
        pts.append(x)
    return np.array(pts)


def verify_data(benchmark_id: str, n_points: int = 100, seed: int = 0,
                rtol: float = 1e-4, atol: float = 1e-7) -> DataReport:
    """Check hand-derived gradient and source against finite differences of u.

    Relative mismatch is |closed - fd| / (rtol*max(|closed|,|fd|) + atol); a
    report with all mismatches <= 1 passes.
    """
    problem, _ = build(benchmark_id)
    if problem.exact is None:
        raise ValueError(f"benchmark '{benchmark_id}' has no exact solution")
    rng = np.random.default_rng(seed)
    pts = _interior_samples(benchmark_id, rng, n_points)
    u = problem.exact.u
    h = 1e-5
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    fd_grad = np.column_stack([
        (u(pts + ex) - u(pts - ex)) / (2 * h),
        (u(pts + ey) - u(pts - ey)) / (2 * h),
    ])
    closed = problem.exact.grad(pts)
    denom = rtol * np.maximum(np.abs(closed), np.abs(fd_grad)) + atol
    grad_mismatch = np.abs(closed - fd_grad) / denom
    worst = int(np.argmax(grad_mismatch.max(axis=1)))

    h2 = 1e-4
    ex2 = np.array([h2, 0.0])
    ey2 = np.array([0.0, h2])
    fd_lap = ((u(pts + ex2) + u(pts - ex2) + u(pts + ey2) + u(pts - ey2)
               - 4 * u(pts)) / h2**2)
    a = problem.alpha(pts)
    fd_f = (-problem.eps * fd_lap + np.sum(a * fd_grad, axis=1)
            + problem.beta(pts) * u(pts))
    closed_f = problem.f(pts)
    denom_f = rtol * np.maximum(np.abs(closed_f), np.abs(fd_f)) + atol
    f_mismatch = np.abs(closed_f - fd_f) / denom_f
    if f_mismatch.max() > grad_mismatch.max():
        worst = int(np.argmax(f_mismatch))
    return DataReport(max_grad_mismatch=float(grad_mismatch.max()),
                      max_f_mismatch=float(f_mismatch.max()),
                      worst_point=pts[worst], n_points=n_points)
