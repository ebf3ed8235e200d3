"""Problem data container and sampled validation of its admissibility conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import DIRICHLET, Mesh
from .quadrature import triangle_rule


class ProblemDataError(ValueError):
    """Raised when sampled problem data violate an admissibility condition."""


@dataclass(frozen=True)
class ExactSolution:
    u: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of the convection-diffusion model problem.

    All callables are vectorized over (n, 2) point arrays; ``alpha`` returns
    (n, 2), the Neumann datum ``g`` takes points plus the unit outward normal.
    ``alpha_max`` is the global sup of |alpha| used by the stabilization
    parameter; if None it is estimated from quadrature samples.
    """

    eps: float
    alpha: Callable[[np.ndarray], np.ndarray]
    div_alpha: Callable[[np.ndarray], np.ndarray]
    beta: Callable[[np.ndarray], np.ndarray]
    gamma: float
    c_beta: float
    f: Callable[[np.ndarray], np.ndarray]
    dirichlet: Callable[[np.ndarray], np.ndarray]
    g: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    exact: Optional[ExactSolution] = None
    alpha_max: Optional[float] = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ProblemDataError("diffusion coefficient must be positive")
        if self.gamma < 0:
            raise ProblemDataError("gamma must be nonnegative")


def constant_field(vx: float, vy: float) -> Callable[[np.ndarray], np.ndarray]:
    def field(x):
        x = np.atleast_2d(x)
        out = np.empty_like(x)
        out[:, 0] = vx
        out[:, 1] = vy
        return out
    return field


def constant_scalar(v: float) -> Callable[[np.ndarray], np.ndarray]:
    def fn(x):
        return np.full(len(np.atleast_2d(x)), float(v))
    return fn


def global_alpha_max(problem: ProblemSpec, mesh: Mesh, degree: int = 4) -> float:
    if problem.alpha_max is not None:
        return float(problem.alpha_max)
    rule = triangle_rule(degree)
    p = mesh.vertices[mesh.elements]
    sup = 0.0
    for q in rule.points:
        pts = (p[:, 0] * (1 - q[0] - q[1]) + p[:, 1] * q[0] + p[:, 2] * q[1])
        sup = max(sup, float(np.max(np.linalg.norm(problem.alpha(pts), axis=1))))
    return sup


def boundary_normals(mesh: Mesh) -> np.ndarray:
    """Unit outward normals of the boundary facets, shape (nb, 2)."""
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    t = b - a
    n = np.column_stack([t[:, 1], -t[:, 0]])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    owner = mesh.edge_elements[mesh.boundary_edge_ids, 0]
    centroid = mesh.vertices[mesh.elements[owner]].mean(axis=1)
    mid = 0.5 * (a + b)
    flip = np.sum(n * (mid - centroid), axis=1) < 0
    n[flip] *= -1
    return n


def validate(problem: ProblemSpec, mesh: Mesh, quad_degree: int = 4) -> None:
    """Check the sampled admissibility conditions; raises ProblemDataError.

    Sampled at triangle quadrature points: -(1/2) div(alpha) + beta >= gamma
    and |beta| <= c_beta * gamma; for gamma = 0 additionally beta = 0 and
    div(alpha) = 0.  Inflow boundary midpoints (alpha·n < 0) must be Dirichlet.
    """
    if not np.any(mesh.boundary_labels == DIRICHLET):
        raise ProblemDataError("Dirichlet boundary must have positive measure")
    rule = triangle_rule(quad_degree)
    p = mesh.vertices[mesh.elements]
    for q in rule.points:
        pts = p[:, 0] * (1 - q[0] - q[1]) + p[:, 1] * q[0] + p[:, 2] * q[1]
        beta = problem.beta(pts)
        diva = problem.div_alpha(pts)
        lhs = -0.5 * diva + beta
        if np.min(lhs) < problem.gamma - 1e-12:
            raise ProblemDataError(
                f"-(1/2) div(alpha) + beta = {np.min(lhs):.6g} < gamma = {problem.gamma}")
        if np.max(np.abs(beta)) > problem.c_beta * problem.gamma + 1e-12:
            raise ProblemDataError("|beta| exceeds c_beta * gamma")
        if problem.gamma == 0 and (np.max(np.abs(beta)) > 1e-12
                                   or np.max(np.abs(diva)) > 1e-12):
            raise ProblemDataError("gamma = 0 requires beta = 0 and div(alpha) = 0")
    mids = 0.5 * (mesh.vertices[mesh.boundary_edges[:, 0]]
                  + mesh.vertices[mesh.boundary_edges[:, 1]])
    normals = boundary_normals(mesh)
    a_dot_n = np.sum(problem.alpha(mids) * normals, axis=1)
    inflow = a_dot_n < -1e-12
    if np.any(inflow & (mesh.boundary_labels != DIRICHLET)):
        raise ProblemDataError("inflow boundary edge is not Dirichlet")
