"""Assembly of the stabilized convection-diffusion system.

The discrete form is the Galerkin form plus the streamline term
theta_T * int_T (-eps*lap(u) + alpha.grad(u) + beta*u) (alpha.grad(v)),
with the matching right-hand side term theta_T * int_T f (alpha.grad(v)).
The -eps*lap term is exact: reference Hessians are constant and mapped by
the affine Jacobian (identically zero for p=1).

Constrained rows are replaced by identity rows carrying the nodal Dirichlet
values; columns are eliminated into the right-hand side.  The raw
(unconstrained) matrix and load vector are kept for residual checks and
property tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .mesh import NEUMANN, Mesh
from .problem import ProblemSpec, boundary_normals, global_alpha_max, validate
from .quadrature import edge_rule, triangle_rule
from .space import FeSpace, basis_grads, basis_values

_REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class StabilizationConfig:
    """Stabilization-parameter selection.

    mode "section5": theta_T = h_T/(p*|alpha|_sup) in the convection-dominated
    case (Pe_T > 1), h_T^2/(2*eps*p^2) otherwise.  mode "paper_generic":
    delta0*h_T resp. delta1*h_T^2/eps.  With ``clamp`` the result is capped by
    the well-posedness bound (measured inverse constant for p=2); clamp
    defaults to on for paper_generic and off for section5.
    """

    mode: str = "section5"
    delta0: float = 0.5
    delta1: float = 0.5
    clamp: Optional[bool] = None

    def __post_init__(self):
        if self.mode not in ("section5", "paper_generic"):
            raise ValueError("mode must be 'section5' or 'paper_generic'")
        if self.delta0 <= 0 or self.delta1 <= 0:
            raise ValueError("delta0 and delta1 must be positive")

    @property
    def clamp_active(self) -> bool:
        if self.clamp is None:
            return self.mode == "paper_generic"
        return bool(self.clamp)


def _quad_point_fields(problem, mesh, rule, need=("alpha",)):
    """Data fields sampled at all quadrature points, shapes (nq, ne, ...)."""
    p = mesh.vertices[mesh.elements]
    out = {name: [] for name in need}
    for q in rule.points:
        pts = p[:, 0] * (1 - q[0] - q[1]) + p[:, 1] * q[0] + p[:, 2] * q[1]
        if "alpha" in need:
            out["alpha"].append(problem.alpha(pts))
        if "beta" in need:
            out["beta"].append(problem.beta(pts))
    return {k: np.stack(v) for k, v in out.items()}


def alpha_sup_element(problem: ProblemSpec, mesh: Mesh, degree: int = 4) -> np.ndarray:
    """|alpha|_{L^inf(T)} approximated by the max over quadrature points."""
    fields = _quad_point_fields(problem, mesh, triangle_rule(degree), ("alpha",))
    return np.linalg.norm(fields["alpha"], axis=2).max(axis=0)


def peclet(problem: ProblemSpec, mesh: Mesh, T: Optional[int] = None):
    """Local Peclet numbers |alpha|_{L^inf(T)} h_T / (2 eps)."""
    pe = alpha_sup_element(problem, mesh) * mesh.sizes / (2.0 * problem.eps)
    return pe if T is None else float(pe[T])


def _local_stiffness(space: FeSpace) -> np.ndarray:
    rule = triangle_rule(2 * (space.p - 1) if space.p > 1 else 0)
    det = np.abs(space.det_jacobians)
    S = np.zeros((space.mesh.n_elements, space.n_local, space.n_local))
    for q, w in zip(rule.points, rule.weights):
        G = space.physical_grads(q[None, :])[:, 0]
        S += w * det[:, None, None] * np.einsum("eia,eja->eij", G, G)
    return S

def clamp_bound(problem: ProblemSpec, space: FeSpace) -> np.ndarray:
    """Per-element upper bound on theta_T guaranteeing SUPG ellipticity.

    For p=2 the Laplacian inverse-estimate constant is measured exactly per
    element (rank-one generalized eigenvalue problem); for p=1 that branch is
    unbounded since basis Laplacians vanish.
    """
    mesh = space.mesh
    fields = _quad_point_fields(problem, mesh, triangle_rule(4), ("beta",))
    beta_sup = np.abs(fields["beta"]).max(axis=0)
    beta_bound = np.full(mesh.n_elements, np.inf)
    pos = beta_sup > 0
    beta_bound[pos] = problem.gamma / beta_sup[pos] ** 2
    if space.p == 1:
        if problem.gamma > 0:
            return beta_bound
        return np.full(mesh.n_elements, np.inf)
    S = _local_stiffness(space)
    lap = space.laplacians
    Spinv = np.linalg.pinv(S, rcond=1e-10)
    quad_form = np.einsum("ei,eij,ej->e", lap, Spinv, lap)
    area = mesh.areas
    with np.errstate(divide="ignore"):
        lap_bound = np.where(quad_form > 0,
                             1.0 / (problem.eps * area * quad_form), np.inf)
    if problem.gamma > 0:
        return 0.5 * np.minimum(lap_bound, beta_bound)
    return 0.5 * lap_bound


def stabilization_parameters(problem: ProblemSpec, mesh: Mesh, p: int,
                             config: StabilizationConfig,
                             space: Optional[FeSpace] = None) -> np.ndarray:
    """Per-element stabilization parameters theta_T > 0."""
    h = mesh.sizes
    pe = peclet(problem, mesh)
    convective = pe > 1.0
    if config.mode == "section5":
        amax = global_alpha_max(problem, mesh)
        diff = h**2 / (2.0 * problem.eps * p**2)
        if amax > 0:
            theta = np.where(convective, h / (p * amax), diff)
        else:
            theta = diff
    else:
        theta = np.where(convective, config.delta0 * h,
                         config.delta1 * h**2 / problem.eps)
    if config.clamp_active:
        if space is None:
            space = FeSpace(mesh, p)
        theta = np.minimum(theta, clamp_bound(problem, space))
    if not np.all(theta > 0):
        raise ValueError("stabilization parameters must be positive")
    return theta


def stabilization_parameter(problem: ProblemSpec, mesh: Mesh, T: int, p: int,
                            config: StabilizationConfig) -> float:
    return float(stabilization_parameters(problem, mesh, p, config)[T])


@dataclass
class SparseSystem:
    """Constrained linear system plus the raw (unconstrained) operator."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_mask: np.ndarray
    dirichlet_values: np.ndarray
    raw_matrix: sp.csr_matrix
    raw_rhs: np.ndarray
    theta: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]


def _neumann_vector(space: FeSpace, problem: ProblemSpec, degree: int) -> np.ndarray:
    """Load contributions int_{Gamma_N} g v ds, scattered to global DOFs."""
    mesh = space.mesh
    out = np.zeros(space.n_dofs)
    nmask = mesh.boundary_labels == NEUMANN
    if not np.any(nmask):
        return out
    if problem.g is None:
        raise ValueError("mesh has Neumann edges but the problem has no Neumann datum")
    rule = edge_rule(degree)
    normals = boundary_normals(mesh)[nmask]
    eids = mesh.boundary_edge_ids[nmask]
    owners = mesh.edge_elements[eids, 0]
    locs = mesh.edge_local[eids, 0]
    a = mesh.vertices[mesh.boundary_edges[nmask, 0]]
    b = mesh.vertices[mesh.boundary_edges[nmask, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    for k in range(3):
        rows = locs == k
        if not np.any(rows):
            continue
        e = owners[rows]
        r0 = _REF_VERTICES[(k + 1) % 3]
        r1 = _REF_VERTICES[(k + 2) % 3]
        acc = np.zeros((rows.sum(), space.n_local))
        for t, w in zip(rule.points, rule.weights):
            ref = (1 - t) * r0 + t * r1
            N = basis_values(space.p, ref[None, :])[0]
            X = space.physical_points(ref[None, :], elements=e)[:, 0]
            gv = problem.g(X, normals[rows])
            acc += w * gv[:, None] * N[None, :]
        np.add.at(out, space.dof_map[e], lengths[rows, None] * acc)
    return out


def assemble(space: FeSpace, problem: ProblemSpec,
             config: Optional[StabilizationConfig] = None,
             theta=None, quad_degree: Optional[int] = None,
             validate_data: bool = False) -> SparseSystem:
    """Assemble the stabilized system on the given space.

    ``theta`` overrides the per-element stabilization parameters (scalar or
    vector); otherwise they come from ``config`` (default section5 mode).
    ``quad_degree`` raises the quadrature degree used for data terms.
    """
    mesh = space.mesh
    p = space.p
    if validate_data:
        validate(problem, mesh)
    if theta is None:
        config = config or StabilizationConfig()
        theta = stabilization_parameters(problem, mesh, p, config, space=space)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (mesh.n_elements,)).copy()

    main_rule = triangle_rule(2 * p + 2)
    load_degree = max(2 * p + 2, 6) if quad_degree is None else max(quad_degree, 2 * p + 2)
    load_rule = triangle_rule(load_degree)
    edge_degree = 2 * p + 1 if quad_degree is None else max(2 * p + 1, quad_degree)

    nloc = space.n_local
    ne = mesh.n_elements
    det = np.abs(space.det_jacobians)
    invJT = space.inv_jacobians_t
    lap = space.laplacians
    eps = problem.eps

    Nmain = basis_values(p, main_rule.points)
    dNmain = basis_grads(p, main_rule.points)
    A_loc = np.zeros((ne, nloc, nloc))
    for qi, w in enumerate(main_rule.weights):
        X = space.physical_points(main_rule.points[qi][None, :])[:, 0]
        a = problem.alpha(X)
        b = problem.beta(X)
        G = np.einsum("eij,lj->eli", invJT, dNmain[qi])
        conv = np.einsum("eli,ei->el", G, a)
        Nq = Nmain[qi]
        wdet = w * det
        resid = -eps * lap + conv + b[:, None] * Nq[None, :]
        A_loc += wdet[:, None, None] * (
            eps * np.einsum("eia,eja->eij", G, G)
            + Nq[None, :, None] * (conv + b[:, None] * Nq[None, :])[:, None, :]
            + theta[:, None, None] * conv[:, :, None] * resid[:, None, :]
        )

    Nload = basis_values(p, load_rule.points)
    dNload = basis_grads(p, load_rule.points)
    F_loc = np.zeros((ne, nloc))
    for qi, w in enumerate(load_rule.weights):
        X = space.physical_points(load_rule.points[qi][None, :])[:, 0]
        fv = problem.f(X)
        a = problem.alpha(X)
        G = np.einsum("eij,lj->eli", invJT, dNload[qi])
        conv = np.einsum("eli,ei->el", G, a)
        F_loc += (w * det * fv)[:, None] * (Nload[qi][None, :] + theta[:, None] * conv)

    if not (np.all(np.isfinite(A_loc)) and np.all(np.isfinite(F_loc))):
        raise ValueError("assembly produced non-finite entries")

    dofs = space.dof_map
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    vals = A_loc.ravel()
    n = space.n_dofs
    raw = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    raw_rhs = np.zeros(n)
    np.add.at(raw_rhs, dofs.ravel(), F_loc.ravel())
    raw_rhs += _neumann_vector(space, problem, edge_degree)

    free = ~space.dirichlet_mask
    dval = np.zeros(n)
    if len(space.dirichlet_dofs):
        dval[space.dirichlet_dofs] = problem.dirichlet(
            space.dof_coords[space.dirichlet_dofs])
        if not np.all(np.isfinite(dval)):
            raise ValueError("Dirichlet data produced non-finite nodal values")
    rhs = raw_rhs - raw @ dval
    rhs[~free] = dval[~free]

    keep = free[rows] & free[cols]
    crows = np.concatenate([rows[keep], np.where(~free)[0]])
    ccols = np.concatenate([cols[keep], np.where(~free)[0]])
    cvals = np.concatenate([vals[keep], np.ones(np.count_nonzero(~free))])
    matrix = sp.coo_matrix((cvals, (crows, ccols)), shape=(n, n)).tocsr()

    return SparseSystem(matrix=matrix, rhs=rhs, free_mask=free,
                        dirichlet_values=dval, raw_matrix=raw,
                        raw_rhs=raw_rhs, theta=theta)


def residual_check(system: SparseSystem, u: np.ndarray) -> float:
    """max over free DOFs of |b(u, phi_i) - F(phi_i)| for the raw operator."""
    r = system.raw_matrix @ u - system.raw_rhs
    if not np.any(system.free_mask):
        return 0.0
    return float(np.max(np.abs(r[system.free_mask])))


def energy_gram(space: FeSpace, problem: ProblemSpec) -> sp.csr_matrix:
    """Gram matrix of the energy norm: eps*grad.grad + gamma*mass."""
    rule = triangle_rule(2 * space.p + 2)
    det = np.abs(space.det_jacobians)
    invJT = space.inv_jacobians_t
    nloc = space.n_local
    N = basis_values(space.p, rule.points)
    dN = basis_grads(space.p, rule.points)
    A_loc = np.zeros((space.mesh.n_elements, nloc, nloc))
    for qi, w in enumerate(rule.weights):
        G = np.einsum("eij,lj->eli", invJT, dN[qi])
        A_loc += (w * det)[:, None, None] * (
            problem.eps * np.einsum("eia,eja->eij", G, G)
            + problem.gamma * np.outer(N[qi], N[qi])[None, :, :]
        )
    dofs = space.dof_map
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.n_dofs
    return sp.coo_matrix((A_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def streamline_gram(space: FeSpace, problem: ProblemSpec, theta) -> sp.csr_matrix:
    """Gram matrix of the stabilization seminorm sum_T theta_T |alpha.grad(v)|^2."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float),
                            (space.mesh.n_elements,))
    rule = triangle_rule(2 * space.p + 2)
    det = np.abs(space.det_jacobians)
    invJT = space.inv_jacobians_t
    nloc = space.n_local
    dN = basis_grads(space.p, rule.points)
    A_loc = np.zeros((space.mesh.n_elements, nloc, nloc))
    for qi, w in enumerate(rule.weights):
        X = space.physical_points(rule.points[qi][None, :])[:, 0]
        a = problem.alpha(X)
        G = np.einsum("eij,lj->eli", invJT, dN[qi])
        conv = np.einsum("eli,ei->el", G, a)
        A_loc += (w * det * theta)[:, None, None] * conv[:, :, None] * conv[:, None, :]
    dofs = space.dof_map
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.n_dofs
    return sp.coo_matrix((A_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
