"""Robust residual error estimator, data oscillations, and energy norms.

Per element the squared indicator is

    hbar_T^2 ||-eps*lap(w) + alpha.grad(w) + beta*w - f||_T^2
    + hbar_T eps^(-1/2) ||[[eps*grad(w)]]||_{dT cap Omega}^2
    + hbar_T eps^(-1/2) ||g - eps dw/dn||_{dT cap Gamma_N}^2

with hbar_T = min(eps^(-1/2) h_T, gamma^(-1/2)) (gamma = 0 reads as the first
branch).  Each interior edge contributes its full squared jump norm to both
adjacent elements.  Gradients of w are affine on every edge, so the jump
integrals are evaluated in closed form from the two endpoint values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import NEUMANN, Mesh
from .problem import ProblemSpec, boundary_normals
from .quadrature import edge_rule, triangle_rule
from .space import DiscreteFunction, FeSpace, basis_grads, basis_values

_REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass
class EstimatorOutput:
    eta2: np.ndarray                 # per-element squared indicators
    hbar: np.ndarray                 # per-element robust scale
    osc2: Optional[np.ndarray] = None

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.eta2)))

    def total_on(self, elements) -> float:
        return float(np.sqrt(np.sum(self.eta2[elements])))

    @property
    def osc_total(self) -> float:
        if self.osc2 is None:
            raise ValueError("oscillations were not computed")
        return float(np.sqrt(np.sum(self.osc2)))


def hbar(problem: ProblemSpec, mesh: Mesh, T: Optional[int] = None):
    """Robust local scale min(eps^(-1/2) h_T, gamma^(-1/2))."""
    scale = mesh.sizes / np.sqrt(problem.eps)
    if problem.gamma > 0:
        scale = np.minimum(scale, 1.0 / np.sqrt(problem.gamma))
    return scale if T is None else float(scale[T])


def _edge_endpoint_grads(space: FeSpace, w: DiscreteFunction, elements, locals_):
    """Gradients of w at the two endpoints of local edge k, ordered by the
    element's local vertex order ((k+1)%3 then (k+2)%3).  Shapes (n, 2), (n, 2)."""
    dNv = basis_grads(space.p, _REF_VERTICES)          # (3, nloc, 2)
    cloc = w.coefficients[space.dof_map[elements]]     # (n, nloc)
    invJT = space.inv_jacobians_t[elements]
    grads = []
    for which in (1, 2):
        dN = dNv[(locals_ + which) % 3]                # (n, nloc, 2)
        gref = np.einsum("nlj,nl->nj", dN, cloc)
        grads.append(np.einsum("nij,nj->ni", invJT, gref))
    return grads[0], grads[1]


def _first_endpoint_vertices(mesh: Mesh, elements, locals_):
    return mesh.elements[elements, (locals_ + 1) % 3]


def indicators(space: FeSpace, problem: ProblemSpec, w: DiscreteFunction,
               quad_degree: Optional[int] = None,
               with_oscillations: bool = False) -> EstimatorOutput:
    """Per-element squared refinement indicators for the discrete function w."""
    mesh = space.mesh
    p = space.p
    eps = problem.eps
    hb = hbar(problem, mesh)
    data_degree = max(2 * p + 2, 6) if quad_degree is None else max(quad_degree, 2 * p + 2)
    rule = triangle_rule(data_degree)

    det = np.abs(space.det_jacobians)
    invJT = space.inv_jacobians_t
    cloc = w.local_coefficients()
    lapw = np.einsum("el,el->e", space.laplacians, cloc)

    N = basis_values(p, rule.points)
    dN = basis_grads(p, rule.points)
    vol = np.zeros(mesh.n_elements)
    for qi, wq in enumerate(rule.weights):
        X = space.physical_points(rule.points[qi][None, :])[:, 0]
        a = problem.alpha(X)
        b = problem.beta(X)
        fv = problem.f(X)
        G = np.einsum("eij,lj->eli", invJT, dN[qi])
        gradw = np.einsum("eli,el->ei", G, cloc)
        wv = N[qi] @ cloc.T
        R = -eps * lapw + np.sum(a * gradw, axis=1) + b * wv - fv
        vol += wq * det * R**2
    eta2 = hb**2 * vol

    # interior normal jumps of eps*grad(w); the jump is affine along the edge,
    # so the squared integral is L*(ja^2 + ja*jb + jb^2)/3
    interior = np.flatnonzero(mesh.edge_elements[:, 1] >= 0)
    if len(interior):
        a_id = mesh.edges[interior, 0]
        pa = mesh.vertices[a_id]
        pb = mesh.vertices[mesh.edges[interior, 1]]
        tvec = pb - pa
        length = np.linalg.norm(tvec, axis=1)
        normal = np.column_stack([tvec[:, 1], -tvec[:, 0]]) / length[:, None]
        side_a = []
        side_b = []
        for side in (0, 1):
            elems = mesh.edge_elements[interior, side]
            locs = mesh.edge_local[interior, side]
            g1, g2 = _edge_endpoint_grads(space, w, elems, locs)
            first = _first_endpoint_vertices(mesh, elems, locs)
            swap = first != a_id
            ga = np.where(swap[:, None], g2, g1)
            gb = np.where(swap[:, None], g1, g2)
            side_a.append(ga)
            side_b.append(gb)
        ja = np.einsum("ni,ni->n", side_a[0] - side_a[1], normal)
        jb = np.einsum("ni,ni->n", side_b[0] - side_b[1], normal)
        jump2 = eps**2 * length * (ja**2 + ja * jb + jb**2) / 3.0
        for side in (0, 1):
            elems = mesh.edge_elements[interior, side]
            np.add.at(eta2, elems, hb[elems] / np.sqrt(eps) * jump2)

    # Neumann residual g - eps*dw/dn
    nmask = mesh.boundary_labels == NEUMANN
    if np.any(nmask):
        if problem.g is None:
            raise ValueError("mesh has Neumann edges but the problem has no Neumann datum")
        erule = edge_rule(2 * p + 1 if quad_degree is None else max(2 * p + 1, quad_degree))
        eids = mesh.boundary_edge_ids[nmask]
        owners = mesh.edge_elements[eids, 0]
        locs = mesh.edge_local[eids, 0]
        normals = boundary_normals(mesh)[nmask]
        a = mesh.vertices[mesh.boundary_edges[nmask, 0]]
        b = mesh.vertices[mesh.boundary_edges[nmask, 1]]
        length = np.linalg.norm(b - a, axis=1)
        g1, g2 = _edge_endpoint_grads(space, w, owners, locs)
        gn1 = np.einsum("ni,ni->n", g1, normals)
        gn2 = np.einsum("ni,ni->n", g2, normals)
        # parameterize from local vertex (k+1)%3 towards (k+2)%3
        start = mesh.vertices[_first_endpoint_vertices(mesh, owners, locs)]
        end = a + b - start
        acc = np.zeros(len(eids))
        for t, wq in zip(erule.points, erule.weights):
            X = (1 - t) * start + t * end
            gv = problem.g(X, normals)
            wn = (1 - t) * gn1 + t * gn2
            acc += wq * (gv - eps * wn) ** 2
        np.add.at(eta2, owners, hb[owners] / np.sqrt(eps) * length * acc)

    osc2 = oscillations(space, problem, w, quad_degree) if with_oscillations else None
    return EstimatorOutput(eta2=eta2, hbar=hb, osc2=osc2)


def _project_moments(points, weights, det, values, p):
    """Elementwise L2 projection of sampled data onto P^(p-1)(T).

    ``values`` has shape (nq, ne); returns coefficients in the monomial basis
    {1} (p=1) or {1, x-xc, y-yc} (p=2) together with the basis samples, so the
    caller can evaluate the projection at the same quadrature points.
    """
    nq, ne = values.shape
    if p == 1:
        mass = np.einsum("q,qe->e", weights, np.ones((nq, ne))) * det
        mom = np.einsum("q,qe->e", weights, values) * det
        proj = (mom / mass)[None, :]
        basis = np.ones((1, nq, ne))
        return proj, basis
    xc = np.einsum("q,qei->ei", weights, points) / weights.sum()
    basis = np.stack([
        np.ones((nq, ne)),
        points[:, :, 0].reshape(nq, ne) - xc[:, 0][None, :],
        points[:, :, 1].reshape(nq, ne) - xc[:, 1][None, :],
    ])
    gram = np.einsum("q,aqe,bqe->eab", weights, basis, basis) * det[:, None, None]
    rhs = np.einsum("q,aqe,qe->ea", weights, basis, values) * det[:, None]
    proj = np.linalg.solve(gram, rhs[:, :, None])[:, :, 0].T
    return proj, basis


def oscillations(space: FeSpace, problem: ProblemSpec, w: DiscreteFunction,
                 quad_degree: Optional[int] = None) -> np.ndarray:
    """Per-element squared data oscillations.

    alpha, beta, f are projected elementwise onto P^(p-1)(T), g edgewise onto
    P^(p-1)(E); the oscillation measures the residual contribution of the
    unresolved data parts.
    """
    mesh = space.mesh
    p = space.p
    eps = problem.eps
    hb = hbar(problem, mesh)
    data_degree = max(2 * p + 2, 6) if quad_degree is None else max(quad_degree, 2 * p + 2)
    rule = triangle_rule(data_degree)
    nq = len(rule.weights)
    ne = mesh.n_elements
    det = np.abs(space.det_jacobians)
    invJT = space.inv_jacobians_t
    cloc = w.local_coefficients()

    X = space.physical_points(rule.points)        # (ne, nq, 2)
    Xq = np.swapaxes(X, 0, 1)                     # (nq, ne, 2)
    flat = Xq.reshape(-1, 2)
    a_all = problem.alpha(flat).reshape(nq, ne, 2)
    b_all = problem.beta(flat).reshape(nq, ne)
    f_all = problem.f(flat).reshape(nq, ne)

    dN = basis_grads(p, rule.points)
    N = basis_values(p, rule.points)
    gradw = np.einsum("eij,qlj,el->qei", invJT, dN, cloc)
    wv = np.einsum("ql,el->qe", N, cloc)

    pa1, basis = _project_moments(Xq, rule.weights, det, a_all[:, :, 0], p)
    pa2, _ = _project_moments(Xq, rule.weights, det, a_all[:, :, 1], p)
    pb, _ = _project_moments(Xq, rule.weights, det, b_all, p)
    pf, _ = _project_moments(Xq, rule.weights, det, f_all, p)

    da1 = a_all[:, :, 0] - np.einsum("ae,aqe->qe", pa1, basis)
    da2 = a_all[:, :, 1] - np.einsum("ae,aqe->qe", pa2, basis)
    db = b_all - np.einsum("ae,aqe->qe", pb, basis)
    df = f_all - np.einsum("ae,aqe->qe", pf, basis)

    R = da1 * gradw[:, :, 0] + da2 * gradw[:, :, 1] + db * wv - df
    osc2 = hb**2 * det * np.einsum("q,qe->e", rule.weights, R**2)

    nmask = mesh.boundary_labels == NEUMANN
    if np.any(nmask) and problem.g is not None:
        erule = edge_rule(max(2 * p + 1, 5) if quad_degree is None
                          else max(2 * p + 1, quad_degree))
        eids = mesh.boundary_edge_ids[nmask]
        owners = mesh.edge_elements[eids, 0]
        normals = boundary_normals(mesh)[nmask]
        a = mesh.vertices[mesh.boundary_edges[nmask, 0]]
        b = mesh.vertices[mesh.boundary_edges[nmask, 1]]
        length = np.linalg.norm(b - a, axis=1)
        ts = erule.points
        gv = np.stack([problem.g((1 - t) * a + t * b, normals) for t in ts])
        if p == 1:
            mean = np.einsum("q,qn->n", erule.weights, gv)
            dg = gv - mean[None, :]
        else:
            bas = np.stack([np.ones((len(ts), len(eids))),
                            (ts - 0.5)[:, None] * np.ones(len(eids))[None, :]])
            gram = np.einsum("q,aqn,bqn->nab", erule.weights, bas, bas)
            rhsv = np.einsum("q,aqn,qn->na", erule.weights, bas, gv)
            coef = np.linalg.solve(gram, rhsv[:, :, None])[:, :, 0].T
            dg = gv - np.einsum("an,aqn->qn", coef, bas)
        acc = np.einsum("q,qn->n", erule.weights, dg**2) * length
        np.add.at(osc2, owners, hb[owners] / np.sqrt(eps) * acc)
    return osc2


def energy_norm(space: FeSpace, problem: ProblemSpec, v: DiscreteFunction,
                region=None) -> float:
    """(eps ||grad v||^2 + gamma ||v||^2)^(1/2) over a set of elements."""
    rule = triangle_rule(2 * space.p + 2)
    if region is None:
        region = slice(None)
    det = np.abs(space.det_jacobians[region])
    invJT = space.inv_jacobians_t[region]
    cloc = v.local_coefficients(region)
    N = basis_values(space.p, rule.points)
    dN = basis_grads(space.p, rule.points)
    gradv = np.einsum("eij,qlj,el->qei", invJT, dN, cloc)
    vv = np.einsum("ql,el->qe", N, cloc)
    acc = problem.eps * np.sum(gradv**2, axis=2) + problem.gamma * vv**2
    return float(np.sqrt(np.einsum("q,qe,e->", rule.weights, acc, det)))


@dataclass(frozen=True)
class EnergyErrors:
    energy: float
    supg: Optional[float]


def energy_error(space: FeSpace, problem: ProblemSpec, u_h: DiscreteFunction,
                 theta=None, quad_degree: Optional[int] = None) -> EnergyErrors:
    """Energy-norm error |||u - u_h||| against the problem's exact solution.

    With per-element ``theta`` also returns the discrete SUPG norm adding
    sum_T theta_T ||alpha.grad(u - u_h)||_T^2.
    """
    if problem.exact is None:
        raise ValueError("problem has no exact solution")
    mesh = space.mesh
    p = space.p
    degree = max(2 * p + 2, 6) if quad_degree is None else max(quad_degree, 2 * p + 2)
    rule = triangle_rule(degree)
    det = np.abs(space.det_jacobians)
    invJT = space.inv_jacobians_t
    cloc = u_h.local_coefficients()
    N = basis_values(p, rule.points)
    dN = basis_grads(p, rule.points)
    err2 = 0.0
    supg2 = 0.0
    if theta is not None:
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (mesh.n_elements,))
    for qi, wq in enumerate(rule.weights):
        X = space.physical_points(rule.points[qi][None, :])[:, 0]
        eu = problem.exact.u(X) - N[qi] @ cloc.T
        G = np.einsum("eij,lj->eli", invJT, dN[qi])
        eg = problem.exact.grad(X) - np.einsum("eli,el->ei", G, cloc)
        err2 += np.sum(wq * det * (problem.eps * np.sum(eg**2, axis=1)
                                   + problem.gamma * eu**2))
        if theta is not None:
            a = problem.alpha(X)
            supg2 += np.sum(wq * det * theta * np.sum(a * eg, axis=1) ** 2)
    energy = float(np.sqrt(err2))
    supg = float(np.sqrt(err2 + supg2)) if theta is not None else None
    return EnergyErrors(energy=energy, supg=supg)
