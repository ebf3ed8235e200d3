"""Lagrange finite element spaces of degree 1 and 2 on triangulations.

Local DOF order is [v0, v1, v2] for p=1 and [v0, v1, v2, e0, e1, e2] for p=2,
where edge k is the edge opposite local vertex k.  Global edge DOFs are keyed
by the sorted vertex pair, so DOF maps are deterministic across runs.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .mesh import DIRICHLET, Mesh


def basis_values(p: int, pts: np.ndarray) -> np.ndarray:
    """Reference basis values, shape (npts, nloc)."""
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    if p == 1:
        return np.column_stack([l0, l1, l2])
    if p == 2:
        return np.column_stack([
            l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
            4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
        ])
    raise ValueError("degree must be 1 or 2")


def basis_grads(p: int, pts: np.ndarray) -> np.ndarray:
    """Reference basis gradients, shape (npts, nloc, 2)."""
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    d0 = np.array([-1.0, -1.0])
    d1 = np.array([1.0, 0.0])
    d2 = np.array([0.0, 1.0])
    if p == 1:
        out = np.empty((len(pts), 3, 2))
        out[:] = np.stack([d0, d1, d2])
        return out
    if p == 2:
        out = np.empty((len(pts), 6, 2))
        out[:, 0] = np.outer(4 * l0 - 1, d0)
        out[:, 1] = np.outer(4 * l1 - 1, d1)
        out[:, 2] = np.outer(4 * l2 - 1, d2)
        out[:, 3] = 4 * (np.outer(l2, d1) + np.outer(l1, d2))
        out[:, 4] = 4 * (np.outer(l0, d2) + np.outer(l2, d0))
        out[:, 5] = 4 * (np.outer(l1, d0) + np.outer(l0, d1))
        return out
    raise ValueError("degree must be 1 or 2")


def basis_hessians(p: int) -> np.ndarray:
    """Reference basis Hessians (constant per basis function), shape (nloc, 2, 2)."""
    if p == 1:
        return np.zeros((3, 2, 2))
    if p == 2:
        d = [np.array([-1.0, -1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        out = np.empty((6, 2, 2))
        for i in range(3):
            out[i] = 4 * np.outer(d[i], d[i])
        out[3] = 4 * (np.outer(d[1], d[2]) + np.outer(d[2], d[1]))
        out[4] = 4 * (np.outer(d[2], d[0]) + np.outer(d[0], d[2]))
        out[5] = 4 * (np.outer(d[0], d[1]) + np.outer(d[1], d[0]))
        return out
    raise ValueError("degree must be 1 or 2")


class FeSpace:
    """P^p(T) ∩ H¹ space with Dirichlet constraint bookkeeping."""

    def __init__(self, mesh: Mesh, p: int):
        if p not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        self.mesh = mesh
        self.p = p
        nv = mesh.n_vertices
        if p == 1:
            self.dof_map = mesh.elements
            self.n_dofs = nv
            self.dof_coords = mesh.vertices
        else:
            self.dof_map = np.hstack([mesh.elements, nv + mesh.element_edges])
            self.n_dofs = nv + len(mesh.edges)
            mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, mids])
        dmask = np.zeros(self.n_dofs, dtype=bool)
        d_edges = mesh.boundary_edges[mesh.boundary_labels == DIRICHLET]
        dmask[d_edges.ravel()] = True
        if p == 2:
            dmask[nv + mesh.edge_ids_of(d_edges)] = True
        self.dirichlet_mask = dmask
        self.dirichlet_dofs = np.where(dmask)[0]

    @property
    def n_local(self) -> int:
        return 3 * self.p

    @cached_property
    def jacobians(self) -> np.ndarray:
        """(ne, 2, 2) affine maps; column j is edge vector v_{j+1} - v0."""
        p = self.mesh.vertices[self.mesh.elements]
        J = np.empty((self.mesh.n_elements, 2, 2))
        J[:, :, 0] = p[:, 1] - p[:, 0]
        J[:, :, 1] = p[:, 2] - p[:, 0]
        return J

    @cached_property
    def det_jacobians(self) -> np.ndarray:
        J = self.jacobians
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    @cached_property
    def inv_jacobians_t(self) -> np.ndarray:
        """(ne, 2, 2) inverse-transpose Jacobians, mapping reference gradients."""
        J = self.jacobians
        det = self.det_jacobians
        out = np.empty_like(J)
        out[:, 0, 0] = J[:, 1, 1]
        out[:, 0, 1] = -J[:, 1, 0]
        out[:, 1, 0] = -J[:, 0, 1]
        out[:, 1, 1] = J[:, 0, 0]
        return out / det[:, None, None]

    def physical_points(self, ref_pts: np.ndarray, elements=None) -> np.ndarray:
        """Map reference points to physical coordinates, shape (ne, npts, 2)."""
        if elements is None:
            elements = slice(None)
        v0 = self.mesh.vertices[self.mesh.elements[elements, 0]]
        J = self.jacobians[elements]
        return v0[:, None, :] + np.einsum("eij,qj->eqi", J, np.atleast_2d(ref_pts))

    def physical_grads(self, ref_pts: np.ndarray, elements=None) -> np.ndarray:
        """Basis gradients in physical coordinates, shape (ne, npts, nloc, 2)."""
        if elements is None:
            elements = slice(None)
        dN = basis_grads(self.p, ref_pts)
        return np.einsum("eij,qlj->eqli", self.inv_jacobians_t[elements], dN)

    @cached_property
    def laplacians(self) -> np.ndarray:
        """(ne, nloc) elementwise-constant basis Laplacians (zero for p=1)."""
        if self.p == 1:
            return np.zeros((self.mesh.n_elements, 3))
        invJT = self.inv_jacobians_t
        K = np.einsum("eab,eac->ebc", invJT, invJT)
        return np.einsum("ebc,lbc->el", K, basis_hessians(self.p))


class DiscreteFunction:
    """Coefficient vector bound to a finite element space."""

    def __init__(self, space: FeSpace, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (space.n_dofs,):
            raise ValueError("coefficient vector has wrong length")
        self.space = space
        self.coefficients = coefficients

    def local_coefficients(self, elements=None) -> np.ndarray:
        if elements is None:
            elements = slice(None)
        return self.coefficients[self.space.dof_map[elements]]

    def evaluate(self, element: int, ref_pts: np.ndarray):
        """Values and gradients on one element at reference points."""
        ref_pts = np.atleast_2d(ref_pts)
        c = self.coefficients[self.space.dof_map[element]]
        vals = basis_values(self.space.p, ref_pts) @ c
        g = np.einsum("ij,qlj->qli", self.space.inv_jacobians_t[element],
                      basis_grads(self.space.p, ref_pts))
        grads = np.einsum("qli,l->qi", g, c)
        return vals, grads

    def evaluate_at(self, points: np.ndarray):
        """Values and gradients at physical points (brute-force element lookup)."""
        points = np.atleast_2d(points)
        elems, ref = locate(self.space, points)
        n = len(points)
        vals = np.empty(n)
        grads = np.empty((n, 2))
        for i in range(n):
            v, g = self.evaluate(int(elems[i]), ref[i])
            vals[i] = v[0]
            grads[i] = g[0]
        return vals, grads


def locate(space: FeSpace, points: np.ndarray, tol: float = 1e-12):
    """Containing element and reference coordinates for each physical point."""
    points = np.atleast_2d(points)
    mesh = space.mesh
    v0 = mesh.vertices[mesh.elements[:, 0]]
    invJ = np.linalg.inv(space.jacobians)
    elems = np.full(len(points), -1, dtype=np.int64)
    refs = np.empty((len(points), 2))
    for i, x in enumerate(points):
        xi = np.einsum("eij,ej->ei", invJ, x - v0)
        inside = (xi[:, 0] >= -tol) & (xi[:, 1] >= -tol) & (xi.sum(axis=1) <= 1 + tol)
        idx = np.flatnonzero(inside)
        if len(idx) == 0:
            raise ValueError(f"point {x} lies outside the mesh")
        elems[i] = idx[0]
        refs[i] = xi[idx[0]]
    return elems, refs


def build_space(mesh: Mesh, p: int) -> FeSpace:
    return FeSpace(mesh, p)


def interpolate(space: FeSpace, fn) -> DiscreteFunction:
    """Nodal interpolant of a pointwise function."""
    vals = np.asarray(fn(space.dof_coords), dtype=float)
    if vals.shape != (space.n_dofs,):
        raise ValueError("interpolated function must return one value per node")
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated function returned non-finite nodal values")
    return DiscreteFunction(space, vals)


def prolong(u: DiscreteFunction, fine_space: FeSpace) -> DiscreteFunction:
    """Re-represent u exactly on a one-step refinement of its mesh."""
    coarse = u.space
    fine_mesh = fine_space.mesh
    if fine_mesh.parent is None:
        raise ValueError("fine mesh carries no genealogy")
    if fine_space.p != coarse.p:
        raise ValueError("prolongation requires matching degree")
    nodes = fine_space.dof_coords[fine_space.dof_map]          # (ne_f, nloc, 2)
    parents = fine_mesh.parent
    v0 = coarse.mesh.vertices[coarse.mesh.elements[parents, 0]]
    invJ = np.linalg.inv(coarse.jacobians[parents])
    ref = np.einsum("eij,enj->eni", invJ, nodes - v0[:, None, :])
    ne_f, nloc = ref.shape[:2]
    vals = basis_values(coarse.p, ref.reshape(-1, 2)).reshape(ne_f, nloc, -1)
    cloc = u.coefficients[coarse.dof_map[parents]]             # (ne_f, nloc_c)
    nodal = np.einsum("enl,el->en", vals, cloc)
    out = np.empty(fine_space.n_dofs)
    out[fine_space.dof_map.ravel()] = nodal.ravel()
    return DiscreteFunction(fine_space, out)


def write_function(u: DiscreteFunction, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"DOFS {u.space.n_dofs}\n")
        for c in u.coefficients:
            fh.write(f"{c:.17g}\n")


def read_coefficients(path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or len(lines[0].split()) != 2 or lines[0].split()[0] != "DOFS":
        raise ValueError("expected 'DOFS <count>' header")
    n = int(lines[0].split()[1])
    if len(lines) != n + 1:
        raise ValueError("coefficient count does not match header")
    return np.array([float(s) for s in lines[1:]])
