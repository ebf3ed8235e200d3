"""Conforming 2D triangulations with newest-vertex-bisection refinement.

Element convention: local vertex 0 is the newest vertex, so the refinement
edge is the edge opposite local vertex 0, i.e. (v1, v2).  Marked elements are
refined with three bisections (four children); elements touched by the
conforming closure receive the minimal one or two bisections.  The closure is
computed as a fixed point on marked edges, so both neighbours of a bisected
edge always share the midpoint vertex and the output is conforming by
construction.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

DIRICHLET = "D"
NEUMANN = "N"

_LABELS = (DIRICHLET, NEUMANN)


class MeshFormatError(ValueError):
    """Raised when a mesh file does not follow the text format exactly."""


class RefinementError(RuntimeError):
    """Raised when the conforming closure does not terminate."""


class Mesh:
    """Triangulation with NVB genealogy and labelled boundary edges.

    Parameters
    ----------
    vertices : (nv, 2) float array
    elements : (ne, 3) int array, local vertex 0 = newest vertex
    boundary_edges : (nb, 2) int array of vertex pairs
    boundary_labels : length-nb sequence of "D" / "N"
    generation : (ne,) int array, bisection count since the initial mesh
    parent : (ne,) int array or None, element index in the coarser mesh
        this mesh was refined from
    """

    def __init__(self, vertices, elements, boundary_edges, boundary_labels,
                 generation=None, parent=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.boundary_labels = np.asarray(boundary_labels, dtype="U1")
        if generation is None:
            generation = np.zeros(len(self.elements), dtype=np.int64)
        self.generation = np.ascontiguousarray(generation, dtype=np.int64)
        self.parent = None if parent is None else np.ascontiguousarray(parent, dtype=np.int64)
        self._check_basic()

    def _check_basic(self):
        nv = len(self.vertices)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be an (nv, 2) array")
        if self.elements.ndim != 2 or self.elements.shape[1] != 3:
            raise ValueError("elements must be an (ne, 3) array")
        if len(self.elements) == 0:
            raise ValueError("mesh needs at least one element")
        if self.elements.min() < 0 or self.elements.max() >= nv:
            raise ValueError("element vertex index out of range")
        if len(self.boundary_labels) != len(self.boundary_edges):
            raise ValueError("boundary labels and edges differ in length")
        if not np.all(np.isin(self.boundary_labels, _LABELS)):
            raise ValueError("boundary labels must be 'D' or 'N'")
        if np.any(self.signed_areas <= 0):
            raise ValueError("all elements must be positively oriented")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def sizes(self) -> np.ndarray:
        """Element sizes h_T = |T|^(1/2)."""
        return np.sqrt(self.areas)

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.elements]
        l0 = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        l1 = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        l2 = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        return np.maximum(np.maximum(l0, l1), l2)

    @cached_property
    def _edge_struct(self):
        # local edge k is opposite local vertex k
        elems = self.elements
        pairs = np.stack([elems[:, [1, 2]], elems[:, [2, 0]], elems[:, [0, 1]]], axis=1)
        spairs = np.sort(pairs.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(spairs, axis=0, return_inverse=True)
        elem_edges = inverse.reshape(-1, 3)
        counts = np.bincount(elem_edges.ravel(), minlength=len(edges))
        if counts.max() > 2:
            raise ValueError("an edge is shared by more than two elements")
        ne = len(elems)
        eids = elem_edges.ravel()
        owners = np.repeat(np.arange(ne), 3)
        locs = np.tile(np.arange(3), ne)
        order = np.argsort(eids, kind="stable")
        se = eids[order]
        slot = np.zeros(len(se), dtype=np.int64)
        slot[1:] = (se[1:] == se[:-1]).astype(np.int64)
        edge_elements = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_local = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_elements[se, slot] = owners[order]
        edge_local[se, slot] = locs[order]
        return edges, elem_edges, edge_elements, edge_local

    @property
    def edges(self) -> np.ndarray:
        """(nE, 2) sorted vertex pairs, lexicographically ordered."""
        return self._edge_struct[0]

    @property
    def element_edges(self) -> np.ndarray:
        """(ne, 3) edge ids; column k is the edge opposite local vertex k."""
        return self._edge_struct[1]

    @property
    def edge_elements(self) -> np.ndarray:
        """(nE, 2) adjacent element indices, -1 for the missing side."""
        return self._edge_struct[2]

    @property
    def edge_local(self) -> np.ndarray:
        """(nE, 2) local edge index within each adjacent element."""
        return self._edge_struct[3]

    def _edge_key(self, pairs):
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        return pairs[:, 0] * self.n_vertices + pairs[:, 1]

    def edge_ids_of(self, pairs) -> np.ndarray:
        """Edge ids of the given vertex pairs; raises if a pair is not a mesh edge."""
        edges = self.edges
        keys = edges[:, 0] * self.n_vertices + edges[:, 1]
        want = self._edge_key(pairs)
        pos = np.searchsorted(keys, want)
        ok = (pos < len(keys)) & (keys[np.minimum(pos, len(keys) - 1)] == want)
        if not np.all(ok):
            raise ValueError("vertex pair is not an edge of the mesh")
        return pos

    @cached_property
    def boundary_edge_ids(self) -> np.ndarray:
        return self.edge_ids_of(self.boundary_edges)

    def boundary_label_of_edge(self) -> np.ndarray:
        """(nE,) array: 'D'/'N' for boundary edges, '' for interior edges."""
        lab = np.full(len(self.edges), "", dtype="U1")
        lab[self.boundary_edge_ids] = self.boundary_labels
        return lab

    def shape_regularity(self) -> float:
        """max_T diam(T) / |T|^(1/2)."""
        return float(np.max(self.diameters / self.sizes))


def element_size(mesh: Mesh, T: int) -> float:
    """Size h_T = |T|^(1/2) of element T."""
    return float(mesh.sizes[T])


def shape_regularity(mesh: Mesh) -> float:
    return mesh.shape_regularity()


def normalize_marks(mesh: Mesh, marked) -> np.ndarray:
    """Validated, sorted, duplicate-free element indices."""
    marked = np.asarray(marked, dtype=np.int64).ravel()
    if marked.size == 0:
        return marked
    if marked.min() < 0 or marked.max() >= mesh.n_elements:
        raise ValueError("marked element index out of range")
    out = np.unique(marked)
    if len(out) != len(marked):
        raise ValueError("marked element indices contain duplicates")
    return out


def assign_refinement_edges(vertices, elements, tol: float = 1e-12) -> np.ndarray:
    """Rotate element triples so the longest edge sits opposite local vertex 0.

    Ties are broken towards the edge with the lexicographically smallest
    sorted vertex pair.  Rotations preserve orientation.
    """
    vertices = np.asarray(vertices, dtype=float)
    elements = np.asarray(elements, dtype=np.int64)
    p = vertices[elements]
    lens = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
    ], axis=1)
    lmax = lens.max(axis=1, keepdims=True)
    candidate = lens >= lmax * (1.0 - tol)
    pairs = np.stack([elements[:, [1, 2]], elements[:, [2, 0]], elements[:, [0, 1]]], axis=1)
    spairs = np.sort(pairs, axis=2)
    nv = len(vertices)
    keys = spairs[:, :, 0] * nv + spairs[:, :, 1]
    keys = np.where(candidate, keys, np.iinfo(np.int64).max)
    choice = np.argmin(keys, axis=1)
    rotated = elements.copy()
    for k, perm in ((1, (1, 2, 0)), (2, (2, 0, 1))):
        rows = choice == k
        rotated[rows] = elements[rows][:, perm]
    return rotated


_CHILD_COUNTS = {0: 1, 1: 2, 3: 3, 5: 3, 7: 4}


def refine(mesh: Mesh, marked) -> Mesh:
    """Coarsest conforming NVB refinement with all marked elements bisected three times."""
    marked = normalize_marks(mesh, marked)
    if marked.size == 0:
        return Mesh(mesh.vertices, mesh.elements, mesh.boundary_edges,
                    mesh.boundary_labels, mesh.generation,
                    parent=np.arange(mesh.n_elements))

    elem_edges = mesh.element_edges
    n_edges = len(mesh.edges)
    edge_marked = np.zeros(n_edges, dtype=bool)
    edge_marked[elem_edges[marked].ravel()] = True

    # closure: whenever any edge of an element is marked, its refinement edge
    # (local edge 0) must be marked too
    for _ in range(n_edges + 1):
        need = edge_marked[elem_edges].any(axis=1) & ~edge_marked[elem_edges[:, 0]]
        if not need.any():
            break
        edge_marked[elem_edges[need, 0]] = True
    else:
        raise RefinementError("conforming closure did not terminate; "
                              "refinement-edge assignment is malformed")

    nv = mesh.n_vertices
    mid_ids = np.where(edge_marked)[0]
    midpoint_of = np.full(n_edges, -1, dtype=np.int64)
    midpoint_of[mid_ids] = nv + np.arange(len(mid_ids))
    midpoints = 0.5 * (mesh.vertices[mesh.edges[mid_ids, 0]]
                       + mesh.vertices[mesh.edges[mid_ids, 1]])
    new_vertices = np.vstack([mesh.vertices, midpoints])

    em = edge_marked[elem_edges]
    pattern = em[:, 0].astype(np.int64) + 2 * em[:, 1] + 4 * em[:, 2]
    if np.any((pattern != 0) & (pattern % 2 == 0)):
        raise RefinementError("closure invariant violated")

    counts = np.array([_CHILD_COUNTS[p] for p in (0, 1, 3, 5, 7)])
    n_children = counts[np.searchsorted([0, 1, 3, 5, 7], pattern)]
    offsets = np.concatenate([[0], np.cumsum(n_children)])
    total = offsets[-1]

    new_elements = np.empty((total, 3), dtype=np.int64)
    new_generation = np.empty(total, dtype=np.int64)
    new_parent = np.empty(total, dtype=np.int64)

    v0, v1, v2 = mesh.elements[:, 0], mesh.elements[:, 1], mesh.elements[:, 2]
    m0 = midpoint_of[elem_edges[:, 0]]
    m1 = midpoint_of[elem_edges[:, 1]]
    m2 = midpoint_of[elem_edges[:, 2]]
    gen = mesh.generation

    def put(rows, slot, cols, gen_incr):
        idx = offsets[:-1][rows] + slot
        new_elements[idx, 0] = cols[0][rows]
        new_elements[idx, 1] = cols[1][rows]
        new_elements[idx, 2] = cols[2][rows]
        new_generation[idx] = gen[rows] + gen_incr
        new_parent[idx] = np.where(rows)[0]

    rows = pattern == 0
    put(rows, 0, (v0, v1, v2), 0)

    rows = pattern == 1
    put(rows, 0, (m0, v2, v0), 1)
    put(rows, 1, (m0, v0, v1), 1)

    rows = pattern == 3
    put(rows, 0, (m1, v0, m0), 2)
    put(rows, 1, (m1, m0, v2), 2)
    put(rows, 2, (m0, v0, v1), 1)

    rows = pattern == 5
    put(rows, 0, (m0, v2, v0), 1)
    put(rows, 1, (m2, v1, m0), 2)
    put(rows, 2, (m2, m0, v0), 2)

    rows = pattern == 7
    put(rows, 0, (m1, v0, m0), 2)
    put(rows, 1, (m1, m0, v2), 2)
    put(rows, 2, (m2, v1, m0), 2)
    put(rows, 3, (m2, m0, v0), 2)

    # boundary facets inherit their label; bisected ones are replaced in place
    bids = mesh.boundary_edge_ids
    bmid = midpoint_of[bids]
    split = bmid >= 0
    keep_e = mesh.boundary_edges[~split]
    keep_l = mesh.boundary_labels[~split]
    a = mesh.boundary_edges[split, 0]
    b = mesh.boundary_edges[split, 1]
    m = bmid[split]
    new_bedges = np.vstack([keep_e,
                            np.column_stack([a, m]),
                            np.column_stack([m, b])])
    new_blabels = np.concatenate([keep_l, mesh.boundary_labels[split],
                                  mesh.boundary_labels[split]])

    return Mesh(new_vertices, new_elements, new_bedges, new_blabels,
                new_generation, parent=new_parent)


def uniform_refine(mesh: Mesh) -> Mesh:
    return refine(mesh, np.arange(mesh.n_elements))


def conformity_report(mesh: Mesh) -> str | None:
    """None if the mesh is conforming, otherwise a description of the defect."""
    if np.any(mesh.signed_areas <= 0):
        return "non-positive element area"
    elems = mesh.elements
    pairs = np.stack([elems[:, [1, 2]], elems[:, [2, 0]], elems[:, [0, 1]]], axis=1)
    spairs = np.sort(pairs.reshape(-1, 2), axis=1)
    edges, counts = np.unique(spairs, axis=0, return_counts=True)
    if counts.max() > 2:
        return "edge shared by more than two elements"
    single = edges[counts == 1]
    bset = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    sset = {tuple(e) for e in single.tolist()}
    if sset != bset:
        return "boundary facets do not match the single-adjacency edges"
    lab_count = {}
    for e in map(tuple, np.sort(mesh.boundary_edges, axis=1).tolist()):
        lab_count[e] = lab_count.get(e, 0) + 1
    if any(c != 1 for c in lab_count.values()):
        return "boundary edge carries more than one label"
    # hanging node: a vertex adjacent (in the edge graph) to an endpoint of an
    # edge and lying strictly inside that edge
    nv = mesh.n_vertices
    adjacency = [[] for _ in range(nv)]
    for a, b in edges.tolist():
        adjacency[a].append(b)
        adjacency[b].append(a)
    verts = mesh.vertices
    for a, b in edges.tolist():
        pa, pb = verts[a], verts[b]
        d = pb - pa
        L2 = d @ d
        for m in adjacency[a]:
            if m == b:
                continue
            t = ((verts[m] - pa) @ d) / L2
            if 1e-12 < t < 1 - 1e-12:
                off = verts[m] - (pa + t * d)
                if off @ off < 1e-24 * L2:
                    return f"hanging node {m} on edge ({a},{b})"
    return None


def is_conforming(mesh: Mesh) -> bool:
    return conformity_report(mesh) is None


def angle_census(mesh: Mesh, decimals: int = 9) -> set:
    """Set of sorted, rounded interior-angle triples over all elements."""
    p = mesh.vertices[mesh.elements]
    angles = np.empty((mesh.n_elements, 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, k] = np.arccos(np.clip(cosang, -1.0, 1.0))
    angles = np.round(np.sort(angles, axis=1), decimals)
    return {tuple(row) for row in angles.tolist()}


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"VERTICES {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"ELEMENTS {mesh.n_elements}\n")
        for a, b, c in mesh.elements:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"BOUNDARY {len(mesh.boundary_edges)}\n")
        for (a, b), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
            fh.write(f"{a} {b} {lab}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError("unexpected end of file")
        line = lines[pos]
        pos += 1
        return line

    def header(keyword):
        parts = take().split()
        if len(parts) != 2 or parts[0] != keyword:
            raise MeshFormatError(f"expected '{keyword} <count>' header")
        try:
            n = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad count in {keyword} header") from None
        if n < 0:
            raise MeshFormatError(f"negative count in {keyword} header")
        return n

    n = header("VERTICES")
    vertices = np.empty((n, 2))
    for i in range(n):
        parts = take().split()
        if len(parts) != 2:
            raise MeshFormatError("vertex line must be 'x y'")
        try:
            vertices[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError("bad vertex coordinate") from None

    m = header("ELEMENTS")
    elements = np.empty((m, 3), dtype=np.int64)
    for i in range(m):
        parts = take().split()
        if len(parts) != 3:
            raise MeshFormatError("element line must be 'v0 v1 v2'")
        try:
            elements[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError("bad element vertex index") from None

    k = header("BOUNDARY")
    bedges = np.empty((k, 2), dtype=np.int64)
    blabels = []
    for i in range(k):
        parts = take().split()
        if len(parts) != 3 or parts[2] not in _LABELS:
            raise MeshFormatError("boundary line must be 'va vb D|N'")
        try:
            bedges[i] = [int(parts[0]), int(parts[1])]
        except ValueError:
            raise MeshFormatError("bad boundary vertex index") from None
        blabels.append(parts[2])

    if pos != len(lines):
        raise MeshFormatError("trailing content after BOUNDARY block")
    try:
        return Mesh(vertices, elements, bedges, blabels)
    except ValueError as exc:
        raise MeshFormatError(str(exc)) from None
