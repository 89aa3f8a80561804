"""Cubic Lagrange function space on a triangle mesh.

Degrees of freedom sit at vertices, at the two interior third-points of
every edge, and at triangle centroids.  Edge dofs are stored in global
edge order (the third-point nearer the lower-numbered endpoint first),
which makes dof placement independent of how the adjacent triangles
happen to be oriented, and keeps dof coordinates exactly symmetric on
mirror-symmetric meshes.

The essential constraint set clamps every dof lying on a tagged
boundary edge; both boundary tags impose the same clamping, the tags
only record which physical piece of the boundary an edge came from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec
from .meshgen import Mesh

# local edge slots in triangle vertex order
_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass
class FunctionSpace:
    mesh: Mesh
    edges: np.ndarray          # (ne, 2) sorted vertex pairs
    tri_edges: np.ndarray      # (nt, 3) edge index per local slot
    ldofs: np.ndarray          # (nt, 10) global dof per local node
    dof_coords: np.ndarray     # (ndof, 2)
    dof_kind: np.ndarray       # 0 vertex, 1 edge, 2 cell
    is_dirichlet: np.ndarray   # bool mask over dofs
    interior: np.ndarray       # indices of unconstrained dofs

    @property
    def ndof(self) -> int:
        return len(self.dof_coords)

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def n_i(self) -> int:
        return len(self.interior)

    @property
    def n_d(self) -> int:
        return self.ndof - len(self.interior)

    @property
    def interior_index(self) -> np.ndarray:
        """Permutation listing the n_i interior dofs first, then the
        n_d clamped dofs, both in ascending global order."""
        return np.concatenate([self.interior, np.flatnonzero(self.is_dirichlet)])

    def vertex_dof(self, v: int) -> int:
        return v

    def edge_dofs(self, e: int) -> tuple[int, int]:
        nv = self.mesh.num_vertices
        return nv + 2 * e, nv + 2 * e + 1

    def cell_dof(self, t: int) -> int:
        return self.mesh.num_vertices + 2 * len(self.edges) + t


def build_space(mesh: Mesh) -> FunctionSpace:
    nv, nt = mesh.num_vertices, mesh.num_triangles
    tris = mesh.triangles

    # unique undirected edges, plus per-triangle slot -> edge map
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    flipped = raw[:, 0] > raw[:, 1]
    raw_sorted = np.sort(raw, axis=1)
    edges, inv = np.unique(raw_sorted, axis=0, return_inverse=True)
    ne = len(edges)
    tri_edges = inv.reshape(3, nt).T.astype(np.int64)
    tri_flip = flipped.reshape(3, nt).T

    ndof = nv + 2 * ne + nt
    coords = np.empty((ndof, 2))
    coords[:nv] = mesh.vertices
    pa = mesh.vertices[edges[:, 0]]
    pb = mesh.vertices[edges[:, 1]]
    coords[nv:nv + 2 * ne:2] = (2.0 * pa + pb) / 3.0
    coords[nv + 1:nv + 2 * ne:2] = (pa + 2.0 * pb) / 3.0
    cell0 = nv + 2 * ne
    coords[cell0:] = mesh.vertices[tris].mean(axis=1)

    kind = np.empty(ndof, dtype=np.int8)
    kind[:nv] = 0
    kind[nv:cell0] = 1
    kind[cell0:] = 2

    # local node order: 3 vertices, 2 dofs per local edge slot, centroid.
    # Within a slot the first dof is the one nearer the lower-numbered
    # global endpoint; when the local orientation runs against global
    # order the pair swaps.
    ldofs = np.empty((nt, 10), dtype=np.int64)
    ldofs[:, :3] = tris
    for s in range(3):
        d1 = nv + 2 * tri_edges[:, s]
        flip = tri_flip[:, s]
        ldofs[:, 3 + 2 * s] = np.where(flip, d1 + 1, d1)
        ldofs[:, 4 + 2 * s] = np.where(flip, d1, d1 + 1)
    ldofs[:, 9] = cell0 + np.arange(nt)

    # clamp everything on a tagged boundary edge
    is_dir = np.zeros(ndof, dtype=bool)
    bset = mesh.boundary_edges
    is_dir[np.unique(bset)] = True
    edge_lookup = {tuple(e): i for i, e in enumerate(edges.tolist())}
    for a, b in np.sort(bset, axis=1).tolist():
        e = edge_lookup.get((a, b))
        if e is None:
            raise InvalidSpec(f"boundary edge ({a}, {b}) not in triangulation")
        is_dir[nv + 2 * e] = True
        is_dir[nv + 2 * e + 1] = True
    interior = np.flatnonzero(~is_dir)

    return FunctionSpace(mesh, edges, tri_edges, ldofs, coords, kind,
                         is_dir, interior)


def dof_permutation(space: FunctionSpace, vertex_perm: np.ndarray) -> np.ndarray:
    """Lift a mesh automorphism (a vertex permutation preserving the
    triangulation) to the dof set.  perm[d] is the image dof of d."""
    mesh = space.mesh
    nv = mesh.num_vertices
    perm = np.empty(space.ndof, dtype=np.int64)
    perm[:nv] = vertex_perm[:nv]

    edge_lookup = {tuple(e): i for i, e in enumerate(space.edges.tolist())}
    for e, (a, b) in enumerate(space.edges.tolist()):
        a2, b2 = int(vertex_perm[a]), int(vertex_perm[b])
        swapped = a2 > b2
        if swapped:
            a2, b2 = b2, a2
        e2 = edge_lookup.get((a2, b2))
        if e2 is None:
            raise InvalidSpec("vertex permutation is not a mesh automorphism")
        d1, d2 = nv + 2 * e, nv + 2 * e + 1
        t1, t2 = nv + 2 * e2, nv + 2 * e2 + 1
        perm[d1], perm[d2] = (t2, t1) if swapped else (t1, t2)

    tri_lookup = {frozenset(t): i for i, t in enumerate(mesh.triangles.tolist())}
    cell0 = nv + 2 * len(space.edges)
    for t, tri in enumerate(mesh.triangles.tolist()):
        image = frozenset(int(vertex_perm[v]) for v in tri)
        t2 = tri_lookup.get(image)
        if t2 is None:
            raise InvalidSpec("vertex permutation is not a mesh automorphism")
        perm[cell0 + t] = cell0 + t2
    return perm
