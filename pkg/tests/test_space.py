"""Cubic space layout: dof counts, placement, clamping, permutations."""

import math

import numpy as np
import pytest

from biharmeig.errors import InvalidSpec
from biharmeig.meshgen import DumbbellSpec, SectorSpec, dumbbell_mesh, sector_mesh
from biharmeig.space import build_space, dof_permutation

from conftest import single_triangle_mesh, two_triangle_mesh


def test_single_triangle_counts():
    space = build_space(single_triangle_mesh())
    # 3 vertices + 2 per edge * 3 edges + 1 centroid
    assert space.ndof == 10
    assert space.n_d == 9
    assert space.n_i == 1
    # the only free dof is the centroid
    assert space.dof_kind[space.interior[0]] == 2
    assert space.dof_coords[space.interior[0]] == pytest.approx([1 / 3, 1 / 3])


def test_two_triangle_counts():
    space = build_space(two_triangle_mesh())
    # 4 vertices, 5 edges, 2 cells
    assert space.ndof == 4 + 10 + 2
    assert len(space.edges) == 5
    # free: the 2 centroids plus 2 dofs on the untagged diagonal
    assert space.n_i == 4
    kinds = sorted(space.dof_kind[space.interior].tolist())
    assert kinds == [1, 1, 2, 2]


def test_counts_match_euler_data():
    for mesh in (sector_mesh(SectorSpec(1.2, 0.35, 1e-2)),
                 dumbbell_mesh(DumbbellSpec(0.6, 10, 4))):
        space = build_space(mesh)
        ne = len(space.edges)
        assert space.ndof == mesh.num_vertices + 2 * ne + mesh.num_triangles
        assert space.n_i + space.n_d == space.ndof
        assert space.n_interior == space.n_i


def test_dof_indexing_helpers():
    mesh = two_triangle_mesh()
    space = build_space(mesh)
    nv, ne = mesh.num_vertices, len(space.edges)
    for v in range(nv):
        assert space.vertex_dof(v) == v
    for e in range(ne):
        d1, d2 = space.edge_dofs(e)
        assert (d1, d2) == (nv + 2 * e, nv + 2 * e + 1)
        pa, pb = mesh.vertices[space.edges[e]]
        assert space.dof_coords[d1] == pytest.approx((2 * pa + pb) / 3)
        assert space.dof_coords[d2] == pytest.approx((pa + 2 * pb) / 3)
    for t in range(mesh.num_triangles):
        d = space.cell_dof(t)
        assert d == nv + 2 * ne + t
        assert space.dof_coords[d] == pytest.approx(
            mesh.vertices[mesh.triangles[t]].mean(axis=0))


def test_shared_edge_dofs_coincide():
    """Adjacent triangles address the same two dofs on their common edge."""
    mesh = two_triangle_mesh()
    space = build_space(mesh)
    t0, t1 = space.ldofs
    common = set(t0[3:9]) & set(t1[3:9])
    assert len(common) == 2
    # and their coordinates are the third points of the diagonal 0-2
    got = np.array(sorted(space.dof_coords[d].tolist() for d in common))
    assert np.allclose(got, [[1 / 3, 1 / 3], [2 / 3, 2 / 3]])


def test_local_dof_coords_are_consistent(rng):
    """ldofs placement agrees with dof_coords on every triangle."""
    mesh = sector_mesh(SectorSpec(2.0, 0.45, 1e-2, "outer"))
    space = build_space(mesh)
    # local nodes: vertices 0..2, edge third-points per slot, centroid
    for t in rng.integers(0, mesh.num_triangles, size=25):
        tri = mesh.triangles[t]
        p = mesh.vertices[tri]
        ld = space.ldofs[t]
        assert np.allclose(space.dof_coords[ld[:3]], p)
        # edge pairs run along the local slot direction
        for s, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            assert space.dof_coords[ld[3 + 2 * s]] == pytest.approx(
                (2 * p[a] + p[b]) / 3)
            assert space.dof_coords[ld[4 + 2 * s]] == pytest.approx(
                (p[a] + 2 * p[b]) / 3)
        assert space.dof_coords[ld[9]] == pytest.approx(p.mean(axis=0))


def test_clamping_covers_boundary_only():
    mesh = sector_mesh(SectorSpec(math.radians(90), 0.4, 1e-2))
    space = build_space(mesh)
    rim_verts = set(np.unique(mesh.boundary_edges).tolist())
    for d in range(space.ndof):
        x, y = space.dof_coords[d]
        if space.dof_kind[d] == 2:
            assert not space.is_dirichlet[d]
    for v in range(mesh.num_vertices):
        assert space.is_dirichlet[v] == (v in rim_verts)
    # every tagged edge contributes both of its interior dofs
    tagged = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    for e, pair in enumerate(space.edges.tolist()):
        expect = tuple(pair) in tagged
        d1, d2 = space.edge_dofs(e)
        assert space.is_dirichlet[d1] == expect
        assert space.is_dirichlet[d2] == expect


def test_interior_index_is_permutation():
    space = build_space(sector_mesh(SectorSpec(1.0, 0.5, 1e-2)))
    idx = space.interior_index
    assert sorted(idx.tolist()) == list(range(space.ndof))
    assert np.array_equal(idx[:space.n_i], space.interior)
    assert not space.is_dirichlet[idx[:space.n_i]].any()
    assert space.is_dirichlet[idx[space.n_i:]].all()


def test_unknown_boundary_edge_rejected():
    mesh = two_triangle_mesh()
    # (1, 3) is the square's other diagonal, absent from the triangulation
    mesh.boundary_edges = np.array([[1, 3]] + mesh.boundary_edges.tolist()[1:])
    with pytest.raises(InvalidSpec, match="boundary edge"):
        build_space(mesh)


def test_dof_permutation_mirror():
    """The y-mirror of a symmetric dumbbell lifts to a dof involution
    that maps each dof to the dof at the mirrored coordinates."""
    mesh = dumbbell_mesh(DumbbellSpec(0.8, 8, 4))
    space = build_space(mesh)
    mirrored = mesh.vertices * np.array([1.0, -1.0])

    def key(x, y):
        # +0.0 collapses the signed zero the mirror produces
        return f"{x + 0.0:.15g}", f"{y + 0.0:.15g}"

    lookup = {key(x, y): i for i, (x, y) in enumerate(mesh.vertices)}
    vperm = np.array([lookup[key(x, y)] for x, y in mirrored])
    perm = dof_permutation(space, vperm)
    assert sorted(perm.tolist()) == list(range(space.ndof))
    target = space.dof_coords * np.array([1.0, -1.0])
    assert np.allclose(space.dof_coords[perm], target, atol=1e-14)
    # involution: mirroring twice is the identity
    assert np.array_equal(perm[perm], np.arange(space.ndof))


def test_dof_permutation_rejects_non_automorphism():
    space = build_space(two_triangle_mesh())
    bad = np.array([1, 0, 2, 3])
    with pytest.raises(InvalidSpec, match="automorphism"):
        dof_permutation(space, bad)
