"""Shared helpers: hand-built miniature meshes and dense oracles.

The miniature meshes keep every structural quantity countable by hand;
the dense oracles recompute the sparse results with plain numpy so the
expected values are independent of the code under test.
"""

import math

import numpy as np
import pytest

from biharmeig.meshgen import Mesh, SectorSpec, sector_mesh
from biharmeig.space import build_space


def single_triangle_mesh() -> Mesh:
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    bedges = np.array([[0, 1], [1, 2], [2, 0]])
    return Mesh(verts, tris, bedges, ["wall"] * 3)


def two_triangle_mesh() -> Mesh:
    """Unit square split along the diagonal."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    bedges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    return Mesh(verts, tris, bedges, ["wall"] * 4)


def tiny_sector_space(theta_deg: float = 60.0, h1: float = 0.9,
                      rho1: float = 1e-2, variant: str = "inner"):
    mesh = sector_mesh(SectorSpec(math.radians(theta_deg), h1, rho1, variant))
    return build_space(mesh)


def dense_blocks(system):
    """Dense (S, M_hat, K_hat) of the reduced pencil, built with numpy
    only: S = K M^-1 K^T on interior rows."""
    m = system.mass.toarray()
    k = system.coupling.toarray()
    s = k @ np.linalg.solve(m, k.T)
    return s, system.mass_in.toarray(), system.stiffness_in.toarray()


def dense_pencil_eigs(s, b):
    """Ascending eigenvalues and vectors of S x = lambda B x via the
    symmetric Cholesky reduction.

    The reduction runs on S, not B: eigh computes the LARGEST
    eigenvalues of the reduced matrix to full relative accuracy, and
    those are the reciprocals of the small pencil eigenvalues this
    suite compares against.  Reducing on B instead would smear the
    smallest eigenvalue by eps times the largest one."""
    l = np.linalg.cholesky(s)
    linv = np.linalg.inv(l)
    mu, z = np.linalg.eigh(linv @ b @ linv.T)
    lam = 1.0 / mu[::-1]
    x = linv.T @ z[:, ::-1]
    # B-normalize so eigenvector comparisons are scale-free
    for j in range(x.shape[1]):
        x[:, j] /= math.sqrt(x[:, j] @ b @ x[:, j])
    return lam, x


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
