"""Matrix assembly for the mixed formulation of plate eigenproblems.

The fourth-order problem is split into two coupled second-order ones by
introducing w = laplacian(u).  With cubic Lagrange elements for both
fields this leads to the symmetric indefinite block system

    [ M  K^T ] [w]      [ 0 ]
    [ K   0  ] [u] = -L [B u]

where M is the full mass matrix, K the stiffness matrix with test
functions restricted to the clamped (interior) dofs, and B is the
interior mass matrix for the vibration problem or the interior
stiffness matrix for the buckling problem.  Eliminating w gives
S u = L B u with S = K M^{-1} K^T symmetric positive definite, so all
eigenvalues are positive; the normal-derivative boundary condition is
imposed weakly through the first block row.

Shape functions are plain cubics on the reference triangle; mass and
stiffness use one precomputed reference tensor each, contracted against
per-triangle geometry, so assembly is a handful of vectorized einsums.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import QuadratureError
from .quadrature import triangle_rule
from .space import FunctionSpace

# barycentric coordinates of the 10 local nodes, in ldofs order
LOCAL_NODES = np.array([
    [3, 0, 0], [0, 3, 0], [0, 0, 3],
    [2, 1, 0], [1, 2, 0],
    [0, 2, 1], [0, 1, 2],
    [1, 0, 2], [2, 0, 1],
    [1, 1, 1],
]) / 3.0

# (vertex slot i, vertex slot j) for each edge node, nearer i
_EDGE_NODE = ((0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2))


def shape_values(bary: np.ndarray) -> np.ndarray:
    """Cubic shape functions at barycentric points (..., 3) -> (..., 10)."""
    b = np.asarray(bary, dtype=float)
    out = np.empty(b.shape[:-1] + (10,))
    for i in range(3):
        bi = b[..., i]
        out[..., i] = 0.5 * bi * (3.0 * bi - 1.0) * (3.0 * bi - 2.0)
    for k, (i, j) in enumerate(_EDGE_NODE):
        out[..., 3 + k] = 4.5 * b[..., i] * b[..., j] * (3.0 * b[..., i] - 1.0)
    out[..., 9] = 27.0 * b[..., 0] * b[..., 1] * b[..., 2]
    return out


def shape_bary_derivs(bary: np.ndarray) -> np.ndarray:
    """Derivatives w.r.t. barycentric coordinates, (..., 3) -> (..., 10, 3)."""
    b = np.asarray(bary, dtype=float)
    out = np.zeros(b.shape[:-1] + (10, 3))
    for i in range(3):
        bi = b[..., i]
        out[..., i, i] = 0.5 * (27.0 * bi * bi - 18.0 * bi + 2.0)
    for k, (i, j) in enumerate(_EDGE_NODE):
        bi, bj = b[..., i], b[..., j]
        out[..., 3 + k, i] = 4.5 * (6.0 * bi - 1.0) * bj
        out[..., 3 + k, j] = 4.5 * bi * (3.0 * bi - 1.0)
    out[..., 9, 0] = 27.0 * b[..., 1] * b[..., 2]
    out[..., 9, 1] = 27.0 * b[..., 0] * b[..., 2]
    out[..., 9, 2] = 27.0 * b[..., 0] * b[..., 1]
    return out


@lru_cache(maxsize=1)
def _reference_tensors() -> tuple[np.ndarray, np.ndarray]:
    """(Mref, Q): mass on the unit-area reference element and the
    stiffness contraction tensor Q[k,l,m,n] = sum_q w_q D_qkm D_qln."""
    pts, w = triangle_rule()
    phi = shape_values(pts)
    dphi = shape_bary_derivs(pts)
    mref = np.einsum('q,qk,ql->kl', w, phi, phi)
    q = np.einsum('q,qkm,qln->klmn', w, dphi, dphi)
    return mref, q


def _geometry(space: FunctionSpace) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle doubled area and unscaled barycentric gradients."""
    p = space.mesh.vertices[space.mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    a2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if not (a2 > 0.0).all():
        raise QuadratureError("triangle with non-positive Jacobian")
    g = np.empty((len(a2), 3, 2))
    g[:, 1, 0] = e2[:, 1]
    g[:, 1, 1] = -e2[:, 0]
    g[:, 2, 0] = -e1[:, 1]
    g[:, 2, 1] = e1[:, 0]
    g[:, 0] = -g[:, 1] - g[:, 2]
    return a2, g


def _scatter(space: FunctionSpace, local: np.ndarray) -> sp.csr_matrix:
    ld = space.ldofs
    rows = np.repeat(ld, 10, axis=1).ravel()
    cols = np.tile(ld, (1, 10)).ravel()
    n = space.ndof
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return ((mat + mat.T) * 0.5).tocsr()


def assemble_mass(space: FunctionSpace) -> sp.csr_matrix:
    mref, _ = _reference_tensors()
    a2, _g = _geometry(space)
    local = 0.5 * a2[:, None, None] * mref[None, :, :]
    return _scatter(space, local)


def assemble_stiffness(space: FunctionSpace) -> sp.csr_matrix:
    _mref, q = _reference_tensors()
    a2, g = _geometry(space)
    c = np.einsum('tmx,tnx->tmn', g, g)
    local = np.einsum('klmn,tmn->tkl', q, c) / (2.0 * a2)[:, None, None]
    return _scatter(space, local)


@dataclass
class BlockSystem:
    """Assembled operator of the mixed eigenproblem on one mesh."""

    space: FunctionSpace
    mass: sp.csr_matrix        # full (n, n)
    stiffness: sp.csr_matrix   # full (n, n)
    coupling: sp.csr_matrix    # (n0, n): stiffness rows at interior dofs
    mass_in: sp.csr_matrix     # (n0, n0)
    stiffness_in: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.space.ndof

    @property
    def n_interior(self) -> int:
        return self.space.n_interior

    @property
    def block_dim(self) -> int:
        return self.n + self.n_interior

    def block(self) -> sp.csc_matrix:
        return sp.bmat([[self.mass, self.coupling.T],
                        [self.coupling, None]], format='csc')

    def rhs_matrix(self, problem: str) -> sp.csr_matrix:
        """Interior-space matrix B: mass for 'clamped' vibration,
        stiffness for 'buckling'."""
        if problem == "clamped":
            return self.mass_in
        if problem == "buckling":
            return self.stiffness_in
        raise ValueError(f"unknown problem {problem!r}")


def assemble_system(space: FunctionSpace) -> BlockSystem:
    mass = assemble_mass(space)
    stiff = assemble_stiffness(space)
    ii = space.interior
    coupling = stiff[ii, :]
    mass_in = mass[ii][:, ii].tocsr()
    stiff_in = stiff[ii][:, ii].tocsr()
    return BlockSystem(space, mass, stiff, coupling.tocsr(), mass_in, stiff_in)


def buckling_rhs(space: FunctionSpace) -> sp.csr_matrix:
    """Interior principal block of the stiffness matrix, the right-hand
    side operator of the buckling pencil."""
    ii = space.interior
    return assemble_stiffness(space)[ii][:, ii].tocsr()


def dump_matrices(system: BlockSystem, directory) -> None:
    """Write mass, stiffness, and coupling blocks as 'i j value' text
    files for cross-checking with external tools."""
    os.makedirs(directory, exist_ok=True)
    for name, mat in (("mass", system.mass),
                      ("stiffness", system.stiffness),
                      ("coupling", system.coupling)):
        coo = mat.tocoo()
        path = os.path.join(directory, f"{name}.txt")
        with open(path, "w") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17g}\n")
