"""Inverse iteration on the mixed block system.

One LU factorization of the symmetric indefinite block operator serves
every eigenvalue extraction on that mesh: each inverse-iteration step
solves the block system with right-hand side (0, -B u), which maps u to
S^{-1} B u for the positive definite Schur complement S = K M^{-1} K^T.
The Rayleigh quotient comes for free from the identity S u' = B u, so
no matrix-vector product with S is ever formed.

Optional hooks restrict the iteration to an invariant subspace: deflate
removes converged eigenvectors in the B inner product, and project
applies a caller-supplied linear projector after every step (used for
mirror-parity splitting on symmetric meshes, where the projector
commutes with both S and B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BlockSystem
from .errors import NonConvergence, SingularSystem


@dataclass(frozen=True)
class SolverConfig:
    problem: str = "clamped"
    tol: float = 1e-12
    max_iter: int = 500
    seed: int = 0


@dataclass
class EigenPair:
    """Converged mode: value, interior-dof eigenvector u, full-space
    auxiliary field v (the weak laplacian of u), and diagnostics.
    history records the Rayleigh quotient at every iteration."""

    value: float
    u: np.ndarray
    v: np.ndarray
    residual: float
    iterations: int
    problem: str
    history: tuple[float, ...] = ()


class Factorization:
    """LU of the block operator, shared across eigenpair extractions.

    The block is factored in symmetrically equilibrated variables: the
    auxiliary-field dofs carry diag(M)^(-1/2), the primal dofs the
    reciprocal row norms of the rescaled coupling.  Deeply graded
    meshes make the raw block span twenty decades, which defeats plain
    LU; the scaling is exact algebra and restores full solve accuracy.
    """

    def __init__(self, system: BlockSystem):
        self.system = system
        d1 = 1.0 / np.sqrt(system.mass.diagonal())
        c1 = system.coupling.multiply(d1[np.newaxis, :]).tocsr()
        d2 = 1.0 / np.abs(c1).max(axis=1).toarray().ravel()
        m11 = system.mass.multiply(d1[:, np.newaxis]).multiply(d1[np.newaxis, :])
        c2 = c1.multiply(d2[:, np.newaxis])
        block = sp.bmat([[m11, c2.T], [c2, None]], format="csc")
        try:
            self._lu = spla.splu(block)
        except RuntimeError as exc:
            raise SingularSystem(f"block factorization failed: {exc}") from exc
        self._d1 = d1
        self._d2 = d2

    def solve(self, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve the block system with right-hand side (0, b),
        returning the two solution blocks (v, u)."""
        n = self.system.n
        rhs = np.concatenate([np.zeros(n), self._d2 * b])
        sol = self._lu.solve(rhs)
        return self._d1 * sol[:n], self._d2 * sol[n:]

    def step(self, bu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Inverse-iteration step: solve with right-hand side (0, -bu),
        giving (v, u) with S u = bu."""
        return self.solve(-bu)


def factorize(system: BlockSystem) -> Factorization:
    """Factor the block operator once for reuse across solves."""
    return Factorization(system)


def _b_normalize(b_mat: sp.spmatrix, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    bu = b_mat @ u
    nrm = np.sqrt(u @ bu)
    return u / nrm, bu / nrm, nrm


def smallest_eigenpair(system: BlockSystem, problem: str | None = None,
                       config: SolverConfig = SolverConfig(),
                       factorization: Factorization | None = None,
                       project=None,
                       deflate: list[EigenPair] | None = None) -> EigenPair:
    """Smallest eigenvalue of S u = L B u by inverse iteration.

    problem defaults to config.problem.  deflate holds converged pairs
    to sweep out in the B inner product; project is applied to the
    iterate after every step and must commute with the operator (a
    symmetry projector).  Corrections applied to the iterate are applied
    to the auxiliary field too (via each pair's v, and project.full when
    the projector provides it), keeping the first block row satisfied
    by the returned pair.
    """
    if problem is None:
        problem = config.problem
    if factorization is None:
        factorization = Factorization(system)
    b_mat = system.rhs_matrix(problem)
    n0 = system.n_interior
    rng = np.random.default_rng(config.seed)
    u = rng.standard_normal(n0)
    project_full = getattr(project, "full", None)

    def clean(w, vw=None):
        if deflate:
            for p in deflate:
                coef = p.u @ (b_mat @ w)
                w = w - coef * p.u
                if vw is not None:
                    vw = vw - coef * p.v
        if project is not None:
            w = project(w)
            if vw is not None and project_full is not None:
                vw = project_full(vw)
        return w, vw

    u, _ = clean(u)
    u, bu, _ = _b_normalize(b_mat, u)
    lam_prev = np.inf
    v_new = None
    history = []
    converged = False
    for it in range(1, config.max_iter + 1):
        v_raw, u_raw = factorization.step(bu)
        u_next, v_next = clean(u_raw, v_raw)
        bu_next = b_mat @ u_next
        # S u_raw = bu, and the projector commutes, so the Rayleigh
        # quotient of u_next needs no extra operator application
        lam = (u_next @ bu) / (u_next @ bu_next)
        history.append(float(lam))
        nrm = np.sqrt(u_next @ bu_next)
        resid = np.linalg.norm(bu - lam * (b_mat @ u_raw)) / (lam * nrm)
        u, bu = u_next / nrm, bu_next / nrm
        v_new = v_next / nrm
        delta = abs(lam - lam_prev)
        if delta <= config.tol * abs(lam):
            converged = True
            break
        lam_prev = lam

    # sign convention: the largest-magnitude entry of u is positive
    peak = np.argmax(np.abs(u))
    if u[peak] < 0.0:
        u, v_new, bu = -u, -v_new, -bu
    pair = EigenPair(float(lam), u, v_new, float(resid), it, problem,
                     tuple(history))
    if not converged:
        raise NonConvergence(
            f"inverse iteration did not settle in {config.max_iter} steps "
            f"(last value {lam:.6e}, last change {delta:.2e})",
            best=pair)
    return pair


def second_eigenpair(system: BlockSystem, first: EigenPair,
                     problem: str | None = None,
                     config: SolverConfig = SolverConfig(),
                     factorization: Factorization | None = None,
                     project=None) -> EigenPair:
    """Next eigenvalue above a converged first pair, by deflation."""
    return smallest_eigenpair(system, problem, config, factorization,
                              project=project, deflate=[first])


def rayleigh_value(system: BlockSystem, pair: EigenPair) -> float:
    """Recompute the eigenvalue as (v' M v) / (u' B u); agrees with
    pair.value to roundoff and is used as a cross-check."""
    num = pair.v @ (system.mass @ pair.v)
    den = pair.u @ (system.rhs_matrix(pair.problem) @ pair.u)
    return float(num / den)


def laplace_smallest(system: BlockSystem) -> float:
    """Smallest Dirichlet eigenvalue of -laplacian on the same mesh and
    space (a second-order sanity anchor for the assembled matrices)."""
    vals = spla.eigsh(system.stiffness_in, k=1, M=system.mass_in,
                      sigma=0.0, which='LM', return_eigenvectors=False)
    return float(vals[0])
