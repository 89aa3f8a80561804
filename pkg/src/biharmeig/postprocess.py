"""Eigenfunction analysis: corner-trace oscillation and mirror parity.

The oscillation study samples the eigenfunction along the corner
bisector at geometrically spaced radii, refines every sign change to a
zero position s_n and every inter-zero interval to a signed extremum
(r_n, t_n), and compares consecutive ratios against the limits
predicted by the corner exponent.  Sign changes whose neighborhood
amplitude sits below the round-off floor are treated as noise and
dropped.

Parity classification relies on meshes whose vertex sets close exactly
under mirror reflection, so a dof permutation realizes the reflection
and symmetry defects are measured without any interpolation.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_system, shape_values
from .corner import CornerExponent, ratios
from .eigensolver import EigenPair, SolverConfig, factorize, smallest_eigenpair
from .errors import AsymmetricMesh, InvalidSpec, PointLocationFailure
from .meshgen import DumbbellSpec, dumbbell_mesh
from .space import FunctionSpace, build_space, dof_permutation

# reporting floor: |u| below NOISE_FLOOR x max|u| is untrustworthy;
# a sign flip is kept only if at least one flanking sample clears it.
# The equilibrated block solve keeps corner coefficients accurate in
# relative terms, so amplitudes stay meaningful down to where double
# arithmetic underflows: local scale s loses its sign once s * eps
# drops under the smallest normal number, near 1e-292.
NOISE_FLOOR = 1e-290

# geometric samples per expected inter-zero factor along the ray
SAMPLES_PER_INTERVAL = 40
FALLBACK_RATIO = 10.0


class PointLocator:
    """Triangle lookup for ray points, bucketed by distance from the
    corner (the meshes are ring-graded, so the window around a query
    radius holds O(1) triangles); falls back to a full scan."""

    def __init__(self, space: FunctionSpace):
        self.space = space
        mesh = space.mesh
        if mesh.corner is None:
            raise InvalidSpec("mesh has no corner metadata")
        self.origin = mesh.vertices[mesh.corner]
        p = mesh.vertices[mesh.triangles]
        self.pts = p
        cen = p.mean(axis=1) - self.origin
        self.radius = np.linalg.norm(cen, axis=1)
        self.order = np.argsort(self.radius)
        self.sorted_radius = self.radius[self.order]
        # widest relative ring span the grading contract allows
        self.window = 1.0 + 3.0 * (mesh.h1 or 0.5)

    def _bary(self, t: int, xy: np.ndarray) -> np.ndarray:
        p = self.pts[t]
        m = np.column_stack([p[1] - p[0], p[2] - p[0]])
        s = np.linalg.solve(m, xy - p[0])
        return np.array([1.0 - s[0] - s[1], s[0], s[1]])

    def locate(self, xy: np.ndarray) -> tuple[int, np.ndarray]:
        r = float(np.linalg.norm(xy - self.origin))
        lo = np.searchsorted(self.sorted_radius, r / self.window)
        hi = np.searchsorted(self.sorted_radius, r * self.window + 1e-30)
        for t in self.order[lo:hi]:
            b = self._bary(int(t), xy)
            if b.min() >= -1e-9:
                return int(t), np.clip(b, 0.0, None)
        for t in range(len(self.pts)):
            b = self._bary(t, xy)
            if b.min() >= -1e-9:
                return t, np.clip(b, 0.0, None)
        raise PointLocationFailure(f"point {xy.tolist()} at radius {r:.3e} "
                                   f"lies outside every triangle")


@dataclass
class BisectorProfile:
    """Samples of the max-normalized eigenfunction along the corner
    bisector, radii strictly decreasing."""

    radii: np.ndarray
    values: np.ndarray
    element_trace: np.ndarray
    r_min: float
    r_max: float


@dataclass
class RayField:
    """Evaluator of one eigenfunction along the bisector ray."""

    space: FunctionSpace
    coeffs: np.ndarray     # full dof vector, max-normalized
    locator: PointLocator
    direction: np.ndarray

    @classmethod
    def build(cls, pair: EigenPair, space: FunctionSpace) -> "RayField":
        full = np.zeros(space.ndof)
        full[space.interior] = pair.u
        peak = np.abs(full).max()
        if peak == 0.0:
            raise InvalidSpec("zero eigenvector")
        full /= peak
        loc = PointLocator(space)
        return cls(space, full, loc, np.asarray(space.mesh.bisector, dtype=float))

    def __call__(self, r: float) -> float:
        xy = self.locator.origin + r * self.direction
        t, b = self.locator.locate(xy)
        return float(shape_values(b) @ self.coeffs[self.space.ldofs[t]])

    def at(self, r: float) -> tuple[float, int]:
        xy = self.locator.origin + r * self.direction
        t, b = self.locator.locate(xy)
        return float(shape_values(b) @ self.coeffs[self.space.ldofs[t]]), t


def evaluate_on_bisector(pair: EigenPair, space: FunctionSpace,
                         n_samples: int | None = None,
                         r_min: float | None = None, r_max: float = 0.9,
                         exponent: CornerExponent | None = None) -> BisectorProfile:
    """Sample the eigenfunction at geometric radii along the bisector.

    Default sampling places SAMPLES_PER_INTERVAL points per expected
    inter-zero factor (taken from the exponent when oscillatory, a
    factor of 10 otherwise) between r_min = rho1/2 and r_max."""
    mesh = space.mesh
    if mesh.corner is None or mesh.bisector is None:
        raise InvalidSpec("bisector sampling needs corner metadata")
    if r_min is None:
        if not mesh.rho1:
            raise InvalidSpec("no rho1 metadata to derive r_min from")
        r_min = 0.5 * mesh.rho1
    if not (0.0 < r_min < r_max):
        raise InvalidSpec(f"need 0 < r_min < r_max, got {r_min!r}, {r_max!r}")
    if n_samples is None:
        ratio = FALLBACK_RATIO
        if exponent is not None and exponent.oscillatory:
            ratio = ratios(exponent)[0]
        span = math.log(r_max / r_min) / math.log(ratio)
        n_samples = max(SAMPLES_PER_INTERVAL,
                        math.ceil(SAMPLES_PER_INTERVAL * span))
    fld = RayField.build(pair, space)
    rr = np.geomspace(r_max, r_min, n_samples)
    vals = np.empty(n_samples)
    trace = np.empty(n_samples, dtype=np.int64)
    for i, r in enumerate(rr):
        vals[i], trace[i] = fld.at(float(r))
    return BisectorProfile(rr, vals, trace, r_min, r_max)


def _bisect_zero(fld: RayField, lo: float, hi: float,
                 flo: float, rel_tol: float = 1e-12) -> float:
    # invariant: sign change inside [lo, hi], sign(f(lo)) = sign(flo)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if (hi - lo) <= rel_tol * mid:
            break
        fm = fld(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def find_zeros(profile: BisectorProfile, space: FunctionSpace,
               pair: EigenPair) -> list[float]:
    """Zero positions s_n, decreasing, refined on the element
    interpolant; flips buried under the noise floor are dropped."""
    fld = RayField.build(pair, space)
    rr, vv = profile.radii, profile.values
    out = []
    for i in range(len(rr) - 1):
        a, b = vv[i], vv[i + 1]
        if a == 0.0 or (a > 0) == (b > 0):
            continue
        if max(abs(a), abs(b)) < NOISE_FLOOR:
            continue
        out.append(_bisect_zero(fld, rr[i + 1], rr[i], b))
    return sorted(out, reverse=True)


def _golden_extremum(fld: RayField, lo: float, hi: float,
                     rel_tol: float = 1e-6) -> tuple[float, float]:
    # golden-section on -|u| in log radius
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = abs(fld(math.exp(c))), abs(fld(math.exp(d)))
    while (b - a) > rel_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = abs(fld(math.exp(c)))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = abs(fld(math.exp(d)))
    r = math.exp(0.5 * (a + b))
    return r, fld(r)


def find_extrema(profile: BisectorProfile, space: FunctionSpace,
                 pair: EigenPair,
                 zeros: list[float] | None = None) -> list[tuple[float, float]]:
    """One signed extremum (r_n, t_n) per inter-zero interval: r_n
    follows s_n on the way to the corner, so the innermost interval is
    closed by the profile start, not by a zero.  The main lobe outside
    the first zero is not part of the oscillation and is skipped.
    Sub-floor intervals are omitted.  Ordered outermost first."""
    if zeros is None:
        zeros = find_zeros(profile, space, pair)
    fld = RayField.build(pair, space)
    bounds = list(zeros) + [profile.r_min]
    out = []
    for hi, lo in zip(bounds[:-1], bounds[1:]):
        pad = (hi / lo) ** 0.02
        r, t = _golden_extremum(fld, lo * pad, hi / pad)
        if abs(t) < NOISE_FLOOR:
            continue
        out.append((r, t))
    return out


@dataclass
class OscillationReport:
    """Zero/extremum table for one eigenfunction trace with consecutive
    ratios and the exponent-predicted limits."""

    s: list[float]
    r: list[float]
    t: list[float]
    s_ratios: list[float] = field(default_factory=list)
    r_ratios: list[float] = field(default_factory=list)
    t_ratios: list[float] = field(default_factory=list)
    predicted_zero_ratio: float | None = None
    predicted_extremum_ratio: float | None = None


def oscillation_report(zeros: list[float],
                       extrema: list[tuple[float, float]],
                       exponent: CornerExponent) -> OscillationReport:
    rs = [r for r, _ in extrema]
    ts = [t for _, t in extrema]
    # interlacing: r_n follows s_n toward the corner, before s_{n+1}
    for n, r in enumerate(rs):
        hi = zeros[n] if n < len(zeros) else None
        lo = zeros[n + 1] if n + 1 < len(zeros) else 0.0
        if hi is None or not (lo < r < hi):
            raise InvalidSpec(f"extremum {r!r} does not interlace the zeros")
    for t_a, t_b in zip(ts, ts[1:]):
        if (t_a > 0) == (t_b > 0):
            raise InvalidSpec("consecutive extrema do not alternate in sign")
    rep = OscillationReport(list(zeros), rs, ts)
    rep.s_ratios = [a / b for a, b in zip(zeros, zeros[1:])]
    rep.r_ratios = [a / b for a, b in zip(rs, rs[1:])]
    rep.t_ratios = [abs(a / b) for a, b in zip(ts, ts[1:])]
    if exponent.oscillatory:
        rep.predicted_zero_ratio, rep.predicted_extremum_ratio = ratios(exponent)
    return rep


# ---------------------------------------------------------------- parity

def vertex_mirror_permutation(mesh, axis: int = 0) -> np.ndarray:
    """Vertex permutation realizing reflection of coordinate `axis`.

    Requires the vertex set to be exactly closed under the reflection
    (bitwise), which the dumbbell generator guarantees."""
    table = {(float(x), float(y)): i
             for i, (x, y) in enumerate(mesh.vertices)}
    perm = np.empty(mesh.num_vertices, dtype=np.int64)
    for i, (x, y) in enumerate(mesh.vertices):
        key = (float(-x), float(y)) if axis == 0 else (float(x), float(-y))
        j = table.get(key)
        if j is None:
            raise AsymmetricMesh(f"vertex {i} at ({x!r}, {y!r}) has no "
                                 f"mirror partner across axis {axis}")
        perm[i] = j
    return perm


def _restrict_involution(space: FunctionSpace, full: np.ndarray) -> np.ndarray:
    pos = -np.ones(space.ndof, dtype=np.int64)
    pos[space.interior] = np.arange(space.n_interior)
    sigma = pos[full[space.interior]]
    if (sigma < 0).any():
        raise AsymmetricMesh("mirror image of an interior dof is constrained")
    return sigma


def interior_mirror(space: FunctionSpace, axis: int = 0) -> np.ndarray:
    """Mirror involution restricted to interior dof positions."""
    vperm = vertex_mirror_permutation(space.mesh, axis)
    full = dof_permutation(space, vperm)
    return _restrict_involution(space, full)


@dataclass
class Parity:
    kind: str      # "even" | "odd" | "indeterminate"
    score: float


def parity(pair: EigenPair, space: FunctionSpace, axis: int = 0) -> Parity:
    """Classify an eigenfunction by its mirror symmetry defect."""
    sigma = interior_mirror(space, axis)
    u = pair.u
    nrm = np.linalg.norm(u)
    even_score = np.linalg.norm(u[sigma] - u) / nrm
    odd_score = np.linalg.norm(u[sigma] + u) / nrm
    if even_score < 0.01:
        return Parity("even", float(even_score))
    if odd_score < 0.01:
        return Parity("odd", float(odd_score))
    return Parity("indeterminate", float(min(even_score, odd_score)))


class MirrorProjector:
    """Averaging projector onto one mirror-parity class.

    Calling the projector acts on interior-dof vectors (the eigensolver
    projection hook); full() acts on full-dof vectors so the solver can
    keep the auxiliary field consistent with the projected iterate.
    """

    def __init__(self, space: FunctionSpace, kind: str, axis: int = 0):
        if kind not in ("even", "odd"):
            raise InvalidSpec(f"parity kind must be even or odd, got {kind!r}")
        vperm = vertex_mirror_permutation(space.mesh, axis)
        self._full = dof_permutation(space, vperm)
        self._sigma = _restrict_involution(space, self._full)
        self.kind = kind
        self.sign = 1.0 if kind == "even" else -1.0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return 0.5 * (u + self.sign * u[self._sigma])

    def full(self, w: np.ndarray) -> np.ndarray:
        return 0.5 * (w + self.sign * w[self._full])


def parity_projector(space: FunctionSpace, kind: str, axis: int = 0) -> MirrorProjector:
    """Projector onto the even or odd mirror subspace, for use as an
    eigensolver projection hook."""
    return MirrorProjector(space, kind, axis)


@dataclass
class ParityRow:
    """One sweep row: smallest eigenvalue of each parity class on the
    dumbbell with neck parameter c, and their ratio.  crossing marks
    rows where the ratio moved across 1 since the previous row."""

    c: float
    lam_even: float
    lam_odd: float
    ratio: float
    block_dim: int
    crossing: bool = False


def _parity_point(task) -> tuple[float, float, float, int]:
    c, nx, ny, config = task
    mesh = dumbbell_mesh(DumbbellSpec(c, nx, ny))
    space = build_space(mesh)
    system = assemble_system(space)
    fact = factorize(system)
    even = smallest_eigenpair(system, config=config, factorization=fact,
                              project=MirrorProjector(space, "even"))
    odd = smallest_eigenpair(system, config=config, factorization=fact,
                             project=MirrorProjector(space, "odd"))
    return c, even.value, odd.value, system.block_dim


def parity_sweep(c_values, nx: int, ny: int,
                 config: SolverConfig = SolverConfig(),
                 threads: int = 1) -> list[ParityRow]:
    """Even/odd eigenvalue pair of the dumbbell for every neck value.

    Each parity class is solved with its mirror projector, so the two
    values stay separated even where the classes nearly cross.  Rows
    are returned in input order regardless of worker count.
    """
    tasks = [(float(c), nx, ny, config) for c in c_values]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_parity_point, tasks))
    else:
        points = [_parity_point(t) for t in tasks]
    rows: list[ParityRow] = []
    prev = None
    for c, lam_e, lam_o, nb in points:
        ratio = lam_e / lam_o
        crossing = prev is not None and (prev - 1.0) * (ratio - 1.0) < 0.0
        rows.append(ParityRow(c, lam_e, lam_o, ratio, nb, crossing))
        prev = ratio
    return rows
