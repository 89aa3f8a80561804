"""Graded triangle meshes for plate eigenproblem domains.

Three families are generated, all structured and deterministic:

* circular sectors of opening angle theta with vertices graded
  geometrically toward the corner (element size ~ h1 * r down to a
  uniformly meshed core disk of radius rho1), in an inscribed variant
  whose arc vertices lie on the unit circle and a circumscribed variant
  whose arc chords are tangent to it, so that eigenvalues computed on
  the pair bracket the curved-domain value from both sides;
* the unit square, graded the same way toward the corner at the origin
  using square-shaped rings, with an extra mild radial grading toward
  the far boundary;
* mirror-symmetric dumbbells bounded by |y| = c + x^2 - x^4, meshed by
  a mapped grid whose vertex set is exactly closed under both mirror
  reflections (parity classification relies on this being bitwise).

Vertex counts are capped; generation raises rather than allocating a
mesh that would blow past the cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDomain, InvalidSpec, MeshTooLarge

VERTEX_CAP = 400_000

# mild grading depth toward the square's three far corners
SQUARE_FAR_RHO = 1e-3


@dataclass
class Mesh:
    """Conforming triangle mesh with tagged boundary.

    triangles are counterclockwise; boundary_edges[i] is a vertex pair
    lying in exactly one triangle, tagged by boundary_tags[i].  corner
    is the vertex index the grading is centered on (None when the
    domain has no distinguished corner), bisector the unit direction of
    the corner bisector.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: list[str]
    corner: int | None = None
    bisector: np.ndarray | None = None
    h1: float | None = None
    rho1: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def validate(self) -> None:
        """Check structural invariants; raises InvalidSpec on violation."""
        if self.num_vertices > VERTEX_CAP:
            raise MeshTooLarge(
                f"{self.num_vertices} vertices exceeds cap {VERTEX_CAP}")
        if self.triangles.min() < 0 or self.triangles.max() >= self.num_vertices:
            raise InvalidSpec("triangle index out of range")
        areas = self.triangle_areas()
        if not (areas > 0.0).all():
            raise InvalidSpec("triangle with non-positive area")
        # conformity: each undirected edge in at most two triangles, and
        # the single-triangle edges are exactly the tagged boundary
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        if counts.max(initial=0) > 2:
            raise InvalidSpec("edge shared by more than two triangles")
        rim = {tuple(e) for e in uniq[counts == 1]}
        tagged = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if rim != tagged:
            raise InvalidSpec("boundary edge list does not match triangulation rim")
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise InvalidSpec("boundary tag count mismatch")
        if self.corner is not None and self.h1 and self.rho1:
            self._check_grading()

    def _check_grading(self) -> None:
        # diameter(T) <= 3 * h1 * max(r_centroid, rho1)
        p = self.vertices[self.triangles]
        diam = np.maximum(
            np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
            np.maximum(np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
                       np.linalg.norm(p[:, 2] - p[:, 0], axis=1)))
        r = np.linalg.norm(p.mean(axis=1) - self.vertices[self.corner], axis=1)
        bound = 3.0 * self.h1 * np.maximum(r, self.rho1)
        if not (diam <= bound).all():
            worst = (diam / bound).max()
            raise InvalidSpec(f"grading contract violated by factor {worst:.3f}")


@dataclass(frozen=True)
class SectorSpec:
    theta: float
    h1: float
    rho1: float
    variant: str = "inner"


@dataclass(frozen=True)
class DumbbellSpec:
    c: float
    nx: int
    ny: int


def _graded_radii(rho1: float, h1: float, rmax: float,
                  rho_far: float | None = None) -> np.ndarray:
    """Radii of the ring family: uniform core, then geometric growth.

    With rho_far set, spacing also shrinks geometrically toward rmax
    (used by the square to refine mildly toward its far boundary).
    """
    ncore = math.ceil(1.0 / h1)
    core = rho1 * np.arange(1, ncore + 1) / ncore
    if rho_far is None:
        k = max(1, round(math.log(rmax / rho1) / math.log1p(h1)))
        graded = rho1 * np.exp(np.arange(1, k + 1) *
                               (math.log(rmax / rho1) / k))
        graded[-1] = rmax
        return np.concatenate([core, graded])
    mid = 0.5 * rmax
    k1 = max(1, round(math.log(mid / rho1) / math.log1p(h1)))
    up = rho1 * np.exp(np.arange(1, k1 + 1) * (math.log(mid / rho1) / k1))
    k2 = max(1, round(math.log(mid / rho_far) / math.log1p(h1)))
    down = rmax - mid * np.exp(-np.arange(1, k2 + 1) *
                               (math.log(mid / rho_far) / k2))
    down[-1] = rmax
    return np.concatenate([core, up, down])


def _ring_mesh(rings: np.ndarray, nseg: int, ring_point,
               arc_tag: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Assemble the fan + strip triangulation shared by sector and square.

    rings: radius of each ring; nseg: segments per ring (nseg + 1
    nodes); ring_point(R, j) -> (x, y) places node j of a ring.
    """
    nring = len(rings)
    nv = 1 + nring * (nseg + 1)
    if nv > VERTEX_CAP:
        raise MeshTooLarge(f"{nv} vertices exceeds cap {VERTEX_CAP}")
    verts = np.empty((nv, 2))
    verts[0] = (0.0, 0.0)

    def idx(m, j):
        return 1 + m * (nseg + 1) + j

    for m, r in enumerate(rings):
        for j in range(nseg + 1):
            verts[idx(m, j)] = ring_point(r, j)

    tris = []
    for j in range(nseg):
        tris.append((0, idx(0, j), idx(0, j + 1)))
    for m in range(nring - 1):
        for j in range(nseg):
            a, b = idx(m, j), idx(m + 1, j)
            c, d = idx(m + 1, j + 1), idx(m, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))

    bedges, btags = [], []
    for side_j, m0 in ((0, None), (nseg, None)):
        bedges.append((0, idx(0, side_j)))
        btags.append("dirichlet")
        for m in range(nring - 1):
            bedges.append((idx(m, side_j), idx(m + 1, side_j)))
            btags.append("dirichlet")
    last = nring - 1
    for j in range(nseg):
        bedges.append((idx(last, j), idx(last, j + 1)))
        btags.append(arc_tag)
    return (verts, np.array(tris, dtype=np.int32),
            np.array(bedges, dtype=np.int32), btags)


def sector_mesh(spec: SectorSpec) -> Mesh:
    """Graded mesh of the unit sector of opening angle spec.theta.

    variant="inner" inscribes the arc (vertices on the unit circle);
    variant="outer" circumscribes it (chords tangent to the circle, so
    every inner-variant vertex lies inside the outer polygon).
    """
    th, h1, rho1 = spec.theta, spec.h1, spec.rho1
    if not (0.0 < th < math.pi):
        raise InvalidSpec(f"sector angle must lie in (0, pi), got {th!r}")
    if not (0.0 < h1 < 1.0):
        raise InvalidSpec(f"h1 must lie in (0, 1), got {h1!r}")
    if not (0.0 < rho1 < 1.0):
        raise InvalidSpec(f"rho1 must lie in (0, 1), got {rho1!r}")
    if spec.variant not in ("inner", "outer"):
        raise InvalidSpec(f"unknown sector variant {spec.variant!r}")
    nseg = math.ceil(th / h1)
    dphi = th / nseg
    rmax = 1.0 if spec.variant == "inner" else 1.0 / math.cos(0.5 * dphi)
    rings = _graded_radii(rho1, h1, rmax)

    def point(r, j):
        phi = th * j / nseg
        return (r * math.cos(phi), r * math.sin(phi))

    verts, tris, bedges, btags = _ring_mesh(rings, nseg, point, "arc_dirichlet")
    mesh = Mesh(verts, tris, bedges, btags, corner=0,
                bisector=np.array([math.cos(0.5 * th), math.sin(0.5 * th)]),
                h1=h1, rho1=rho1,
                meta={"family": "sector", "theta": th, "variant": spec.variant})
    mesh.validate()
    return mesh


def square_mesh(h1: float, rho1: float) -> Mesh:
    """Graded mesh of the unit square, refined toward the origin corner.

    Rings are square-shaped (constant max(x, y)), so the sector grading
    rule applies verbatim in the corner quadrant; ring spacing also
    tightens toward the far boundary down to SQUARE_FAR_RHO, which
    grades mildly into the three far corners.
    """
    if not (0.0 < h1 < 1.0):
        raise InvalidSpec(f"h1 must lie in (0, 1), got {h1!r}")
    if not (0.0 < rho1 < 0.5):
        raise InvalidSpec(f"rho1 must lie in (0, 0.5), got {rho1!r}")
    narm = math.ceil(1.0 / h1)
    nseg = 2 * narm
    rings = _graded_radii(rho1, h1, 1.0, rho_far=SQUARE_FAR_RHO)

    def point(r, j):
        if j <= narm:
            return (r, r * j / narm)
        return (r * (nseg - j) / narm, r)

    verts, tris, bedges, btags = _ring_mesh(rings, nseg, point, "dirichlet")
    s = math.sqrt(0.5)
    mesh = Mesh(verts, tris, bedges, btags, corner=0,
                bisector=np.array([s, s]), h1=h1, rho1=rho1,
                meta={"family": "square"})
    mesh.validate()
    return mesh


def dumbbell_mesh(spec: DumbbellSpec) -> Mesh:
    """Mapped-grid mesh of the dumbbell |y| <= c + x^2 - x^4.

    The half-width vanishes at x = +-x_max, where the grid column
    collapses into a fan around a single tip vertex.  Column abscissas,
    heights and the union-jack diagonal pattern are all chosen so the
    triangulation is exactly symmetric under x -> -x and y -> -y; the
    vertex coordinates mirror bitwise.
    """
    c, nx, ny = spec.c, spec.nx, spec.ny
    if c <= 0.0:
        raise DegenerateDomain(f"waist width c must be positive, got {c!r}")
    if nx < 4 or ny < 2 or nx % 2 or ny % 2:
        raise InvalidSpec(f"nx, ny must be even with nx >= 4, ny >= 2, "
                          f"got nx={nx!r} ny={ny!r}")
    xmax = math.sqrt(0.5 * (1.0 + math.sqrt(1.0 + 4.0 * c)))
    # right half-grid, mirrored explicitly so coordinates pair bitwise
    # (vectorized x**4 is not reliably sign-symmetric at the ulp level)
    xr = np.array([xmax * (2 * i - nx) / nx for i in range(nx // 2, nx + 1)])
    x = np.concatenate([-xr[:0:-1], xr])
    x2 = xr * xr
    hr = c + x2 - x2 * x2
    half = np.concatenate([hr[:0:-1], hr])
    if not (half[1:-1] > 0.0).all():
        raise DegenerateDomain(f"height function not positive for c={c!r}")

    nv = 2 + (nx - 1) * (ny + 1)
    if nv > VERTEX_CAP:
        raise MeshTooLarge(f"{nv} vertices exceeds cap {VERTEX_CAP}")
    verts = np.empty((nv, 2))
    verts[0] = (x[0], 0.0)
    verts[1] = (x[nx], 0.0)

    def idx(i, j):
        return 2 + (i - 1) * (ny + 1) + j

    for i in range(1, nx):
        for j in range(ny + 1):
            verts[idx(i, j)] = (x[i], half[i] * (2 * j - ny) / ny)

    tris = []
    for j in range(ny):
        tris.append((0, idx(1, j), idx(1, j + 1)))
        tris.append((1, idx(nx - 1, j + 1), idx(nx - 1, j)))
    for i in range(1, nx - 1):
        for j in range(ny):
            a, b = idx(i, j), idx(i + 1, j)
            cc, d = idx(i + 1, j + 1), idx(i, j + 1)
            # diagonal pattern flips under both mirrors
            if (i >= nx // 2) != (j >= ny // 2):
                tris.append((a, b, cc))
                tris.append((a, cc, d))
            else:
                tris.append((a, b, d))
                tris.append((b, cc, d))

    bedges, btags = [], []
    for j_rim in (0, ny):
        bedges.append((0, idx(1, j_rim)))
        for i in range(1, nx - 1):
            bedges.append((idx(i, j_rim), idx(i + 1, j_rim)))
        bedges.append((idx(nx - 1, j_rim), 1))
    btags = ["dirichlet"] * len(bedges)
    mesh = Mesh(verts, np.array(tris, dtype=np.int32),
                np.array(bedges, dtype=np.int32), btags,
                meta={"family": "dumbbell", "c": c, "nx": nx, "ny": ny,
                      "xmax": xmax})
    mesh.validate()
    return mesh


def disk_mesh(nr: int, nphi: int) -> Mesh:
    """Uniform polar mesh of the unit disk (inscribed polygon).

    No corner, no grading; serves as a smooth-domain reference whose
    clamped-plate eigenvalue is known in closed form via Bessel roots.
    """
    if nr < 1 or nphi < 3:
        raise InvalidSpec(f"need nr >= 1, nphi >= 3, got nr={nr!r} nphi={nphi!r}")
    nv = 1 + nr * nphi
    if nv > VERTEX_CAP:
        raise MeshTooLarge(f"{nv} vertices exceeds cap {VERTEX_CAP}")
    verts = np.empty((nv, 2))
    verts[0] = (0.0, 0.0)

    def idx(m, j):
        return 1 + (m - 1) * nphi + (j % nphi)

    for m in range(1, nr + 1):
        r = m / nr
        for j in range(nphi):
            phi = 2.0 * math.pi * j / nphi
            verts[idx(m, j)] = (r * math.cos(phi), r * math.sin(phi))

    tris = []
    for j in range(nphi):
        tris.append((0, idx(1, j), idx(1, j + 1)))
    for m in range(1, nr):
        for j in range(nphi):
            a, b = idx(m, j), idx(m + 1, j)
            c, d = idx(m + 1, j + 1), idx(m, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))

    bedges = [(idx(nr, j), idx(nr, j + 1)) for j in range(nphi)]
    mesh = Mesh(verts, np.array(tris, dtype=np.int32),
                np.array(bedges, dtype=np.int32),
                ["arc_dirichlet"] * nphi,
                meta={"family": "disk", "nr": nr, "nphi": nphi})
    mesh.validate()
    return mesh


def save_mesh(mesh: Mesh, path: str) -> None:
    """Write the text format: 'nv nt nb' header, then vertex,
    triangle and tagged boundary edge lines."""
    with open(path, "w") as f:
        f.write(f"{mesh.num_vertices} {mesh.num_triangles} "
                f"{len(mesh.boundary_edges)}\n")
        for xy in mesh.vertices:
            f.write(f"{xy[0]:.17g} {xy[1]:.17g}\n")
        for t in mesh.triangles:
            f.write(f"{t[0]} {t[1]} {t[2]}\n")
        for e, tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            f.write(f"{e[0]} {e[1]} {tag}\n")


def load_mesh(path: str) -> Mesh:
    with open(path) as f:
        nv, nt, nb = map(int, f.readline().split())
        verts = np.array([[float(v) for v in f.readline().split()]
                          for _ in range(nv)])
        tris = np.array([[int(v) for v in f.readline().split()]
                         for _ in range(nt)], dtype=np.int32)
        bedges, btags = [], []
        for _ in range(nb):
            a, b, tag = f.readline().split()
            bedges.append((int(a), int(b)))
            btags.append(tag)
    mesh = Mesh(verts, tris, np.array(bedges, dtype=np.int32), btags)
    mesh.validate()
    return mesh
