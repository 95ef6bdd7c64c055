"""Structured triangulations of the three benchmark cavities.

Generators for the square ]0,pi[^2, the flipped L-shape ]-1,1[^2 minus
[0,1]x[-1,0], and the cracked square ]-1,1[^2 minus the slit {0 <= x < 1,
y = 0}.  Supported families: uniform right-diagonal meshes, criss-cross
meshes (optionally graded toward the crack), and Powell-Sabin 6-splits of
any conforming base mesh.

The cracked domain is meshed by duplicating every grid node strictly
between the crack tip (0, 0) and the mouth (1, 0); the tip stays a single
node shared by both faces.  Edge bookkeeping is side-aware so that the two
geometrically coincident crack faces are kept distinct everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import NamedTuple

import numpy as np

GEOM_TOL = 1e-10


class MeshError(Exception):
    """Raised when a generator produces or receives an invalid mesh."""


class DomainKind(Enum):
    SQUARE_PI = "square"
    L_SHAPE = "lshape"
    CRACKED_SQUARE = "crack"


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class DomainSpec:
    """One of the three benchmark domains; geometry is fixed per kind."""

    kind: DomainKind

    @classmethod
    def from_name(cls, name: str) -> "DomainSpec":
        return cls(DomainKind(name))

    @property
    def area(self) -> float:
        return {
            DomainKind.SQUARE_PI: np.pi ** 2,
            DomainKind.L_SHAPE: 3.0,
            DomainKind.CRACKED_SQUARE: 4.0,
        }[self.kind]

    @property
    def has_crack(self) -> bool:
        return self.kind is DomainKind.CRACKED_SQUARE

    @property
    def has_reentrant_corner(self) -> bool:
        return self.kind is DomainKind.L_SHAPE


SQUARE_PI = DomainSpec(DomainKind.SQUARE_PI)
L_SHAPE = DomainSpec(DomainKind.L_SHAPE)
CRACKED_SQUARE = DomainSpec(DomainKind.CRACKED_SQUARE)


class EdgeTag(IntEnum):
    HORIZONTAL = 0
    VERTICAL = 1
    CRACK_TOP = 2
    CRACK_BOTTOM = 3


class NodeTag(IntEnum):
    INTERIOR = 0
    EDGE_HORIZONTAL = 1
    EDGE_VERTICAL = 2
    CONVEX_CORNER = 3
    REENTRANT_CORNER = 4
    CRACK_TIP = 5
    CRACK_FACE_TOP = 6
    CRACK_FACE_BOTTOM = 7


@dataclass(frozen=True)
class GradingSpec:
    """Power-law clustering of the 1D grid toward the crack and its tip."""

    exponent: float = 2.0
    active: bool = False

    def __post_init__(self):
        if self.exponent < 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {self.exponent}")


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation with boundary classification.

    Attributes
    ----------
    points : (n, 2) float array
    triangles : (t, 3) int array, counter-clockwise vertex order
    domain : DomainSpec
    boundary_edges : list of ((i, j), EdgeTag)
        One entry per boundary edge instance; the two faces of a crack
        edge are separate entries even when the node pair coincides.
    node_tags : (n,) int array of NodeTag values
    h : float, largest element diameter
    grid_step : float
        Spacing of the generating grid (halved by a Powell-Sabin split);
        used as an alternative stabilization length scale.
    """

    points: np.ndarray
    triangles: np.ndarray
    domain: DomainSpec
    boundary_edges: list
    node_tags: np.ndarray
    h: float
    grid_step: float

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.points
        t = self.triangles
        d1 = p[t[:, 1]] - p[t[:, 0]]
        d2 = p[t[:, 2]] - p[t[:, 0]]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        p = self.points
        t = self.triangles
        e0 = np.linalg.norm(p[t[:, 1]] - p[t[:, 0]], axis=1)
        e1 = np.linalg.norm(p[t[:, 2]] - p[t[:, 1]], axis=1)
        e2 = np.linalg.norm(p[t[:, 0]] - p[t[:, 2]], axis=1)
        return np.maximum(e0, np.maximum(e1, e2))


def crack_closure_mask(points: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Nodes lying on the closed crack segment {y=0, 0 <= x <= 1}."""
    if not domain.has_crack:
        return np.zeros(points.shape[0], dtype=bool)
    x, y = points[:, 0], points[:, 1]
    return (np.abs(y) < GEOM_TOL) & (x > -GEOM_TOL) & (x < 1.0 + GEOM_TOL)


def edge_records(points, triangles, domain):
    """Census of element edges keyed by (lo, hi, side).

    side is 0 for ordinary edges; for edges on the crack segment it is +1
    when the owning triangle lies above the slit and -1 below, so the two
    crack faces never share a key even if they share a node pair.
    Values are lists of (triangle index, local edge index), local edges
    being (0,1), (1,2), (2,0).
    """
    on_crack = crack_closure_mask(points, domain)
    records: dict = {}
    for t, (a, b, c) in enumerate(triangles):
        for loc, (i, j, opp) in enumerate(((a, b, c), (b, c, a), (c, a, b))):
            side = 0
            if on_crack[i] and on_crack[j]:
                side = 1 if points[opp, 1] > 0.0 else -1
            key = (min(i, j), max(i, j), side)
            records.setdefault(key, []).append((t, loc))
    return records


def _check_conforming(records):
    for key, owners in records.items():
        if len(owners) > 2:
            raise MeshError(f"edge {key} shared by {len(owners)} triangles")


def _graded_axis(N: int, exponent: float) -> np.ndarray:
    u = np.linspace(-1.0, 1.0, N + 1)
    return np.sign(u) * np.abs(u) ** exponent


def _axis_coords(domain: DomainSpec, N: int, grading: GradingSpec | None):
    kind = domain.kind
    if kind is DomainKind.SQUARE_PI:
        return np.linspace(0.0, np.pi, N + 1)
    if kind is DomainKind.L_SHAPE:
        return np.linspace(-1.0, 1.0, 2 * N + 1)
    # cracked square: the crack line y=0 and the tip x=0 must be grid lines
    if N % 2 != 0:
        raise MeshError("cracked square requires an even division count")
    if grading is not None and grading.active:
        return _graded_axis(N, grading.exponent)
    return np.linspace(-1.0, 1.0, N + 1)


def _cell_kept(domain: DomainSpec, xc: float, yc: float) -> bool:
    if domain.kind is DomainKind.L_SHAPE:
        return not (xc > 0.0 and yc < 0.0)
    return True


def _split_crack(points, triangles, domain):
    """Duplicate crack-interior nodes and remap the triangles below the slit."""
    if not domain.has_crack:
        return points, triangles
    x, y = points[:, 0], points[:, 1]
    interior = np.where((np.abs(y) < GEOM_TOL) &
                        (x > GEOM_TOL) & (x < 1.0 - GEOM_TOL))[0]
    if interior.size == 0:
        return points, triangles
    bottom = {int(i): points.shape[0] + k for k, i in enumerate(interior)}
    points = np.vstack([points, points[interior]])
    triangles = triangles.copy()
    centro_y = points[triangles, 1].mean(axis=1)
    for t in np.where(centro_y < 0.0)[0]:
        for k in range(3):
            j = int(triangles[t, k])
            if j in bottom:
                triangles[t, k] = bottom[j]
    return points, triangles


def _grid_triangulation(domain, N, grading, criss_cross):
    xs = _axis_coords(domain, N, grading)
    ys = _axis_coords(domain, N, grading)
    nx = len(xs) - 1
    index: dict = {}
    pts: list = []

    def node(i, j):
        key = (i, j)
        if key not in index:
            index[key] = len(pts)
            pts.append((xs[i], ys[j]))
        return index[key]

    tris = []
    for j in range(nx):
        for i in range(nx):
            xc = 0.5 * (xs[i] + xs[i + 1])
            yc = 0.5 * (ys[j] + ys[j + 1])
            if not _cell_kept(domain, xc, yc):
                continue
            ll, lr = node(i, j), node(i + 1, j)
            ur, ul = node(i + 1, j + 1), node(i, j + 1)
            if criss_cross:
                c = len(pts)
                pts.append((xc, yc))
                tris += [(ll, lr, c), (lr, ur, c), (ur, ul, c), (ul, ll, c)]
            else:
                tris += [(ll, lr, ur), (ll, ur, ul)]
    points = np.asarray(pts, dtype=float)
    triangles = np.asarray(tris, dtype=np.int64)
    points, triangles = _split_crack(points, triangles, domain)
    dx = np.diff(xs)
    dy = np.diff(ys)
    step = max(dx.max(), dy.max())
    return points, triangles, step


def build_uniform(domain: DomainSpec, N: int) -> Mesh:
    """Uniform right-diagonal mesh: every cell split along its ll-ur diagonal.

    N counts divisions per direction for the square domains and divisions
    of a short (unit) edge for the L-shape.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    points, triangles, step = _grid_triangulation(domain, N, None, False)
    return classify_boundary(_provisional(points, triangles, domain, step), domain)


def build_criss_cross(domain: DomainSpec, N: int,
                      grading: GradingSpec | None = None) -> Mesh:
    """Criss-cross mesh: every cell split into 4 by both diagonals.

    With active grading (cracked square only) the 1D grid is redistributed
    through a symmetric power law clustering nodes toward the crack line
    y = 0 and toward the tip abscissa x = 0 before the cells are built.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    if grading is not None and grading.active and not domain.has_crack:
        raise ValueError("grading is only meaningful for the cracked square")
    points, triangles, step = _grid_triangulation(domain, N, grading, True)
    return classify_boundary(_provisional(points, triangles, domain, step), domain)


def powell_sabin_refine(base: Mesh) -> Mesh:
    """Powell-Sabin 6-split: barycenter plus edge midpoints per triangle.

    Node count grows to V + E + T and the triangle count to 6 T, with
    crack-face edge midpoints duplicated per face copy.
    """
    records = edge_records(base.points, base.triangles, base.domain)
    _check_conforming(records)
    pts = [tuple(p) for p in base.points]
    mid_index = {}
    for key in records:
        lo, hi, _side = key
        mid_index[key] = len(pts)
        pts.append((0.5 * (pts[lo][0] + pts[hi][0]),
                    0.5 * (pts[lo][1] + pts[hi][1])))
    edge_of = {}
    for key, owners in records.items():
        for owner in owners:
            edge_of[owner] = mid_index[key]
    tris = []
    for t, (a, b, c) in enumerate(base.triangles):
        g = len(pts)
        pa, pb, pc = pts[a], pts[b], pts[c]
        pts.append(((pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0))
        mab = edge_of[(t, 0)]
        mbc = edge_of[(t, 1)]
        mca = edge_of[(t, 2)]
        tris += [(a, mab, g), (mab, b, g), (b, mbc, g),
                 (mbc, c, g), (c, mca, g), (mca, a, g)]
    points = np.asarray(pts, dtype=float)
    triangles = np.asarray(tris, dtype=np.int64)
    prov = _provisional(points, triangles, base.domain, base.grid_step / 2.0)
    return classify_boundary(prov, base.domain)


def _provisional(points, triangles, domain, step) -> Mesh:
    return Mesh(points=points, triangles=triangles, domain=domain,
                boundary_edges=[], node_tags=np.zeros(len(points), dtype=np.int8),
                h=0.0, grid_step=step)


def _on_domain_boundary(points, domain):
    x, y = points[:, 0], points[:, 1]
    t = GEOM_TOL
    if domain.kind is DomainKind.SQUARE_PI:
        return (np.abs(x) < t) | (np.abs(x - np.pi) < t) | \
               (np.abs(y) < t) | (np.abs(y - np.pi) < t)
    outer = (np.abs(x + 1) < t) | (np.abs(x - 1) < t) | \
            (np.abs(y + 1) < t) | (np.abs(y - 1) < t)
    if domain.kind is DomainKind.L_SHAPE:
        notch = ((np.abs(x) < t) & (y < t)) | ((np.abs(y) < t) & (x > -t))
        return outer | notch
    return outer | crack_closure_mask(points, domain)


def classify_boundary(mesh: Mesh, domain: DomainSpec) -> Mesh:
    """Populate boundary edges, node tags and the mesh size h.

    Boundary edges are the edge instances owned by exactly one triangle;
    their orientation tag follows the axis they lie on, with crack edges
    tagged by face.  Raises MeshError when a node sits on the geometric
    boundary without acquiring a boundary tag (tolerance 1e-10).
    """
    points, triangles = mesh.points, mesh.triangles
    n = points.shape[0]
    areas = 0.5 * ((points[triangles[:, 1], 0] - points[triangles[:, 0], 0])
                   * (points[triangles[:, 2], 1] - points[triangles[:, 0], 1])
                   - (points[triangles[:, 1], 1] - points[triangles[:, 0], 1])
                   * (points[triangles[:, 2], 0] - points[triangles[:, 0], 0]))
    if np.any(areas <= 0.0):
        raise MeshError("mesh contains a non-CCW or degenerate triangle")

    records = edge_records(points, triangles, domain)
    _check_conforming(records)
    boundary_edges = []
    on_h = np.zeros(n, dtype=bool)
    on_v = np.zeros(n, dtype=bool)
    crack_side = np.zeros(n, dtype=np.int8)  # +1 top face, -1 bottom, 0 both/none
    seen_top = np.zeros(n, dtype=bool)
    seen_bot = np.zeros(n, dtype=bool)
    for (lo, hi, side), owners in records.items():
        if len(owners) != 1:
            continue
        if side != 0:
            tag = EdgeTag.CRACK_TOP if side > 0 else EdgeTag.CRACK_BOTTOM
        elif abs(points[lo, 0] - points[hi, 0]) < GEOM_TOL:
            tag = EdgeTag.VERTICAL
        elif abs(points[lo, 1] - points[hi, 1]) < GEOM_TOL:
            tag = EdgeTag.HORIZONTAL
        else:
            raise MeshError(f"boundary edge ({lo}, {hi}) is not axis-aligned")
        boundary_edges.append(((int(lo), int(hi)), tag))
        if tag is EdgeTag.VERTICAL:
            on_v[[lo, hi]] = True
        else:
            on_h[[lo, hi]] = True
            if tag is EdgeTag.CRACK_TOP:
                seen_top[[lo, hi]] = True
            elif tag is EdgeTag.CRACK_BOTTOM:
                seen_bot[[lo, hi]] = True
    crack_side[seen_top & ~seen_bot] = 1
    crack_side[seen_bot & ~seen_top] = -1

    tags = np.full(n, NodeTag.INTERIOR, dtype=np.int8)
    x, y = points[:, 0], points[:, 1]
    at_origin = (np.abs(x) < GEOM_TOL) & (np.abs(y) < GEOM_TOL)
    on_crack = crack_closure_mask(points, domain)
    for i in range(n):
        if domain.kind is DomainKind.L_SHAPE and at_origin[i]:
            tags[i] = NodeTag.REENTRANT_CORNER
        elif domain.has_crack and at_origin[i]:
            tags[i] = NodeTag.CRACK_TIP
        elif on_crack[i] and crack_side[i] != 0 and not on_v[i]:
            tags[i] = (NodeTag.CRACK_FACE_TOP if crack_side[i] > 0
                       else NodeTag.CRACK_FACE_BOTTOM)
        elif on_h[i] and on_v[i]:
            tags[i] = NodeTag.CONVEX_CORNER
        elif on_h[i]:
            tags[i] = NodeTag.EDGE_HORIZONTAL
        elif on_v[i]:
            tags[i] = NodeTag.EDGE_VERTICAL

    geom = _on_domain_boundary(points, domain)
    mismatch = np.where(geom != (tags != NodeTag.INTERIOR))[0]
    if mismatch.size:
        i = int(mismatch[0])
        raise MeshError(f"node {i} at {Point2(*points[i])} fails boundary tagging")

    out = replace(mesh, boundary_edges=boundary_edges, node_tags=tags,
                  h=float(mesh.diameters().max()) if len(triangles) else 0.0)
    return out


def dump_mesh(mesh: Mesh, path) -> None:
    """Write a plain-text node/triangle listing (see README for the format)."""
    with open(path, "w") as f:
        f.write(f"# nodes {mesh.n_points}\n")
        for i, (xx, yy) in enumerate(mesh.points):
            f.write(f"{i} {xx!r} {yy!r} {NodeTag(mesh.node_tags[i]).name}\n")
        f.write(f"# triangles {mesh.n_triangles}\n")
        for k, (a, b, c) in enumerate(mesh.triangles):
            f.write(f"{k} {a} {b} {c}\n")
