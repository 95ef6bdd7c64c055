"""Reference elements, quadrature, dof management and sparse assembly.

All bilinear forms needed by the three formulations are assembled from six
scalar kernels (mass, the four gradient-gradient combinations and the two
value-gradient pairings) over the nodal points of the chosen degree.
Matrices are returned in compressed sparse row format over a field-local
layout: vector-valued roles are stacked component-major, [comp1 | comp2].
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshgen import EdgeTag, Mesh, NodeTag, edge_records


class AssemblyError(Exception):
    """Raised on invalid element/field combinations or singular mass solves."""


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule on the reference triangle (0,0)-(1,0)-(0,1).

    points are cartesian reference coordinates, weights sum to the
    reference-triangle area 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    barycentric: np.ndarray


def make_quadrature() -> QuadratureRule:
    """Degree-5-exact 7-point rule."""
    s15 = np.sqrt(15.0)
    a1 = (6.0 + s15) / 21.0
    a2 = (6.0 - s15) / 21.0
    w0 = 9.0 / 40.0
    w1 = (155.0 + s15) / 1200.0
    w2 = (155.0 - s15) / 1200.0
    bary = [(1 / 3, 1 / 3, 1 / 3)]
    weights = [w0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        bary += [(b, a, a), (a, b, a), (a, a, b)]
        weights += [w, w, w]
    bary = np.asarray(bary)
    weights = 0.5 * np.asarray(weights)
    points = bary[:, 1:]
    return QuadratureRule(points=points, weights=weights, barycentric=bary)


def shape_functions(degree: int, pts: np.ndarray) -> np.ndarray:
    """Values of the P1/P2 Lagrange basis at reference points, (npts, nloc)."""
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    if degree == 1:
        return np.stack([l0, l1, l2], axis=1)
    if degree == 2:
        return np.stack([
            l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
            4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
        ], axis=1)
    raise AssemblyError(f"unsupported polynomial degree {degree}")


def shape_gradients(degree: int, pts: np.ndarray) -> np.ndarray:
    """Reference gradients of the P1/P2 basis, (npts, nloc, 2)."""
    x, y = pts[:, 0], pts[:, 1]
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    if degree == 1:
        g = np.empty((len(x), 3, 2))
        g[:, 0, 0], g[:, 0, 1] = -one, -one
        g[:, 1, 0], g[:, 1, 1] = one, zero
        g[:, 2, 0], g[:, 2, 1] = zero, one
        return g
    if degree == 2:
        l0 = 1.0 - x - y
        g = np.empty((len(x), 6, 2))
        g[:, 0, 0] = g[:, 0, 1] = 1.0 - 4.0 * l0
        g[:, 1, 0], g[:, 1, 1] = 4.0 * x - 1.0, zero
        g[:, 2, 0], g[:, 2, 1] = zero, 4.0 * y - 1.0
        g[:, 3, 0], g[:, 3, 1] = 4.0 * (l0 - x), -4.0 * x
        g[:, 4, 0], g[:, 4, 1] = 4.0 * y, 4.0 * x
        g[:, 5, 0], g[:, 5, 1] = -4.0 * y, 4.0 * (l0 - y)
        return g
    raise AssemblyError(f"unsupported polynomial degree {degree}")


def reference_nodes(degree: int) -> np.ndarray:
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        return verts
    mids = 0.5 * (verts + np.roll(verts, -1, axis=0))
    return np.vstack([verts, mids])


@dataclass(frozen=True)
class ReferenceElement:
    degree: int
    n_nodes: int
    nodes: np.ndarray
    shape: np.ndarray       # (nq, nloc) at quadrature points
    ref_grads: np.ndarray   # (nq, nloc, 2)


def reference_element(degree: int, rule: QuadratureRule | None = None) -> ReferenceElement:
    rule = rule or make_quadrature()
    return ReferenceElement(degree=degree, n_nodes=3 if degree == 1 else 6,
                            nodes=reference_nodes(degree),
                            shape=shape_functions(degree, rule.points),
                            ref_grads=shape_gradients(degree, rule.points))


FORMULATION_FIELDS = {
    "sg": ("u1", "u2"),
    "ag": ("u1", "u2", "p"),
    "osgs": ("u1", "u2", "p", "xi1", "xi2", "eta"),
}


@dataclass(frozen=True)
class DofMap:
    """Field layout over the scalar nodal points of the chosen degree.

    Every field spans the same n_scalar nodal points (mesh vertices, plus
    one node per mesh edge for P2, crack edges per face copy); dof indices
    are contiguous per field in declaration order.
    """

    mesh: Mesh
    degree: int
    formulation: str
    fields: tuple
    n_scalar: int
    element_nodes: np.ndarray
    coords: np.ndarray
    on_h: np.ndarray
    on_v: np.ndarray
    on_boundary: np.ndarray
    special: np.ndarray  # NodeTag.REENTRANT_CORNER / CRACK_TIP / INTERIOR

    @property
    def ndof(self) -> int:
        return len(self.fields) * self.n_scalar

    def offset(self, field: str) -> int:
        return self.fields.index(field) * self.n_scalar

    def dof(self, field: str, node: int) -> int:
        return self.offset(field) + node

    def field_slice(self, field: str) -> slice:
        off = self.offset(field)
        return slice(off, off + self.n_scalar)


def build_dofmap(mesh: Mesh, degree: int, formulation: str) -> DofMap:
    if formulation not in FORMULATION_FIELDS:
        raise AssemblyError(f"unknown formulation tag {formulation!r}")
    if degree not in (1, 2):
        raise AssemblyError(f"unsupported polynomial degree {degree}")
    fields = FORMULATION_FIELDS[formulation]
    nv = mesh.n_points

    on_h = np.zeros(nv, dtype=bool)
    on_v = np.zeros(nv, dtype=bool)
    for (i, j), tag in mesh.boundary_edges:
        if tag is EdgeTag.VERTICAL:
            on_v[[i, j]] = True
        else:
            on_h[[i, j]] = True
    special = np.where(
        (mesh.node_tags == NodeTag.REENTRANT_CORNER)
        | (mesh.node_tags == NodeTag.CRACK_TIP),
        mesh.node_tags, NodeTag.INTERIOR).astype(np.int8)

    if degree == 1:
        return DofMap(mesh=mesh, degree=1, formulation=formulation, fields=fields,
                      n_scalar=nv, element_nodes=mesh.triangles.copy(),
                      coords=mesh.points.copy(), on_h=on_h, on_v=on_v,
                      on_boundary=on_h | on_v, special=special)

    records = edge_records(mesh.points, mesh.triangles, mesh.domain)
    keys = sorted(records.keys(), key=lambda k: (int(k[0]), int(k[1]), int(k[2])))
    edge_id = {k: nv + idx for idx, k in enumerate(keys)}
    ne = len(keys)
    n_scalar = nv + ne

    coords = np.vstack([mesh.points,
                        np.array([0.5 * (mesh.points[k[0]] + mesh.points[k[1]])
                                  for k in keys])])
    eon_h = np.zeros(n_scalar, dtype=bool)
    eon_v = np.zeros(n_scalar, dtype=bool)
    eon_h[:nv], eon_v[:nv] = on_h, on_v
    boundary_tag = {}
    for (i, j), tag in mesh.boundary_edges:
        boundary_tag.setdefault((min(i, j), max(i, j)), []).append(tag)
    for k in keys:
        if len(records[k]) != 1:
            continue
        node = edge_id[k]
        lo, hi, side = k
        tags = boundary_tag.get((min(lo, hi), max(lo, hi)), [])
        if side > 0:
            tag = EdgeTag.CRACK_TOP
        elif side < 0:
            tag = EdgeTag.CRACK_BOTTOM
        else:
            tag = tags[0]
        if tag is EdgeTag.VERTICAL:
            eon_v[node] = True
        else:
            eon_h[node] = True

    element_nodes = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    element_nodes[:, :3] = mesh.triangles
    for key, owners in records.items():
        for (t, loc) in owners:
            element_nodes[t, 3 + loc] = edge_id[key]

    specials = np.concatenate([special, np.full(ne, NodeTag.INTERIOR, dtype=np.int8)])
    return DofMap(mesh=mesh, degree=2, formulation=formulation, fields=fields,
                  n_scalar=n_scalar, element_nodes=element_nodes, coords=coords,
                  on_h=eon_h, on_v=eon_v, on_boundary=eon_h | eon_v,
                  special=specials)


class TripletMatrix:
    """Coordinate-format accumulator; finalize() sums duplicates into CSR."""

    def __init__(self, shape):
        self.shape = shape
        self._rows = []
        self._cols = []
        self._vals = []

    def add(self, rows, cols, vals):
        self._rows.append(np.asarray(rows).ravel())
        self._cols.append(np.asarray(cols).ravel())
        self._vals.append(np.asarray(vals, dtype=float).ravel())

    def finalize(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix(self.shape)
        coo = sp.coo_matrix(
            (np.concatenate(self._vals),
             (np.concatenate(self._rows), np.concatenate(self._cols))),
            shape=self.shape)
        out = coo.tocsr()
        out.sum_duplicates()
        return out


class FormKind(Enum):
    CURL_CURL = "curl_curl"
    MASS_VEC = "mass_vec"
    MASS_SCALAR = "mass_scalar"
    GRAD_COUPLING = "grad_coupling"
    DIV_DIV = "div_div"
    GRAD_GRAD = "grad_grad"
    DIV_SCALAR = "div_scalar"
    GRAD_VEC = "grad_vec"


_FORM_NEEDS = {
    FormKind.MASS_SCALAR: "p",
    FormKind.GRAD_COUPLING: "p",
    FormKind.GRAD_GRAD: "p",
    FormKind.DIV_SCALAR: "p",
    FormKind.GRAD_VEC: "xi1",
}


def _element_geometry(mesh: Mesh):
    p = mesh.points
    t = mesh.triangles
    j11 = p[t[:, 1], 0] - p[t[:, 0], 0]
    j21 = p[t[:, 1], 1] - p[t[:, 0], 1]
    j12 = p[t[:, 2], 0] - p[t[:, 0], 0]
    j22 = p[t[:, 2], 1] - p[t[:, 0], 1]
    det = j11 * j22 - j12 * j21
    inv_t = np.empty((len(t), 2, 2))
    inv_t[:, 0, 0] = j22 / det
    inv_t[:, 0, 1] = -j21 / det
    inv_t[:, 1, 0] = -j12 / det
    inv_t[:, 1, 1] = j11 / det
    return det, inv_t  # det = 2*area, inv_t = J^{-T}


def scalar_kernels(mesh: Mesh, dofmap: DofMap) -> dict:
    """The six nodal kernels: mass, Kxx, Kxy, Kyy, Gx, Gy (all n x n CSR).

    Kab integrates d_a(phi_i) d_b(phi_j); Ga integrates phi_i d_a(phi_j).
    """
    rule = make_quadrature()
    elem = reference_element(dofmap.degree, rule)
    det, inv_t = _element_geometry(mesh)
    # physical gradients g[t, q, a, d]
    g = np.einsum("tde,qae->tqad", inv_t, elem.ref_grads)
    wdet = rule.weights[None, :] * det[:, None]  # (t, q); weights sum to 1/2
    shp = elem.shape

    mass_el = np.einsum("tq,qa,qb->tab", wdet, shp, shp)
    kxx_el = np.einsum("tq,tqa,tqb->tab", wdet, g[..., 0], g[..., 0])
    kxy_el = np.einsum("tq,tqa,tqb->tab", wdet, g[..., 0], g[..., 1])
    kyy_el = np.einsum("tq,tqa,tqb->tab", wdet, g[..., 1], g[..., 1])
    gx_el = np.einsum("tq,qa,tqb->tab", wdet, shp, g[..., 0])
    gy_el = np.einsum("tq,qa,tqb->tab", wdet, shp, g[..., 1])

    nodes = dofmap.element_nodes
    nloc = nodes.shape[1]
    rows = np.repeat(nodes, nloc, axis=1)
    cols = np.tile(nodes, (1, nloc))
    n = dofmap.n_scalar
    out = {}
    for name, el in (("mass", mass_el), ("kxx", kxx_el), ("kxy", kxy_el),
                     ("kyy", kyy_el), ("gx", gx_el), ("gy", gy_el)):
        acc = TripletMatrix((n, n))
        acc.add(rows, cols, el)
        out[name] = acc.finalize()
    return out


def assemble_form(kind: FormKind, mesh: Mesh, dofmap: DofMap,
                  kernels: dict | None = None) -> sp.csr_matrix:
    """Assemble one bilinear form without any mu or tau scaling.

    Vector-valued rows/columns use the component-major layout
    [component-1 nodes | component-2 nodes]; shapes are (2n, 2n) for
    vector-vector forms, (n, n) scalar-scalar, (2n, n) for (grad p, v)
    type couplings and (n, 2n) for (div u, psi).
    """
    need = _FORM_NEEDS.get(kind)
    if need is not None and need not in dofmap.fields:
        raise AssemblyError(
            f"form {kind.value} needs field {need!r} absent from {dofmap.fields}")
    k = kernels or scalar_kernels(mesh, dofmap)
    mass, kxx, kxy, kyy = k["mass"], k["kxx"], k["kxy"], k["kyy"]
    gx, gy = k["gx"], k["gy"]
    if kind is FormKind.CURL_CURL:
        return sp.bmat([[kyy, -kxy.T], [-kxy, kxx]], format="csr")
    if kind is FormKind.MASS_VEC:
        return sp.block_diag([mass, mass], format="csr")
    if kind is FormKind.MASS_SCALAR:
        return mass.copy()
    if kind is FormKind.GRAD_COUPLING or kind is FormKind.GRAD_VEC:
        return sp.bmat([[gx], [gy]], format="csr")
    if kind is FormKind.DIV_DIV:
        return sp.bmat([[kxx, kxy], [kxy.T, kyy]], format="csr")
    if kind is FormKind.GRAD_GRAD:
        return (kxx + kyy).tocsr()
    if kind is FormKind.DIV_SCALAR:
        return sp.bmat([[gx, gy]], format="csr")
    raise AssemblyError(f"unknown form kind {kind!r}")


def l2_project(mesh: Mesh, dofmap: DofMap, target: str,
               coeffs: np.ndarray) -> np.ndarray:
    """L2-project grad(p) onto the vector space or div(u) onto the scalar one.

    target "grad" takes scalar coefficients (n,) and returns (2n,); target
    "div" takes vector coefficients (2n,) and returns (n,).  The projection
    spaces carry no essential boundary conditions.
    """
    kernels = scalar_kernels(mesh, dofmap)
    mass = kernels["mass"].tocsc()
    try:
        solve = spla.factorized(mass)
    except RuntimeError as exc:
        raise AssemblyError("singular mass matrix in projection") from exc
    n = dofmap.n_scalar
    coeffs = np.asarray(coeffs, dtype=float)
    if target == "grad":
        if coeffs.shape != (n,):
            raise AssemblyError("grad projection expects scalar coefficients")
        rhs = sp.bmat([[kernels["gx"]], [kernels["gy"]]], format="csr") @ coeffs
        return np.concatenate([solve(rhs[:n]), solve(rhs[n:])])
    if target == "div":
        if coeffs.shape != (2 * n,):
            raise AssemblyError("div projection expects vector coefficients")
        rhs = kernels["gx"] @ coeffs[:n] + kernels["gy"] @ coeffs[n:]
        return solve(rhs)
    raise AssemblyError(f"unknown projection target {target!r}")
