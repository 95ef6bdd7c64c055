"""Assembled generalized eigensystems A x = lambda M x for SG, AG and OSGS.

The stabilized systems keep the skew pairing of the mixed form exactly:
the (p, u) block is minus the transpose of the (u, p) block.  The OSGS
projections are carried as implicit unknowns (xi for grad p, eta for
div u); their rows are scaled by the corresponding tau so the
stabilization sub-blocks stay symmetric positive semidefinite.

Boundary conditions are applied by congruence reduction (x = T x_r,
A_r = T' A T), never by penalties, so the reduced spectrum is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .fem import DofMap, FormKind, assemble_form, build_dofmap, scalar_kernels
from .meshgen import Mesh, NodeTag


@dataclass(frozen=True)
class StabilizationParams:
    """mu, length scale ell, constants c_u / c_p, and the mesh size h."""

    mu: float
    ell: float
    c_u: float
    c_p: float
    h: float

    @property
    def tau_p(self) -> float:
        return self.c_p * self.ell ** 2 / self.mu

    @property
    def tau_u(self) -> float:
        return self.c_u * self.mu * self.h ** 2 / self.ell ** 2


def make_params(mu: float, ell: float, c_u: float, c_p: float,
                h: float) -> StabilizationParams:
    if mu <= 0.0 or ell <= 0.0:
        raise ValueError("mu and ell must be positive")
    if c_u < 0.0 or c_p < 0.0 or h < 0.0:
        raise ValueError("c_u, c_p and h must be nonnegative")
    return StabilizationParams(mu=mu, ell=ell, c_u=c_u, c_p=c_p, h=h)


class CornerStrategy(Enum):
    BOTH_ZERO = "both-zero"
    FREE = "free"
    BISECTOR_NORMAL = "bisector"


class TipStrategy(Enum):
    FREE = "free"
    BOTH_ZERO = "both-zero"


class ConstraintError(Exception):
    pass


@dataclass(frozen=True)
class ConstraintSet:
    """Homogeneous fixed dofs plus (slave, master, factor) couplings."""

    ndof: int
    fixed: np.ndarray
    mpcs: tuple

    def __post_init__(self):
        fixed = set(int(d) for d in self.fixed)
        slaves = set()
        masters = set()
        for s, m, _f in self.mpcs:
            slaves.add(int(s))
            masters.add(int(m))
        if fixed & slaves:
            raise ConstraintError("a dof cannot be both fixed and a slave")
        if slaves & masters:
            raise ConstraintError("MPC chains (slave of a slave) are rejected")
        if fixed & masters:
            raise ConstraintError("an MPC master cannot be a fixed dof")

    @property
    def n_reduced(self) -> int:
        return self.ndof - len(self.fixed) - len(self.mpcs)

    def retained_dofs(self) -> np.ndarray:
        """Full-system indices of the dofs that survive reduction, in order."""
        drop = np.zeros(self.ndof, dtype=bool)
        drop[self.fixed] = True
        for s, _m, _f in self.mpcs:
            drop[s] = True
        return np.where(~drop)[0]

    def reduction_matrix(self) -> sp.csr_matrix:
        """T with x_full = T x_reduced; retained dofs keep their order."""
        drop = np.zeros(self.ndof, dtype=bool)
        drop[self.fixed] = True
        for s, _m, _f in self.mpcs:
            drop[s] = True
        keep = np.where(~drop)[0]
        col = -np.ones(self.ndof, dtype=np.int64)
        col[keep] = np.arange(len(keep))
        rows = list(keep)
        cols = list(col[keep])
        vals = [1.0] * len(keep)
        for s, m, f in self.mpcs:
            if col[m] < 0:
                raise ConstraintError(f"MPC master {m} is not a retained dof")
            rows.append(s)
            cols.append(col[m])
            vals.append(f)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.ndof, len(keep)))

    def expand(self, x_reduced: np.ndarray) -> np.ndarray:
        """Full vector: fixed dofs zero, slaves reconstructed from masters."""
        return self.reduction_matrix() @ x_reduced


@dataclass(frozen=True)
class EvpSystem:
    A: sp.csr_matrix
    M: sp.csr_matrix
    dofmap: DofMap
    formulation: str
    params: StabilizationParams | None = None
    constraints: ConstraintSet | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]


def _block_at(block: sp.spmatrix, row_off: int, col_off: int, ndof: int):
    coo = block.tocoo()
    return sp.coo_matrix((coo.data, (coo.row + row_off, coo.col + col_off)),
                         shape=(ndof, ndof))


def _mass_full(mass_vec: sp.spmatrix, dofmap: DofMap) -> sp.csr_matrix:
    """M with the vector mass on the u-u block and zeros elsewhere."""
    if len(dofmap.fields) == 2:
        return mass_vec.tocsr()
    return _block_at(mass_vec, 0, 0, dofmap.ndof).tocsr()


def build_sg(mesh: Mesh, degree: int, mu: float = 1.0) -> EvpSystem:
    """Standard Galerkin curl-curl system over (u1, u2)."""
    dofmap = build_dofmap(mesh, degree, "sg")
    kernels = scalar_kernels(mesh, dofmap)
    A = (mu * assemble_form(FormKind.CURL_CURL, mesh, dofmap, kernels)).tocsr()
    M = assemble_form(FormKind.MASS_VEC, mesh, dofmap, kernels)
    return EvpSystem(A=A, M=M, dofmap=dofmap, formulation="sg")


def build_ag(mesh: Mesh, degree: int, params: StabilizationParams) -> EvpSystem:
    """Augmented system over (u1, u2, p); tau_p = tau_u = 0 degenerates to
    the plain mixed Galerkin matrix."""
    dofmap = build_dofmap(mesh, degree, "ag")
    kernels = scalar_kernels(mesh, dofmap)
    kcc = assemble_form(FormKind.CURL_CURL, mesh, dofmap, kernels)
    kdd = assemble_form(FormKind.DIV_DIV, mesh, dofmap, kernels)
    kgg = assemble_form(FormKind.GRAD_GRAD, mesh, dofmap, kernels)
    g = assemble_form(FormKind.GRAD_COUPLING, mesh, dofmap, kernels)
    mv = assemble_form(FormKind.MASS_VEC, mesh, dofmap, kernels)
    A = sp.bmat([[params.mu * kcc + params.tau_u * kdd, g],
                 [(-g).T, params.tau_p * kgg]], format="csr")
    return EvpSystem(A=A, M=_mass_full(mv, dofmap), dofmap=dofmap,
                     formulation="ag", params=params)


def build_osgs(mesh: Mesh, degree: int, params: StabilizationParams) -> EvpSystem:
    """Orthogonal-subgrid-scale system over (u1, u2, p, xi1, xi2, eta).

    The projections are implicit: the xi row enforces (xi, chi) = (grad p,
    chi) and the eta row (eta, psi) = (div u, psi), both scaled by their
    tau.  Zero tau would wipe a projection row, so both must be positive.
    """
    if params.tau_p <= 0.0 or params.tau_u <= 0.0:
        raise ValueError("OSGS requires strictly positive tau_p and tau_u")
    dofmap = build_dofmap(mesh, degree, "osgs")
    kernels = scalar_kernels(mesh, dofmap)
    kcc = assemble_form(FormKind.CURL_CURL, mesh, dofmap, kernels)
    kdd = assemble_form(FormKind.DIV_DIV, mesh, dofmap, kernels)
    kgg = assemble_form(FormKind.GRAD_GRAD, mesh, dofmap, kernels)
    g = assemble_form(FormKind.GRAD_COUPLING, mesh, dofmap, kernels)
    gv = assemble_form(FormKind.GRAD_VEC, mesh, dofmap, kernels)
    d = assemble_form(FormKind.DIV_SCALAR, mesh, dofmap, kernels)
    mv = assemble_form(FormKind.MASS_VEC, mesh, dofmap, kernels)
    ms = assemble_form(FormKind.MASS_SCALAR, mesh, dofmap, kernels)
    tp, tu = params.tau_p, params.tau_u
    A = sp.bmat([
        [params.mu * kcc + tu * kdd, g,        None,      -tu * d.T],
        [(-g).T,                     tp * kgg, -tp * gv.T, None],
        [None,                       -tp * gv, tp * mv,    None],
        [-tu * d,                    None,     None,       tu * ms],
    ], format="csr")
    return EvpSystem(A=A, M=_mass_full(mv, dofmap), dofmap=dofmap,
                     formulation="osgs", params=params)


def build_constraints(dofmap: DofMap,
                      corner: CornerStrategy = CornerStrategy.BOTH_ZERO,
                      tip: TipStrategy = TipStrategy.FREE) -> ConstraintSet:
    """Tangential-trace boundary conditions for the given field layout.

    Horizontal edges (crack faces included) fix u1, vertical edges fix u2,
    so nodes on both kinds fix both components.  p vanishes at every
    boundary node including crack-face copies; the projection fields are
    never constrained.  The re-entrant corner follows the corner strategy
    (the bisector-normal choice couples u2 = -u1) and the crack tip the
    tip strategy.
    """
    if corner is CornerStrategy.BISECTOR_NORMAL and \
            not dofmap.mesh.domain.has_reentrant_corner:
        raise ConstraintError(
            "bisector-normal corner handling needs a re-entrant corner")
    fixed = []
    mpcs = []
    u1, u2 = dofmap.offset("u1"), dofmap.offset("u2")
    p_off = dofmap.offset("p") if "p" in dofmap.fields else None
    for i in range(dofmap.n_scalar):
        tag = dofmap.special[i]
        if tag == NodeTag.REENTRANT_CORNER:
            if corner is CornerStrategy.BOTH_ZERO:
                fixed += [u1 + i, u2 + i]
            elif corner is CornerStrategy.BISECTOR_NORMAL:
                mpcs.append((u2 + i, u1 + i, -1.0))
        elif tag == NodeTag.CRACK_TIP:
            if tip is TipStrategy.BOTH_ZERO:
                fixed += [u1 + i, u2 + i]
        else:
            if dofmap.on_h[i]:
                fixed.append(u1 + i)
            if dofmap.on_v[i]:
                fixed.append(u2 + i)
        if p_off is not None and dofmap.on_boundary[i]:
            fixed.append(p_off + i)
    return ConstraintSet(ndof=dofmap.ndof,
                         fixed=np.array(sorted(fixed), dtype=np.int64),
                         mpcs=tuple(mpcs))


def reduce_system(system: EvpSystem, constraints: ConstraintSet) -> EvpSystem:
    """Congruence reduction T' A T, T' M T onto the retained dofs."""
    if constraints.ndof != system.n:
        raise ConstraintError("constraint set does not match system size")
    T = constraints.reduction_matrix()
    A = (T.T @ system.A @ T).tocsr()
    M = (T.T @ system.M @ T).tocsr()
    return replace(system, A=A, M=M, constraints=constraints)


def expand_vector(constraints: ConstraintSet, x_reduced: np.ndarray) -> np.ndarray:
    return constraints.expand(x_reduced)
