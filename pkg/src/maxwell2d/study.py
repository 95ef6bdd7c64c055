"""Convergence-study harness: campaign configs, rate tables, exports.

A campaign sweeps a strictly increasing list of division counts N for one
(domain, mesh family, formulation, degree) combination, solves for the
leading eigenvalues, and reports them against the domain's reference
spectrum with pairwise convergence rates in the usual benchmark layout:
values to 4 decimals, rates to 1 decimal in parentheses.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import meshgen
from .eig import EigenField, SolverConfig, attach_eigenfunction, \
    filter_zeros, solve_generalized
from .meshgen import DomainKind, DomainSpec, GradingSpec, Mesh
from .system import CornerStrategy, TipStrategy, build_ag, build_constraints, \
    build_osgs, build_sg, make_params, reduce_system

# Benchmark reference spectra.  Modes inherited from the enclosing square
# are analytically multiples of pi^2/4 and carried at full precision;
# the singular modes keep the published benchmark digits.
_PI2 = math.pi ** 2
L_SHAPE_REFERENCE = (1.47562182408, 3.53403136678, _PI2, _PI2, 11.3894793979)
CRACK_REFERENCE = (1.0341, _PI2 / 4, 4.0469, _PI2, _PI2,
                   10.8449, 12.2649, 5 * _PI2 / 4, 2 * _PI2, 21.2441)

MESH_FAMILIES = ("uniform", "cc", "ps", "cc-graded")
FORMULATIONS = ("sg", "ag", "osgs")

DEFAULT_NEV = {
    DomainKind.SQUARE_PI: 17,
    DomainKind.L_SHAPE: 5,
    DomainKind.CRACKED_SQUARE: 10,
}


def square_reference(count: int) -> np.ndarray:
    """m^2 + n^2 over m, n >= 0, m + n > 0, ascending with multiplicity."""
    m = int(math.isqrt(count)) + 2
    vals = [i * i + j * j
            for i in range(m + 1) for j in range(m + 1) if i + j > 0]
    vals.sort()
    return np.array(vals[:count], dtype=float)


def reference_values(domain: DomainSpec, count: int) -> np.ndarray:
    if domain.kind is DomainKind.SQUARE_PI:
        return square_reference(count)
    table = L_SHAPE_REFERENCE if domain.kind is DomainKind.L_SHAPE \
        else CRACK_REFERENCE
    return np.array(table[:count], dtype=float)


@dataclass(frozen=True)
class StudyConfig:
    """Full description of one convergence campaign."""

    domain: DomainSpec
    mesh: str
    formulation: str
    N_list: tuple
    degree: int = 1
    mu: float = 1.0
    ell: float = 0.1
    c_u: float = 0.01
    c_p: float = 0.6
    corner: CornerStrategy = CornerStrategy.BOTH_ZERO
    tip: TipStrategy = TipStrategy.FREE
    nev: int | None = None
    shift: float = 0.5
    zero_tol: float = 1e-6
    solver: str = "auto"
    solver_tol: float = 1e-10
    seed: int = 1234
    grading_exponent: float = 2.0
    stab_length: str = "auto"   # auto | diameter | spacing

    def __post_init__(self):
        if self.mesh not in MESH_FAMILIES:
            raise ValueError(f"unknown mesh family {self.mesh!r}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.stab_length not in ("auto", "diameter", "spacing"):
            raise ValueError(f"unknown stab_length {self.stab_length!r}")
        if list(self.N_list) != sorted(set(self.N_list)):
            raise ValueError("N list must be strictly increasing")
        if self.mesh == "cc-graded" and not self.domain.has_crack:
            raise ValueError("graded meshes are specific to the cracked square")

    @property
    def nev_effective(self) -> int:
        return self.nev if self.nev is not None else DEFAULT_NEV[self.domain.kind]


def build_mesh(config: StudyConfig, N: int) -> Mesh:
    if config.mesh == "uniform":
        return meshgen.build_uniform(config.domain, N)
    if config.mesh == "cc":
        return meshgen.build_criss_cross(config.domain, N)
    if config.mesh == "cc-graded":
        grading = GradingSpec(exponent=config.grading_exponent, active=True)
        return meshgen.build_criss_cross(config.domain, N, grading)
    return meshgen.powell_sabin_refine(meshgen.build_uniform(config.domain, N))


def stabilization_length(config: StudyConfig, mesh: Mesh) -> float:
    """Length scale entering tau_u.

    The criss-cross and uniform families use the largest element diameter.
    For Powell-Sabin meshes on the square and L-shape the published
    eigenvalues correspond to the refined grid spacing (half the base
    cell), while the cracked-square runs keep the element diameter.
    """
    if config.stab_length == "diameter":
        return mesh.h
    if config.stab_length == "spacing":
        return mesh.grid_step
    if config.mesh == "ps" and not config.domain.has_crack:
        return mesh.grid_step
    return mesh.h


def run_case(config: StudyConfig, N: int, return_spectrum: bool = False):
    """Mesh, assemble, constrain, reduce, solve; first nev values ascending."""
    mesh = build_mesh(config, N)
    if config.formulation == "sg":
        system = build_sg(mesh, config.degree, mu=config.mu)
    else:
        params = make_params(config.mu, config.ell, config.c_u, config.c_p,
                             stabilization_length(config, mesh))
        build = build_ag if config.formulation == "ag" else build_osgs
        system = build(mesh, config.degree, params)
    constraints = build_constraints(system.dofmap, corner=config.corner,
                                    tip=config.tip)
    reduced = reduce_system(system, constraints)
    solver = SolverConfig(nev=config.nev_effective, shift=config.shift,
                          zero_tol=config.zero_tol, method=config.solver,
                          tol=config.solver_tol, seed=config.seed)
    spectrum = solve_generalized(reduced, solver)
    if config.formulation == "sg":
        spectrum = filter_zeros(spectrum, config.zero_tol)
    values = spectrum.values[:config.nev_effective]
    if return_spectrum:
        return values, spectrum, reduced, mesh
    return values


def convergence_rate(e_prev: float, e_curr: float,
                     N_prev: int, N_curr: int) -> float:
    """ln(e_prev/e_curr) / ln(N_curr/N_prev) for a consecutive N pair."""
    if e_prev <= 0.0 or e_curr <= 0.0:
        raise ValueError("convergence_rate needs positive errors")
    if N_curr <= N_prev:
        raise ValueError("N values must increase")
    return math.log(e_prev / e_curr) / math.log(N_curr / N_prev)


SATURATION_FLOOR = 1e-14


@dataclass(frozen=True)
class EigenTable:
    """Per-N eigenvalue columns with pairwise rates against the references.

    rates[:, 0] is NaN (no previous column); a saturated cell (error below
    the floor on either side of the pair) carries +inf.
    """

    domain: DomainSpec
    formulation: str
    N_list: tuple
    references: np.ndarray
    values: np.ndarray
    rates: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.references)


def run_study(config: StudyConfig) -> EigenTable:
    nev = config.nev_effective
    refs = reference_values(config.domain, nev)
    nrows = len(refs)
    columns = []
    for N in config.N_list:
        vals = run_case(config, N)
        if len(vals) < nrows:
            raise RuntimeError(
                f"solver returned {len(vals)} values, need {nrows} (N={N})")
        columns.append(vals[:nrows])
    values = np.column_stack(columns)
    rates = np.full_like(values, np.nan)
    errors = np.abs(values - refs[:, None])
    for j in range(1, values.shape[1]):
        for i in range(nrows):
            e_prev, e_curr = errors[i, j - 1], errors[i, j]
            if e_prev < SATURATION_FLOOR or e_curr < SATURATION_FLOOR:
                rates[i, j] = np.inf
            else:
                rates[i, j] = convergence_rate(e_prev, e_curr,
                                               config.N_list[j - 1],
                                               config.N_list[j])
    return EigenTable(domain=config.domain, formulation=config.formulation,
                      N_list=tuple(config.N_list), references=refs,
                      values=values, rates=rates)


def _cell(value: float, rate: float, markdown: bool) -> str:
    txt = f"{value:.4f}"
    if not np.isnan(rate):
        if np.isinf(rate):
            txt += " (—)" if markdown else " (inf)"
        else:
            txt += f" ({rate:.1f})"
    return txt


def emit_table(table: EigenTable, fmt: str = "md") -> str:
    """Render the table; Markdown mirrors the published layout, CSV adds
    full-precision shadow columns for loss-free round trips."""
    if fmt == "md":
        header = ["Ref."] + [f"N={n}" for n in table.N_list]
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join([" --- "] * len(header)) + "|"]
        for i in range(table.n_rows):
            cells = [f"{table.references[i]:.4f}"]
            cells += [_cell(table.values[i, j], table.rates[i, j], True)
                      for j in range(len(table.N_list))]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["ref"]
        for n in table.N_list:
            header += [f"N{n}", f"rate_N{n}", f"N{n}_full", f"rate_N{n}_full"]
        writer.writerow(header)
        for i in range(table.n_rows):
            row = [f"{table.references[i]:.4f}"]
            for j in range(len(table.N_list)):
                v, r = table.values[i, j], table.rates[i, j]
                if np.isnan(r):
                    printed, full = "", ""
                elif np.isinf(r):
                    printed, full = "inf", "inf"
                else:
                    printed, full = f"{r:.1f}", repr(float(r))
                row += [f"{v:.4f}", printed, repr(float(v)), full]
            writer.writerow(row)
        return buf.getvalue()
    raise ValueError(f"unknown table format {fmt!r}")


def parse_csv_table(text: str):
    """Read back the full-precision columns of an emitted CSV table."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n_cols = (len(header) - 1) // 4
    values = np.empty((len(body), n_cols))
    rates = np.full((len(body), n_cols), np.nan)
    for i, row in enumerate(body):
        for j in range(n_cols):
            values[i, j] = float(row[3 + 4 * j])
            raw = row[4 + 4 * j]
            if raw == "inf":
                rates[i, j] = np.inf
            elif raw:
                rates[i, j] = float(raw)
    return values, rates


def export_eigenfunction(fld: EigenField, mesh: Mesh, path) -> None:
    """One record per nodal point: x, y, u1, u2 and p when present."""
    with open(path, "w") as f:
        for i in range(len(fld.coords)):
            parts = [repr(float(fld.coords[i, 0])), repr(float(fld.coords[i, 1])),
                     repr(float(fld.u1[i])), repr(float(fld.u2[i]))]
            if fld.p is not None:
                parts.append(repr(float(fld.p[i])))
            f.write(", ".join(parts) + "\n")


def compute_eigenfunction(config: StudyConfig, N: int, index: int):
    """Solve one case and expand the requested eigenfunction."""
    values, spectrum, reduced, mesh = run_case(config, N, return_spectrum=True)
    return attach_eigenfunction(spectrum, reduced, index), mesh
