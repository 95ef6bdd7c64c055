"""Generalized eigensolvers for the reduced systems.

Shift-invert ARPACK is the workhorse: eigenvalues are computed from the
transformed spectrum theta = 1/(lambda - sigma), requesting the largest
real part so the search walks the spectrum upward from the shift.  That
ordering skips the large machine-zero cluster of the standard Galerkin
operator (theta = -1/sigma < 0), so only genuinely nonzero eigenvalues
come back from SG solves.  A dense QZ path doubles as the oracle and as
the default for small systems.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .system import EvpSystem

IMAG_TOL = 1e-8
RESIDUAL_TOL = 1e-8
FINITE_CUTOFF = 1e12


class EigenSolveError(Exception):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for one generalized eigensolve."""

    nev: int = 10
    shift: float = 0.5
    zero_tol: float = 1e-6
    method: str = "auto"          # auto | dense | shift-invert
    ncv: int | None = None
    tol: float = 1e-10
    max_restarts: int = 300
    seed: int = 1234
    auto_dense: int = 600         # auto switches to dense at or below this
    dense_limit: int = 3000       # hard cap for the explicit dense method

    def __post_init__(self):
        if self.nev < 1:
            raise ValueError("nev must be at least 1")
        if self.method not in ("auto", "dense", "shift-invert"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True)
class Spectrum:
    """Ascending real eigenvalues with reduced-coordinate eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    n_zero_filtered: int = 0
    n_complex_rejected: int = 0


def _realign(vec: np.ndarray) -> np.ndarray:
    """Rotate a (near-)real complex vector onto the real axis."""
    j = int(np.argmax(np.abs(vec)))
    phase = vec[j] / abs(vec[j])
    out = np.real(vec / phase)
    nrm = np.linalg.norm(out)
    return out / nrm if nrm > 0 else out


def _certify(system: EvpSystem, values, vectors) -> np.ndarray:
    res = np.empty(len(values))
    for k, lam in enumerate(values):
        x = vectors[:, k]
        r = system.A @ x - lam * (system.M @ x)
        res[k] = np.linalg.norm(r) / np.linalg.norm(x)
        if res[k] > RESIDUAL_TOL * (1.0 + abs(lam)):
            raise EigenSolveError(
                f"eigenpair {k} (lambda={lam:.6g}) fails the residual "
                f"certificate: {res[k]:.3e}")
    return res


def _select_real(w, v):
    finite = np.isfinite(w) & (np.abs(w) < FINITE_CUTOFF)
    real = np.abs(w.imag) <= IMAG_TOL * (1.0 + np.abs(w.real))
    keep = finite & real
    n_rejected = int(np.count_nonzero(finite & ~real))
    w_keep = w[keep].real
    order = np.argsort(w_keep)
    vectors = np.column_stack([_realign(v[:, i]) for i in np.where(keep)[0]]) \
        if np.any(keep) else np.zeros((v.shape[0], 0))
    return w_keep[order], vectors[:, order], n_rejected


def _solve_dense(system: EvpSystem, config: SolverConfig) -> Spectrum:
    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
        warnings.simplefilter("ignore", la.LinAlgWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        w, v = la.eig(system.A.toarray(), system.M.toarray())
    values, vectors, n_rejected = _select_real(w, v)
    residuals = _certify(system, values, vectors)
    return Spectrum(values=values, vectors=vectors, residuals=residuals,
                    n_complex_rejected=n_rejected)


def _solve_shift_invert(system: EvpSystem, config: SolverConfig) -> Spectrum:
    n = system.n
    k = min(config.nev + 8, n - 2)
    ncv = config.ncv or max(4 * config.nev, config.nev + 20)
    ncv = int(min(n, max(ncv, k + 2)))
    rng = np.random.default_rng(config.seed)
    v0 = rng.standard_normal(n)
    symmetric = system.formulation == "sg"
    sigma = config.shift
    last = None
    for _attempt in range(3):
        try:
            if symmetric:
                w, v = spla.eigsh(system.A, k=k, M=system.M, sigma=sigma,
                                  which="LA", v0=v0, ncv=ncv,
                                  maxiter=config.max_restarts, tol=config.tol)
                w = w.astype(complex)
            else:
                w, v = spla.eigs(system.A, k=k, M=system.M, sigma=sigma,
                                 which="LR", v0=v0, ncv=ncv,
                                 maxiter=config.max_restarts, tol=config.tol)
            if np.min(np.abs(w.real - sigma)) < 1e-12:
                raise RuntimeError("shift collides with a converged eigenvalue")
            break
        except spla.ArpackNoConvergence as exc:
            raise EigenSolveError(
                f"ARPACK did not converge within {config.max_restarts} "
                f"restarts: {exc}") from exc
        except RuntimeError as exc:
            last = exc
            # perturb downward: the LA/LR ordering only reports values above
            # sigma, so the colliding eigenvalue must stay in range
            sigma -= max(1e-3 * abs(sigma), 1e-6)
    else:
        raise EigenSolveError(
            f"factorization failed near sigma={config.shift}: {last}")
    values, vectors, n_rejected = _select_real(w, v)
    residuals = _certify(system, values, vectors)
    return Spectrum(values=values, vectors=vectors, residuals=residuals,
                    n_complex_rejected=n_rejected)


def solve_generalized(system: EvpSystem, config: SolverConfig) -> Spectrum:
    """Solve the reduced pencil for the eigenvalues around/above the shift.

    The dense path returns every finite real-dominant eigenpair; the
    shift-invert path returns nev plus a small safety margin, all
    certified against ||A x - lambda M x|| <= 1e-8 (1 + |lambda|) ||x||.
    """
    method = config.method
    if method == "auto":
        method = "dense" if system.n <= config.auto_dense else "shift-invert"
    elif method == "dense" and system.n > config.dense_limit:
        raise EigenSolveError(
            f"dense solve capped at {config.dense_limit} dofs, got {system.n}")
    if method == "dense":
        return _solve_dense(system, config)
    return _solve_shift_invert(system, config)


def filter_zeros(spectrum: Spectrum, zero_tol: float = 1e-6) -> Spectrum:
    """Drop the near-zero modes (|lambda| < zero_tol), counting them."""
    keep = np.abs(spectrum.values) >= zero_tol
    dropped = int(np.count_nonzero(~keep))
    return replace(spectrum, values=spectrum.values[keep],
                   vectors=spectrum.vectors[:, keep],
                   residuals=spectrum.residuals[keep],
                   n_zero_filtered=spectrum.n_zero_filtered + dropped)


@dataclass(frozen=True)
class EigenField:
    """Nodal eigenfunction data: coordinates, u components, p if present."""

    coords: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray | None = None


def attach_eigenfunction(spectrum: Spectrum, system: EvpSystem,
                         index: int) -> EigenField:
    """Expand eigenvector `index` to nodal fields, normalized so the largest
    nodal |u| is one and u1 is positive at its own largest-magnitude node."""
    if not 0 <= index < len(spectrum.values):
        raise IndexError(f"eigenpair index {index} out of range")
    x = spectrum.vectors[:, index]
    full = system.constraints.expand(x) if system.constraints is not None else x
    dofmap = system.dofmap
    u1 = full[dofmap.field_slice("u1")].copy()
    u2 = full[dofmap.field_slice("u2")].copy()
    p = full[dofmap.field_slice("p")].copy() if "p" in dofmap.fields else None
    magnitude = np.hypot(u1, u2)
    scale = 1.0 / magnitude.max()
    if u1[int(np.argmax(np.abs(u1)))] < 0:
        scale = -scale
    u1 *= scale
    u2 *= scale
    if p is not None:
        p *= scale
    return EigenField(coords=dofmap.coords.copy(), u1=u1, u2=u2, p=p)
