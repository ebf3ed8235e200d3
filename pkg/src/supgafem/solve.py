"""Sparse linear solvers for the nonsymmetric stabilized systems."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SparseSystem


class SolveFailure(RuntimeError):
    """Solver breakdown or non-convergence; carries the best iterate."""

    def __init__(self, message, best=None, achieved=None):
        super().__init__(message)
        self.best = best
        self.achieved = achieved


@dataclass(frozen=True)
class SolveReport:
    x: np.ndarray
    rel_residual: float
    iterations: int
    wall_time: float
    method: str


def _rel_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve_linear(A, b, tol: float = 1e-10, method: str = "direct",
                 maxiter: int = 2000) -> SolveReport:
    """Solve A x = b; direct sparse LU by default, optionally ILU-preconditioned GMRES."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError("system matrix must be square and non-empty")
    t0 = time.perf_counter()
    if method == "direct":
        try:
            lu = spla.splu(A.tocsc())
            x = lu.solve(b)
        except RuntimeError as exc:
            raise SolveFailure(f"direct factorization failed: {exc}") from exc
        res = _rel_residual(A, x, b)
        if not np.isfinite(res) or res > max(tol, 1e-8):
            raise SolveFailure("direct solve produced a large residual "
                               f"({res:.3e}); matrix is likely singular",
                               best=x, achieved=res)
        return SolveReport(x, res, 0, time.perf_counter() - t0, "direct")
    if method == "gmres":
        try:
            ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        except RuntimeError as exc:
            raise SolveFailure(f"ILU factorization failed: {exc}") from exc
        M = spla.LinearOperator(A.shape, ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(A, b, rtol=tol, atol=0.0, M=M, restart=100,
                             maxiter=maxiter, callback=cb,
                             callback_type="legacy")
        res = _rel_residual(A, x, b)
        if info != 0 or res > tol * 10:
            raise SolveFailure(f"gmres did not converge (info={info}, "
                               f"residual={res:.3e})", best=x, achieved=res)
        return SolveReport(x, res, count[0], time.perf_counter() - t0, "gmres")
    raise ValueError("method must be 'direct' or 'gmres'")


def solve(system: SparseSystem, tol: float = 1e-10,
          method: str = "direct") -> SolveReport:
    """Solve the constrained system; the solution carries the Dirichlet values."""
    return solve_linear(system.matrix, system.rhs, tol=tol, method=method)
