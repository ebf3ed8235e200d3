"""Bulk marking, mark enlargement, and the solve-estimate-mark-refine loop.

Marking selects a minimal set with theta * eta^2 <= eta(M')^2 by a greedy
descending sort (ties broken by element index).  The recorded marked/total
sums come from the same sequential cumulative sum used for the selection, so
the bulk criterion holds exactly on the recorded floats.  The enlargement
adds one globally largest element (lowest index) when none is marked, which
keeps #M <= 2 #M' and forces the maximal mesh size to zero along the
iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .assembly import StabilizationConfig, assemble
from .estimator import energy_error, indicators
from .mesh import Mesh, normalize_marks, refine
from .problem import ProblemSpec, validate
from .solve import SolveFailure, solve
from .space import DiscreteFunction, FeSpace, build_space

_SIZE_TIE_TOL = 1e-12


class AdaptiveFailure(RuntimeError):
    """Solver breakdown inside the loop; carries the records so far."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class AdaptConfig:
    theta: float
    p: int = 1
    max_dofs: Optional[int] = None
    max_steps: int = 60
    eta_tol: Optional[float] = None
    stabilization: StabilizationConfig = field(default_factory=StabilizationConfig)
    solver_tol: float = 1e-10
    solver_method: str = "direct"
    quad_degree: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("marking parameter theta must be in (0, 1]")
        if self.p not in (1, 2):
            raise ValueError("degree must be 1 or 2")

    @property
    def effective_max_dofs(self) -> int:
        if self.max_dofs is not None:
            return self.max_dofs
        return 200_000 if self.p == 1 else 400_000


@dataclass
class AdaptRecord:
    step: int
    n_elements: int
    n_dofs: int
    h_max: float
    eta: float
    osc: float
    err_energy: Optional[float]
    err_supg: Optional[float]
    n_marked_prime: int
    n_marked: int
    marked_eta2: float
    total_eta2: float
    contains_largest: bool
    n_largest: int
    solve_s: float
    estimate_s: float
    refine_s: float
    solver_residual: float


def _doerfler_details(eta2, theta: float):
    eta2 = np.asarray(eta2, dtype=float)
    if np.any(eta2 < 0):
        raise ValueError("indicators must be nonnegative")
    n = len(eta2)
    order = np.lexsort((np.arange(n), -eta2))
    csum = np.cumsum(eta2[order])
    total = float(csum[-1]) if n else 0.0
    if total <= 0.0:
        return np.empty(0, dtype=np.int64), 0.0, total
    target = theta * total
    k = int(np.searchsorted(csum, target, side="left"))
    while csum[k] < target and k < n - 1:
        k += 1
    return np.sort(order[:k + 1]), float(csum[k]), total


def doerfler_mark(eta2, theta: float) -> np.ndarray:
    """Minimal-cardinality index set with theta * sum(eta2) <= sum(eta2[set])."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("marking parameter theta must be in (0, 1]")
    return _doerfler_details(eta2, theta)[0]


def enlarge_marks(mesh: Mesh, marks) -> np.ndarray:
    """Ensure the marking contains an element of globally maximal size."""
    marks = normalize_marks(mesh, marks)
    if marks.size == 0:
        raise ValueError("enlargement requires a non-empty marking")
    h = mesh.sizes
    hmax = float(h.max())
    if np.any(h[marks] >= hmax * (1.0 - _SIZE_TIE_TOL)):
        return marks
    largest = int(np.flatnonzero(h >= hmax * (1.0 - _SIZE_TIE_TOL))[0])
    return np.sort(np.append(marks, largest))


@dataclass
class AdaptiveResult:
    records: List[AdaptRecord]
    u: DiscreteFunction
    space: FeSpace

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh


def adaptive_solve(problem: ProblemSpec, mesh: Mesh, config: AdaptConfig,
                   callback: Optional[Callable] = None) -> AdaptiveResult:
    """Run the adaptive loop until the DOF bound, step bound, or estimator
    tolerance is hit.  ``callback(record, mesh, u)`` fires once per step with
    the step's mesh and solution (after the refinement timing is known)."""
    validate(problem, mesh)
    records: List[AdaptRecord] = []
    u = None
    space = None
    for step in range(config.max_steps + 1):
        space = build_space(mesh, config.p)
        t0 = time.perf_counter()
        system = assemble(space, problem, config=config.stabilization,
                          quad_degree=config.quad_degree)
        try:
            report = solve(system, tol=config.solver_tol,
                           method=config.solver_method)
        except SolveFailure as exc:
            raise AdaptiveFailure(f"solver failed at step {step}: {exc}",
                                  records) from exc
        solve_s = time.perf_counter() - t0
        u = DiscreteFunction(space, report.x)

        t1 = time.perf_counter()
        est = indicators(space, problem, u, quad_degree=config.quad_degree,
                         with_oscillations=True)
        estimate_s = time.perf_counter() - t1

        err_energy = err_supg = None
        if problem.exact is not None:
            errs = energy_error(space, problem, u, theta=system.theta,
                                quad_degree=config.quad_degree)
            err_energy, err_supg = errs.energy, errs.supg

        marks_prime, marked_sum, total_sum = _doerfler_details(est.eta2, config.theta)
        marks = enlarge_marks(mesh, marks_prime) if marks_prime.size else marks_prime
        h = mesh.sizes
        hmax = float(h.max())
        largest = h >= hmax * (1.0 - _SIZE_TIE_TOL)

        record = AdaptRecord(
            step=step, n_elements=mesh.n_elements, n_dofs=space.n_dofs,
            h_max=hmax, eta=float(np.sqrt(total_sum)), osc=est.osc_total,
            err_energy=err_energy, err_supg=err_supg,
            n_marked_prime=len(marks_prime), n_marked=len(marks),
            marked_eta2=marked_sum, total_eta2=total_sum,
            contains_largest=bool(np.any(largest[marks])) if marks.size else False,
            n_largest=int(np.count_nonzero(largest)),
            solve_s=solve_s, estimate_s=estimate_s, refine_s=0.0,
            solver_residual=report.rel_residual)
        records.append(record)

        stop = (space.n_dofs >= config.effective_max_dofs
                or step == config.max_steps
                or marks_prime.size == 0
                or (config.eta_tol is not None and record.eta <= config.eta_tol))
        step_mesh = mesh
        if not stop:
            t2 = time.perf_counter()
            mesh = refine(mesh, marks)
            record.refine_s = time.perf_counter() - t2
        if callback is not None:
            callback(record, step_mesh, u)
        if stop:
            break
    return AdaptiveResult(records=records, u=u, space=space)
