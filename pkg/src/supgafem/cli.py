"""Command-line driver: run benchmarks, emit CSV + mesh snapshots, fit rates.

results.csv columns:
step,n_elem,n_dofs,h_max,eta,osc,err_energy,err_supg,n_marked_prime,n_marked,
solve_ms,estimate_ms,refine_ms
Floats use 17 significant digits; error columns stay empty without an exact
solution.  Rows are appended and flushed per step, so a crashed run leaves a
parseable prefix.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .adapt import AdaptConfig, AdaptiveFailure, adaptive_solve
from .assembly import StabilizationConfig
from .mesh import write_mesh
from .problems import BENCHMARKS, build

CSV_HEADER = ("step,n_elem,n_dofs,h_max,eta,osc,err_energy,err_supg,"
              "n_marked_prime,n_marked,solve_ms,estimate_ms,refine_ms")


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}"


def csv_row(record) -> str:
    return ",".join([
        str(record.step), str(record.n_elements), str(record.n_dofs),
        _fmt(record.h_max), _fmt(record.eta), _fmt(record.osc),
        _fmt(record.err_energy), _fmt(record.err_supg),
        str(record.n_marked_prime), str(record.n_marked),
        _fmt(record.solve_s * 1e3), _fmt(record.estimate_s * 1e3),
        _fmt(record.refine_s * 1e3),
    ])


def run(problem_id: str, degree: int, theta: float, out_dir,
        max_dofs=None, max_steps: int = 60, solver_tol: float = 1e-10,
        quad_degree=None, snapshot_steps=()) -> int:
    """Run one benchmark configuration; returns a process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, mesh = build(problem_id)
    config = AdaptConfig(theta=theta, p=degree, max_dofs=max_dofs,
                         max_steps=max_steps, solver_tol=solver_tol,
                         quad_degree=quad_degree,
                         stabilization=StabilizationConfig(mode="section5"))
    meta = {
        "problem": problem_id, "degree": degree, "theta": theta,
        "max_dofs": config.effective_max_dofs, "max_steps": max_steps,
        "solver_tol": solver_tol, "quad_degree": quad_degree,
        "snapshot_steps": list(snapshot_steps),
        "stabilization_mode": config.stabilization.mode,
    }
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    snapshots = set(snapshot_steps)

    with open(out / "results.csv", "w") as csv:
        csv.write(CSV_HEADER + "\n")
        csv.flush()

        def emit(record, step_mesh, u):
            csv.write(csv_row(record) + "\n")
            csv.flush()
            if record.step in snapshots:
                write_mesh(step_mesh, out / f"mesh_{record.step:04d}.txt")

        try:
            adaptive_solve(problem, mesh, config, callback=emit)
        except AdaptiveFailure as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return 0


def read_results(path):
    """Parse a results.csv into a dict of numpy arrays (nan for blanks)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized results.csv header")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line]
    if any(len(r) != len(names) for r in rows):
        raise ValueError("malformed results.csv row")
    cols = {}
    for j, name in enumerate(names):
        vals = []
        for r in rows:
            if r[j] == "":
                vals.append(np.nan)
            else:
                vals.append(float(r[j]))
        cols[name] = np.array(vals)
    return cols


def slope(csv_path, column: str, tail_fraction: float = 0.4) -> float:
    """Least-squares rate s in column ~ n_elem^(-s) over the tail rows."""
    cols = read_results(csv_path)
    if column not in cols:
        raise ValueError(f"no column '{column}' in {csv_path}")
    n = cols["n_elem"]
    y = cols[column]
    keep = np.isfinite(y) & (y > 0)
    n, y = n[keep], y[keep]
    n_tail = max(int(np.ceil(tail_fraction * len(n))), 4)
    if n_tail > len(n):
        raise ValueError("need at least 4 tail rows for a rate fit")
    ln = np.log(n[-n_tail:])
    ly = np.log(y[-n_tail:])
    coeffs = np.polyfit(ln, ly, 1)
    return float(-coeffs[0])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="supg-afem",
        description="Adaptive stabilized FEM for convection-diffusion benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark and write results.csv")
    p_run.add_argument("--problem", required=True, choices=BENCHMARKS)
    p_run.add_argument("--degree", type=int, choices=(1, 2), default=1)
    p_run.add_argument("--theta", type=float, default=0.5)
    p_run.add_argument("--max-dofs", type=int, default=None)
    p_run.add_argument("--max-steps", type=int, default=60)
    p_run.add_argument("--solver-tol", type=float, default=1e-10)
    p_run.add_argument("--quad-degree", type=int, default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--snapshots", default="",
                       help="comma-separated step indices to dump meshes for")

    p_slope = sub.add_parser("slope", help="fit a convergence rate from a CSV")
    p_slope.add_argument("csv")
    p_slope.add_argument("--column", default="eta")
    p_slope.add_argument("--tail", type=float, default=0.4)

    args = parser.parse_args(argv)
    if args.command == "run":
        snaps = [int(s) for s in args.snapshots.split(",") if s.strip() != ""]
        return run(args.problem, args.degree, args.theta, args.out,
                   max_dofs=args.max_dofs, max_steps=args.max_steps,
                   solver_tol=args.solver_tol, quad_degree=args.quad_degree,
                   snapshot_steps=snaps)
    if args.command == "slope":
        try:
            s = slope(args.csv, args.column, args.tail)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"{s:.6g}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
