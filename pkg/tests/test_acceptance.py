"""Acceptance suite: one test per criterion, printing one PASS/FAIL line each.

The convergence studies run through the CLI layer (session-cached) at the
scales stated in the criteria, roughly 2e5 elements per run.  Rate fits are
least-squares over the trailing decade of element counts (falling back to the
last four rows for uniform runs, which only produce one row per
quadrisection).
"""

import time
from itertools import combinations

import numpy as np
import pytest

from conftest import report, tail_slope

from supgafem.adapt import doerfler_mark
from supgafem.assembly import (
    StabilizationConfig,
    assemble,
    energy_gram,
    streamline_gram,
)
from supgafem.estimator import energy_error, indicators
from supgafem.mesh import angle_census, is_conforming, refine, uniform_refine
from supgafem.problem import ProblemSpec, constant_field, constant_scalar
from supgafem.problems import build
from supgafem.space import DiscreteFunction, build_space, interpolate, prolong

RNG_SEED = 20240811


def interp_loglog(n, y, at):
    return float(np.exp(np.interp(np.log(at), np.log(n), np.log(y))))


# -- A1 ----------------------------------------------------------------------

@pytest.mark.parametrize("problem_id,degree", [
    ("consistency_linear", 1), ("consistency_quadratic", 2)])
def test_A1_consistency(registry, problem_id, degree):
    t0 = time.perf_counter()
    data = registry.get(problem_id, degree, 0.5,
                        max_dofs=2500 if degree == 1 else 9000, max_steps=12)
    wall = time.perf_counter() - t0 + data["wall"]
    cols = data["cols"]
    problem, mesh = build(problem_id)
    space = build_space(mesh, degree)
    zero = DiscreteFunction(space, np.zeros(space.n_dofs))
    norm_u = energy_error(space, problem, zero).energy
    rel = np.max(cols["err_energy"]) / norm_u
    ok = len(cols["step"]) >= 8 and rel <= 1e-9 and wall < 10.0
    report(f"A1[{problem_id}]", ok,
           f"steps={len(cols['step'])}, max rel energy error={rel:.2e}, "
           f"runtime={wall:.1f}s")


# -- A2 ----------------------------------------------------------------------

def _smooth_runs(registry):
    ada1 = registry.get("smooth_layer", 1, 0.5, max_dofs=110_000)
    ada2 = registry.get("smooth_layer", 2, 0.5, max_dofs=300_000)
    uni1 = registry.get("smooth_layer", 1, 1.0, max_steps=6)
    uni2 = registry.get("smooth_layer", 2, 1.0, max_steps=6)
    return ada1, ada2, uni1, uni2


def test_A2_smooth_layer_error_rates(registry):
    ada1, ada2, _, _ = _smooth_runs(registry)
    s1 = tail_slope(ada1["cols"]["n_elem"], ada1["cols"]["err_energy"])
    s2 = tail_slope(ada2["cols"]["n_elem"], ada2["cols"]["err_energy"])
    ok = abs(s1 - 0.5) <= 0.10 and abs(s2 - 1.0) <= 0.15
    report("A2[error rates]", ok,
           f"err slope p1={s1:.3f} (want 0.5±0.10), p2={s2:.3f} (want 1.0±0.15)")


def test_A2_smooth_layer_estimator_rates(registry):
    # The estimator for this data set is dominated by its oscillation and
    # streamline-residual content far into the asymptotic range: measured
    # eta <= 1.15*(err+osc) (sharp efficiency), with that content decaying
    # one order faster than the error until local Peclet numbers reach O(1)
    # (beyond 1e6 elements at eps=1e-4).  The criterion is kept as stated and
    # is expected to fail at the stated scale; see the decisions ledger.
    ada1, ada2, _, _ = _smooth_runs(registry)
    s1 = tail_slope(ada1["cols"]["n_elem"], ada1["cols"]["eta"])
    s2 = tail_slope(ada2["cols"]["n_elem"], ada2["cols"]["eta"])
    sharp1 = np.max(ada1["cols"]["eta"][-5:]
                    / (ada1["cols"]["err_energy"][-5:] + ada1["cols"]["osc"][-5:]))
    ok = abs(s1 - 0.5) <= 0.10 and abs(s2 - 1.0) <= 0.15
    report("A2[estimator rates]", ok,
           f"eta slope p1={s1:.3f} (want 0.5±0.10), p2={s2:.3f} (want 1.0±0.15); "
           f"efficiency is sharp (eta/(err+osc)={sharp1:.2f}), so the excess "
           f"rate is the Peclet transient of the data-oscillation content")


def test_A2_adaptive_beats_uniform(registry):
    ada1, ada2, uni1, uni2 = _smooth_runs(registry)
    lines = []
    ok = True
    for ada, uni, p in ((ada1, uni1, 1), (ada2, uni2, 2)):
        n_cmp = uni["cols"]["n_elem"][-1]
        e_uni = uni["cols"]["err_energy"][-1]
        e_ada = interp_loglog(ada["cols"]["n_elem"], ada["cols"]["err_energy"], n_cmp)
        ok = ok and e_ada < e_uni
        lines.append(f"p{p}: ada {e_ada:.3e} vs uni {e_uni:.3e} at N={int(n_cmp)}")
    report("A2[adaptive beats uniform]", ok, "; ".join(lines))


# -- A3 ----------------------------------------------------------------------

def test_A3_lshape_singular_rates(registry):
    # known solution: rates are measured on the energy error
    uni1 = registry.get("lshape_singular", 1, 1.0, max_steps=8)
    ada1 = registry.get("lshape_singular", 1, 0.5, max_dofs=110_000)
    ada2 = registry.get("lshape_singular", 2, 0.5, max_dofs=400_000)
    s_uni = tail_slope(uni1["cols"]["n_elem"], uni1["cols"]["err_energy"])
    s1 = tail_slope(ada1["cols"]["n_elem"], ada1["cols"]["err_energy"])
    s2 = tail_slope(ada2["cols"]["n_elem"], ada2["cols"]["err_energy"])
    ok = (abs(s_uni - 1 / 3) <= 0.07 and abs(s1 - 0.5) <= 0.10
          and abs(s2 - 1.0) <= 0.15)
    report("A3", ok,
           f"uniform p1 err slope={s_uni:.3f} (want 0.333±0.07), "
           f"adaptive p1={s1:.3f} (want 0.5±0.10), "
           f"adaptive p2={s2:.3f} (want 1.0±0.15)")


# -- A4 ----------------------------------------------------------------------

def test_A4_practical_adaptive_rates(registry):
    ada1 = registry.get("lshape_practical", 1, 0.5, max_dofs=200_000)
    ada2 = registry.get("lshape_practical", 2, 0.5, max_dofs=300_000)
    s1 = tail_slope(ada1["cols"]["n_elem"], ada1["cols"]["eta"])
    s2 = tail_slope(ada2["cols"]["n_elem"], ada2["cols"]["eta"])
    ok = abs(s1 - 0.5) <= 0.15 and abs(s2 - 1.0) <= 0.2
    report("A4[adaptive eta rates]", ok,
           f"eta slope p1={s1:.3f} (want 0.5±0.15), p2={s2:.3f} (want 1.0±0.2)")


@pytest.mark.parametrize("degree,uni_steps", [(1, 7), (2, 6)])
def test_A4_uniform_slope_worse(registry, degree, uni_steps):
    # For p=1 both runs sit in the same estimator transient at this scale
    # (the uniform run has not reached the corner-limited N^(-1/3) regime),
    # so the stated gap does not open below ~1e6 elements; kept as stated.
    ada = registry.get("lshape_practical", degree, 0.5,
                       max_dofs=200_000 if degree == 1 else 300_000)
    uni = registry.get("lshape_practical", degree, 1.0, max_steps=uni_steps)
    s_ada = tail_slope(ada["cols"]["n_elem"], ada["cols"]["eta"])
    s_uni = tail_slope(uni["cols"]["n_elem"], uni["cols"]["eta"])
    ok = s_uni <= s_ada - 0.1
    report(f"A4[uniform worse, p{degree}]", ok,
           f"uniform eta slope={s_uni:.3f} vs adaptive={s_ada:.3f} "
           f"(want uniform <= adaptive - 0.1)")


# -- A5 ----------------------------------------------------------------------

@pytest.mark.parametrize("problem_id,degree,max_dofs", [
    ("smooth_layer", 1, 110_000),
    ("smooth_layer", 2, 300_000),
    ("lshape_singular", 1, 110_000),
    ("lshape_singular", 2, 400_000),
])
def test_A5_effectivity_stability(registry, problem_id, degree, max_dofs):
    # The ratio keeps decaying while local Peclet numbers are large (the
    # efficiency constant is Peclet-dependent); at the stated scales only the
    # lshape p2 run has left that transient.  Criterion kept as stated.
    data = registry.get(problem_id, degree, 0.5, max_dofs=max_dofs)
    cols = data["cols"]
    ratio = cols["eta"] / cols["err_energy"]
    tail = ratio[-10:]
    factor = float(np.max(tail) / np.min(tail))
    ok = factor <= 3.0
    report(f"A5[{problem_id} p{degree}]", ok,
           f"eta/err ratio varies by x{factor:.2f} over the last 10 steps "
           f"(want <= 3); end ratio {ratio[-1]:.1f}")


# -- A6 ----------------------------------------------------------------------

def _axiom_problem(domain):
    _, mesh = build("smooth_layer" if domain == "square" else "lshape_singular")
    has_neumann = domain != "square"
    problem = ProblemSpec(
        eps=1e-2, alpha=constant_field(2.0, 3.0), div_alpha=constant_scalar(0.0),
        beta=constant_scalar(2.0), gamma=2.0, c_beta=1.0,
        f=lambda x: 1.0 + np.atleast_2d(x)[:, 0] - 0.5 * np.atleast_2d(x)[:, 1],
        dirichlet=constant_scalar(0.0),
        g=(lambda x, n: np.full(len(np.atleast_2d(x)), 1e-3)) if has_neumann else None,
        alpha_max=float(np.hypot(2.0, 3.0)))
    while np.max(mesh.sizes) > np.sqrt(problem.eps / problem.gamma):
        mesh = uniform_refine(mesh)
    return problem, mesh


@pytest.mark.parametrize("domain", ["square", "lshape"])
@pytest.mark.parametrize("degree", [1, 2])
def test_A6_estimator_axioms(domain, degree):
    # polynomial data keep the quadrature exact, so the inequalities are
    # exact up to roundoff; eps is chosen so the reduction condition
    # ||h||_inf <= (eps/gamma)^(1/2) holds at desk scale
    problem, mesh = _axiom_problem(domain)
    rng = np.random.default_rng(RNG_SEED)
    q_red = 2.0 ** (-0.25)
    worst_mono = 0.0
    worst_red = 0.0
    for _pair in range(3):
        assert np.max(mesh.sizes) <= np.sqrt(problem.eps / problem.gamma)
        space = build_space(mesh, degree)
        fine = refine(mesh, rng.choice(mesh.n_elements,
                                       size=max(1, mesh.n_elements // 3),
                                       replace=False))
        fspace = build_space(fine, degree)
        children = fine.generation > mesh.generation[fine.parent]
        refined_parents = np.unique(fine.parent[children])
        for _trial in range(20):
            v = DiscreteFunction(space, rng.standard_normal(space.n_dofs))
            vf = prolong(v, fspace)
            eta_c = indicators(space, problem, v).eta2
            eta_f = indicators(fspace, problem, vf).eta2
            by_parent = np.zeros(mesh.n_elements)
            np.add.at(by_parent, fine.parent, eta_f)
            mono = np.max((by_parent - eta_c) / np.maximum(eta_c, 1e-300))
            worst_mono = max(worst_mono, mono)
            lhs = np.sqrt(np.sum(eta_f[children]))
            rhs = np.sqrt(np.sum(eta_c[refined_parents]))
            worst_red = max(worst_red, lhs / rhs)
        mesh = fine
    ok = worst_mono <= 1e-10 and worst_red <= q_red + 1e-10
    report(f"A6[{domain} p{degree}]", ok,
           f"monotonicity excess={worst_mono:.2e} (want <=1e-10), "
           f"reduction factor={worst_red:.6f} (want <= {q_red:.6f}+1e-10)")


# -- A7 ----------------------------------------------------------------------

@pytest.mark.parametrize("problem_id", [
    "smooth_layer", "lshape_singular", "lshape_practical",
    "consistency_linear", "consistency_quadratic"])
def test_A7_supg_ellipticity(problem_id):
    problem, mesh = build(problem_id)
    rng = np.random.default_rng(RNG_SEED + 7)
    worst = np.inf
    for degree in (1, 2):
        m = mesh
        for _level in range(3):
            space = build_space(m, degree)
            cfg = StabilizationConfig(mode="section5", clamp=True)
            system = assemble(space, problem, config=cfg)
            E = energy_gram(space, problem)
            S = streamline_gram(space, problem, system.theta)
            B = system.raw_matrix
            free = system.free_mask
            nf = int(free.sum())
            for _trial in range(100):
                v = np.zeros(space.n_dofs)
                v[free] = rng.standard_normal(nf)
                lhs = v @ (B @ v)
                rhs = 0.5 * (v @ (E @ v) + v @ (S @ v))
                worst = min(worst, (lhs - rhs) / abs(rhs))
            m = uniform_refine(m)
    ok = worst >= -1e-10
    report(f"A7[{problem_id}]", ok,
           f"min relative ellipticity slack={worst:.2e} (want >= -1e-10)")


# -- A8 ----------------------------------------------------------------------

def _brute_force_min_cardinality(eta2, theta):
    total = eta2.sum()
    for size in range(len(eta2) + 1):
        for combo in combinations(range(len(eta2)), size):
            if eta2[list(combo)].sum() >= theta * total:
                return size
    return len(eta2)


def test_A8_marking_oracle(registry):
    rng = np.random.default_rng(RNG_SEED + 8)
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(1, 13))
        eta2 = rng.random(n) ** 2
        theta = float(rng.uniform(0.05, 1.0))
        marks = doerfler_mark(eta2, theta)
        if len(marks) != _brute_force_min_cardinality(eta2, theta):
            mismatches += 1
        if eta2[marks].sum() < theta * eta2.sum() * (1 - 1e-12):
            mismatches += 1
    # step-(iv) constraints on recorded runs: cardinality from the CSVs,
    # largest-element containment from in-memory records
    registry.get("consistency_linear", 1, 0.5, max_dofs=2500, max_steps=12)
    bad_steps = 0
    n_steps = 0
    for run_data in registry.all_runs():
        cols = run_data["cols"]
        for mp, m in zip(cols["n_marked_prime"], cols["n_marked"]):
            n_steps += 1
            if mp > 0 and m > 2 * mp:
                bad_steps += 1
    from supgafem.adapt import AdaptConfig, adaptive_solve
    missing_largest = 0
    for problem_id, degree in (("smooth_layer", 1), ("lshape_practical", 2)):
        problem, mesh = build(problem_id)
        res = adaptive_solve(problem, mesh,
                             AdaptConfig(theta=0.5, p=degree, max_dofs=2500))
        for r in res.records:
            n_steps += 1
            if r.n_marked_prime > 0 and not r.contains_largest:
                missing_largest += 1
            if r.n_marked_prime > 0 and r.n_marked > 2 * r.n_marked_prime:
                bad_steps += 1
    ok = mismatches == 0 and bad_steps == 0 and missing_largest == 0
    report("A8", ok,
           f"greedy vs brute force mismatches={mismatches}/200; "
           f"enlargement violations={bad_steps}, missing-largest="
           f"{missing_largest} over {n_steps} recorded steps")


# -- A9 ----------------------------------------------------------------------

def test_A9_mesh_kernel():
    rng = np.random.default_rng(RNG_SEED + 9)
    worst_area = 0.0
    worst_child = 0.0
    census_sizes = {}
    conforming = True
    for problem_id in ("smooth_layer", "lshape_singular"):
        _, mesh = build(problem_id)
        # random refinement cascade with conformity and genealogy checks
        m = mesh
        for _ in range(6):
            marked = rng.choice(m.n_elements, size=max(1, m.n_elements // 4),
                                replace=False)
            fine = refine(m, marked)
            conforming = conforming and is_conforming(fine)
            sums = np.zeros(m.n_elements)
            np.add.at(sums, fine.parent, fine.areas)
            worst_area = max(worst_area, np.max(np.abs(sums / m.areas - 1.0)))
            proper = fine.generation > m.generation[fine.parent]
            worst_child = max(worst_child, np.max(
                fine.sizes[proper] / m.sizes[fine.parent[proper]]))
            m = fine
        # uniform refinement to bisection depth 8 (4 rounds of 3 bisections
        # raise the generation by 2 each): finite, stabilized census
        m = mesh
        sizes = []
        for _ in range(4):
            m = uniform_refine(m)
            sizes.append(len(angle_census(m)))
        census_sizes[problem_id] = sizes
        conforming = conforming and is_conforming(m)
    stable = all(s[-1] == s[-2] and s[-1] <= 16 for s in census_sizes.values())
    ok = (conforming and worst_area <= 1e-12
          and worst_child <= 2 ** -0.5 * (1 + 1e-12) and stable)
    report("A9", ok,
           f"conforming={conforming}, area identity error={worst_area:.2e}, "
           f"max child/parent size={worst_child:.6f} (want <= {2**-0.5:.6f}), "
           f"census depth6 vs depth8: {census_sizes}")
