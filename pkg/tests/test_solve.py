import numpy as np
import pytest
import scipy.sparse as sp

from supgafem.assembly import assemble
from supgafem.mesh import Mesh, uniform_refine
from supgafem.problem import ProblemSpec, constant_field, constant_scalar
from supgafem.solve import SolveFailure, solve, solve_linear
from supgafem.space import build_space


def test_identity_system():
    rep = solve_linear(sp.eye(3, format="csr"), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(rep.x, [1.0, 2.0, 3.0], atol=1e-14)
    assert rep.iterations == 0
    assert rep.rel_residual <= 1e-14


def test_upper_triangular_system():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 1.0]]))
    rep = solve_linear(A, np.array([3.0, 1.0]))
    assert np.allclose(rep.x, [1.0, 1.0], atol=1e-14)


def test_random_diagonally_dominant_system():
    rng = np.random.default_rng(0)
    n = 50
    M = rng.standard_normal((n, n))
    M += np.diag(np.abs(M).sum(axis=1) + 1.0)
    A = sp.csr_matrix(M)
    b = rng.standard_normal(n)
    tol = 1e-10
    for method in ("direct", "gmres"):
        rep = solve_linear(A, b, tol=tol, method=method)
        res = np.linalg.norm(A @ rep.x - b) / np.linalg.norm(b)
        assert res <= tol * 10
        assert rep.rel_residual == pytest.approx(res, rel=1e-6)
    assert solve_linear(A, b, method="gmres").iterations > 0


def test_singular_matrix_reported():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolveFailure):
        solve_linear(A, np.array([1.0, 0.0]))


def test_deterministic_solutions():
    rng = np.random.default_rng(5)
    n = 80
    M = rng.standard_normal((n, n)) + np.diag(np.full(n, 50.0))
    A = sp.csr_matrix(M)
    b = rng.standard_normal(n)
    x1 = solve_linear(A, b).x
    x2 = solve_linear(A, b).x
    assert np.array_equal(x1, x2)


def test_solve_constrained_system_keeps_dirichlet_values():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    mesh = Mesh(verts, np.array([[1, 2, 0], [3, 0, 2]]),
                np.array([[0, 1], [1, 2], [2, 3], [3, 0]]), ["D"] * 4)
    mesh = uniform_refine(mesh)
    space = build_space(mesh, 1)
    problem = ProblemSpec(
        eps=1.0, alpha=constant_field(0.0, 0.0), div_alpha=constant_scalar(0.0),
        beta=constant_scalar(0.0), gamma=0.0, c_beta=0.0,
        f=constant_scalar(0.0),
        dirichlet=lambda x: x[:, 0],
        alpha_max=0.0)
    system = assemble(space, problem, theta=0.0)
    rep = solve(system, tol=1e-12)
    # harmonic extension of the trace of x is x itself
    assert np.allclose(rep.x, space.dof_coords[:, 0], atol=1e-12)
