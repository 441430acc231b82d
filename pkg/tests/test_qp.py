import numpy as np
import pytest

from oracles import random_feasible_perturbations
from weavestrf.errors import QpInfeasible, QpUnbounded
from weavestrf.qp import QpProblem, certify, solve_qp


def test_projection_example():
    p = QpProblem(2 * np.eye(4), np.zeros(4), [[1, 0, 0, 0]], [3.0])
    x = solve_qp(p).x
    np.testing.assert_allclose(x, [3, 0, 0, 0], atol=1e-12)


def test_lagrangian_example():
    p = QpProblem(2 * np.eye(2), [-2.0, -2.0], [[1, 1]], [1.0])
    x = solve_qp(p).x
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-12)
    assert certify(p, x).ok()


def test_contradictory_bounds():
    p = QpProblem(np.eye(1), [0.0], A_in=[[1.0], [1.0]], lb=[1.0, -np.inf], ub=[np.inf, 0.0])
    with pytest.raises(QpInfeasible):
        solve_qp(p)


def test_unbounded_reported_distinctly():
    p = QpProblem(np.zeros((2, 2)), [-1.0, 0.0], A_in=[[0.0, 1.0]], lb=[0.0], ub=[1.0])
    with pytest.raises(QpUnbounded):
        solve_qp(p)


def test_pinned_variable_exact():
    p = QpProblem(2 * np.eye(3), [1.0, -1.0, 0.3], [[0, 1, 0]], [0.1 + 0.2])
    assert solve_qp(p).x[1] == 0.1 + 0.2


def test_all_variables_pinned():
    p = QpProblem(np.eye(2), [0.0, 0.0], [[1, 0], [0, 1]], [1.0, 2.0], [[1, 1]], [0.0], [5.0])
    np.testing.assert_array_equal(solve_qp(p).x, [1.0, 2.0])


def test_rejects_asymmetric():
    with pytest.raises(ValueError):
        QpProblem([[1, 2], [0, 1]], [0, 0])


def random_problem(rng, n=8, m_eq=2, m_in=10):
    M = rng.normal(size=(n, n))
    H = M.T @ M + 1e-3 * np.eye(n)
    x0 = rng.normal(size=n)
    Ae = rng.normal(size=(m_eq, n))
    Ai = rng.normal(size=(m_in, n))
    ax = Ai @ x0
    lb = ax - rng.uniform(0, 1, m_in)
    ub = ax + rng.uniform(0, 1, m_in)
    lb[rng.random(m_in) < 0.3] = -np.inf
    return QpProblem(H, rng.normal(size=n) * 5, Ae, Ae @ x0, Ai, lb, ub)


def test_random_problems_certified_and_optimal():
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = random_problem(rng)
        x = solve_qp(p).x
        rep = certify(p, x)
        assert rep.ok(), rep
        fx = p.objective(x)
        pts = random_feasible_perturbations(p, x, rng, count=100, scale=0.5)
        assert len(pts) == 100
        assert all(fx <= p.objective(y) + 1e-9 * (1 + abs(fx)) for y in pts)


def test_deterministic():
    rng = np.random.default_rng(2)
    p = random_problem(rng)
    assert np.array_equal(solve_qp(p).x, solve_qp(p).x)
