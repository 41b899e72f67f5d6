"""Linear-algebra helpers shared by the stage solvers."""
import numpy as np
import pytest

from mssrk.solver import SolverConfig, SolverError, lstsq_min_norm, range_projector, robust_solve


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)


def test_solver_error_carries_residual():
    err = SolverError("stalled", 1.5e-3)
    assert err.residual == 1.5e-3
    assert "1.500e-03" in str(err)


def test_robust_solve_regular_matrix():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6)) + 6.0 * np.eye(6)
    b = rng.standard_normal(6)
    np.testing.assert_allclose(robust_solve(A, b), np.linalg.solve(A, b), rtol=1e-12)


def test_robust_solve_singular_falls_back_to_min_norm():
    A = np.diag([1.0, 1.0, 0.0])
    b = np.array([2.0, 3.0, 0.0])  # consistent but singular
    x = robust_solve(A, b)
    np.testing.assert_allclose(x, [2.0, 3.0, 0.0], atol=1e-12)


def test_lstsq_min_norm_picks_smallest_solution():
    A = np.array([[1.0, 1.0]])
    x = lstsq_min_norm(A, np.array([2.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-12)


def test_range_projector_of_skew_matrix():
    # 3x3 skew matrix has a 1D kernel along its axis vector
    w = np.array([1.0, -2.0, 0.5])
    M = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    P = range_projector(M)
    np.testing.assert_allclose(P @ P, P, atol=1e-13)
    np.testing.assert_allclose(P, P.T, atol=1e-13)
    np.testing.assert_allclose(P @ w, np.zeros(3), atol=1e-13)
    # acts as identity on the range
    v = M @ np.array([0.3, 1.0, -0.7])
    np.testing.assert_allclose(P @ v, v, atol=1e-13)


def test_range_projector_full_rank_is_identity():
    M = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(range_projector(M), np.eye(2), atol=1e-14)


def test_range_projector_zero_matrix():
    np.testing.assert_array_equal(range_projector(np.zeros((3, 3))), np.zeros((3, 3)))
