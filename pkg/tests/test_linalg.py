"""Dense kernels checked against numpy.linalg as an independent oracle."""

import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsfd.linalg import (
    MAX_EIGEN_DIM,
    EigenConvergenceError,
    LinAlgError,
    SingularMatrixError,
    eigenvalues,
    fd_jacobian,
    is_diagonally_dominant,
    is_metzler,
    lu_solve,
    lu_solve_batch,
)

SOLVE_RTOL = 1e-10
EIG_ATOL = 1e-7


def test_lu_solve_matches_reference_solver(rng):
    for _ in range(50):
        n = int(rng.integers(1, 9))
        a = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        x = lu_solve(a, b)
        x_ref = np.linalg.solve(a, b)
        assert np.allclose(x, x_ref, rtol=SOLVE_RTOL, atol=1e-14)


def test_lu_solve_identity_is_exact():
    b = np.array([3.0, -1.0, 0.5])
    assert np.array_equal(lu_solve(np.eye(3), b), b)


def test_lu_solve_needs_pivoting():
    # zero top-left pivot forces a row swap
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    b = np.array([2.0, 5.0])
    assert np.allclose(lu_solve(a, b), [5.0, 2.0], rtol=0, atol=1e-15)


def test_lu_solve_singular_raises():
    with pytest.raises(SingularMatrixError):
        lu_solve(np.zeros((2, 2)), np.ones(2))
    rank1 = np.outer([1.0, 2.0], [3.0, 4.0])
    with pytest.raises(SingularMatrixError):
        lu_solve(rank1, np.ones(2))


def test_lu_solve_rejects_bad_shapes():
    # shape misuse is a programming error, not a numerical failure
    with pytest.raises(ValueError):
        lu_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        lu_solve(np.eye(2), np.ones(3))


def test_lu_solve_batch_matches_scalar_solves(rng):
    m, n = 7, 4
    mats = rng.standard_normal((m, n, n)) + n * np.eye(n)
    rhs = rng.standard_normal((m, n))
    xs = lu_solve_batch(mats, rhs)
    assert xs.shape == (m, n)
    for r in range(m):
        assert np.allclose(xs[r], lu_solve(mats[r], rhs[r]), rtol=1e-13, atol=1e-14)


def test_lu_solve_batch_singular_member_raises(rng):
    mats = np.stack([np.eye(2), np.zeros((2, 2))])
    with pytest.raises(SingularMatrixError):
        lu_solve_batch(mats, np.ones((2, 2)))


@seed(7)
@given(
    a=arrays(np.float64, (4, 4), elements=st.floats(-10, 10)),
    b=arrays(np.float64, (4,), elements=st.floats(-10, 10)),
)
def test_lu_solve_residual_is_small_for_dominant_systems(a, b):
    shifted = a + (4.0 * 10.0 + 1.0) * np.eye(4)
    x = lu_solve(shifted, b)
    assert np.max(np.abs(shifted @ x - b)) <= 1e-9 * (1.0 + np.max(np.abs(b)))


def _match_eigenvalues(mine, reference, atol):
    # greedy nearest-match; robust to ordering differences
    pool = list(mine)
    for lam in reference:
        dists = [abs(lam - m) for m in pool]
        k = int(np.argmin(dists))
        assert dists[k] <= atol, f"no eigenvalue near {lam}: off by {dists[k]:.3e}"
        pool.pop(k)


def test_eigenvalues_companion_cubic():
    a = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    lams = eigenvalues(a)
    assert isinstance(lams, list)
    _match_eigenvalues(lams, [1.0, 2.0, 3.0], atol=1e-12)


def test_eigenvalues_rotation_gives_conjugate_pair():
    lams = eigenvalues(np.array([[0.0, -1.0], [1.0, 0.0]]))
    _match_eigenvalues(lams, [1j, -1j], atol=1e-14)


def test_eigenvalues_triangular_reads_diagonal():
    a = np.array([[2.0, 5.0, 1.0], [0.0, -3.0, 2.0], [0.0, 0.0, 0.5]])
    _match_eigenvalues(eigenvalues(a), [2.0, -3.0, 0.5], atol=1e-12)


def test_eigenvalues_match_reference_on_random_matrices(rng):
    for _ in range(40):
        n = int(rng.integers(1, 9))
        a = rng.standard_normal((n, n))
        scale = 1.0 + np.max(np.abs(a))
        _match_eigenvalues(eigenvalues(a), np.linalg.eigvals(a), atol=EIG_ATOL * scale)


def test_eigenvalues_symmetric_are_real(rng):
    a = rng.standard_normal((6, 6))
    sym = a + a.T
    lams = eigenvalues(sym)
    assert max(abs(l.imag) for l in lams) <= 1e-9
    _match_eigenvalues(lams, np.linalg.eigvalsh(sym), atol=1e-8 * (1 + np.max(np.abs(sym))))


def test_eigenvalues_dimension_cap():
    big = np.eye(MAX_EIGEN_DIM + 1)
    with pytest.raises(ValueError):
        eigenvalues(big)


def test_eigen_convergence_error_is_linalg_error():
    assert issubclass(EigenConvergenceError, LinAlgError)
    assert issubclass(SingularMatrixError, LinAlgError)


def test_is_diagonally_dominant_hand_cases():
    assert is_diagonally_dominant(np.array([[2.0, 1.0], [0.5, 2.0]]))
    # column equality must not count as strict, but passes the loose check
    tied = np.array([[1.0, 0.0], [1.0, 2.0]])
    assert not is_diagonally_dominant(tied)
    assert is_diagonally_dominant(tied, strict=False)
    assert not is_diagonally_dominant(np.array([[0.5, 1.0], [2.0, 0.5]]))


def test_is_diagonally_dominant_row_mode():
    a = np.array([[2.0, 1.5], [0.1, 1.0]])
    assert not is_diagonally_dominant(a)
    assert is_diagonally_dominant(a, mode="row")
    with pytest.raises(ValueError):
        is_diagonally_dominant(a, mode="diagonal")


def test_is_diagonally_dominant_checks_columns():
    # row-dominant but not column-dominant
    a = np.array([[3.0, 2.9], [2.95, 3.0]])
    assert is_diagonally_dominant(a)
    a = np.array([[1.0, 0.0], [5.0, 10.0]])
    assert not is_diagonally_dominant(a)


def test_is_metzler_hand_cases():
    assert is_metzler(np.array([[-5.0, 2.0], [0.0, -1.0]]))
    assert not is_metzler(np.array([[1.0, -0.1], [0.0, 1.0]]))
    # diagonal sign is unconstrained
    assert is_metzler(np.diag([-1.0, -2.0]))


def test_fd_jacobian_matches_analytic_quadratic():
    def f(x):
        return np.array([x[0] ** 2 + x[1], x[0] * x[1]])

    x = np.array([1.3, -0.7])
    jac = fd_jacobian(f, x)
    expected = np.array([[2 * 1.3, 1.0], [-0.7, 1.3]])
    assert np.allclose(jac, expected, rtol=0, atol=1e-7)


def test_fd_jacobian_linear_map_is_near_exact(rng):
    a = rng.standard_normal((3, 3))
    x = rng.standard_normal(3)
    jac = fd_jacobian(lambda v: a @ v, x)
    assert np.allclose(jac, a, rtol=0, atol=1e-9)
