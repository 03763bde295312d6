import numpy as np
import pytest

from tssdr.errors import DegenerateStackError, InvalidInputError, SingularMatrixError
from tssdr.linalg import (
    diag_objective,
    fixed_point_diag,
    inv_sqrt,
    joint_diag,
    sym_eig,
)


def random_symmetric(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a + a.T


def grid_search_objective(stack, step=1e-4):
    """Exhaustive 2x2 rotation oracle: scan the angle in [0, pi/2)."""
    thetas = np.arange(0.0, np.pi / 2, step)
    c, s = np.cos(thetas), np.sin(thetas)
    best = np.zeros_like(thetas)
    for g in stack:
        d_i = c * c * g[0, 0] + 2 * c * s * g[0, 1] + s * s * g[1, 1]
        d_j = s * s * g[0, 0] - 2 * c * s * g[0, 1] + c * c * g[1, 1]
        best += d_i ** 2 + d_j ** 2
    return float(best.max())


class TestSymEig:
    def test_identity(self):
        values, vectors = sym_eig(np.eye(3))
        np.testing.assert_allclose(values, np.ones(3))
        np.testing.assert_allclose(vectors @ vectors.T, np.eye(3), atol=1e-12)

    def test_diagonal_axis_basis(self):
        values, vectors = sym_eig(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(values, [4.0, 1.0])
        np.testing.assert_allclose(np.abs(vectors), np.eye(2), atol=1e-12)

    def test_reconstruction(self, rng):
        m = random_symmetric(rng, 5)
        values, vectors = sym_eig(m)
        rebuilt = vectors.T @ np.diag(values) @ vectors
        assert np.abs(rebuilt - m).max() <= 1e-8
        assert np.all(np.diff(values) <= 0)

    def test_non_finite_rejected(self):
        m = np.eye(3)
        m[0, 2] = m[2, 0] = np.nan
        with pytest.raises(InvalidInputError):
            sym_eig(m)

    def test_asymmetric_rejected(self):
        m = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(InvalidInputError):
            sym_eig(m)


class TestInvSqrt:
    def test_identity(self):
        np.testing.assert_allclose(inv_sqrt(np.eye(4)), np.eye(4), atol=1e-12)

    def test_scalar(self):
        np.testing.assert_allclose(inv_sqrt(np.array([[4.0]])), [[0.5]])

    def test_random_spd(self, rng):
        a = rng.normal(size=(5, 5))
        m = a @ a.T + np.eye(5)
        r = inv_sqrt(m)
        assert np.abs(r @ m @ r - np.eye(5)).max() <= 1e-6
        np.testing.assert_allclose(r, r.T, atol=1e-12)

    def test_singular_names_index(self):
        m = np.diag([1.0, 1e-20, 2.0])
        with pytest.raises(SingularMatrixError, match="eigenvalue 2"):
            inv_sqrt(m, rel_tol=1e-12)


class TestJointDiag:
    def test_single_matrix_matches_eigendecomposition(self, rng):
        m = random_symmetric(rng, 4)
        w = joint_diag([m])
        values, _ = sym_eig(m)
        assert abs(diag_objective([m], w) - np.sum(values ** 2)) <= 1e-8

    def test_already_diagonal_stack(self):
        stack = [np.diag([3.0, 1.0]), np.diag([2.0, 5.0])]
        w = joint_diag(stack)
        # identity up to signed permutation: one unit entry per row and column
        perm = np.abs(w)
        np.testing.assert_allclose(np.sort(perm, axis=1), [[0, 1], [0, 1]], atol=1e-10)
        np.testing.assert_allclose(perm.sum(axis=0), np.ones(2), atol=1e-10)
        assert abs(diag_objective(stack, w) - 39.0) <= 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_grid_search_oracle(self, seed):
        rng = np.random.default_rng(seed)
        stack = [random_symmetric(rng, 2) for _ in range(2)]
        w = joint_diag(stack)
        ours = diag_objective(stack, w)
        assert ours >= grid_search_objective(stack) - 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError, match="dimension mismatch"):
            joint_diag([np.eye(2), np.eye(3)])

    def test_empty_stack(self):
        with pytest.raises(InvalidInputError):
            joint_diag([])

    def test_rows_orthonormal(self, rng):
        stack = [random_symmetric(rng, 6) for _ in range(5)]
        w = joint_diag(stack)
        assert np.linalg.norm(w @ w.T - np.eye(6)) <= 1e-8

    def test_objective_monotone_per_sweep(self, rng):
        stack = [random_symmetric(rng, 6) for _ in range(4)]
        log = []
        joint_diag(stack, sweep_log=log)
        assert len(log) >= 1
        deltas = np.diff(np.asarray(log))
        assert np.all(deltas >= -1e-9 * max(log[-1], 1.0))

    def test_signed_permutation_invariance(self, rng):
        stack = [random_symmetric(rng, 4) for _ in range(3)]
        w = joint_diag(stack)
        perm = np.random.default_rng(1).permutation(4)
        signs = np.diag([1.0, -1.0, 1.0, -1.0])
        assert abs(diag_objective(stack, signs @ w[perm]) - diag_objective(stack, w)) <= 1e-10

    @pytest.mark.parametrize("dim", [3, 5])
    def test_commuting_stack_recovers_basis(self, dim, rng):
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        stack = [q @ np.diag(rng.normal(size=dim)) @ q.T for _ in range(4)]
        w = joint_diag(stack)
        # rows of w should match columns of q up to signed permutation
        alignment = np.abs(w @ q)
        assert alignment.max(axis=1).min() >= 1 - 1e-6

    def test_row_canonicalization(self, rng):
        stack = [random_symmetric(rng, 5) for _ in range(3)]
        w = joint_diag(stack)
        scores = np.zeros(5)
        for g in stack:
            scores += np.einsum("ij,jk,ik->i", w, g, w) ** 2
        assert np.all(np.diff(scores) <= 1e-10)
        for row in w:
            assert row[np.argmax(np.abs(row))] > 0


class TestFixedPointDiag:
    def test_diagonal_stack_identity_fixed_point(self):
        stack = [np.diag([3.0, 1.0, 2.0]), np.diag([1.0, 4.0, 0.5])]
        w = fixed_point_diag(stack, np.eye(3))
        # identity is a fixed point; canonicalization may reorder rows
        perm = np.abs(w)
        assert np.abs(np.sort(perm, axis=1)[:, :-1]).max() <= 1e-10
        np.testing.assert_allclose(perm.max(axis=1), np.ones(3), atol=1e-10)
        np.testing.assert_allclose(perm.sum(axis=0), np.ones(3), atol=1e-10)

    def test_agrees_with_jacobi_solver(self, rng):
        stack = [random_symmetric(rng, 3) for _ in range(4)]
        w_jac = joint_diag(stack)
        w_fp = fixed_point_diag(stack, w_jac)
        assert abs(diag_objective(stack, w_fp) - diag_objective(stack, w_jac)) <= 1e-4

    def test_single_matrix_eigenbasis(self, rng):
        m = random_symmetric(rng, 4)
        w = fixed_point_diag([m], np.eye(4))
        values, _ = sym_eig(m)
        assert abs(diag_objective([m], w) - np.sum(values ** 2)) <= 1e-6

    def test_degenerate_stack(self):
        with pytest.raises(DegenerateStackError):
            fixed_point_diag([np.zeros((3, 3))], np.eye(3))

    def test_bad_init_shape(self):
        with pytest.raises(InvalidInputError):
            fixed_point_diag([np.eye(3)], np.eye(2))
