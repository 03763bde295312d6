import numpy as np
import pytest

from tssdr.errors import DegenerateStackError, InvalidInputError, SingularMatrixError
from tssdr.estimators import (
    check_affine_equivariance,
    read_fit_csv,
    tsdr_fit,
    vectorized_fit,
    write_fit_csv,
)
from tssdr.linalg import diag_objective
from tssdr.supervision import slice_cov_matrix
from tssdr.tsgen import gen_sources, make_simulation, simulate

LAGS = tuple(range(1, 13))


@pytest.fixture(scope="module")
def example_data():
    """4-component setup with y = z1_{t-1}^2 + 3 z2_{t-5} + eps."""
    spec = make_simulation("B", "table1")
    return simulate(spec, 3000, 42)


class TestTsdrFit:
    def test_row_ordering(self, example_data):
        x, y, _ = example_data
        for method in ("tsir", "tsave", "tssh"):
            fit = tsdr_fit(x, y, method, LAGS)
            totals = fit.lambdas.sum(axis=1)
            assert np.all(np.diff(totals) <= 1e-12)

    def test_l_matrix_normalized(self, example_data):
        x, y, _ = example_data
        fit = tsdr_fit(x, y, "tsave", LAGS, 2)
        assert abs(fit.l_matrix.sum() - 1.0) <= 1e-12
        assert np.all(fit.lambdas >= 0)

    def test_objective_consistency(self, example_data):
        # the diagonalizer maximizes the sum of squared contributions
        x, y, _ = example_data
        fit = tsdr_fit(x, y, "tsave", LAGS, 2)
        x_st = (x - fit.x_mean) @ fit.whitener
        from tssdr.supervision import moment_stack

        stack = moment_stack(x_st, y, LAGS, "tsave", 2)
        assert abs((fit.lambdas ** 2).sum() - diag_objective(stack.matrices, fit.w)) <= 1e-10

    def test_w_orthonormal_and_gamma_consistent(self, example_data):
        x, y, _ = example_data
        fit = tsdr_fit(x, y, "tsir", LAGS)
        assert np.abs(fit.w @ fit.w.T - np.eye(4)).max() <= 1e-8
        np.testing.assert_allclose(fit.gamma, fit.w @ fit.whitener, atol=1e-14)

    def test_hybrid_weight_degeneracy(self, example_data):
        x, y, _ = example_data
        tsir = tsdr_fit(x, y, "tsir", LAGS, 10)
        tsave = tsdr_fit(x, y, "tsave", LAGS, 2)
        at_zero = tsdr_fit(x, y, "tssh", LAGS, (10, 2), weight=0.0)
        at_one = tsdr_fit(x, y, "tssh", LAGS, (10, 2), weight=1.0)
        assert np.abs(at_zero.lambdas - tsir.lambdas).max() <= 1e-10
        assert np.abs(at_one.lambdas - tsave.lambdas).max() <= 1e-10

    def test_dominant_cells_match_structure(self):
        # long sample: second-moment L concentrates on (linear source, lag 5)
        # and (quadratic source, lag 1)
        spec = make_simulation("B", "table1")
        x, y, _ = simulate(spec, 10000, 7)
        fit = tsdr_fit(x, y, "tsave", LAGS, 5)
        flat = np.argsort(fit.l_matrix, axis=None)[::-1]
        top2 = {np.unravel_index(i, fit.l_matrix.shape) for i in flat[:2]}
        assert top2 == {(0, 4), (1, 0)}
        fit_ir = tsdr_fit(x, y, "tsir", LAGS, 5)
        assert np.unravel_index(fit_ir.l_matrix.argmax(), (4, 12)) == (0, 4)

    def test_model_a_component_recovery(self):
        # top component should track (2 z1 + 3 z2)/sqrt(13)
        x, y, z = simulate(make_simulation("A"), 3000, 5)
        fit = tsdr_fit(x, y, "tsir", LAGS, 10)
        target = (2 * z[:, 0] + 3 * z[:, 1]) / np.sqrt(13)
        corr = np.corrcoef(fit.components(x)[:, 0], target)[0, 1]
        assert abs(corr) >= 0.95

    def test_model_d_subspace_recovery(self):
        # top two second-moment components span the two quadratic sources
        x, y, z = simulate(make_simulation("D"), 3000, 9)
        fit = tsdr_fit(x, y, "tsave", LAGS, 2)
        comps = fit.components(x)[:, :2]
        qa, _ = np.linalg.qr(comps - comps.mean(0))
        qb, _ = np.linalg.qr(z[:, :2] - z[:, :2].mean(0))
        canonical = np.linalg.svd(qa.T @ qb, compute_uv=False)
        assert canonical.min() >= 0.9

    def test_null_response_flat_l(self):
        # y independent of x: averaged L stays flat
        spec = make_simulation("A")
        avg = np.zeros((4, 12))
        n_rep = 20
        for rep in range(n_rep):
            z = gen_sources(spec, 10000, 100 + rep)
            y = np.random.default_rng(900 + rep).normal(size=10000)
            avg += tsdr_fit(z, y, "tsave", LAGS, 2).l_matrix
        avg /= n_rep
        assert avg.max() <= 3 * avg.mean()

    def test_singular_covariance(self, rng):
        x = rng.normal(size=(300, 3))
        x[:, 2] = x[:, 0]
        y = rng.normal(size=300)
        with pytest.raises(SingularMatrixError):
            tsdr_fit(x, y, "tsir", [1, 2], 5)

    def test_misaligned_response(self, rng):
        with pytest.raises(InvalidInputError):
            tsdr_fit(rng.normal(size=(100, 2)), rng.normal(size=99), "tsir", [1], 5)

    def test_unknown_method(self, rng):
        with pytest.raises(InvalidInputError):
            tsdr_fit(rng.normal(size=(100, 2)), rng.normal(size=100), "sir", [1], 5)


class TestAffineEquivariance:
    def test_identity_transform(self, example_data):
        x, y, _ = example_data
        d = check_affine_equivariance(x, y, np.eye(4), np.zeros(4), "tsave", LAGS)
        assert d <= 1e-12

    def test_scaling_and_shift(self, example_data):
        x, y, _ = example_data
        d = check_affine_equivariance(x, y, 2 * np.eye(4), np.ones(4), "tsave", LAGS)
        assert d <= 1e-8

    @pytest.mark.parametrize("method", ["tsir", "tsave", "tssh"])
    def test_random_transforms(self, method, example_data):
        x, y, _ = example_data
        rng = np.random.default_rng(3)
        done = 0
        while done < 5:
            a = rng.normal(size=(4, 4))
            if np.linalg.cond(a) >= 100:
                continue
            b = rng.normal(size=4)
            assert check_affine_equivariance(x, y, a, b, method, LAGS) <= 1e-6
            done += 1


class TestVectorizedFit:
    def test_model_a_direction(self):
        x, y, z = simulate(make_simulation("A"), 3000, 5)
        fit = vectorized_fit(x, y, "sir", 12, 10, 0.8)
        assert fit.k_hat == 1
        reduced = fit.reduced(x)
        target = 2 * np.concatenate([[np.nan], z[:-1, 0]]) + 3 * np.concatenate([[np.nan], z[:-1, 1]])
        mask = np.isfinite(reduced[:, 0]) & np.isfinite(target)
        corr = np.corrcoef(reduced[mask, 0], target[mask])[0, 1]
        assert abs(corr) > 0.95

    def test_null_eigenvalue_shares(self):
        spec = make_simulation("A")
        z = gen_sources(spec, 10000, 1)
        y = np.random.default_rng(2).normal(size=10000)
        save = vectorized_fit(z, y, "save", 12, 5, 0.8)
        shares = save.eigenvalues / save.eigenvalues.sum()
        assert shares[0] < 4.0 / 48.0
        # the first-moment matrix has rank at most H-1; same flatness bound
        # relative to its rank-limited support
        sir = vectorized_fit(z, y, "sir", 12, 10, 0.8)
        sir_shares = sir.eigenvalues / sir.eigenvalues.sum()
        assert sir_shares[0] < 4.0 / 9.0

    def test_eigenvalues_descending_nonnegative(self):
        x, y, _ = simulate(make_simulation("B"), 2000, 3)
        fit = vectorized_fit(x, y, "save", 12, 5, 0.8)
        assert np.all(np.diff(fit.eigenvalues) <= 1e-12)
        assert fit.eigenvalues.min() >= -1e-10

    def test_save_zero_matrix_on_identity_conditionals(self, rng):
        # whitened-per-slice blocks make every conditional covariance identity
        blocks, labels = [], []
        for h in (1, 2):
            raw = rng.normal(size=(60, 4))
            centered = raw - raw.mean(axis=0)
            cov = centered.T @ centered / raw.shape[0]
            vals, vecs = np.linalg.eigh(cov)
            blocks.append(centered @ vecs @ np.diag(vals ** -0.5) @ vecs.T)
            labels.extend([h] * 60)
        mat = slice_cov_matrix(np.vstack(blocks), np.array(labels), 2)
        assert np.linalg.eigvalsh(mat).max() <= 1e-10

    def test_insufficient_rows(self, rng):
        x = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        with pytest.raises(InvalidInputError, match="T - s > s\\*p"):
            vectorized_fit(x, y, "sir", 12, 10, 0.8)


class TestFitCsv:
    def test_roundtrip(self, tmp_path, example_data):
        x, y, _ = example_data
        fit = tsdr_fit(x, y, "tssh", LAGS, (10, 2), weight=0.3)
        path = tmp_path / "fit.csv"
        write_fit_csv(fit, path, extra_meta={"length": x.shape[0], "seed": 42})
        l_matrix, lambdas, lags, meta = read_fit_csv(path)
        np.testing.assert_array_equal(l_matrix, fit.l_matrix)
        np.testing.assert_array_equal(lambdas, fit.lambdas)
        assert lags == fit.lags
        assert meta["method"] == "tssh"
        assert meta["n_slices"] == "10,2"
        assert meta["seed"] == "42"
