import numpy as np
import pytest

from r4style.lexicon import load_category_lexicon
from r4style.matrixio import IndexedTargets
from r4style.solver import (
    NonFiniteObjectiveError,
    R4Model,
    SingularDesignError,
    export_heatmap,
    fit_ols,
    fit_r4,
    fit_srrr,
    latent_liwc,
    load_model,
    predict,
    prediction_mse,
    rank_sweep,
    save_model,
    srrr_lambda_max,
)


def _random_instance(seed, k=80, m=6, n=5, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(k, m))
    B = rng.normal(size=(m, n))
    Y = X @ B + noise * rng.normal(size=(k, n))
    return X, Y


class TestOLS:
    def test_identity_design(self):
        Y = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(fit_ols(np.eye(2), Y), Y, atol=1e-12)

    def test_duplicate_columns_singular(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 3))
        X = np.hstack([X, X[:, :1]])
        with pytest.raises(SingularDesignError, match="ridge"):
            fit_ols(X, rng.normal(size=(20, 2)))

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 4))
        Y = rng.normal(size=(20, 3))
        B = fit_ols(X, Y)
        # independent route: least squares on the raw system
        ref, *_ = np.linalg.lstsq(X, Y, rcond=None)
        np.testing.assert_allclose(B, ref, atol=1e-8)

    def test_indexed_targets(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 5))
        idx = rng.integers(0, 6, size=40)
        Y = np.zeros((40, 6))
        Y[np.arange(40), idx] = 1.0
        dense = fit_ols(X, Y)
        sparse = fit_ols(X, IndexedTargets(indices=idx, n=6))
        np.testing.assert_allclose(dense, sparse, atol=1e-12)


class TestFitR4:
    def test_full_rank_lam0_equals_ols(self):
        X, Y = _random_instance(3, k=100, m=7, n=5)
        model = fit_r4(X, Y, rank=5, lam=0.0)
        np.testing.assert_allclose(
            model.coefficients(), fit_ols(X, Y), atol=1e-6
        )

    def test_huge_lam_shrinks_u_to_zero(self):
        X, Y = _random_instance(4)
        model = fit_r4(X, Y, rank=3, lam=1e12)
        assert np.linalg.norm(model.U) < 1e-6

    def test_one_ustep_closed_form(self):
        # X = I, Y = 2I, lam = 0.5: U-step gives (I + 2*0.5 I)^{-1} (2I) V = V,
        # and V0 for the diagonal cross-covariance is the identity.
        Y = 2.0 * np.eye(2)
        model = fit_r4(np.eye(2), Y, rank=2, lam=0.5, max_iters=1)
        np.testing.assert_allclose(np.abs(model.U), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(model.U, model.V, atol=1e-12)

    def test_objective_monotone_and_v_orthonormal(self):
        X, Y = _random_instance(5, k=60, m=8, n=6, noise=0.5)
        model = fit_r4(X, Y, rank=3, lam=0.2)
        trace = model.objective_trace
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
        assert all(err < 1e-8 for err in model.orthogonality_trace)

    def test_singular_design_lam0_rejected(self):
        X = np.zeros((10, 3))
        Y = np.random.default_rng(0).normal(size=(10, 2))
        with pytest.raises(SingularDesignError):
            fit_r4(X, Y, rank=2, lam=0.0)

    def test_singular_design_ok_with_ridge(self):
        X = np.zeros((10, 3))
        Y = np.random.default_rng(0).normal(size=(10, 2))
        model = fit_r4(X, Y, rank=2, lam=1.0)
        np.testing.assert_allclose(model.U, 0.0, atol=1e-12)

    def test_invalid_rank(self):
        X, Y = _random_instance(6)
        with pytest.raises(ValueError):
            fit_r4(X, Y, rank=0)
        with pytest.raises(ValueError):
            fit_r4(X, Y, rank=min(X.shape[1], Y.shape[1]) + 1)

    def test_non_finite_targets_rejected(self):
        X, Y = _random_instance(7)
        Y = Y.copy()
        Y[0, 0] = np.inf
        with pytest.raises(ValueError):
            fit_r4(X, Y, rank=2, lam=0.1)

    def test_overflowing_design_signals_blow_up(self):
        X, Y = _random_instance(7)
        with pytest.raises(NonFiniteObjectiveError):
            fit_r4(X * 1e200, Y, rank=2, lam=0.1)

    def test_negative_lam_rejected(self):
        X, Y = _random_instance(8)
        with pytest.raises(ValueError):
            fit_r4(X, Y, rank=2, lam=-1.0)

    def test_dense_and_indexed_identical(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(120, 6))
        idx = rng.integers(0, 9, size=120)
        Y = np.zeros((120, 9))
        Y[np.arange(120), idx] = 1.0
        md = fit_r4(X, Y, rank=4, lam=0.3)
        mi = fit_r4(X, IndexedTargets(indices=idx, n=9), rank=4, lam=0.3)
        np.testing.assert_allclose(md.coefficients(), mi.coefficients(), atol=1e-12)
        np.testing.assert_allclose(md.objective_trace, mi.objective_trace, rtol=1e-12)

    def test_rank1_beats_brute_force_grid(self):
        # 3x2x2 instance: every unit v paired with its ridge-optimal u
        rng = np.random.default_rng(10)
        X = rng.normal(size=(3, 2))
        Y = rng.normal(size=(3, 2))
        lam = 0.4
        model = fit_r4(X, Y, rank=1, lam=lam)
        ours = model.objective_trace[-1]

        G = X.T @ X + 2 * lam * np.eye(2)
        Ginv = np.linalg.inv(G)
        best = np.inf
        for theta in np.linspace(0.0, np.pi, 720, endpoint=False):
            v = np.array([np.cos(theta), np.sin(theta)])
            u = Ginv @ (X.T @ Y @ v)
            R = Y - np.outer(X @ u, v)
            J = 0.5 * np.sum(R * R) + lam * float(u @ u)
            best = min(best, J)
        assert ours <= best + 1e-6


class TestFitSRRR:
    def test_lam0_matches_r4(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(30, 5))
        Y = rng.normal(size=(30, 4))
        a = fit_srrr(X, Y, rank=3, lam=0.0)
        b = fit_r4(X, Y, rank=3, lam=0.0)
        np.testing.assert_allclose(a.coefficients(), b.coefficients(), atol=1e-5)
        assert a.zero_rows == []

    def test_kill_all_rows_at_lambda_max(self):
        X, Y = _random_instance(12, k=50, m=6, n=4)
        lam = srrr_lambda_max(X, Y, rank=2) * (1 + 1e-6)
        model = fit_srrr(X, Y, rank=2, lam=lam)
        np.testing.assert_array_equal(model.U, 0.0)
        assert model.zero_rows == list(range(6))

    def test_noise_feature_dropped(self):
        rng = np.random.default_rng(13)
        k = 400
        X = rng.normal(size=(k, 5))
        B = rng.normal(size=(5, 4)) * 2.0
        B[3] = 0.0  # feature 3 carries no signal
        Y = X @ B + 0.1 * rng.normal(size=(k, 4))
        lam_hi = srrr_lambda_max(X, Y, rank=3)
        model = fit_srrr(X, Y, rank=3, lam=lam_hi * 0.05)
        assert 3 in model.zero_rows
        assert np.all(model.U[3] == 0.0)
        # refit least squares on the surviving support: stays close to truth
        active = [j for j in range(5) if j not in model.zero_rows]
        B_active = fit_ols(X[:, active], Y)
        np.testing.assert_allclose(B_active, B[active], atol=0.05)

    def test_objective_monotone(self):
        for seed in range(3):
            rng = np.random.default_rng(20 + seed)
            X = rng.normal(size=(60, 7))
            Y = rng.normal(size=(60, 5))
            model = fit_srrr(X, Y, rank=3, lam=1.0)
            tr = model.objective_trace
            assert all(b <= a + 1e-9 for a, b in zip(tr, tr[1:]))
            assert all(err < 1e-8 for err in model.orthogonality_trace)

    def test_zero_rows_are_exactly_zero(self):
        X, Y = _random_instance(14, k=100, m=8, n=5, noise=1.0)
        model = fit_srrr(X, Y, rank=2, lam=srrr_lambda_max(X, Y, 2) * 0.3)
        assert model.zero_rows  # something must be dropped at 30% of lambda_max
        for j in model.zero_rows:
            assert np.all(model.U[j] == 0.0)


class TestPredict:
    def test_zero_input(self):
        X, Y = _random_instance(15)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        np.testing.assert_array_equal(predict(model, np.zeros((4, X.shape[1]))), 0.0)

    def test_single_row(self):
        X, Y = _random_instance(16)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        x = X[0]
        np.testing.assert_allclose(
            predict(model, x)[0], x @ model.U @ model.V.T, atol=1e-12
        )

    def test_linear(self):
        X, Y = _random_instance(17)
        model = fit_r4(X, Y, rank=3, lam=0.05)
        rng = np.random.default_rng(18)
        A = rng.normal(size=(5, X.shape[1]))
        B = rng.normal(size=(5, X.shape[1]))
        lhs = predict(model, 2.0 * A + 3.0 * B)
        rhs = 2.0 * predict(model, A) + 3.0 * predict(model, B)
        np.testing.assert_allclose(lhs, rhs, atol=1e-7)

    def test_column_mismatch(self):
        X, Y = _random_instance(19)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        with pytest.raises(ValueError):
            predict(model, np.zeros((3, X.shape[1] + 1)))

    def test_mse_matches_scalar_loop(self):
        X, Y = _random_instance(20, k=30, m=4, n=3)
        model = fit_r4(X, Y, rank=2, lam=0.2)
        got = prediction_mse(model, X, Y)
        Yhat = predict(model, X)
        total = 0.0
        for i in range(Y.shape[0]):
            for j in range(Y.shape[1]):
                total += (Y[i, j] - Yhat[i, j]) ** 2
        assert got == pytest.approx(total / Y.size, rel=1e-10)


class TestRankSweep:
    def test_train_mse_non_increasing_lam0(self):
        X, Y = _random_instance(21, k=300, m=8, n=6, noise=0.3)
        res = rank_sweep(X, Y, ranks=range(1, 7), lam=0.0, split=0.8, seed=0)
        trains = [e[1] for e in res.entries]
        assert all(b <= a + 1e-9 for a, b in zip(trains, trains[1:]))

    def test_full_rank_train_mse_equals_ols(self):
        X, Y = _random_instance(22, k=200, m=6, n=5, noise=0.4)
        res = rank_sweep(X, Y, ranks=[5], lam=0.0, split=0.5, seed=3)
        perm = np.random.default_rng(3).permutation(200)
        tr = perm[:100]
        B = fit_ols(X[tr], Y[tr])
        resid = Y[tr] - X[tr] @ B
        want = np.sum(resid * resid) / resid.size
        assert res.entries[0][1] == pytest.approx(want, abs=1e-8)

    def test_rank1_beats_null_on_dominant_column(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(150, 4))
        Y = np.zeros((150, 5))
        Y[:, 2] = X @ np.array([2.0, -1.0, 0.5, 1.0])
        Y += 0.05 * rng.normal(size=Y.shape)
        res = rank_sweep(X, Y, ranks=[1], lam=0.0, split=0.8, seed=1)
        test_mse = res.entries[0][2]
        null_mse = np.mean(Y**2)  # predicting all zeros
        assert test_mse < null_mse

    def test_invalid_ranks(self):
        X, Y = _random_instance(24)
        with pytest.raises(ValueError):
            rank_sweep(X, Y, ranks=[0, 2], seed=0)
        with pytest.raises(ValueError):
            rank_sweep(X, Y, ranks=[2, 2], seed=0)

    def test_invalid_split(self):
        X, Y = _random_instance(25)
        with pytest.raises(ValueError):
            rank_sweep(X, Y, ranks=[1], split=1.0, seed=0)

    def test_deterministic_and_csv_stable(self, tmp_path):
        X, Y = _random_instance(26, k=120)
        a = rank_sweep(X, Y, ranks=[1, 2, 3], lam=0.1, seed=7)
        b = rank_sweep(X, Y, ranks=[1, 2, 3], lam=0.1, seed=7)
        assert a.entries == b.entries
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        a.write_csv(pa)
        b.write_csv(pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_long_csv_shape(self, tmp_path):
        X, Y = _random_instance(27)
        res = rank_sweep(X, Y, ranks=[1, 2], lam=0.0, seed=2)
        p = tmp_path / "long.csv"
        res.write_long_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "rank,split,mse"
        assert len(lines) == 1 + 2 * 2

    def test_parallel_matches_sequential(self, monkeypatch):
        X, Y = _random_instance(28, k=150)
        monkeypatch.delenv("R4STYLE_THREADS", raising=False)
        seq = rank_sweep(X, Y, ranks=[1, 2, 3, 4], lam=0.05, seed=5)
        monkeypatch.setenv("R4STYLE_THREADS", "4")
        par = rank_sweep(X, Y, ranks=[1, 2, 3, 4], lam=0.05, seed=5)
        assert seq.entries == par.entries


class TestLatentProjection:
    def test_zero_vector(self):
        X, Y = _random_instance(29)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        np.testing.assert_array_equal(latent_liwc(model, np.zeros(X.shape[1])), 0.0)

    def test_identity_loadings_pass_through(self):
        model = R4Model(
            U=np.eye(3), V=np.eye(3), lam=0.0, rank=3, objective_trace=[0.0]
        )
        x = np.array([0.2, -0.5, 1.0])
        np.testing.assert_array_equal(latent_liwc(model, x), x)

    def test_matches_dot_product_loop(self):
        X, Y = _random_instance(30)
        model = fit_r4(X, Y, rank=3, lam=0.1)
        x = np.random.default_rng(31).normal(size=X.shape[1])
        z = latent_liwc(model, x)
        for col in range(model.rank):
            manual = sum(model.U[i, col] * x[i] for i in range(len(x)))
            assert z[col] == pytest.approx(manual, abs=1e-7)

    def test_dimension_mismatch(self):
        X, Y = _random_instance(32)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        with pytest.raises(ValueError):
            latent_liwc(model, np.zeros(X.shape[1] + 2))


class TestExportHeatmap:
    def _lex(self, tmp_path, names):
        p = tmp_path / "lex.txt"
        p.write_text("".join(f"{n}\tw{i}\n" for i, n in enumerate(names)), encoding="utf-8")
        return load_category_lexicon(p)

    def test_shapes_and_names(self, tmp_path):
        X, Y = _random_instance(33, m=4)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        lex = self._lex(tmp_path, ["alpha", "beta", "gamma", "delta"])
        raw, norm = export_heatmap(model, lex, tmp_path / "heat.csv")
        lines = raw.read_text().splitlines()
        assert lines[0] == "category,dim_1,dim_2"
        assert len(lines) == 5
        assert lines[1].startswith("alpha,")
        assert norm.name == "heat.abs.csv"

    def test_hand_normalization(self, tmp_path):
        model = R4Model(
            U=np.array([[3.0, -4.0], [0.0, 1.0]]),
            V=np.eye(2),
            lam=0.0,
            rank=2,
            objective_trace=[0.0],
        )
        lex = self._lex(tmp_path, ["a", "b"])
        _, norm = export_heatmap(model, lex, tmp_path / "h.csv")
        rows = norm.read_text().splitlines()[1:]
        assert rows[0] == "a,0.75,1.0"
        assert rows[1] == "b,0.0,1.0"

    def test_zero_rows_guarded(self, tmp_path):
        model = R4Model(
            U=np.zeros((2, 2)), V=np.eye(2), lam=0.0, rank=2, objective_trace=[0.0]
        )
        lex = self._lex(tmp_path, ["a", "b"])
        _, norm = export_heatmap(model, lex, tmp_path / "h.csv")
        for row in norm.read_text().splitlines()[1:]:
            assert row.split(",")[1:] == ["0.0", "0.0"]

    def test_category_count_mismatch(self, tmp_path):
        X, Y = _random_instance(34, m=4)
        model = fit_r4(X, Y, rank=2, lam=0.1)
        lex = self._lex(tmp_path, ["only", "two"])
        with pytest.raises(ValueError):
            export_heatmap(model, lex, tmp_path / "h.csv")


class TestModelIO:
    def test_r4_round_trip(self, tmp_path):
        X, Y = _random_instance(35)
        model = fit_r4(X, Y, rank=3, lam=0.7)
        save_model(model, tmp_path / "m", category_names=["c%d" % i for i in range(6)],
                   vocab_hash="abc123")
        back = load_model(tmp_path / "m")
        assert isinstance(back, R4Model)
        assert back.rank == 3 and back.lam == 0.7
        np.testing.assert_allclose(back.U, model.U, atol=1e-6)
        np.testing.assert_allclose(back.V, model.V, atol=1e-6)
        np.testing.assert_allclose(back.objective_trace, model.objective_trace)

    def test_srrr_round_trip_keeps_zero_rows(self, tmp_path):
        X, Y = _random_instance(36, k=100, m=8)
        model = fit_srrr(X, Y, rank=2, lam=srrr_lambda_max(X, Y, 2) * 0.4)
        save_model(model, tmp_path / "s")
        back = load_model(tmp_path / "s")
        assert back.zero_rows == model.zero_rows
        for j in back.zero_rows:
            assert np.all(back.U[j] == 0.0)
