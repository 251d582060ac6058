import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from ppmc import DomainError, SolverDivergenceError
from ppmc.matrix import gen_low_rank, gen_mask, rse
from ppmc.solver import (
    AltMinCompleter,
    PPLNMQRCompleter,
    SolverConfig,
    TriFactor,
    alt_min,
    init_state,
    iterate_pplnm_qr,
    pplnm_qr,
    shrink_columns,
    svd_topk,
    update_factors,
    update_x,
    update_y_mu,
)


def shrink_scalar(dt, mu):
    """Per-column soft threshold written with plain Python floats."""
    out = np.zeros_like(dt)
    rows, cols = dt.shape
    for j in range(cols):
        c = sum(float(dt[i, j]) ** 2 for i in range(rows)) ** 0.5
        if c == 0.0:
            continue
        factor = max(c - 1.0 / mu, 0.0) / c
        for i in range(rows):
            out[i, j] = factor * dt[i, j]
    return out


def problem(S, T, r, alpha, seed):
    truth = gen_low_rank(S, T, r, seed)
    mask = gen_mask(S, T, alpha, seed + 1)
    return truth, mask, np.where(mask, truth, 0.0)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"rank": 0}, {"rank": 2, "rho": 0.9}, {"rank": 2, "mu0": 0}, {"rank": 2, "eps": -1}, {"rank": 2, "max_iters": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            SolverConfig(**kwargs)


class TestSteps:
    def test_init_state(self, rng):
        truth, mask, m_enc = problem(9, 7, 2, 0.3, 0)
        st_ = init_state(m_enc, mask, SolverConfig(rank=3, mu0=2.0))
        np.testing.assert_array_equal(st_.factors.lf, np.eye(9, 3))
        np.testing.assert_array_equal(st_.factors.dc, np.eye(3))
        np.testing.assert_array_equal(st_.factors.rf, np.eye(3, 7))
        np.testing.assert_array_equal(st_.y, 0.0)
        np.testing.assert_array_equal(st_.x, m_enc)
        assert st_.mu == 2.0 and st_.iter == 0

    def test_init_rank_too_large(self):
        with pytest.raises(DomainError):
            init_state(np.ones((3, 4)), np.ones((3, 4)), SolverConfig(rank=4))

    def test_update_factors_fixed_point(self, rng):
        S, T, r = 12, 9, 3
        lf, _ = np.linalg.qr(rng.standard_normal((S, r)))
        rf = np.linalg.qr(rng.standard_normal((T, r)))[0].T
        dc = np.diag([3.0, 2.0, 1.0])
        w = lf @ dc @ rf
        st_ = init_state(w, np.ones((S, T)), SolverConfig(rank=r))
        st_ = type(st_)(w, np.zeros((S, T)), 1.0, TriFactor(lf, dc, rf))
        out = update_factors(st_)
        np.testing.assert_allclose(out.factors.product(), w, atol=1e-10)
        np.testing.assert_allclose(out.factors.lf.T @ out.factors.lf, np.eye(r), atol=1e-10)
        np.testing.assert_allclose(out.factors.rf @ out.factors.rf.T, np.eye(r), atol=1e-10)

    def test_update_x_full_and_empty_masks(self, rng):
        m = rng.standard_normal((5, 4))
        st_ = init_state(m, np.ones((5, 4)), SolverConfig(rank=2))
        st_ = update_factors(st_)
        full = update_x(st_, m, np.ones((5, 4), dtype=bool))
        np.testing.assert_array_equal(full.x, m)
        empty = update_x(st_, np.zeros((5, 4)), np.zeros((5, 4), dtype=bool))
        np.testing.assert_array_equal(empty.x, st_.factors.product())

    def test_update_y_mu(self, rng):
        m = rng.standard_normal((4, 4))
        st_ = init_state(m, np.ones((4, 4)), SolverConfig(rank=1, mu0=1.0))
        z = st_.factors.product()
        st_ = type(st_)(z, st_.y, 1.0, st_.factors)
        out = update_y_mu(st_, rho=1.0)
        np.testing.assert_array_equal(out.y, st_.y)
        assert out.mu == 1.0
        for _ in range(3):
            st_ = update_y_mu(st_, rho=2.0)
        assert st_.mu == 8.0


class TestShrink:
    def test_zero(self):
        np.testing.assert_array_equal(shrink_columns(np.zeros((3, 3)), 1.0), 0.0)

    def test_hand_value(self):
        out = shrink_columns(np.array([[3.0], [4.0]]), 1.0)
        np.testing.assert_allclose(out, [[2.4], [3.2]], rtol=0, atol=1e-15)

    def test_boundary(self):
        col = np.array([[0.6], [0.8]])
        np.testing.assert_array_equal(shrink_columns(col, 1.0), 0.0)

    def test_mixed_columns(self):
        dt = np.array([[3.0, 0.1, 0.0], [4.0, 0.1, 0.0]])
        out = shrink_columns(dt, 2.0)
        np.testing.assert_allclose(out[:, 0], dt[:, 0] * (5 - 0.5) / 5)
        np.testing.assert_array_equal(out[:, 1:], 0.0)

    def test_bad_mu(self):
        with pytest.raises(DomainError):
            shrink_columns(np.ones((2, 2)), 0.0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0.05, 50))
    def test_matches_scalar_oracle(self, seed, r, mu):
        dt = np.random.default_rng(seed).standard_normal((r, r)) * 2
        np.testing.assert_allclose(shrink_columns(dt, mu), shrink_scalar(dt, mu), rtol=0, atol=1e-12)


class TestPPLNMQR:
    def test_fully_observed_low_rank(self):
        truth = gen_low_rank(20, 15, 3, 4)
        res = pplnm_qr(truth, np.ones_like(truth), SolverConfig(rank=3))
        assert rse(res.recovered, truth) <= 1e-12

    def test_table_one_128(self):
        truth, mask, m_enc = problem(128, 128, 2, 0.5, 0)
        res = pplnm_qr(m_enc, mask, SolverConfig(rank=2))
        assert rse(res.recovered, truth) <= 1e-10

    def test_stops_on_eps(self):
        truth, mask, m_enc = problem(40, 40, 1, 0.3, 5)
        res = pplnm_qr(m_enc, mask, SolverConfig(rank=1, eps=1e-20, max_iters=500))
        assert res.iterations_run < 500
        assert res.step_history[-1] < 1e-20
        assert len(res.step_history) == res.iterations_run

    def test_eps_zero_runs_full_budget(self):
        truth, mask, m_enc = problem(30, 30, 1, 0.3, 5)
        res = pplnm_qr(m_enc, mask, SolverConfig(rank=1, eps=0.0, max_iters=37))
        assert res.iterations_run == 37

    def test_divergence_guard(self):
        truth, mask, m_enc = problem(30, 30, 3, 0.5, 1)
        # rank-1 model on rank-3 data leaves a residual that mu * rho^k blows up
        with pytest.raises(SolverDivergenceError) as info:
            pplnm_qr(m_enc, mask, SolverConfig(rank=1, rho=10.0, eps=0.0, max_iters=400))
        assert info.value.iteration > 0

    @pytest.mark.parametrize("seed", range(10))
    def test_iteration_invariants(self, seed):
        truth, mask, m_enc = problem(25, 20, 2, 0.4, seed)
        cfg = SolverConfig(rank=2, mu0=0.5, rho=1.3)
        prev_mu = None
        for st_ in iterate_pplnm_qr(m_enc, mask, cfg):
            np.testing.assert_array_equal(st_.x[mask], m_enc[mask])
            f = st_.factors
            assert np.max(np.abs(f.lf.T @ f.lf - np.eye(2))) <= 1e-8
            assert np.max(np.abs(f.rf @ f.rf.T - np.eye(2))) <= 1e-8
            assert st_.mu == pytest.approx(cfg.mu0 * cfg.rho**st_.iter, rel=1e-12)
            if prev_mu is not None:
                assert 1 / st_.mu < 1 / prev_mu
            prev_mu = st_.mu

    def test_convergence_trials(self):
        failures = []
        for seed in range(100):
            g = np.random.default_rng(seed)
            r = int(g.integers(1, 4))
            alpha = float(g.choice([0.1, 0.2, 0.3, 0.4, 0.5]))
            truth, mask, m_enc = problem(64, 64, r, alpha, 1000 + seed)
            res = pplnm_qr(m_enc, mask, SolverConfig(rank=r))
            hist = res.step_history
            if rse(res.recovered, truth) > 1e-8 or not hist[-1] < hist[0]:
                failures.append((seed, r, alpha))
        assert not failures


class TestSVD:
    def test_diagonal(self):
        u, s, v = svd_topk(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(s, [3.0, 2.0])

    def test_rank_one(self, rng):
        a = np.outer(rng.standard_normal(6), rng.standard_normal(4))
        u, s, v = svd_topk(a, 1)
        assert np.linalg.norm(u * s @ v.T - a) <= 1e-10

    def test_full_rank_reconstruction(self, rng):
        a = rng.standard_normal((10, 6))
        u, s, v = svd_topk(a, 6)
        np.testing.assert_allclose(u * s @ v.T, a, atol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_against_eigen_oracle(self, seed):
        a = np.random.default_rng(seed).standard_normal((9, 7))
        k = 3
        u, s, v = svd_topk(a, k)
        evals, evecs = np.linalg.eigh(a.T @ a)
        order = np.argsort(evals)[::-1][:k]
        sig = np.sqrt(evals[order])
        vv = evecs[:, order]
        best = a @ vv @ vv.T
        np.testing.assert_allclose(s, sig, rtol=1e-10)
        assert np.all(np.diff(s) <= 0)
        np.testing.assert_allclose(u.T @ u, np.eye(k), atol=1e-12)
        np.testing.assert_allclose(v.T @ v, np.eye(k), atol=1e-12)
        assert np.max(np.abs(u * s @ v.T - best)) <= 1e-8

    def test_k_too_large(self):
        with pytest.raises(DomainError):
            svd_topk(np.ones((3, 2)), 3)


class TestAltMin:
    def test_fully_observed(self):
        truth = gen_low_rank(30, 20, 3, 2)
        res = alt_min(truth, np.ones_like(truth), SolverConfig(rank=3))
        assert rse(res.recovered, truth) <= 1e-10

    def test_observed_entries_pinned(self):
        truth, mask, m_enc = problem(25, 25, 2, 0.5, 3)
        res = alt_min(m_enc, mask, SolverConfig(rank=2, max_iters=5))
        np.testing.assert_array_equal(res.recovered[mask], m_enc[mask])

    def test_empty_row_uses_ridge(self):
        truth, mask, m_enc = problem(15, 12, 2, 0.2, 3)
        mask[4, :] = False
        m_enc[4, :] = 0.0
        res = alt_min(m_enc, mask, SolverConfig(rank=2, max_iters=10))
        assert np.isfinite(res.recovered).all()

    @pytest.mark.parametrize("seed", range(5))
    def test_agrees_with_pplnm(self, seed):
        truth, mask, m_enc = problem(20, 20, 2, 0.3, seed)
        a = alt_min(m_enc, mask, SolverConfig(rank=2)).recovered
        b = pplnm_qr(m_enc, mask, SolverConfig(rank=2)).recovered
        assert rse(a, truth) <= 1e-8 and rse(b, truth) <= 1e-8
        assert rse(a, b) <= 1e-6


class TestEstimators:
    @pytest.mark.parametrize("cls", [PPLNMQRCompleter, AltMinCompleter])
    def test_params_and_clone(self, cls):
        est = cls(rank=3, max_iters=50)
        params = est.get_params()
        assert params["rank"] == 3 and params["max_iters"] == 50
        assert clone(est).get_params() == params
        est.set_params(rank=2)
        assert est.rank == 2

    @pytest.mark.parametrize("cls", [PPLNMQRCompleter, AltMinCompleter])
    def test_nan_input(self, cls):
        truth, mask, _ = problem(40, 30, 2, 0.3, 8)
        X = np.where(mask, truth, np.nan)
        est = cls(rank=2)
        out = est.fit_transform(X)
        assert rse(out, truth) <= 1e-8
        assert est.n_iter_ >= 1 and len(est.step_history_) == est.n_iter_
        np.testing.assert_allclose(est.transform(X), out)

    def test_explicit_mask(self):
        truth, mask, m_enc = problem(40, 30, 2, 0.3, 8)
        out = PPLNMQRCompleter(rank=2).fit(m_enc, mask=mask).completion_
        assert rse(out, truth) <= 1e-8

    def test_transform_before_fit(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            PPLNMQRCompleter().transform(np.ones((3, 3)))
