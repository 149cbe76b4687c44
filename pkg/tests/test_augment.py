import math

import numpy as np
import pytest
from scipy import optimize

from auglasso import lasso
from auglasso.augment import (
    P0_FLOOR,
    AugmentConfig,
    augmented_prediction_error,
    choose_p0,
    fit_augmented,
    gamma_sphere_bound,
    lambda_min_augmented,
    split_prediction_error,
)
from auglasso.errors import DimensionMismatch, Infeasible, OutOfRange
from auglasso.gamma import GammaParams, epsilon_net, gamma_exact
from auglasso.matrix import DesignMatrix, concat, normalize_columns
from auglasso.sphere import sample_sphere_matrix


def config_for(threshold, **kw):
    # L * rho * smin / (nu * n * smax) with n = 1 and everything else fixed
    return AugmentConfig(nu=0.25 / threshold, rho_minus=0.5, sigma_min_star=1.0,
                         sigma_max_star=1.0, L=0.5, **kw)


def scan_oracle(thr):
    p = 11
    while not 80 * math.log(p) / p < thr:
        p += 1
    return p


def bisection_oracle(thr):
    f = lambda x: 80 * math.log(x) / x - thr
    root = optimize.brentq(f, 3.0, 1e9, xtol=1e-12)
    cand = math.floor(root) + 1
    return max(cand, P0_FLOOR)


class TestChooseP0:
    def test_floor(self):
        assert P0_FLOOR == 11
        assert 6 / math.sqrt(2 * math.pi) == pytest.approx(2.3937, abs=1e-4)

    def test_loose_threshold(self):
        cfg = config_for(10.0)
        assert cfg.threshold(1) == pytest.approx(10.0)
        assert 80 * math.log(11) / 11 == pytest.approx(17.44, abs=0.01)
        assert choose_p0(cfg, 1) == scan_oracle(10.0) == 27

    def test_very_loose_threshold_hits_floor(self):
        assert choose_p0(config_for(20.0), 1) == 11

    def test_threshold_at_p0_1000(self):
        p0 = choose_p0(config_for(0.5526), 1)
        assert gamma_sphere_bound(1000) > 0.5526
        assert p0 > 1000
        assert p0 == bisection_oracle(0.5526)

    def test_minimal_over_thresholds(self):
        for thr in np.geomspace(0.01, 15.0, 20):
            p0 = choose_p0(config_for(float(thr)), 1)
            assert gamma_sphere_bound(p0) < thr
            assert p0 == P0_FLOOR or not gamma_sphere_bound(p0 - 1) < thr
            assert p0 == bisection_oracle(float(thr))

    def test_infeasible(self):
        cfg = AugmentConfig(nu=0.5, rho_minus=0.5, sigma_min_star=0.0, sigma_max_star=1.0)
        with pytest.raises(Infeasible):
            choose_p0(cfg, 10)
        with pytest.raises(Infeasible):
            choose_p0(config_for(0.001, p0_cap=5000), 1)

    def test_config_validation(self):
        with pytest.raises(OutOfRange):
            AugmentConfig(nu=1, rho_minus=0.5, sigma_min_star=1.0, sigma_max_star=1.0, L=1.0)
        with pytest.raises(OutOfRange):
            AugmentConfig(nu=1, rho_minus=0.5, sigma_min_star=2.0, sigma_max_star=1.0)


def instance(seed, n=12, p=20):
    rng = np.random.default_rng(seed)
    X = normalize_columns(DesignMatrix(rng.standard_normal((n, p))))
    return X, rng.standard_normal(n)


class TestFitAugmented:
    def test_bypass_matches_plain(self):
        X, y = instance(0)
        plain = lasso.fit(X, y, 0.3)
        aug = fit_augmented(X, y, 0.3, config_for(1.0, p0_override=0))
        np.testing.assert_array_equal(aug.beta_hat, plain.beta_hat)
        np.testing.assert_array_equal(aug.beta_X, plain.beta_hat)
        assert aug.beta_0.size == 0 and aug.fit.objective == plain.objective

    def test_objective_dominated(self):
        for seed in range(10):
            X, y = instance(seed)
            lam = 0.1 * np.abs(X.values.T @ y).max()
            plain = lasso.fit(X, y, lam)
            aug = fit_augmented(X, y, lam, config_for(1.0, p0_override=40, seed=seed))
            assert aug.fit.objective <= plain.objective + 1e-10

    def test_split_concatenates(self):
        X, y = instance(1)
        aug = fit_augmented(X, y, 0.2, config_for(1.0, p0_override=15, seed=4))
        np.testing.assert_array_equal(np.concatenate([aug.beta_X, aug.beta_0]), aug.beta_hat)
        assert aug.X0.shape == (12, 15)

    def test_deterministic(self):
        X, y = instance(2)
        a = fit_augmented(X, y, 0.2, config_for(1.0, seed=9))
        b = fit_augmented(X, y, 0.2, config_for(1.0, seed=9))
        assert a.beta_hat.tobytes() == b.beta_hat.tobytes()
        assert a.to_dict() == b.to_dict()
        assert a.p0 == choose_p0(config_for(1.0), 12)


class TestLambdaAugmented:
    def test_gamma_zero(self):
        rep = lambda_min_augmented(config_for(1.0), 0.0, n=10, p=20, p0=100, sigma=1.0, alpha=1.0)
        assert rep.B == 0.0
        assert rep.lambda_min == pytest.approx(math.sqrt(3 * math.log(120) + math.log(2)))

    def test_flag_false(self):
        cfg = AugmentConfig(nu=0.5, rho_minus=0.5, sigma_min_star=0.1, sigma_max_star=2.0)
        rep = lambda_min_augmented(cfg, None, n=40, p=20, p0=50, sigma=1.0, alpha=1.0)
        assert not rep.precondition_nu_ok and rep.B is None

    def test_numeric_instance(self):
        cfg = AugmentConfig(nu=0.2, rho_minus=0.6, sigma_min_star=0.9, sigma_max_star=1.4)
        n, p, p0, sigma, alpha = 10, 30, 5000, 0.5, 1.5
        g = 80 * math.log(p0) / p0
        rep = lambda_min_augmented(cfg, None, n, p, p0, sigma, alpha)
        nun = 2.0
        denom = 0.6 * 0.9 - nun * g * 1.4
        assert denom > 0 and rep.precondition_nu_ok
        B = nun * g / denom
        P = p + p0
        lam = sigma * (B * 1.4 * math.sqrt(2 * alpha * math.log(P) + math.log(2 * nun))
                       + math.sqrt((2 * alpha + 1) * math.log(P) + math.log(2)))
        assert rep.B == pytest.approx(B, rel=1e-12)
        assert rep.lambda_min == pytest.approx(lam, rel=1e-12)
        assert rep.probability_union == pytest.approx(1 - 3 * P ** -alpha)


class TestPredictionError:
    def test_exact(self):
        X = sample_sphere_matrix(5, 9, 0)
        b = np.arange(9.0)
        assert augmented_prediction_error(X, b, b) == 0.0

    def test_single_column(self):
        X = sample_sphere_matrix(5, 9, 0)
        b = np.zeros(9)
        d = b.copy()
        d[4] = 0.3
        assert augmented_prediction_error(X, d, b) == pytest.approx(0.045, abs=1e-15)

    def test_random_against_direct(self):
        rng = np.random.default_rng(3)
        X = sample_sphere_matrix(6, 4, 1)
        X0 = sample_sphere_matrix(6, 7, 2)
        Xs = concat(X, X0)
        bh = rng.standard_normal(11)
        beta = rng.standard_normal(4)
        pad = np.concatenate([beta, np.zeros(7)])
        direct = 0.5 * np.linalg.norm(Xs.values @ bh - X.values @ beta) ** 2
        assert augmented_prediction_error(Xs, bh, pad) == pytest.approx(direct, rel=1e-12)
        assert split_prediction_error(X, X0, bh[:4], bh[4:], beta) == pytest.approx(direct, rel=1e-12)

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            augmented_prediction_error(DesignMatrix.identity(3), np.zeros(3), np.zeros(2))


def test_gamma_transfer_tiny():
    # appending X to a sphere block can only lower the net-level index
    params = GammaParams(1, 0.5)
    net = epsilon_net(3, 0.3)
    rng = np.random.default_rng(5)
    for seed in range(5):
        X0 = sample_sphere_matrix(3, 12, seed)
        X = normalize_columns(DesignMatrix(rng.standard_normal((3, 4))))
        lo_aug = gamma_exact(concat(X, X0), params, 0.3, net=net).lo
        assert lo_aug <= gamma_exact(X0, params, 0.3, net=net).lo
        assert lo_aug <= gamma_exact(X, params, 0.3, net=net).lo
