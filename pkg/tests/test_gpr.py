import io
import logging

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from stochfd.dataset import DataError, DensitySpeedDataset
from stochfd.gpr import (BAND_Z, EXACT_GP_SOFT_LIMIT, ExactGP, GPConfig, GPPosterior,
                         gp_fit_predict, hyperparameter_vector, log_marginal_likelihood,
                         optimize_hyperparameters)
from stochfd.kernels import KernelParams, gram
from stochfd.models import get_spec

from conftest import random_dataset


def _cfg(kind="exponential", sigma=2.0, noise=0.5, ls=10.0, mean=None):
    return GPConfig(KernelParams(kind, sigma, ls), noise, mean)


def _dense_posterior(cfg, x, y, xq):
    K = gram(cfg.kernel, x) + cfg.noise_variance * np.eye(x.size)
    Ks = gram(cfg.kernel, xq, x)
    Kinv = np.linalg.inv(K)
    r = y - cfg.prior_mean(x)
    mean = cfg.prior_mean(xq) + Ks @ Kinv @ r
    var = cfg.kernel.diag(xq) - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
    return mean, var


class TestPrediction:
    def test_two_point_hand_oracle(self):
        # 30-digit values from the explicit 2x2 inverse
        cfg = _cfg(sigma=2.0, noise=0.5)
        post = gp_fit_predict(cfg, DensitySpeedDataset([10.0, 13.0], [50.0, 44.0]), [11.0])
        np.testing.assert_allclose(post.mean, [34.7648140048363356635613646846], atol=1e-10)
        np.testing.assert_allclose(post.variance, [2.46511639064575232102601186549], atol=1e-10)
        np.testing.assert_allclose(post.predictive_variance, post.variance + 0.5, rtol=1e-15)

    def test_interpolation_limit(self, rng):
        d = random_dataset(rng, 20)
        post = gp_fit_predict(_cfg(sigma=20.0, noise=1e-12), d, d.density[[3, 11]])
        np.testing.assert_allclose(post.mean, d.speed[[3, 11]], atol=1e-4)

    def test_prior_reversion(self, rng):
        d = random_dataset(rng, 30, hi=50.0)
        g = get_spec("underwood")(70.0, 40.0)
        post = gp_fit_predict(_cfg(sigma=3.0, mean=g), d, [5000.0])
        np.testing.assert_allclose(post.mean, g.speed(5000.0), atol=1e-6)
        np.testing.assert_allclose(post.variance, 9.0, atol=1e-6)

    @pytest.mark.parametrize("kind", ["exponential", "rbf", "matern52"])
    def test_matches_dense_formula(self, kind, rng):
        d = random_dataset(rng, 40)
        cfg = _cfg(kind, 5.0, 2.0, 15.0, get_spec("greenshields")(60.0, 130.0))
        xq = rng.uniform(0, 130, 25)
        post = gp_fit_predict(cfg, d, xq)
        mean, var = _dense_posterior(cfg, d.density, d.speed, xq)
        np.testing.assert_allclose(post.mean, mean, atol=1e-9)
        np.testing.assert_allclose(post.variance, np.maximum(var, 0), atol=1e-9)

    def test_variance_below_prior(self, rng):
        for _ in range(10):
            d = random_dataset(rng, int(rng.integers(1, 60)))
            cfg = _cfg(rng.choice(["exponential", "rbf"]), rng.uniform(0.5, 10),
                       rng.uniform(0.01, 5), rng.uniform(1, 30))
            post = gp_fit_predict(cfg, d, rng.uniform(0, 150, 30))
            assert np.all(post.variance <= cfg.kernel.variance + 1e-10)
            assert np.all(post.variance >= 0)

    def test_residual_trick(self, rng):
        d = random_dataset(rng, 60)
        g = get_spec("cheng")(68.7, 20.02, 2.21)
        xq = rng.uniform(0, 130, 20)
        with_mean = gp_fit_predict(_cfg(mean=g), d, xq)
        resid = gp_fit_predict(_cfg(), (d.density, d.speed - g.speed(d.density)), xq)
        np.testing.assert_allclose(with_mean.mean, resid.mean + g.speed(xq), atol=1e-10)
        np.testing.assert_allclose(with_mean.variance, resid.variance, atol=1e-10)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            ExactGP(_cfg(), (np.array([]), np.array([])))

    def test_soft_limit_warning(self, caplog):
        n = EXACT_GP_SOFT_LIMIT + 1
        x = np.linspace(0, 100, n)
        with caplog.at_level(logging.WARNING, logger="stochfd.gpr"):
            ExactGP(_cfg(noise=1.0), (x, np.zeros(n)))
        assert "O(n^3)" in caplog.text


class TestLikelihood:
    def test_scalar_gaussian(self):
        # -log(2 pi (2.25 + 0.25)) / 2 - 4 / (2 * 2.5)
        lml = log_marginal_likelihood(_cfg(sigma=1.5, noise=0.25), ([3.0], [2.0]))
        np.testing.assert_allclose(lml, -2.17708389914175027437209334229, rtol=1e-14)

    def test_dense_evaluation(self, rng):
        d = random_dataset(rng, 5)
        cfg = _cfg("rbf", 4.0, 0.7, 12.0, get_spec("drake")(60.0, 40.0))
        K = gram(cfg.kernel, d.density) + 0.7 * np.eye(5)
        ref = multivariate_normal(cfg.prior_mean(d.density), K).logpdf(d.speed)
        np.testing.assert_allclose(log_marginal_likelihood(cfg, d), ref, atol=1e-8)

    def test_chain_rule_for_duplicate(self, rng):
        # log p(y, y_j) - log p(y) is the predictive log density of the duplicate
        for _ in range(20):
            n = int(rng.integers(1, 15))
            x, y = rng.uniform(0, 50, n), rng.normal(40, 10, n)
            cfg = _cfg(rng.choice(["exponential", "rbf"]), rng.uniform(1, 10),
                       rng.uniform(0.05, 5), rng.uniform(1, 20))
            j = int(rng.integers(n))
            gain = (log_marginal_likelihood(cfg, (np.append(x, x[j]), np.append(y, y[j])))
                    - log_marginal_likelihood(cfg, (x, y)))
            post = gp_fit_predict(cfg, (x, y), [x[j]])
            ref = norm.logpdf(y[j], post.mean[0], np.sqrt(post.predictive_variance[0]))
            np.testing.assert_allclose(gain, ref, atol=1e-8)

    def test_finite_difference_consistency(self, rng):
        d = random_dataset(rng, 80)

        def f(log_noise_sigma):
            return log_marginal_likelihood(_cfg(sigma=6.0, noise=np.exp(2 * log_noise_sigma)), d)

        t = np.log(1.7)
        coarse = (f(t + 1e-4) - f(t - 1e-4)) / 2e-4
        fine = (f(t + 1e-5) - f(t - 1e-5)) / 2e-5
        assert abs(coarse - fine) <= 1e-4 * abs(fine)


class TestHyperparameters:
    def test_budget_one_is_identity(self, traffic):
        cfg = _cfg()
        assert optimize_hyperparameters(cfg, traffic.subset(np.arange(50)), budget=1) is cfg

    def test_never_worse(self, rng):
        for kind in ("exponential", "rbf"):
            d = random_dataset(rng, 60)
            cfg = _cfg(kind, 3.0, 1.0, 20.0)
            out = optimize_hyperparameters(cfg, d, budget=60, seed=2)
            assert log_marginal_likelihood(out, d) >= log_marginal_likelihood(cfg, d)

    def test_bounds_respected(self, rng):
        d = random_dataset(rng, 40)
        out = optimize_hyperparameters(_cfg("rbf", 1.0, 1.0, 5.0), d, budget=100)
        lo = np.log([1e-3, 1e-3, 1e-2]) - 1e-12
        hi = np.log([1e3, 1e2, 1e3]) + 1e-12
        theta = hyperparameter_vector(out)
        assert np.all(theta >= lo) and np.all(theta <= hi)

    def test_recovers_generator_in_median(self):
        # one 100-point draw pins sigma only loosely; the median over seeds is the estimand
        sig, noise = [], []
        for seed in range(20):
            r = np.random.default_rng(seed)
            x = np.sort(r.uniform(0, 100, 100))
            K = gram(KernelParams("rbf", 2.0, 10.0), x) + 1e-8 * np.eye(100)
            y = np.linalg.cholesky(K) @ r.standard_normal(100) + 0.5 * r.standard_normal(100)
            out = optimize_hyperparameters(_cfg("rbf", 1.0, 1.0, 5.0), (x, y), budget=300)
            sig.append(out.kernel.signal_sigma)
            noise.append(out.noise_sigma)
        assert abs(np.median(sig) / 2.0 - 1) <= 0.3
        assert abs(np.median(noise) / 0.5 - 1) <= 0.3


class TestPosteriorExport:
    def _post(self):
        return GPPosterior(np.array([0.0, 1.0]), np.array([50.0, 49.0]),
                           np.array([1.0, 4.0]), np.array([2.0, 5.0]))

    def test_csv_columns_and_bands(self):
        buf = io.StringIO()
        self._post().write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == ("query_density,mean,variance,predictive_variance,"
                            "ci90_lo,ci90_hi,ci95_lo,ci95_hi,ci99_lo,ci99_hi")
        row = [float(v) for v in lines[1].split(",")]
        np.testing.assert_allclose(row[6:8], [50 - 1.96 * np.sqrt(2), 50 + 1.96 * np.sqrt(2)])

    def test_band_multipliers(self):
        assert BAND_Z == {90: 1.645, 95: 1.960, 99: 2.576}

    def test_interval_uses_exact_quantile(self):
        lo, hi = self._post().interval(0.95)
        np.testing.assert_allclose(hi[0] - 50.0, norm.ppf(0.975) * np.sqrt(2.0), atol=1e-12)
