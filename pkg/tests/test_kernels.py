import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from stochfd import kernels
from stochfd.kernels import (KERNEL_KINDS, FactorizationError, KernelParams, chol_solve,
                             cholesky, gram, kernel_eval)

# mpmath values at 30 digits
E_INV = 0.367879441171442321595523770161
RBF_2_1_1 = 2.42612263885053369441519813996
M32_1 = 0.483357724596507650595075082258
M52_1 = 0.523994108831820310592713250761


class TestKernelEval:
    def test_exponential_diagonal(self):
        assert kernel_eval(KernelParams("exponential", 1.0), 3.0, 3.0) == 1.0

    def test_exponential_fixed_half(self):
        np.testing.assert_allclose(kernel_eval(KernelParams("exponential"), 0.0, 2.0), E_INV,
                                   rtol=1e-15)

    def test_exponential_ignores_length_scale(self):
        a = KernelParams("exponential", 1.3, length_scale=1.0)
        b = KernelParams("exponential", 1.3, length_scale=77.0)
        assert kernel_eval(a, 1.0, 4.0) == kernel_eval(b, 1.0, 4.0)
        assert not a.has_length_scale

    def test_rbf(self):
        np.testing.assert_allclose(kernel_eval(KernelParams("rbf", 2.0, 1.0), 5.0, 6.0),
                                   RBF_2_1_1, rtol=1e-15)

    def test_matern(self):
        np.testing.assert_allclose(kernel_eval(KernelParams("matern32"), 0.0, 1.0), M32_1,
                                   rtol=1e-14)
        np.testing.assert_allclose(kernel_eval(KernelParams("matern52"), 0.0, 1.0), M52_1,
                                   rtol=1e-14)

    def test_rational_quadratic(self):
        np.testing.assert_allclose(kernel_eval(KernelParams("rq"), 0.0, 1.0), 2.0 / 3.0,
                                   rtol=1e-15)

    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    @given(x=st.floats(0, 1e4), sigma=st.floats(1e-3, 1e3))
    def test_diagonal_is_variance(self, kind, x, sigma):
        p = KernelParams(kind, sigma, 3.0)
        assert kernel_eval(p, x, x) == sigma ** 2

    @pytest.mark.parametrize("bad", [dict(signal_sigma=0.0), dict(length_scale=-1.0),
                                     dict(kind="cosine"), dict(rq_alpha=0.0)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            KernelParams(**bad)


class TestGram:
    def test_single(self):
        np.testing.assert_array_equal(gram(KernelParams(signal_sigma=1.5), [0.0]), [[2.25]])

    def test_two_points(self):
        np.testing.assert_allclose(gram(KernelParams(), [0.0, 2.0]),
                                   [[1.0, E_INV], [E_INV, 1.0]], rtol=1e-15)

    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    def test_cross_transpose(self, kind, rng):
        p = KernelParams(kind, 1.7, 4.0)
        xs, ys = rng.uniform(0, 100, 7), rng.uniform(0, 100, 4)
        np.testing.assert_array_equal(gram(p, xs, ys), gram(p, ys, xs).T)

    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    def test_psd(self, kind, rng):
        for _ in range(5):
            sigma = rng.uniform(0.5, 20)
            p = KernelParams(kind, sigma, rng.uniform(0.5, 30))
            x = np.round(rng.uniform(0, 120, rng.integers(2, 200)), 1)
            K = gram(p, x)
            assert np.max(np.abs(K - K.T)) <= 1e-12
            assert np.linalg.eigvalsh(K).min() >= -1e-8 * sigma ** 2


class TestCholesky:
    def test_identity(self, rng):
        rhs = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(chol_solve(np.eye(4), rhs), rhs)

    def test_against_dense_inverse(self, rng):
        A = rng.standard_normal((3, 3))
        K = A @ A.T + 3 * np.eye(3)
        rhs = rng.standard_normal(3)
        np.testing.assert_allclose(chol_solve(K, rhs), np.linalg.inv(K) @ rhs, atol=1e-8)

    @given(st.integers(1, 30), st.integers(0, 10_000))
    def test_round_trip(self, n, seed):
        r = np.random.default_rng(seed)
        x = r.uniform(0, 50, n)
        K = gram(KernelParams("exponential", 2.0), x)
        K[np.diag_indices(n)] += 0.1
        v = r.standard_normal(n)
        back = chol_solve(K, K @ v)
        assert np.linalg.norm(back - v) <= 1e-8 * max(np.linalg.norm(v), 1.0)

    def test_no_jitter_when_well_conditioned(self):
        assert cholesky(np.eye(3) * 2.0).jitter == 0.0

    def test_duplicates_get_jitter(self):
        K = gram(KernelParams("rbf", 1.0, 10.0), [5.0, 5.0, 5.0, 6.0])
        f = cholesky(K)
        assert 0 < f.jitter <= 1e-2
        np.testing.assert_allclose(f.L @ f.L.T, K + f.jitter * np.eye(4), atol=1e-12)

    def test_failure_after_max_jitter(self):
        with pytest.raises(FactorizationError):
            cholesky(np.array([[1.0, 0.0], [0.0, -5.0]]))

    def test_logdet(self, rng):
        A = rng.standard_normal((5, 5))
        K = A @ A.T + np.eye(5)
        np.testing.assert_allclose(cholesky(K).logdet(), np.linalg.slogdet(K)[1], rtol=1e-12)


def test_no_explicit_inverse_anywhere(monkeypatch, traffic):
    """Every K^-1 goes through the factor; inverse routines are never called."""
    from stochfd.gpr import ExactGP, GPConfig, optimize_hyperparameters
    from stochfd.models import get_spec
    from stochfd.sampling import reservoir_sample
    from stochfd.sgpr import collapsed_bound, sgpr_fit

    def forbidden(*a, **k):
        raise AssertionError("explicit inverse formed")

    for mod, name in [(np.linalg, "inv"), (np.linalg, "pinv"), (scipy.linalg, "inv"),
                      (scipy.linalg, "pinv"), (scipy.linalg, "pinvh")]:
        monkeypatch.setattr(mod, name, forbidden)

    kernels.reset_solve_counts()
    data = traffic.subset(np.arange(150))
    cfg = GPConfig(KernelParams("exponential", 8.0), 9.0)
    ExactGP(cfg, data).predict([10.0, 50.0])
    optimize_hyperparameters(cfg, data, budget=15)
    z = reservoir_sample(data, 20, seed=1)
    sgpr_fit(cfg, data, z).predict([10.0, 50.0])
    sgpr_fit(cfg.with_mean(get_spec("greenshields")(60, 100)), data, z).predict([10.0])
    collapsed_bound(cfg, data, z)
    counts = kernels.solve_counts()
    assert counts["cholesky"] >= 5 and counts["solve"] >= 2 and counts["triangular"] >= 5
