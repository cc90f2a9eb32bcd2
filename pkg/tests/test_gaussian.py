import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgvb.gaussian import (
    NaturalGradientPair,
    PosteriorStructure,
    VariationalState,
    kl_gaussian,
    log_pdf,
    nat_grad_mu,
    nat_grad_prec,
    score_mu,
    score_sigma,
)

from conftest import random_spd, random_sym

LOG_2PI = np.log(2 * np.pi)


def fim_natural_gradient(mu, cov, a, b):
    """Inverse Fisher information times the gradient of ``a'mu + tr(B Sigma)``.

    The FIM of N(mu, Sigma) in (mu, vec Sigma) is block diagonal with blocks
    ``Sigma^{-1}`` and ``(Sigma^{-1} kron Sigma^{-1}) / 2``.  The returned
    precision gradient follows from the chain rule ``dP = -P dSigma P``.
    """
    d = mu.shape[0]
    prec = np.linalg.inv(cov)
    g_mu = np.linalg.solve(prec, a)
    fim_sigma = 0.5 * np.kron(prec, prec)
    nat_sigma = np.linalg.solve(fim_sigma, b.reshape(-1)).reshape(d, d)
    # natural direction in Sigma mapped to the precision coordinates
    return g_mu, -prec @ nat_sigma @ prec


class TestStructure:
    def test_kinds(self):
        assert PosteriorStructure.full(3).sizes == (3,)
        assert PosteriorStructure.diagonal(3).sizes == (1, 1, 1)
        assert PosteriorStructure.block([2, 1]).dim == 3

    def test_invalid(self):
        with pytest.raises(ValueError):
            PosteriorStructure.block([2, 0])
        with pytest.raises(ValueError):
            PosteriorStructure("weird", (1,))

    def test_slices(self):
        sl = PosteriorStructure.block([2, 3]).slices()
        assert sl == [slice(0, 2), slice(2, 5)]


class TestState:
    def test_cached_inverse(self, rng):
        p = random_spd(rng, 4)
        q = VariationalState.from_precision(np.zeros(4), p)
        np.testing.assert_allclose(q.cov[0] @ q.prec[0], np.eye(4), atol=1e-9)

    def test_immutable(self, rng):
        q = VariationalState.from_precision(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            q.mu[0] = 1.0
        with pytest.raises(ValueError):
            q.prec[0][0, 0] = 2.0

    def test_diagonal_vector(self):
        q = VariationalState.from_precision(np.zeros(3), np.array([1.0, 2.0, 4.0]))
        assert q.structure.is_diagonal
        np.testing.assert_allclose(q.cov, [1.0, 0.5, 0.25])
        with pytest.raises(ValueError):
            VariationalState.from_precision(np.zeros(2), np.array([1.0, -1.0]))

    def test_block_split(self, rng):
        p = random_spd(rng, 5)
        q = VariationalState.from_precision(np.zeros(5), p, PosteriorStructure.block([2, 3]))
        np.testing.assert_allclose(q.prec[1], p[2:, 2:])
        assert q.dense_prec()[0, 4] == 0.0

    def test_from_covariance(self, rng):
        c = random_spd(rng, 3)
        q = VariationalState.from_covariance(np.ones(3), c)
        np.testing.assert_allclose(q.dense_cov(), c, atol=1e-12)

    def test_draw_uses_precision_factor(self, rng):
        p = random_spd(rng, 3)
        q = VariationalState.from_precision(np.ones(3), p)
        eps = rng.standard_normal((4, 3))
        l = np.linalg.cholesky(p)
        np.testing.assert_allclose(q.draw(eps), 1.0 + np.linalg.solve(l.T, eps.T).T, atol=1e-12)


class TestLogPdf:
    def test_standard_normal(self):
        q = VariationalState.from_precision([0.0], [[1.0]])
        assert log_pdf(q, [0.0]) == pytest.approx(-0.918938533204673, abs=1e-12)

    def test_at_mean(self, rng):
        c = random_spd(rng, 3)
        q = VariationalState.from_covariance(np.ones(3), c)
        assert log_pdf(q, np.ones(3)) == pytest.approx(-0.5 * np.linalg.slogdet(2 * np.pi * c)[1], rel=1e-12)

    def test_matches_scipy(self, rng):
        from scipy.stats import multivariate_normal

        c = random_spd(rng, 4)
        mu = rng.standard_normal(4)
        q = VariationalState.from_covariance(mu, c)
        x = rng.standard_normal((6, 4))
        np.testing.assert_allclose(log_pdf(q, x), multivariate_normal(mu, c).logpdf(x), rtol=1e-10)

    def test_single_block_bit_identical(self, rng):
        p = random_spd(rng, 4)
        mu = rng.standard_normal(4)
        x = rng.standard_normal((5, 4))
        full = VariationalState.from_precision(mu, p)
        block = VariationalState.from_precision(mu, p, PosteriorStructure.block([4]))
        np.testing.assert_array_equal(log_pdf(full, x), log_pdf(block, x))
        np.testing.assert_array_equal(score_mu(full, x), score_mu(block, x))
        np.testing.assert_array_equal(score_sigma(full, x[0]), score_sigma(block, x[0]))

    def test_diagonal_matches_full(self, rng):
        p = np.array([0.5, 2.0, 3.0])
        x = rng.standard_normal((3, 3))
        a = VariationalState.from_precision(np.zeros(3), p)
        b = VariationalState.from_precision(np.zeros(3), np.diag(p))
        np.testing.assert_allclose(log_pdf(a, x), log_pdf(b, x), rtol=1e-13)


class TestScores:
    def test_mu_at_mean(self):
        q = VariationalState.from_precision(np.ones(2), np.eye(2))
        np.testing.assert_array_equal(score_mu(q, np.ones(2)), 0.0)

    def test_mu_scalar(self):
        q = VariationalState.from_precision([0.0], [[1.0]])
        assert score_mu(q, [1.0])[0] == 1.0

    def test_mu_finite_difference(self, rng):
        p = random_spd(rng, 3)
        mu = rng.standard_normal(3)
        x = rng.standard_normal(3)
        h = 1e-5
        fd = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd[i] = (log_pdf(VariationalState.from_precision(mu + e, p), x)
                     - log_pdf(VariationalState.from_precision(mu - e, p), x)) / (2 * h)
        np.testing.assert_allclose(score_mu(VariationalState.from_precision(mu, p), x), fd, atol=1e-6)

    def test_sigma_scalar_cases(self):
        q = VariationalState.from_precision([0.0], [[1.0]])
        assert score_sigma(q, [1.0])[0, 0] == 0.0
        assert score_sigma(q, [0.0])[0, 0] == -0.5

    def test_sigma_finite_difference(self, rng):
        c = random_spd(rng, 2)
        mu = np.zeros(2)
        x = rng.standard_normal(2)
        h = 1e-6
        fd = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] += h / 2
                e[j, i] += h / 2
                fd[i, j] = (log_pdf(VariationalState.from_covariance(mu, c + e), x)
                            - log_pdf(VariationalState.from_covariance(mu, c - e), x)) / (2 * h)
        g = score_sigma(VariationalState.from_covariance(mu, c), x)
        np.testing.assert_allclose(g, fd, atol=1e-5)

    def test_zero_mean_under_q(self, rng):
        p = random_spd(rng, 3)
        q = VariationalState.from_precision(np.ones(3), p)
        x = q.sample(10**5, rng)
        sm = score_mu(q, x)
        se = sm.std(axis=0) / np.sqrt(x.shape[0])
        assert np.all(np.abs(sm.mean(axis=0)) < 4 * se)
        z = sm
        ss = -0.5 * (p[None] - z[:, :, None] * z[:, None, :])
        se2 = ss.std(axis=0) / np.sqrt(x.shape[0])
        assert np.all(np.abs(ss.mean(axis=0)) < 4 * se2)

    def test_diagonal_sigma_score(self):
        q = VariationalState.from_precision(np.zeros(2), np.array([1.0, 2.0]))
        np.testing.assert_allclose(score_sigma(q, [1.0, 0.0]), [0.0, -1.0])


class TestNaturalGradients:
    def test_mu_identity(self):
        np.testing.assert_array_equal(nat_grad_mu(np.eye(2), [1.0, 2.0]), [1.0, 2.0])

    def test_mu_diagonal(self):
        np.testing.assert_array_equal(nat_grad_mu(np.diag([2.0, 3.0]), [1.0, 1.0]), [2.0, 3.0])

    def test_prec(self, rng):
        np.testing.assert_array_equal(nat_grad_prec(np.zeros((2, 2))), np.zeros((2, 2)))
        g = random_sym(rng, 3)
        np.testing.assert_allclose(nat_grad_prec(g), -2 * g)

    def test_fim_identity(self, rng):
        for _ in range(20):
            cov = random_spd(rng, 3)
            mu = rng.standard_normal(3)
            a = rng.standard_normal(3)
            b = random_sym(rng, 3)
            ref_mu, ref_prec = fim_natural_gradient(mu, cov, a, b)
            np.testing.assert_allclose(nat_grad_mu(cov, a), ref_mu, rtol=1e-7, atol=1e-12)
            np.testing.assert_allclose(nat_grad_prec(b), ref_prec, rtol=1e-7, atol=1e-10)

    def test_riemannian_identity_finite_difference(self, rng):
        cov = random_spd(rng, 3)
        a = random_sym(rng, 3)
        prec = np.linalg.inv(cov)

        def lb(p):
            return np.trace(a @ np.linalg.inv(p))

        h = 1e-6
        grad_p = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                e = np.zeros((3, 3))
                e[i, j] += h / 2
                e[j, i] += h / 2
                grad_p[i, j] = (lb(prec + e) - lb(prec - e)) / (2 * h)
        np.testing.assert_allclose(nat_grad_prec(a), 2 * prec @ grad_p @ prec, atol=1e-6)

    def test_pair_algebra(self, rng):
        q = VariationalState.from_precision(np.zeros(3), random_spd(rng, 3), PosteriorStructure.block([2, 1]))
        z = NaturalGradientPair.zeros_like(q)
        one = NaturalGradientPair(np.ones(3), (np.ones((2, 2)), np.ones((1, 1))))
        s = z + one * 2.0
        np.testing.assert_array_equal(s.g_mu, 2.0)
        assert s.flat().shape == (3 + 4 + 1,)


class TestKL:
    def test_self(self, rng):
        q = VariationalState.from_covariance(rng.standard_normal(3), random_spd(rng, 3))
        assert kl_gaussian(q, q) == pytest.approx(0.0, abs=1e-12)

    def test_shift(self):
        a = VariationalState.from_covariance([0.0], [[1.0]])
        b = VariationalState.from_covariance([1.0], [[1.0]])
        assert kl_gaussian(a, b) == pytest.approx(0.5, abs=1e-14)

    def test_scale(self):
        a = VariationalState.from_covariance([0.0], [[2.0]])
        b = VariationalState.from_covariance([0.0], [[1.0]])
        assert kl_gaussian(a, b) == pytest.approx(0.5 * (2 - 1 - np.log(2)), abs=1e-14)
        assert kl_gaussian(a, b) == pytest.approx(0.15342640972002736, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6))
    def test_nonnegative(self, seed):
        r = np.random.default_rng(seed)
        a = VariationalState.from_covariance(r.standard_normal(3), random_spd(r, 3))
        b = VariationalState.from_covariance(r.standard_normal(3), random_spd(r, 3))
        assert kl_gaussian(a, b) >= 0.0
