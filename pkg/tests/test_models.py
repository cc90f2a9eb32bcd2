import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import expit

from emgvb import PriorSpec, VariationalState, _kernels
from emgvb.gaussian import log_pdf
from emgvb.models import (
    CoordinatewiseTransform,
    GarchFamily,
    GarchSpec,
    GarchTransform,
    LinearRegression,
    LogisticRegression,
    VarianceError,
    back_transform_density,
    garch_constraint_map,
    garch_family_loglik,
    har_design,
    inverse_sigmoid,
    linreg_loglik,
    logistic_loglik,
    prior_logpdf,
    sigmoid_transform,
)
from emgvb.models.transforms import EXP, IDENTITY, SIGMOID

LOG_2PI = np.log(2 * np.pi)


# -- brute-force references -------------------------------------------------

def naive_gjr_loglik(omega, alpha, gamma, betas, r):
    n = len(r)
    bc = np.mean((r - r.mean()) ** 2)
    s2 = [bc] * n
    for t in range(1, n):
        v = omega + (alpha + (gamma if r[t - 1] < 0 else 0.0)) * r[t - 1] ** 2
        for j, b in enumerate(betas):
            v += b * (s2[t - 1 - j] if t - 1 - j >= 0 else bc)
        s2[t] = v
    return sum(-0.5 * (np.log(2 * np.pi * s2[t]) + r[t] ** 2 / s2[t]) for t in range(n))


def naive_egarch_loglik(omega, alpha, gamma, betas, r):
    n = len(r)
    lbc = np.log(np.var(r))
    ls = [lbc] * n
    for t in range(1, n):
        z = r[t - 1] / np.sqrt(np.exp(ls[t - 1]))
        v = omega + alpha * (abs(z) - np.sqrt(2 / np.pi)) + gamma * z
        for j, b in enumerate(betas):
            v += b * (ls[t - 1 - j] if t - 1 - j >= 0 else lbc)
        ls[t] = v
    return sum(-0.5 * (np.log(2 * np.pi) + ls[t] + r[t] ** 2 / np.exp(ls[t])) for t in range(n))


def naive_figarch_loglik(omega, phi, d, beta, r, m=1000):
    """ARCH(inf) weights from the lag polynomial ``1 - (1 - phi L)(1 - L)^d / (1 - beta L)``."""
    c = [1.0]
    for k in range(1, m + 1):
        c.append(c[-1] * (k - 1 - d) / k)
    a = [c[0]] + [c[k] - phi * c[k - 1] for k in range(1, m + 1)]
    b = [a[0]]
    for k in range(1, m + 1):
        b.append(a[k] + beta * b[-1])
    lam = [-b[k] for k in range(1, m + 1)]
    bc = float(np.var(r))
    total = 0.0
    for t in range(len(r)):
        s2 = omega / (1 - beta)
        for k in range(1, m + 1):
            s2 += lam[k - 1] * (r[t - k] ** 2 if t - k >= 0 else bc)
        total += -0.5 * (np.log(2 * np.pi * s2) + r[t] ** 2 / s2)
    return total


# -- transforms -------------------------------------------------------------

class TestSigmoid:
    def test_values(self):
        assert sigmoid_transform(0.0) == 0.5
        assert sigmoid_transform(30.0) > 1 - 1e-12
        assert inverse_sigmoid(0.5) == 0.0

    def test_no_overflow(self):
        with np.errstate(all="raise"):
            assert sigmoid_transform(-1000.0) == 0.0
            assert sigmoid_transform(1000.0) == 1.0


class TestGarchMap:
    def test_half_half(self):
        om, a, b = garch_constraint_map([0.0, 0.0, 0.0])
        assert (om, a, b) == (0.5, 0.25, 0.25)

    def test_limit(self):
        _, a, b = garch_constraint_map([0.0, 1.3, 40.0])
        assert a < 1e-15
        assert b == pytest.approx(expit(1.3))

    @settings(max_examples=300)
    @given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
    def test_stationary(self, psi):
        om, a, b = garch_constraint_map(psi)
        assert 0 <= om <= 1 and a >= 0 and b >= 0
        assert a + b < 1 or a + b == pytest.approx(expit(psi[1]))

    def test_random_images(self, rng):
        psi = rng.normal(0, 3, (10**4, 3))
        om, a, b = garch_constraint_map(psi)
        assert np.all(a + b < 1) and np.all(a >= 0) and np.all(b >= 0)

    def test_matches_family_transform(self, rng):
        psi = rng.normal(0, 2, (50, 3))
        np.testing.assert_allclose(np.column_stack(garch_constraint_map(psi)), GarchTransform(GarchSpec("garch")).forward(psi))


SPECS = [
    GarchSpec("arch"),
    GarchSpec("garch"),
    GarchSpec("gjr", q=1),
    GarchSpec("gjr", q=2),
    GarchSpec("egarch", o=1, q=1),
    GarchSpec("egarch", o=1, q=2),
    GarchSpec("egarch", o=0, q=1),
    GarchSpec("figarch"),
]


class TestGarchTransform:
    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-o{s.o}-q{s.q}")
    def test_round_trip(self, spec, rng):
        t = GarchTransform(spec)
        psi = rng.uniform(-4, 4, (200, t.k))
        np.testing.assert_allclose(t.inverse(t.forward(psi)), psi, atol=1e-10)

    @pytest.mark.parametrize("spec", [s for s in SPECS if s.kind in ("gjr", "garch")], ids=lambda s: f"{s.kind}-q{s.q}")
    def test_gjr_budget(self, spec, rng):
        th = GarchTransform(spec).forward(rng.normal(0, 3, (10**4, GarchTransform(spec).k)))
        gamma = th[:, 2] if spec.o else 0.0
        budget = th[:, 1] + gamma / 2 + th[:, 2 + spec.o:].sum(axis=1)
        assert np.all(budget < 1) and np.all(th >= 0)

    def test_egarch_persistence(self, rng):
        th = GarchTransform(GarchSpec("egarch", o=1, q=2)).forward(rng.normal(0, 3, (10**4, 5)))
        b1, b2 = th[:, 3], th[:, 4]
        # stationarity triangle of an AR(2) in log variance
        assert np.all(np.abs(b2) < 1) and np.all(b1 + b2 < 1) and np.all(b2 - b1 < 1)

    def test_figarch_region(self, rng):
        th = GarchTransform(GarchSpec("figarch")).forward(rng.normal(0, 3, (10**4, 4)))
        om, phi, d, beta = th.T
        assert np.all(om > 0)
        assert np.all((d > 0) & (d < 1))
        assert np.all((phi >= 0) & (phi <= (1 - d) / 2))
        assert np.all((beta >= 0) & (beta <= d + phi))

    def test_names(self):
        assert GarchSpec("gjr", q=2).names == ("omega", "alpha", "gamma", "beta1", "beta2")
        assert GarchSpec("arch").names == ("omega", "alpha")

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            GarchSpec("figarch", q=2)
        with pytest.raises(ValueError):
            GarchSpec("tgarch")


class TestCoordinatewise:
    def test_round_trip(self, rng):
        t = CoordinatewiseTransform([IDENTITY, EXP, SIGMOID, CoordinatewiseTransform.sigmoid(-1, 1)])
        psi = rng.uniform(-5, 5, (100, 4))
        np.testing.assert_allclose(t.inverse(t.forward(psi)), psi, atol=1e-10)

    def test_jacobian(self, rng):
        t = CoordinatewiseTransform([EXP, SIGMOID])
        theta = np.array([0.7, 0.3])
        h = 1e-6
        num = np.log(np.abs([
            (t.inverse(theta + [h, 0])[0] - t.inverse(theta - [h, 0])[0]) / (2 * h),
            (t.inverse(theta + [0, h])[1] - t.inverse(theta - [0, h])[1]) / (2 * h),
        ])).sum()
        assert t.log_abs_det_jac_inverse(theta) == pytest.approx(num, rel=1e-7)


class TestBackTransformDensity:
    def test_identity(self, rng):
        q = VariationalState.from_covariance(rng.standard_normal(2), np.array([[1.0, 0.3], [0.3, 2.0]]))
        x = rng.standard_normal((5, 2))
        np.testing.assert_allclose(back_transform_density(q, CoordinatewiseTransform.identity(2), x),
                                   np.exp(log_pdf(q, x)), rtol=1e-12)

    def test_lognormal_at_one(self):
        q = VariationalState.from_precision([0.0], [[1.0]])
        dens = back_transform_density(q, CoordinatewiseTransform([EXP]), [1.0], param=0)
        assert dens[0] == pytest.approx(0.3989422804014327, rel=1e-12)

    @pytest.mark.parametrize("m,mu,var", [(EXP, 0.3, 0.4), (SIGMOID, -0.5, 2.0)])
    def test_integrates_to_one(self, m, mu, var):
        q = VariationalState.from_covariance([mu], np.array([[var]]))
        t = CoordinatewiseTransform([m])
        lo, hi = m.support
        f = lambda x: back_transform_density(q, t, np.array([x]), param=0)[0]
        total = integrate.quad(f, lo, hi if np.isfinite(hi) else np.inf, limit=200)[0]
        assert total == pytest.approx(1.0, rel=0.01)

    def test_outside_support(self):
        q = VariationalState.from_precision([0.0], [[1.0]])
        with pytest.raises(ValueError):
            back_transform_density(q, CoordinatewiseTransform([EXP]), [-1.0], param=0)
        with pytest.raises(ValueError):
            back_transform_density(q, CoordinatewiseTransform([SIGMOID]), [[1.5]])

    def test_joint_map_kde(self):
        q = VariationalState.from_covariance([-2.0, 1.0, 1.0], np.eye(3) * 0.05)
        t = GarchTransform(GarchSpec("garch"))
        grid = np.linspace(0.0, 0.5, 2001)
        dens = back_transform_density(q, t, grid, param=0)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=0.02)
        with pytest.raises(ValueError):
            back_transform_density(q, t, grid[:, None].repeat(3, 1))


# -- priors -----------------------------------------------------------------

class TestPrior:
    def test_standard(self):
        assert prior_logpdf(PriorSpec.isotropic(1, 1.0), [0.0]) == pytest.approx(-0.5 * LOG_2PI, abs=1e-15)

    def test_isotropic_vs_full(self, rng):
        x = rng.standard_normal((4, 3))
        a = PriorSpec(np.ones(3), tau=0.2)
        b = PriorSpec(np.ones(3), prec0=0.2 * np.eye(3))
        np.testing.assert_allclose(prior_logpdf(a, x), prior_logpdf(b, x), rtol=1e-12, atol=1e-12)

    def test_tau_doubling(self):
        a = PriorSpec.isotropic(4, 0.5)
        b = PriorSpec.isotropic(4, 1.0)
        assert prior_logpdf(b, np.zeros(4)) - prior_logpdf(a, np.zeros(4)) == pytest.approx(4 * 0.5 * np.log(2))

    def test_invalid(self):
        with pytest.raises(ValueError):
            PriorSpec(np.zeros(2))
        with pytest.raises(ValueError):
            PriorSpec(np.zeros(2), tau=-1.0)


# -- regression likelihoods -------------------------------------------------

class TestLogistic:
    def test_single(self):
        assert logistic_loglik([0.0], [[1.0]], [1]) == pytest.approx(-0.6931471805599453, abs=1e-15)

    def test_zero_coef(self, rng):
        x = rng.standard_normal((7, 3))
        y = (rng.uniform(size=7) > 0.5).astype(float)
        assert logistic_loglik(np.zeros(3), x, y) == pytest.approx(-7 * np.log(2))

    def test_saturation(self):
        v = logistic_loglik([30.0], [[1.0]], [1])
        assert -1e-12 < v <= 0.0
        assert np.isfinite(logistic_loglik([1e4], [[1.0]], [0]))

    def test_reference(self, rng):
        x = rng.standard_normal((20, 3))
        y = (rng.uniform(size=20) > 0.4).astype(float)
        b = rng.standard_normal(3)
        p = expit(x @ b)
        ref = np.sum(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert logistic_loglik(b, x, y) == pytest.approx(ref, rel=1e-12)

    def test_labels(self):
        with pytest.raises(ValueError, match="row 1"):
            LogisticRegression([[1.0], [1.0]], [1, 2])

    def test_batch(self, rng):
        m = LogisticRegression(rng.standard_normal((10, 2)), np.arange(10) % 2)
        psis = rng.standard_normal((4, 2))
        np.testing.assert_allclose(m.loglik_batch(psis), [m.loglik(p) for p in psis])


class TestLinreg:
    def test_zero_residuals(self):
        x = np.eye(3)
        assert linreg_loglik([0, 0, 0, 0.0], x, np.zeros(3)) == pytest.approx(-1.5 * LOG_2PI)

    def test_doubling_sigma(self):
        x = np.eye(4)
        a = linreg_loglik([0, 0, 0, 0, 0.0], x, np.zeros(4))
        b = linreg_loglik([0, 0, 0, 0, np.log(2.0)], x, np.zeros(4))
        assert a - b == pytest.approx(4 * np.log(2))

    def test_single(self):
        assert linreg_loglik([0.0, 0.0], [[1.0]], [1.0]) == pytest.approx(-0.5 * LOG_2PI - 0.5)

    def test_transform(self):
        m = LinearRegression(np.ones((2, 1)), np.zeros(2))
        assert m.transform.names == ("b0", "sigma")
        np.testing.assert_allclose(m.transform.forward([1.0, 0.0]), [1.0, 1.0])

    def test_reported_sigma(self):
        assert LinearRegression.reported_sigma(0.0, 0.2) == pytest.approx(1.1)

    def test_har(self):
        rv = np.arange(30.0)
        x, y = har_design(rv)
        assert x.shape == (8, 4)
        np.testing.assert_allclose(x[0], [1.0, 21.0, 19.0, 10.5])
        assert y[0] == 22.0


class TestConjugate:
    def test_posterior_matches_dense_algebra(self, conjugate):
        model, prior, exact = conjugate
        p = model.x.T @ model.x + 0.1 * np.eye(5)
        np.testing.assert_allclose(exact.dense_prec(), p, rtol=1e-12)
        np.testing.assert_allclose(exact.mu, np.linalg.solve(p, model.x.T @ model.y), rtol=1e-10)

    def test_evidence_equals_lb_at_posterior(self, conjugate):
        model, prior, exact = conjugate
        assert model.lower_bound(exact, prior) == pytest.approx(model.log_evidence(prior), abs=1e-8)

    def test_lb_below_evidence(self, conjugate, conjugate_state):
        model, prior, _ = conjugate
        assert model.lower_bound(conjugate_state, prior) < model.log_evidence(prior)

    def test_lb_grads_finite_difference(self, conjugate, conjugate_state):
        model, prior, _ = conjugate
        q = conjugate_state
        g_mu, g_sig = model.lower_bound_grads(q, prior)
        h = 1e-6
        e = np.zeros(5)
        e[2] = h
        fd = (model.lower_bound(q.replace(mu=q.mu + e), prior) - model.lower_bound(q.replace(mu=q.mu - e), prior)) / (2 * h)
        assert g_mu[2] == pytest.approx(fd, rel=1e-5)
        c = q.dense_cov()
        dc = np.zeros((5, 5))
        dc[1, 3] = dc[3, 1] = h / 2
        lp = model.lower_bound(VariationalState.from_covariance(q.mu, c + dc), prior)
        lm = model.lower_bound(VariationalState.from_covariance(q.mu, c - dc), prior)
        assert g_sig[1, 3] == pytest.approx((lp - lm) / (2 * h), rel=1e-4)


# -- volatility -------------------------------------------------------------

class TestGarchLoglik:
    def test_one_step(self):
        m = GarchFamily(GarchSpec("garch"), np.array([1.0, -1.0]))
        assert m.backcast == 1.0
        s2 = m.variance_batch([[0.1, 0.2, 0.7]])
        np.testing.assert_allclose(s2[0], [1.0, 1.0], rtol=1e-15)

    def test_arch_zero_alpha_is_iid(self, rng):
        r = rng.standard_normal(60)
        m = GarchFamily(GarchSpec("arch"), r)
        om = 0.8
        s2 = m.variance_batch([[om, 0.0]])[0]
        ll = float(_kernels.gaussian_loglik_rows(r, s2[None])[0])
        iid = np.sum(-0.5 * (np.log(2 * np.pi * om) + r[1:] ** 2 / om))
        first = -0.5 * (np.log(2 * np.pi * m.backcast) + r[0] ** 2 / m.backcast)
        assert ll == pytest.approx(first + iid, rel=1e-13)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("q", [1, 2])
    def test_gjr_oracle(self, seed, q):
        r = np.random.default_rng(seed).standard_normal(50) * 1.3
        spec = GarchSpec("gjr", q=q)
        psi = np.random.default_rng(seed + 100).normal(0, 1, 3 + q)
        th = GarchTransform(spec).forward(psi)
        ref = naive_gjr_loglik(th[0], th[1], th[2], th[3:], r)
        assert garch_family_loglik(spec, psi, r) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_garch_oracle(self, seed):
        r = np.random.default_rng(seed).standard_normal(50)
        psi = np.random.default_rng(seed + 7).normal(0, 1, 3)
        th = GarchTransform(GarchSpec("garch")).forward(psi)
        ref = naive_gjr_loglik(th[0], th[1], 0.0, th[2:], r)
        assert garch_family_loglik(GarchSpec("garch"), psi, r) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("q", [1, 2])
    def test_egarch_oracle(self, seed, q):
        r = np.random.default_rng(seed).standard_normal(50)
        spec = GarchSpec("egarch", o=1, q=q)
        psi = np.random.default_rng(seed + 3).normal(0, 0.2, 3 + q)
        th = GarchTransform(spec).forward(psi)
        ref = naive_egarch_loglik(th[0], th[1], th[2], th[3:], r)
        assert garch_family_loglik(spec, psi, r) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_figarch_oracle(self, seed):
        r = np.random.default_rng(seed).standard_normal(50)
        psi = np.random.default_rng(seed + 11).normal(0, 1, 4)
        th = GarchTransform(GarchSpec("figarch")).forward(psi)
        ref = naive_figarch_loglik(*th, r)
        assert garch_family_loglik(GarchSpec("figarch"), psi, r) == pytest.approx(ref, abs=1e-9)

    def test_finite_everywhere(self, rng):
        r = rng.standard_normal(300)
        for spec in SPECS:
            m = GarchFamily(spec, r)
            # EGARCH intercept and news terms are unconstrained, so keep them moderate
            psis = rng.normal(0, 0.2 if spec.kind == "egarch" else 3, (200, m.k))
            assert np.all(np.isfinite(m.loglik_batch(psis)))

    def test_invalid_variance_reports_index(self):
        m = GarchFamily(GarchSpec("egarch", o=1, q=1), np.array([0.1, 1e3, 0.2, 0.3]))
        with pytest.raises(VarianceError) as exc:
            m.variance_batch([[800.0, 0.0, 0.0, 0.0]])
        assert exc.value.index == 1

    @pytest.mark.skipif(not os.environ.get("EMGVB_SP500_CSV"), reason="S&P 500 return series not supplied")
    def test_figarch_sp500(self):
        from emgvb.harness.data import load_csv

        r = load_csv(os.environ["EMGVB_SP500_CSV"], ["return"])["return"]
        assert GarchFamily(GarchSpec("figarch"), r - r.mean()).k == 4


class TestBackends:
    pytestmark = pytest.mark.skipif(_kernels.compiled_backend is None, reason="compiled kernels not built")

    @pytest.mark.parametrize("name", ["gjr_recursion", "egarch_recursion"])
    @pytest.mark.parametrize("q", [0, 1, 2])
    def test_recursions_match(self, name, q, rng):
        s, n = 6, 80
        r = rng.standard_normal(n)
        args = (rng.uniform(0.01, 0.2, s), rng.uniform(0, 0.2, s), rng.uniform(0, 0.2, s),
                rng.uniform(0, 0.35, (s, q)), r, float(np.var(r)))
        out_c, out_p = np.empty((s, n)), np.empty((s, n))
        bad_c = getattr(_kernels.compiled_backend, name)(*args, out_c)
        bad_p = getattr(_kernels.python_backend, name)(*args, out_p)
        assert bad_c == bad_p == -1
        np.testing.assert_allclose(out_c, out_p, rtol=1e-13)

    def test_weights_and_loglik_match(self, rng):
        s = 5
        phi, d, beta = rng.uniform(0, 0.2, s), rng.uniform(0.2, 0.8, s), rng.uniform(0, 0.5, s)
        np.testing.assert_allclose(_kernels.compiled_backend.figarch_weights(phi, d, beta, 300),
                                   _kernels.python_backend.figarch_weights(phi, d, beta, 300), rtol=1e-12, atol=1e-15)
        r = rng.standard_normal(40)
        s2 = rng.uniform(0.5, 2.0, (s, 40))
        np.testing.assert_allclose(_kernels.compiled_backend.gaussian_loglik_rows(r, s2),
                                   _kernels.python_backend.gaussian_loglik_rows(r, s2), rtol=1e-13)

    def test_bad_index_match(self):
        r = np.array([0.1, -0.2, 0.3, 0.1])
        args = (np.array([-1.0]), np.array([0.0]), np.array([0.0]), np.zeros((1, 1)), r, 1.0)
        a, b = np.empty((1, 4)), np.empty((1, 4))
        assert _kernels.compiled_backend.gjr_recursion(*args, a) == _kernels.python_backend.gjr_recursion(*args, b) == 1
