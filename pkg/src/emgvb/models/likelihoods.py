"""Regression likelihoods with data bound at construction."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..gaussian import VariationalState
from ..spd import cholesky, spd_inverse, symmetrize
from .priors import PriorSpec
from .transforms import EXP, IDENTITY, CoordinatewiseTransform, ParamTransform

__all__ = [
    "ModelSpec",
    "LogisticRegression",
    "LinearRegression",
    "KnownNoiseLinearRegression",
    "logistic_loglik",
    "linreg_loglik",
    "har_design",
]

LOG_2PI = float(np.log(2.0 * np.pi))


class ModelSpec:
    """A likelihood ``log p(y | T(psi))`` over unconstrained ``psi``.

    Subclasses bind their data in ``__init__`` and implement
    :meth:`loglik_batch` on an ``S x k`` array of draws.  Evaluation is
    pure, so a model may be shared by concurrent runs.
    """

    name = "model"
    transform: ParamTransform

    @property
    def k(self) -> int:
        return self.transform.k

    def loglik_batch(self, psis: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loglik(self, psi) -> float:
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (self.k,):
            raise ValueError(f"expected {self.k} parameters, got shape {psi.shape}")
        return float(self.loglik_batch(psi[None, :])[0])

    def _check_batch(self, psis) -> np.ndarray:
        psis = np.atleast_2d(np.asarray(psis, dtype=float))
        if psis.shape[1] != self.k:
            raise ValueError(f"expected {self.k} parameters per row, got {psis.shape[1]}")
        return psis


def _as_design(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"{x.shape[0]} design rows but {y.shape[0]} targets")
    x.setflags(write=False)
    y.setflags(write=False)
    return x, y


class LogisticRegression(ModelSpec):
    """Bernoulli likelihood with logit link; labels must be 0 or 1."""

    name = "logistic"

    def __init__(self, x, y, names=None):
        self.x, self.y = _as_design(x, y)
        if not np.all((self.y == 0) | (self.y == 1)):
            bad = int(np.flatnonzero((self.y != 0) & (self.y != 1))[0])
            raise ValueError(f"label {self.y[bad]!r} at row {bad} is not 0 or 1")
        self.transform = CoordinatewiseTransform.identity(self.x.shape[1], names)

    def loglik_batch(self, psis) -> np.ndarray:
        eta = self._check_batch(psis) @ self.x.T
        # y*eta - log(1 + e^eta)
        return eta @ self.y - np.sum(np.logaddexp(0.0, eta), axis=1)

    def predict_proba(self, psi, x=None) -> np.ndarray:
        x = self.x if x is None else np.atleast_2d(x)
        return expit(x @ np.asarray(psi, dtype=float))


def logistic_loglik(psi, x, y) -> float:
    return LogisticRegression(x, y).loglik(psi)


class LinearRegression(ModelSpec):
    """Gaussian errors with unknown scale; the last coordinate is ``log sigma``."""

    name = "linreg"

    def __init__(self, x, y, names=None):
        self.x, self.y = _as_design(x, y)
        p = self.x.shape[1]
        names = list(names) if names is not None else [f"b{i}" for i in range(p)]
        if len(names) == p:
            names.append("sigma")
        self.transform = CoordinatewiseTransform([IDENTITY] * p + [EXP], names)

    def loglik_batch(self, psis) -> np.ndarray:
        psis = self._check_batch(psis)
        coef, log_sigma = psis[:, :-1], psis[:, -1]
        resid = self.y - coef @ self.x.T
        n = self.y.shape[0]
        return -0.5 * n * LOG_2PI - n * log_sigma - 0.5 * np.sum(resid * resid, axis=1) * np.exp(-2.0 * log_sigma)

    def fitted(self, psi, x=None) -> np.ndarray:
        x = self.x if x is None else np.atleast_2d(x)
        return x @ np.asarray(psi, dtype=float)[:-1]

    @staticmethod
    def reported_sigma(mu_sigma: float, var_sigma: float) -> float:
        """Point estimate of sigma from the variational marginal of ``log sigma``."""
        return float(np.exp(mu_sigma) + var_sigma / 2.0)


def linreg_loglik(psi, x, y) -> float:
    return LinearRegression(x, y).loglik(psi)


def har_design(rv, lags=(1, 5, 22)) -> tuple:
    """HAR regressors: intercept plus trailing means of ``rv`` over each lag.

    Returns ``(X, y)`` aligned so that row ``t`` predicts ``rv[t]`` from
    values strictly before ``t``.
    """
    rv = np.asarray(rv, dtype=float).ravel()
    m = max(lags)
    if rv.shape[0] <= m:
        raise ValueError("series shorter than the longest HAR lag")
    c = np.concatenate([[0.0], np.cumsum(rv)])
    t = np.arange(m, rv.shape[0])
    cols = [np.ones(t.shape[0])]
    for lag in lags:
        cols.append((c[t] - c[t - lag]) / lag)
    return np.column_stack(cols), rv[m:]


class KnownNoiseLinearRegression(ModelSpec):
    """Gaussian linear model with known noise scale.

    With a Gaussian prior the posterior, the evidence and the lower bound of
    any Gaussian ``q`` are available in closed form, which makes this the
    reference problem for the optimizer.
    """

    name = "conjugate"

    def __init__(self, x, y, noise_sd: float = 1.0, names=None):
        self.x, self.y = _as_design(x, y)
        if not noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        self.noise_sd = float(noise_sd)
        self.transform = CoordinatewiseTransform.identity(self.x.shape[1], names)
        self._xtx = self.x.T @ self.x
        self._xty = self.x.T @ self.y

    @property
    def _noise_prec(self) -> float:
        return self.noise_sd ** -2

    def loglik_batch(self, psis) -> np.ndarray:
        resid = self.y - self._check_batch(psis) @ self.x.T
        n = self.y.shape[0]
        return -0.5 * n * (LOG_2PI + 2.0 * np.log(self.noise_sd)) - 0.5 * self._noise_prec * np.sum(resid * resid, axis=1)

    def exact_posterior(self, prior: PriorSpec) -> VariationalState:
        prec = symmetrize(self._noise_prec * self._xtx + prior.dense_prec())
        rhs = self._noise_prec * self._xty + prior.prec_times(prior.mu0)
        cov, _ = spd_inverse(prec)
        return VariationalState.from_precision(cov @ rhs, prec)

    def log_evidence(self, prior: PriorSpec) -> float:
        n = self.y.shape[0]
        cov_y = self.noise_sd ** 2 * np.eye(n) + self.x @ np.linalg.solve(prior.dense_prec(), self.x.T)
        l = cholesky(cov_y)
        z = np.linalg.solve(l, self.y - self.x @ prior.mu0)
        return float(-0.5 * n * LOG_2PI - np.sum(np.log(np.diag(l))) - 0.5 * z @ z)

    def lower_bound(self, state: VariationalState, prior: PriorSpec) -> float:
        """Exact ``E_q[log p(theta) + log p(y|theta) - log q(theta)]``."""
        mu, cov = state.mu, state.dense_cov()
        n, k = self.y.shape[0], self.k
        resid = self.y - self.x @ mu
        ell = -0.5 * n * (LOG_2PI + 2.0 * np.log(self.noise_sd)) - 0.5 * self._noise_prec * (
            resid @ resid + np.sum(self._xtx * cov)
        )
        p0 = prior.dense_prec()
        dm = mu - prior.mu0
        elp = -0.5 * k * LOG_2PI + 0.5 * prior._logdet - 0.5 * (dm @ p0 @ dm + np.sum(p0 * cov))
        logdet_cov = -2.0 * np.sum(np.log(np.diag(cholesky(state.dense_prec()))))
        entropy = 0.5 * k * (1.0 + LOG_2PI) + 0.5 * logdet_cov
        return float(ell + elp + entropy)

    def lower_bound_grads(self, state: VariationalState, prior: PriorSpec) -> tuple:
        """Euclidean gradients of :meth:`lower_bound` w.r.t. ``mu`` and ``Sigma``."""
        g_mu = self._noise_prec * (self._xty - self._xtx @ state.mu) - prior.prec_times(state.mu - prior.mu0)
        g_sigma = -0.5 * (self._noise_prec * self._xtx + prior.dense_prec() - state.dense_prec())
        return g_mu, symmetrize(g_sigma)
