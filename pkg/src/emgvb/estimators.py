"""Score-function estimators of the lower bound and its natural gradients.

Two payoffs are supported.  ``h_function`` weights the score of ``q`` by
``log p(theta) + log p(y|theta) - log q(theta)``.  ``gaussian_prior_loglik``
weights it by the log-likelihood only and adds the prior and entropy terms
in closed form, which lowers the variance when the prior is Gaussian.

Gradients are first assembled in euclidean form (w.r.t. ``mu`` and each
covariance block), optionally with control variates and clipping, and then
converted to natural gradients for the mean and the precision.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .gaussian import NaturalGradientPair, VariationalState, log_pdf
from .models.priors import PriorSpec, prior_logpdf
from .spd import symmetrize

__all__ = [
    "EstimatorKind",
    "DrawBatch",
    "NonFiniteLikelihood",
    "UnsupportedEstimator",
    "evaluate_draws",
    "h_function",
    "estimate_lb",
    "lb_standard_error",
    "euclidean_grads",
    "to_natural",
    "estimate_natgrads",
    "estimate_natgrads_h",
    "estimate_natgrads_gaussprior",
    "estimate_natgrads_diag",
    "control_variate_coeff",
    "clip_gradient",
]


class EstimatorKind(str, enum.Enum):
    H_FUNCTION = "h_function"
    GAUSSIAN_PRIOR = "gaussian_prior_loglik"


class NonFiniteLikelihood(FloatingPointError):
    def __init__(self, index: int):
        self.index = int(index)
        super().__init__(f"non-finite log-likelihood at draw {index}")


class UnsupportedEstimator(ValueError):
    pass


@dataclass(frozen=True)
class DrawBatch:
    """Draws from ``q`` with their per-draw log-likelihood and h-values."""

    thetas: np.ndarray
    loglik: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        if self.thetas.ndim != 2 or self.thetas.shape[0] < 1:
            raise ValueError("a batch needs at least one draw")
        if self.loglik.shape != (self.S,) or self.h.shape != (self.S,):
            raise ValueError("per-draw values do not match the number of draws")

    @property
    def S(self) -> int:
        return self.thetas.shape[0]

    def logf(self, kind: EstimatorKind) -> np.ndarray:
        return self.h if EstimatorKind(kind) is EstimatorKind.H_FUNCTION else self.loglik

    @classmethod
    def from_values(cls, thetas, logf) -> "DrawBatch":
        """Batch whose h-values and log-likelihoods are both ``logf``."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        logf = np.asarray(logf, dtype=float).ravel()
        return cls(thetas, logf, logf)


def evaluate_draws(model, prior: PriorSpec, state: VariationalState, thetas) -> DrawBatch:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    ll = np.asarray(model.loglik_batch(thetas), dtype=float)
    bad = np.flatnonzero(~np.isfinite(ll))
    if bad.size:
        raise NonFiniteLikelihood(int(bad[0]))
    h = prior_logpdf(prior, thetas) + ll - log_pdf(state, thetas)
    return DrawBatch(thetas, ll, h)


def h_function(model, prior: PriorSpec, state: VariationalState, theta) -> float:
    """``log p(theta) + log p(y|theta) - log q(theta)`` at a single point."""
    theta = np.asarray(theta, dtype=float)
    return float(prior_logpdf(prior, theta) + model.loglik(theta) - log_pdf(state, theta))


def estimate_lb(batch) -> float:
    """Monte Carlo lower bound: the mean h-value of the batch."""
    h = batch.h if isinstance(batch, DrawBatch) else np.asarray(batch, dtype=float)
    if h.size == 0:
        raise ValueError("empty batch")
    return float(np.mean(h))


def lb_standard_error(batch: DrawBatch) -> float:
    if batch.S < 2:
        return float("nan")
    return float(np.std(batch.h, ddof=1) / np.sqrt(batch.S))


def control_variate_coeff(per_draw_grads, per_draw_weighted) -> np.ndarray:
    """Per-coordinate ``Cov(g * f, g) / Var(g)``; zero where ``Var(g) = 0``.

    Both inputs are ``S x k``; rows are draws.
    """
    g = np.asarray(per_draw_grads, dtype=float)
    gf = np.asarray(per_draw_weighted, dtype=float)
    if g.shape != gf.shape or g.ndim != 2:
        raise ValueError("inputs must be S x k arrays of equal shape")
    if g.shape[0] < 2:
        raise ValueError("control variates need at least two draws")
    gc = g - g.mean(axis=0)
    cov = np.mean((gf - gf.mean(axis=0)) * gc, axis=0)
    var = np.mean(gc * gc, axis=0)
    out = np.zeros_like(var)
    nz = var > 0
    out[nz] = cov[nz] / var[nz]
    return out


def clip_gradient(g, l_max: float):
    """Rescale ``g`` to norm ``l_max`` when its (Frobenius) norm exceeds it."""
    if not l_max > 0:
        raise ValueError("l_max must be positive")
    g = np.asarray(g, dtype=float)
    nrm = float(np.linalg.norm(g))
    return g * (l_max / nrm) if nrm > l_max else g


def _clip_parts(parts, l_max):
    """Clip a gradient split in blocks by their joint norm; returns ``(parts, clipped)``."""
    if isinstance(parts, tuple):
        nrm = float(np.sqrt(sum(np.sum(p * p) for p in parts)))
        if nrm > l_max:
            return tuple(p * (l_max / nrm) for p in parts), True
        return parts, False
    nrm = float(np.linalg.norm(parts))
    if nrm > l_max:
        return parts * (l_max / nrm), True
    return parts, False


def _score_term(score, f, cv: bool):
    """Mean over draws of ``score * f``; ``score`` is ``S x ...``."""
    s = score.shape[0]
    flat = score.reshape(s, -1)
    if cv and s >= 2:
        c = control_variate_coeff(flat, flat * f[:, None])
        out = np.mean(flat * (f[:, None] - c), axis=0)
    else:
        out = f @ flat / s
    return out.reshape(score.shape[1:])


def euclidean_grads(state: VariationalState, batch: DrawBatch, kind=EstimatorKind.H_FUNCTION,
                    prior: PriorSpec | None = None, control_variates: bool = False):
    """Euclidean LB gradients w.r.t. ``mu`` and the covariance.

    Returns ``(grad_mu, grad_sigma)`` where ``grad_sigma`` is a tuple of
    per-block matrices, or a vector for a diagonal structure.
    """
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.GAUSSIAN_PRIOR and not isinstance(prior, PriorSpec):
        raise UnsupportedEstimator("the gaussian_prior_loglik estimator needs a Gaussian prior")
    f = batch.logf(kind)
    x = batch.thetas - state.mu
    if x.shape[1] != state.dim:
        raise ValueError("draws do not match the state dimension")
    if kind is EstimatorKind.GAUSSIAN_PRIOR:
        c_mu = -prior.prec_times(state.mu - prior.mu0)

    if state.structure.is_diagonal:
        p = state.prec
        z = x * p
        g_mu = _score_term(z, f, control_variates)
        g_sig = _score_term(-0.5 * (p - z * z), f, control_variates)
        if kind is EstimatorKind.GAUSSIAN_PRIOR:
            g_mu = g_mu + c_mu
            g_sig = g_sig + 0.5 * (p - prior.prec_diag())
        return g_mu, g_sig

    g_mu = np.empty(state.dim)
    g_sig = []
    p0 = prior.dense_prec() if kind is EstimatorKind.GAUSSIAN_PRIOR else None
    for sl, p in zip(state.structure.slices(), state.prec):
        z = x[:, sl] @ p
        if control_variates:
            g_mu[sl] = _score_term(z, f, True)
            outer = z[:, :, None] * z[:, None, :]
            gs = _score_term(-0.5 * (p[None] - outer), f, True)
        else:
            s = f.shape[0]
            g_mu[sl] = f @ z / s
            gs = -0.5 * (p * (np.sum(f) / s) - (z * f[:, None]).T @ z / s)
        if p0 is not None:
            gs = gs + 0.5 * (p - p0[sl, sl])
        g_sig.append(symmetrize(gs))
    if kind is EstimatorKind.GAUSSIAN_PRIOR:
        g_mu = g_mu + c_mu
    return g_mu, tuple(g_sig)


def to_natural(state: VariationalState, grad_mu, grad_sigma) -> NaturalGradientPair:
    """Natural gradients ``(Sigma grad_mu, -2 grad_Sigma)`` per block."""
    if state.structure.is_diagonal:
        return NaturalGradientPair(state.cov * grad_mu, -2.0 * grad_sigma)
    g_mu = np.empty(state.dim)
    for sl, c in zip(state.structure.slices(), state.cov):
        g_mu[sl] = c @ grad_mu[sl]
    return NaturalGradientPair(g_mu, tuple(-2.0 * g for g in grad_sigma))


def estimate_natgrads(state: VariationalState, batch: DrawBatch, kind=EstimatorKind.H_FUNCTION,
                      prior: PriorSpec | None = None, control_variates: bool = False,
                      l_max: float | None = None):
    """Natural gradient estimate and a flag telling whether clipping fired."""
    g_mu, g_sig = euclidean_grads(state, batch, kind, prior, control_variates)
    clipped = False
    if l_max is not None:
        g_mu, c1 = _clip_parts(g_mu, l_max)
        g_sig, c2 = _clip_parts(g_sig, l_max)
        clipped = c1 or c2
    return to_natural(state, g_mu, g_sig), clipped


def estimate_natgrads_h(state: VariationalState, batch: DrawBatch) -> NaturalGradientPair:
    return estimate_natgrads(state, batch, EstimatorKind.H_FUNCTION)[0]


def estimate_natgrads_gaussprior(state: VariationalState, prior: PriorSpec, batch: DrawBatch) -> NaturalGradientPair:
    return estimate_natgrads(state, batch, EstimatorKind.GAUSSIAN_PRIOR, prior)[0]


def estimate_natgrads_diag(state: VariationalState, prior: PriorSpec, batch: DrawBatch) -> NaturalGradientPair:
    """Diagonal-posterior estimator; ``g_prec`` is a vector."""
    if not state.structure.is_diagonal:
        raise ValueError("state does not have a diagonal structure")
    return estimate_natgrads(state, batch, EstimatorKind.GAUSSIAN_PRIOR, prior)[0]
