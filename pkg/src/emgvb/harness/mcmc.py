"""Random-walk Metropolis, used as a reference posterior sampler."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..models.priors import PriorSpec, prior_logpdf

__all__ = ["MCMCResult", "metropolis_sample", "effective_sample_size"]


@dataclass(frozen=True)
class MCMCResult:
    chain: np.ndarray
    acceptance_rate: float
    step_sd: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.chain.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.chain.std(axis=0, ddof=1)

    def ess(self) -> np.ndarray:
        return np.array([effective_sample_size(c) for c in self.chain.T])


def _log_target(model, prior, psi):
    lp = prior_logpdf(prior, psi)
    try:
        ll = model.loglik(psi)
    except FloatingPointError:
        return -np.inf
    return lp + ll if np.isfinite(ll) else -np.inf


def _chain(model, prior, x0, n, step_sd, rng):
    k = x0.shape[0]
    out = np.empty((n, k))
    x, lx = x0.copy(), _log_target(model, prior, x0)
    if not np.isfinite(lx):
        raise ValueError("initial point has zero posterior density")
    acc = 0
    noise = rng.standard_normal((n, k)) * step_sd
    logu = np.log(rng.uniform(size=n))
    for i in range(n):
        y = x + noise[i]
        ly = _log_target(model, prior, y)
        if logu[i] < ly - lx:
            x, lx = y, ly
            acc += 1
        out[i] = x
    return out, acc / n


def metropolis_sample(model, prior: PriorSpec, init, n_samples: int, step_scale: float | None = None,
                      seed: int = 0, pilot: int = 2000, burn_fraction: float = 0.2) -> MCMCResult:
    """Gaussian random-walk Metropolis on the unconstrained parameters.

    Proposal sd is ``step_scale`` times a per-coordinate scale taken from a
    pilot chain; ``step_scale`` defaults to ``2.38 / sqrt(k)``.  The first
    ``burn_fraction`` of the main chain is dropped.
    """
    rng = np.random.default_rng(seed)
    x0 = np.asarray(init, dtype=float).ravel().copy()
    k = x0.shape[0]
    if step_scale is None:
        step_scale = 2.38 / np.sqrt(k)
    if not step_scale > 0:
        raise ValueError("step_scale must be positive")
    scale = np.full(k, 0.1)
    if pilot > 0:
        # coarse tuning, then per-coordinate sd of a pilot run
        for _ in range(10):
            chain, acc = _chain(model, prior, x0, max(pilot // 10, 50), scale * step_scale, rng)
            x0 = chain[-1]
            if 0.15 <= acc <= 0.5:
                break
            scale *= 2.0 if acc > 0.5 else 0.5
        chain, _ = _chain(model, prior, x0, pilot, scale * step_scale, rng)
        x0 = chain[-1]
        sd = chain.std(axis=0)
        scale = np.where(sd > 0, sd, scale)
    step_sd = scale * step_scale
    chain, acc = _chain(model, prior, x0, n_samples, step_sd, rng)
    burn = int(burn_fraction * n_samples)
    return MCMCResult(chain[burn:], float(acc), step_sd)


def effective_sample_size(x) -> float:
    """ESS from the initial positive sequence of autocorrelation pairs."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    xc = x - x.mean()
    f = np.fft.rfft(xc, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] <= 0:
        return float(n)
    rho = acf / acf[0]
    s = 0.0
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        s += pair
    tau = max(2.0 * s - 1.0, 1.0)
    return float(n / tau)
