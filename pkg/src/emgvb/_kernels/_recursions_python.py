"""
Pure Python versions of the conditional-variance recursions.

Used when the compiled extension is unavailable or disabled with
``EMGVB_NO_BINARY=1``.  Each kernel loops over time and vectorizes over
the batch of parameter draws, so the signatures and outputs match the
Cython module exactly.
"""
import numpy as np

__all__ = ["gjr_recursion", "egarch_recursion", "figarch_weights", "gaussian_loglik_rows"]

LOG_2PI = 1.8378770664093453
SQRT2_OV_PI = 0.79788456080286541  # E|z|, z ~ N(0, 1)


def gjr_recursion(omega, alpha, gamma, beta, resids, backcast, sigma2):
    """Fill ``sigma2`` (S x n) with the GJR-GARCH variance path.

    ``beta`` is S x q with q in {0, 1, 2}.  Returns the index of the first
    non-finite or non-positive variance, or -1.
    """
    n = resids.shape[0]
    q = beta.shape[1]
    sigma2[:, 0] = backcast
    rsq = resids * resids
    neg = (resids < 0).astype(float)
    for t in range(1, n):
        s = omega + (alpha + gamma * neg[t - 1]) * rsq[t - 1]
        if q >= 1:
            s = s + beta[:, 0] * sigma2[:, t - 1]
        if q >= 2:
            s = s + beta[:, 1] * (sigma2[:, t - 2] if t >= 2 else backcast)
        sigma2[:, t] = s
    return _first_bad(sigma2)


def egarch_recursion(omega, alpha, gamma, beta, resids, backcast, sigma2):
    """Fill ``sigma2`` (S x n) with the EGARCH (Nelson) variance path."""
    n = resids.shape[0]
    q = beta.shape[1]
    lnb = np.log(backcast)
    lnsig = np.empty_like(sigma2)
    lnsig[:, 0] = lnb
    for t in range(1, n):
        z = resids[t - 1] * np.exp(-0.5 * lnsig[:, t - 1])
        s = omega + alpha * (np.abs(z) - SQRT2_OV_PI) + gamma * z
        if q >= 1:
            s = s + beta[:, 0] * lnsig[:, t - 1]
        if q >= 2:
            s = s + beta[:, 1] * (lnsig[:, t - 2] if t >= 2 else lnb)
        lnsig[:, t] = s
    with np.errstate(over="ignore"):
        np.exp(lnsig, out=sigma2)
    return _first_bad(sigma2)


def figarch_weights(phi, d, beta, truncation):
    """ARCH(inf) weights of FIGARCH(1, d, 1), one row per draw (S x m)."""
    m = int(truncation)
    lam = np.empty((phi.shape[0], m))
    delta = d.copy()
    lam[:, 0] = phi - beta + d
    for i in range(1, m):
        delta_new = (i - d) / (i + 1) * delta
        lam[:, i] = beta * lam[:, i - 1] + delta_new - phi * delta
        delta = delta_new
    return lam


def gaussian_loglik_rows(resids, sigma2):
    """Row sums of ``-(log 2pi + log s2 + r^2 / s2) / 2``."""
    rsq = resids * resids
    return -0.5 * np.sum(LOG_2PI + np.log(sigma2) + rsq / sigma2, axis=1)


def _first_bad(sigma2):
    ok = np.isfinite(sigma2) & (sigma2 > 0)
    if ok.all():
        return -1
    cols = np.flatnonzero(~ok.all(axis=0))
    return int(cols[0])
