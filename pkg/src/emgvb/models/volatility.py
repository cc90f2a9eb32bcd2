"""GARCH-family likelihoods and their stationarity-enforcing transforms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import expit, logit

from .. import _kernels
from .likelihoods import ModelSpec
from .transforms import ParamTransform

__all__ = [
    "GarchSpec",
    "GarchTransform",
    "GarchFamily",
    "VarianceError",
    "garch_family_loglik",
    "figarch_variance",
]

LOG_2PI = float(np.log(2.0 * np.pi))


class VarianceError(FloatingPointError):
    """A conditional variance became non-finite or non-positive."""

    def __init__(self, index: int, model: str):
        self.index = int(index)
        super().__init__(f"{model}: invalid conditional variance at t={index}")


@dataclass(frozen=True)
class GarchSpec:
    """Model family and orders.

    ``kind`` is one of ``arch``, ``garch``, ``gjr``, ``egarch`` or
    ``figarch``.  ``o`` switches the asymmetry term on (GJR, EGARCH) and
    ``q`` is the number of lagged variances (0 to 2; FIGARCH uses 1).
    """

    kind: str
    p: int = 1
    o: int = 0
    q: int = 1
    truncation: int = 1000

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in ("arch", "garch", "gjr", "egarch", "figarch"):
            raise ValueError(f"unknown volatility model {self.kind!r}")
        if self.p != 1:
            raise ValueError("only one ARCH lag is supported")
        if kind == "arch" and (self.o, self.q) != (0, 0):
            object.__setattr__(self, "o", 0)
            object.__setattr__(self, "q", 0)
        if kind == "garch" and self.o != 0:
            raise ValueError("use kind='gjr' for an asymmetric term")
        if kind == "gjr":
            object.__setattr__(self, "o", 1)
        if kind == "figarch" and (self.o, self.q) != (0, 1):
            raise ValueError("FIGARCH is supported as FIGARCH(1, d, 1)")
        if not 0 <= self.q <= 2 or self.o not in (0, 1):
            raise ValueError("orders out of range")
        if kind in ("garch", "gjr") and self.q == 0:
            raise ValueError("GARCH needs q >= 1; use kind='arch'")
        if self.truncation < 1:
            raise ValueError("truncation must be positive")

    @property
    def names(self) -> tuple:
        if self.kind == "figarch":
            return ("omega", "phi", "d", "beta")
        out = ["omega", "alpha"]
        if self.o:
            out.append("gamma")
        out += [f"beta{i + 1}" if self.q > 1 else "beta" for i in range(self.q)]
        return tuple(out)


class GarchTransform(ParamTransform):
    """Joint map from R^k onto a stationary region of the model.

    GARCH/GJR: a total persistence ``s = T(psi_alpha)`` is split between
    the lagged-variance and the news terms, so ``alpha + gamma/2 + sum(beta)
    = s < 1``.  EGARCH: intercept and news coefficients are unconstrained,
    persistence is mapped into the stationary triangle through partial
    autocorrelations.  FIGARCH: ``d = T``, ``phi <= (1-d)/2`` and
    ``beta <= d + phi``.
    """

    def __init__(self, spec: GarchSpec):
        super().__init__(spec.names)
        self.spec = spec

    def _unpack(self, x):
        x = np.asarray(x, dtype=float)
        return x, x.ndim == 1, np.atleast_2d(x)

    def forward(self, psi):
        psi, single, a = self._unpack(psi)
        sp = self.spec
        out = np.empty_like(a)
        if sp.kind == "figarch":
            d = expit(a[:, 2])
            phi = expit(a[:, 1]) * (1.0 - d) / 2.0
            out[:, 0] = np.exp(a[:, 0])
            out[:, 1] = phi
            out[:, 2] = d
            out[:, 3] = expit(a[:, 3]) * (d + phi)
        elif sp.kind == "egarch":
            out[:, : 2 + sp.o] = a[:, : 2 + sp.o]
            j = 2 + sp.o
            if sp.q == 1:
                out[:, j] = 2.0 * expit(a[:, j]) - 1.0
            elif sp.q == 2:
                r1 = 2.0 * expit(a[:, j]) - 1.0
                r2 = 2.0 * expit(a[:, j + 1]) - 1.0
                out[:, j] = r1 * (1.0 - r2)
                out[:, j + 1] = r2
        else:
            out[:, 0] = expit(a[:, 0])
            s = expit(a[:, 1])
            if sp.q == 0:
                out[:, 1] = s
            else:
                j = 2 + sp.o
                tb = expit(a[:, j])
                btot = s * tb
                rem = s * (1.0 - tb)
                if sp.o:
                    tg = expit(a[:, 2])
                    out[:, 1] = rem * (1.0 - tg)
                    out[:, 2] = 2.0 * rem * tg
                else:
                    out[:, 1] = rem
                if sp.q == 1:
                    out[:, j] = btot
                else:
                    t2 = expit(a[:, j + 1])
                    out[:, j] = btot * t2
                    out[:, j + 1] = btot * (1.0 - t2)
        return out[0] if single else out

    def inverse(self, theta):
        theta, single, a = self._unpack(theta)
        sp = self.spec
        out = np.empty_like(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            if sp.kind == "figarch":
                om, phi, d, beta = a.T
                out[:, 0] = np.log(om)
                out[:, 1] = logit(2.0 * phi / (1.0 - d))
                out[:, 2] = logit(d)
                out[:, 3] = logit(beta / (d + phi))
            elif sp.kind == "egarch":
                out[:, : 2 + sp.o] = a[:, : 2 + sp.o]
                j = 2 + sp.o
                if sp.q == 1:
                    out[:, j] = logit((a[:, j] + 1.0) / 2.0)
                elif sp.q == 2:
                    r2 = a[:, j + 1]
                    r1 = a[:, j] / (1.0 - r2)
                    out[:, j] = logit((r1 + 1.0) / 2.0)
                    out[:, j + 1] = logit((r2 + 1.0) / 2.0)
            else:
                out[:, 0] = logit(a[:, 0])
                if sp.q == 0:
                    out[:, 1] = logit(a[:, 1])
                else:
                    j = 2 + sp.o
                    btot = np.sum(a[:, j : j + sp.q], axis=1)
                    rem = a[:, 1] + (a[:, 2] / 2.0 if sp.o else 0.0)
                    s = btot + rem
                    out[:, 1] = logit(s)
                    out[:, j] = logit(btot / s)
                    if sp.o:
                        out[:, 2] = logit(a[:, 2] / (2.0 * rem))
                    if sp.q == 2:
                        out[:, j + 1] = logit(a[:, j] / btot)
        return out[0] if single else out


def figarch_variance(omega, phi, d, beta, resids, backcast, truncation=1000) -> np.ndarray:
    """Truncated ARCH(inf) variance path of FIGARCH(1, d, 1), one row per draw.

    ``sigma2_t = omega / (1 - beta) + sum_i lam_i r_{t-1-i}^2`` with pre-sample
    squared residuals set to ``backcast``.
    """
    omega, phi, d, beta = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (omega, phi, d, beta))
    r2 = np.asarray(resids, dtype=float) ** 2
    m = int(truncation)
    lam = _kernels.figarch_weights(np.ascontiguousarray(phi), np.ascontiguousarray(d), np.ascontiguousarray(beta), m)
    x = np.concatenate([np.full(m, backcast), r2])[None, :]
    conv = fftconvolve(lam, x, axes=1)
    n = r2.shape[0]
    return (omega / (1.0 - beta))[:, None] + conv[:, m - 1 : m - 1 + n]


class GarchFamily(ModelSpec):
    """Zero-mean Gaussian returns with a GARCH-type conditional variance.

    The recursion starts from ``backcast``, by default the sample variance
    of ``returns``.
    """

    def __init__(self, spec: GarchSpec, returns, backcast: float | None = None):
        self.spec = spec
        r = np.ascontiguousarray(np.asarray(returns, dtype=float).ravel())
        if r.shape[0] < 2:
            raise ValueError("need at least two returns")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns contain non-finite values")
        r.setflags(write=False)
        self.returns = r
        self.backcast = float(np.var(r)) if backcast is None else float(backcast)
        if not self.backcast > 0:
            raise ValueError("backcast must be positive")
        self.transform = GarchTransform(spec)
        self.name = spec.kind

    def variance_batch(self, thetas) -> np.ndarray:
        """Conditional variances (S x n) at constrained parameters ``thetas``."""
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        sp = self.spec
        n = self.returns.shape[0]
        if sp.kind == "figarch":
            sigma2 = figarch_variance(th[:, 0], th[:, 1], th[:, 2], th[:, 3], self.returns, self.backcast, sp.truncation)
            bad = _first_bad(sigma2)
        else:
            s = th.shape[0]
            omega = np.ascontiguousarray(th[:, 0])
            alpha = np.ascontiguousarray(th[:, 1])
            gamma = np.ascontiguousarray(th[:, 2]) if sp.o else np.zeros(s)
            beta = np.ascontiguousarray(th[:, 2 + sp.o : 2 + sp.o + sp.q]).reshape(s, sp.q)
            sigma2 = np.empty((s, n))
            kern = _kernels.egarch_recursion if sp.kind == "egarch" else _kernels.gjr_recursion
            with np.errstate(over="ignore", invalid="ignore"):
                bad = kern(omega, alpha, gamma, beta, self.returns, self.backcast, sigma2)
        if bad >= 0:
            raise VarianceError(bad, sp.kind)
        return sigma2

    def loglik_batch(self, psis) -> np.ndarray:
        thetas = self.transform.forward(self._check_batch(psis))
        sigma2 = self.variance_batch(thetas)
        return _kernels.gaussian_loglik_rows(self.returns, sigma2)

    def fitted(self, psi) -> np.ndarray:
        return self.variance_batch(self.transform.forward(np.asarray(psi, dtype=float)))[0]

    def with_returns(self, returns, backcast: float | None = None) -> "GarchFamily":
        return GarchFamily(self.spec, returns, backcast)


def _first_bad(sigma2) -> int:
    ok = np.isfinite(sigma2) & (sigma2 > 0)
    if ok.all():
        return -1
    return int(np.flatnonzero(~ok.all(axis=0))[0])


def garch_family_loglik(spec: GarchSpec, psi, returns) -> float:
    return GarchFamily(spec, returns).loglik(psi)
