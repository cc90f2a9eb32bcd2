from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..spd import cholesky, symmetrize

__all__ = ["PriorSpec", "prior_logpdf"]

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian prior ``N(mu0, prec0^{-1})``.

    Pass either a full precision matrix ``prec0`` or a scalar precision
    ``tau`` (isotropic prior ``prec0 = tau * I``).
    """

    mu0: np.ndarray
    prec0: np.ndarray | None = None
    tau: float | None = None
    _logdet: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        mu0 = np.array(np.ravel(self.mu0), dtype=float)
        object.__setattr__(self, "mu0", mu0)
        if (self.prec0 is None) == (self.tau is None):
            raise ValueError("give exactly one of prec0 or tau")
        if self.tau is not None:
            if not self.tau > 0:
                raise ValueError("tau must be positive")
            object.__setattr__(self, "tau", float(self.tau))
            object.__setattr__(self, "_logdet", mu0.shape[0] * np.log(self.tau))
        else:
            p = symmetrize(np.asarray(self.prec0, dtype=float))
            if p.shape != (mu0.shape[0],) * 2:
                raise ValueError("prec0 shape does not match mu0")
            l = cholesky(p)
            object.__setattr__(self, "prec0", p)
            object.__setattr__(self, "_logdet", 2.0 * float(np.sum(np.log(np.diag(l)))))

    @classmethod
    def isotropic(cls, dim: int, tau: float, mu0=0.0) -> "PriorSpec":
        return cls(np.broadcast_to(np.asarray(mu0, dtype=float), (dim,)), tau=tau)

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]

    @property
    def is_isotropic(self) -> bool:
        return self.tau is not None

    def dense_prec(self) -> np.ndarray:
        if self.is_isotropic:
            return self.tau * np.eye(self.dim)
        return self.prec0

    def prec_diag(self) -> np.ndarray:
        if self.is_isotropic:
            return np.full(self.dim, self.tau)
        return np.diag(self.prec0).copy()

    def prec_times(self, x: np.ndarray) -> np.ndarray:
        if self.is_isotropic:
            return self.tau * x
        return x @ self.prec0 if x.ndim == 2 else self.prec0 @ x

    def logpdf(self, psi) -> np.ndarray | float:
        return prior_logpdf(self, psi)


def prior_logpdf(prior: PriorSpec, psi) -> np.ndarray | float:
    """Log density of the prior at ``psi`` (vector or S x k batch)."""
    psi = np.asarray(psi, dtype=float)
    single = psi.ndim == 1
    x = np.atleast_2d(psi) - prior.mu0
    if x.shape[1] != prior.dim:
        raise ValueError("dimension mismatch")
    if prior.is_isotropic:
        quad = prior.tau * np.sum(x * x, axis=1)
    else:
        quad = np.sum((x @ prior.prec0) * x, axis=1)
    out = -0.5 * prior.dim * LOG_2PI + 0.5 * prior._logdet - 0.5 * quad
    return float(out[0]) if single else out
