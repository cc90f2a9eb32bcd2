"""Maps from unconstrained variational coordinates to model parameters."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import expit, logit
from scipy.stats import gaussian_kde

from ..gaussian import log_pdf

__all__ = [
    "sigmoid_transform",
    "inverse_sigmoid",
    "ParamTransform",
    "CoordinatewiseTransform",
    "IDENTITY",
    "EXP",
    "SIGMOID",
    "garch_constraint_map",
    "back_transform_density",
]


def sigmoid_transform(psi):
    """Logistic map ``exp(x) / (1 + exp(x))``, saturating without overflow."""
    return expit(psi)


def inverse_sigmoid(theta):
    return logit(theta)


def garch_constraint_map(psi) -> tuple:
    """``(psi_w, psi_a, psi_b) -> (omega, alpha, beta)`` with ``alpha + beta < 1``."""
    psi = np.asarray(psi, dtype=float)
    tw, ta, tb = expit(psi[..., 0]), expit(psi[..., 1]), expit(psi[..., 2])
    return tw, ta * (1.0 - tb), ta * tb


class ParamTransform:
    """Bijection ``T`` from R^k onto the model's parameter support.

    Subclasses implement :meth:`forward` and :meth:`inverse` on vectors or
    row batches.  ``coordinatewise`` transforms also provide the log
    Jacobian of the inverse, which gives exact back-transformed densities.
    """

    coordinatewise = False

    def __init__(self, names: Sequence[str]):
        self.names = tuple(names)

    @property
    def k(self) -> int:
        return len(self.names)

    def forward(self, psi):
        raise NotImplementedError

    def inverse(self, theta):
        raise NotImplementedError

    def log_abs_det_jac_inverse(self, theta):
        raise NotImplementedError(f"{type(self).__name__} has no closed-form Jacobian")

    def in_support(self, theta) -> np.ndarray:
        return np.all(np.isfinite(self.inverse(theta)), axis=-1)


class _ScalarMap:
    def __init__(self, name, fwd, inv, log_dinv, support):
        self.name, self.fwd, self.inv, self.log_dinv, self.support = name, fwd, inv, log_dinv, support


def _sigmoid_map(lo: float = 0.0, hi: float = 1.0) -> _ScalarMap:
    width = hi - lo

    def inv(x):
        return logit((x - lo) / width)

    def log_dinv(x):
        u = (x - lo) / width
        return -np.log(u) - np.log1p(-u) - np.log(width)

    return _ScalarMap(
        "sigmoid" if (lo, hi) == (0.0, 1.0) else f"sigmoid[{lo},{hi}]",
        lambda p: lo + width * expit(p),
        inv,
        log_dinv,
        (lo, hi),
    )


IDENTITY = _ScalarMap("identity", lambda p: p, lambda x: x, lambda x: np.zeros_like(x), (-np.inf, np.inf))
EXP = _ScalarMap("exp", np.exp, np.log, lambda x: -np.log(x), (0.0, np.inf))
SIGMOID = _sigmoid_map()


class CoordinatewiseTransform(ParamTransform):
    """Independent scalar maps, one per coordinate."""

    coordinatewise = True

    def __init__(self, maps: Sequence[_ScalarMap], names: Sequence[str] | None = None):
        names = names or [f"theta{i}" for i in range(len(maps))]
        super().__init__(names)
        if len(maps) != len(self.names):
            raise ValueError("one map per parameter")
        self.maps = tuple(maps)

    @classmethod
    def identity(cls, k: int, names=None) -> "CoordinatewiseTransform":
        return cls([IDENTITY] * k, names)

    @classmethod
    def sigmoid(cls, lo: float = 0.0, hi: float = 1.0) -> _ScalarMap:
        return _sigmoid_map(lo, hi)

    def _apply(self, x, attr):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for i, m in enumerate(self.maps):
            out[..., i] = getattr(m, attr)(x[..., i])
        return out

    def forward(self, psi):
        return self._apply(psi, "fwd")

    def inverse(self, theta):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._apply(theta, "inv")

    def log_abs_det_jac_inverse(self, theta):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.sum(self._apply(theta, "log_dinv"), axis=-1)

    def in_support(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        ok = np.ones(theta.shape[:-1], dtype=bool)
        for i, m in enumerate(self.maps):
            lo, hi = m.support
            ok &= (theta[..., i] > lo) & (theta[..., i] < hi)
        return ok


def back_transform_density(state, transform: ParamTransform, points, param: int | None = None,
                           n_draws: int = 20000, seed: int = 0):
    """Density of ``theta = T(psi)`` when ``psi ~ q``.

    With ``param=None`` the joint density is evaluated at the rows of
    ``points`` (coordinatewise transforms only).  With ``param=i`` the
    marginal density of ``theta_i`` is evaluated on the 1-D grid ``points``:
    exactly for coordinatewise maps, by a Gaussian KDE of transformed draws
    otherwise.  Points outside the support raise ``ValueError``.
    """
    points = np.asarray(points, dtype=float)
    if param is None:
        if not transform.coordinatewise:
            raise ValueError("joint densities need a coordinatewise transform; pass param=")
        if not np.all(transform.in_support(points)):
            raise ValueError("evaluation point outside the parameter support")
        psi = transform.inverse(points)
        return np.exp(log_pdf(state, psi) + transform.log_abs_det_jac_inverse(points))

    if transform.coordinatewise:
        m = transform.maps[param]
        lo, hi = m.support
        if np.any((points <= lo) | (points >= hi)):
            raise ValueError("evaluation point outside the parameter support")
        mu = state.mu[param]
        var = state.dense_cov()[param, param]
        with np.errstate(divide="ignore", invalid="ignore"):
            psi = m.inv(points)
            logq = -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (psi - mu) ** 2 / var
            return np.exp(logq + m.log_dinv(points))

    rng = np.random.default_rng(seed)
    theta = transform.forward(state.sample(n_draws, rng))[:, param]
    return gaussian_kde(theta)(points)
