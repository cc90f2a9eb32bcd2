"""Gaussian variational family with full, diagonal or block-diagonal precision."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.linalg import solve_triangular

from .spd import cholesky, spd_inverse, symmetrize

__all__ = [
    "PosteriorStructure",
    "VariationalState",
    "NaturalGradientPair",
    "log_pdf",
    "score_mu",
    "score_sigma",
    "nat_grad_mu",
    "nat_grad_prec",
    "kl_gaussian",
]

LOG_2PI = float(np.log(2.0 * np.pi))

# per-block matrices for full/block structures, a vector for diagonal ones
PrecisionParts = Union[tuple, np.ndarray]


@dataclass(frozen=True)
class PosteriorStructure:
    kind: str
    sizes: tuple

    def __post_init__(self):
        if self.kind not in ("full", "diagonal", "block"):
            raise ValueError(f"unknown structure kind {self.kind!r}")
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive")
        if self.kind == "full" and len(sizes) != 1:
            raise ValueError("full structure has exactly one block")
        if self.kind == "diagonal" and any(s != 1 for s in sizes):
            raise ValueError("diagonal structure has unit blocks")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def full(cls, dim: int) -> "PosteriorStructure":
        return cls("full", (dim,))

    @classmethod
    def diagonal(cls, dim: int) -> "PosteriorStructure":
        return cls("diagonal", (1,) * dim)

    @classmethod
    def block(cls, sizes: Sequence[int]) -> "PosteriorStructure":
        return cls("block", tuple(sizes))

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def is_diagonal(self) -> bool:
        return self.kind == "diagonal"

    def slices(self) -> list:
        out, start = [], 0
        for s in self.sizes:
            out.append(slice(start, start + s))
            start += s
        return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class VariationalState:
    """Mean and precision of a Gaussian ``q``, with cached covariance and factors.

    Instances are immutable; :meth:`replace` builds an updated copy and
    recomputes every cached quantity.
    """

    __slots__ = ("mu", "structure", "prec", "cov", "chol")

    def __init__(self, mu, structure: PosteriorStructure, prec, cov, chol):
        self.mu = mu
        self.structure = structure
        self.prec = prec
        self.cov = cov
        self.chol = chol

    # -- construction -----------------------------------------------------
    @classmethod
    def from_precision(cls, mu, prec, structure: PosteriorStructure | None = None):
        mu = _frozen(np.ravel(mu))
        d = mu.shape[0]
        if structure is None:
            structure = PosteriorStructure.diagonal(d) if np.ndim(prec) == 1 else PosteriorStructure.full(d)
        if structure.dim != d:
            raise ValueError(f"structure dimension {structure.dim} != mean dimension {d}")
        if structure.is_diagonal:
            p = np.asarray(prec, dtype=float)
            p = np.diag(p).copy() if p.ndim == 2 else p.ravel()
            if p.shape != (d,) or not np.all(p > 0) or not np.all(np.isfinite(p)):
                raise ValueError("diagonal precision must be a positive finite vector")
            return cls(mu, structure, _frozen(p), _frozen(1.0 / p), _frozen(np.sqrt(p)))
        blocks = _split_blocks(prec, structure)
        precs, covs, chols = [], [], []
        for b in blocks:
            b = symmetrize(b)
            cov, l = spd_inverse(b)
            precs.append(_frozen(b))
            covs.append(_frozen(cov))
            chols.append(_frozen(l))
        return cls(mu, structure, tuple(precs), tuple(covs), tuple(chols))

    @classmethod
    def from_covariance(cls, mu, cov, structure: PosteriorStructure | None = None):
        mu = np.ravel(mu)
        if structure is None:
            structure = PosteriorStructure.diagonal(mu.shape[0]) if np.ndim(cov) == 1 else PosteriorStructure.full(mu.shape[0])
        if structure.is_diagonal:
            c = np.asarray(cov, dtype=float)
            c = np.diag(c).copy() if c.ndim == 2 else c.ravel()
            return cls.from_precision(mu, 1.0 / c, structure)
        precs = [spd_inverse(symmetrize(b))[0] for b in _split_blocks(cov, structure)]
        return cls.from_precision(mu, precs, structure)

    def replace(self, mu=None, prec=None) -> "VariationalState":
        return type(self).from_precision(
            self.mu if mu is None else mu,
            self.prec if prec is None else prec,
            self.structure,
        )

    # -- views ------------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def dense_prec(self) -> np.ndarray:
        return _to_dense(self.prec, self.structure)

    def dense_cov(self) -> np.ndarray:
        return _to_dense(self.cov, self.structure)

    def draw(self, eps: np.ndarray) -> np.ndarray:
        """Map standard normal draws ``eps`` (S x d) to draws from ``q``."""
        eps = np.atleast_2d(eps)
        if self.structure.is_diagonal:
            return self.mu + eps / self.chol
        out = np.empty_like(eps)
        for sl, l in zip(self.structure.slices(), self.chol):
            # eps @ L^{-1} is the row form of L^{-T} eps
            out[:, sl] = self.mu[sl] + _solve_lower_t(l, eps[:, sl])
        return out

    def sample(self, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        if n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        return self.draw(rng.standard_normal((n_draws, self.dim)))

    def log_pdf(self, theta) -> np.ndarray | float:
        return log_pdf(self, theta)

    def __repr__(self) -> str:
        return f"VariationalState(dim={self.dim}, structure={self.structure.kind}{self.structure.sizes if self.structure.kind == 'block' else ''})"


def _solve_lower_t(l: np.ndarray, rhs_rows: np.ndarray) -> np.ndarray:
    return solve_triangular(l, rhs_rows.T, lower=True, trans="T").T


def _split_blocks(m, structure: PosteriorStructure) -> list:
    if isinstance(m, (list, tuple)):
        if len(m) != len(structure.sizes):
            raise ValueError("number of blocks does not match the structure")
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in m]
        for b, s in zip(blocks, structure.sizes):
            if b.shape != (s, s):
                raise ValueError(f"block of shape {b.shape} where ({s}, {s}) expected")
        return blocks
    m = np.asarray(m, dtype=float)
    d = structure.dim
    if m.shape != (d, d):
        raise ValueError(f"expected a ({d}, {d}) matrix, got {m.shape}")
    return [m[sl, sl] for sl in structure.slices()]


def _to_dense(parts, structure: PosteriorStructure) -> np.ndarray:
    if structure.is_diagonal:
        return np.diag(parts)
    out = np.zeros((structure.dim, structure.dim))
    for sl, b in zip(structure.slices(), parts):
        out[sl, sl] = b
    return out


@dataclass(frozen=True)
class NaturalGradientPair:
    """Natural gradients w.r.t. the mean and the precision.

    ``g_prec`` holds one symmetric matrix per block, or a vector for a
    diagonal structure.  Supports ``+`` and scalar ``*`` for momentum
    bookkeeping.
    """

    g_mu: np.ndarray
    g_prec: PrecisionParts

    def __add__(self, other: "NaturalGradientPair") -> "NaturalGradientPair":
        return NaturalGradientPair(self.g_mu + other.g_mu, _zip_parts(np.add, self.g_prec, other.g_prec))

    def __mul__(self, scalar: float) -> "NaturalGradientPair":
        return NaturalGradientPair(scalar * self.g_mu, _map_parts(lambda p: scalar * p, self.g_prec))

    __rmul__ = __mul__

    @classmethod
    def zeros_like(cls, state: VariationalState) -> "NaturalGradientPair":
        return cls(np.zeros(state.dim), _map_parts(np.zeros_like, state.prec))

    def flat(self) -> np.ndarray:
        if isinstance(self.g_prec, tuple):
            return np.concatenate([self.g_mu] + [p.ravel() for p in self.g_prec])
        return np.concatenate([self.g_mu, np.ravel(self.g_prec)])


def _map_parts(fn, parts):
    if isinstance(parts, tuple):
        return tuple(fn(p) for p in parts)
    return fn(parts)


def _zip_parts(fn, a, b):
    if isinstance(a, tuple):
        return tuple(fn(x, y) for x, y in zip(a, b))
    return fn(a, b)


def log_pdf(state: VariationalState, theta) -> np.ndarray | float:
    """Log density of ``q`` at ``theta`` (a vector or an S x d batch)."""
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    x = np.atleast_2d(theta) - state.mu
    if x.shape[1] != state.dim:
        raise ValueError("dimension mismatch")
    if state.structure.is_diagonal:
        quad = np.sum(x * x * state.prec, axis=1)
        logdet_prec = np.sum(np.log(state.prec))
    else:
        quad = np.zeros(x.shape[0])
        logdet_prec = 0.0
        for sl, l in zip(state.structure.slices(), state.chol):
            z = x[:, sl] @ l
            quad += np.sum(z * z, axis=1)
            logdet_prec += 2.0 * np.sum(np.log(np.diag(l)))
    out = -0.5 * state.dim * LOG_2PI + 0.5 * logdet_prec - 0.5 * quad
    return float(out[0]) if single else out


def score_mu(state: VariationalState, theta) -> np.ndarray:
    """Gradient of ``log q(theta)`` w.r.t. the mean: ``prec @ (theta - mu)``."""
    x = np.asarray(theta, dtype=float) - state.mu
    if state.structure.is_diagonal:
        return x * state.prec
    out = np.empty_like(x)
    for sl, p in zip(state.structure.slices(), state.prec):
        out[..., sl] = x[..., sl] @ p
    return out


def score_sigma(state: VariationalState, theta):
    """Gradient of ``log q(theta)`` w.r.t. the covariance.

    Returns ``-(P - P x x^T P) / 2`` as a dense matrix, or its diagonal as a
    vector when the structure is diagonal.
    """
    z = score_mu(state, np.asarray(theta, dtype=float))
    if state.structure.is_diagonal:
        return -0.5 * (state.prec - z * z)
    out = np.zeros((state.dim, state.dim))
    for sl, p in zip(state.structure.slices(), state.prec):
        zb = z[sl]
        out[sl, sl] = symmetrize(-0.5 * (p - np.outer(zb, zb)))
    return out


def nat_grad_mu(cov, grad_mu) -> np.ndarray:
    """Natural gradient for the mean, ``cov @ grad_mu`` (elementwise if ``cov`` is a vector)."""
    cov = np.asarray(cov, dtype=float)
    grad_mu = np.asarray(grad_mu, dtype=float)
    return cov * grad_mu if cov.ndim == 1 else cov @ grad_mu


def nat_grad_prec(grad_sigma):
    """Natural gradient for the precision, ``-2 * grad_sigma``."""
    g = np.asarray(grad_sigma, dtype=float)
    return -2.0 * (symmetrize(g) if g.ndim == 2 else g)


def kl_gaussian(qa: VariationalState, qb: VariationalState) -> float:
    """``KL(qa || qb)`` between two Gaussians."""
    if qa.dim != qb.dim:
        raise ValueError("dimension mismatch")
    cov_a = qa.dense_cov()
    prec_b = qb.dense_prec()
    dmu = qb.mu - qa.mu
    la = cholesky(qa.dense_prec())
    lb = cholesky(prec_b)
    # log|cov_b| - log|cov_a| = log|prec_a| - log|prec_b|
    logdet = 2.0 * (np.sum(np.log(np.diag(la))) - np.sum(np.log(np.diag(lb))))
    kl = 0.5 * (np.trace(prec_b @ cov_a) + dmu @ prec_b @ dmu - qa.dim + logdet)
    return max(float(kl), 0.0)
