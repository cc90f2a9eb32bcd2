"""Dense SPD linear algebra: factorizations, retraction and vector transport.

All routines operate on small dense ``float64`` matrices and are pure
functions of their inputs.  The factorizations go through LAPACK
(``dpotrf``/``dtrtri``) so that a failing pivot can be reported.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack, solve_triangular

__all__ = [
    "NotPositiveDefinite",
    "SingularMatrix",
    "RetractionFailed",
    "ComplexRoot",
    "symmetrize",
    "cholesky",
    "tri_inverse",
    "spd_inverse",
    "spd_sqrt",
    "spd_sqrt_product",
    "retract",
    "transport",
    "sample_gaussian",
]

PIVOT_RTOL = 1e-12


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive.

    ``pivot`` is the zero-based index of the first failing pivot.
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class SingularMatrix(np.linalg.LinAlgError):
    pass


class RetractionFailed(NotPositiveDefinite):
    """The retracted point left the SPD cone (step too large)."""


class ComplexRoot(ArithmeticError):
    """The square root in the vector transport would be complex."""


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def symmetrize(m) -> np.ndarray:
    """Return ``(M + M^T) / 2``."""
    m = _as_square(m)
    return 0.5 * (m + m.T)


def cholesky(a) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``L @ L.T == a``.

    A pivot is accepted only if ``L[j, j]**2 > 1e-12 * max(diag(a))``.
    """
    a = _as_square(a)
    if a.shape[0] == 0:
        return a.copy()
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    pivots = np.diag(c) ** 2
    floor = PIVOT_RTOL * np.max(np.abs(np.diag(a)))
    bad = np.flatnonzero(~(pivots > floor))
    if bad.size:
        raise NotPositiveDefinite(bad[0])
    return c


def tri_inverse(l) -> np.ndarray:
    """Inverse of a lower-triangular matrix by back-substitution."""
    l = _as_square(l)
    if l.shape[0] == 0:
        return l.copy()
    if np.any(np.diag(l) == 0):
        raise SingularMatrix(f"zero on diagonal at {int(np.flatnonzero(np.diag(l) == 0)[0])}")
    inv, info = lapack.dtrtri(l, lower=1)
    if info > 0:
        raise SingularMatrix(f"zero on diagonal at {info - 1}")
    return np.tril(inv)


def spd_inverse(prec) -> tuple[np.ndarray, np.ndarray]:
    """Invert an SPD matrix through its Cholesky factor.

    Returns ``(inv, L)`` where ``L`` is the lower factor of ``prec`` and
    ``inv = L^{-T} L^{-1}``.
    """
    l = cholesky(prec)
    linv = tri_inverse(l)
    inv = linv.T @ linv
    return symmetrize(inv), l


def spd_sqrt(a) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via ``eigh``."""
    w, v = np.linalg.eigh(symmetrize(a))
    if np.any(w < 0):
        raise ComplexRoot(f"negative eigenvalue {w.min():.3e}")
    return (v * np.sqrt(w)) @ v.T


def spd_sqrt_product(b, a) -> np.ndarray:
    """Square root ``E`` of the product ``B @ A`` of two SPD matrices.

    Uses ``E = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{1/2}``, which only needs
    square roots of symmetric matrices.
    """
    a = _as_square(a)
    b = _as_square(b)
    wa, va = np.linalg.eigh(symmetrize(a))
    if np.any(wa <= 0):
        raise ComplexRoot(f"non-positive eigenvalue {wa.min():.3e} in right factor")
    sa = np.sqrt(wa)
    a_half = (va * sa) @ va.T
    a_mhalf = (va / sa) @ va.T
    inner = symmetrize(a_half @ b @ a_half)
    wi, vi = np.linalg.eigh(inner)
    if np.any(wi <= 0):
        raise ComplexRoot(f"non-positive eigenvalue {wi.min():.3e} in transport root")
    inner_half = (vi * np.sqrt(wi)) @ vi.T
    return a_mhalf @ inner_half @ a_half


def retract(prec, cov, xi, check: bool = False) -> np.ndarray:
    """Second-order SPD retraction ``prec + xi + xi @ cov @ xi / 2``.

    ``cov`` must be the inverse of ``prec``; it is only verified when
    ``check`` is set.  Raises :class:`RetractionFailed` when the result is
    not positive definite.
    """
    prec = _as_square(prec)
    cov = _as_square(cov)
    xi = _as_square(xi)
    if check:
        err = np.linalg.norm(prec @ cov - np.eye(prec.shape[0]))
        if err > 1e-8:
            raise ValueError(f"cov is not the inverse of prec (residual {err:.2e})")
    out = symmetrize(prec + xi + 0.5 * xi @ cov @ xi)
    if not np.all(np.isfinite(out)):
        raise RetractionFailed(0, "retraction produced non-finite entries")
    try:
        cholesky(out)
    except NotPositiveDefinite as exc:
        raise RetractionFailed(exc.pivot, "retracted matrix is not positive definite") from None
    return out


def transport(prec_old, cov_old, prec_new, xi) -> np.ndarray:
    """Carry ``xi`` from the tangent space at ``prec_old`` to ``prec_new``."""
    e = spd_sqrt_product(prec_new, cov_old)
    return symmetrize(e @ _as_square(xi) @ e.T)


def sample_gaussian(mu, lprec, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``theta = mu + L^{-T} eps`` where ``L`` factors the precision."""
    mu = np.asarray(mu, dtype=float)
    lprec = _as_square(lprec)
    if lprec.shape[0] != mu.shape[0]:
        raise ValueError("dimension mismatch between mean and precision factor")
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    eps = rng.standard_normal((n_draws, mu.shape[0]))
    return mu + solve_triangular(lprec, eps.T, lower=True, trans="T").T
