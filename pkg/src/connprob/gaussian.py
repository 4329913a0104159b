"""Planar Gaussian types and the spectral form of a relative displacement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, NotSymmetric

SYM_RTOL = 1e-12


def _as_matrix(cov) -> np.ndarray:
    m = np.asarray(cov, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    return m


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(m))), np.finfo(float).tiny)
    if abs(m[0, 1] - m[1, 0]) > SYM_RTOL * scale:
        raise NotSymmetric(f"asymmetry {abs(m[0, 1] - m[1, 0]):.3e} exceeds tolerance")
    return 0.5 * (m + m.T)


def eig2(cov) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigen-decomposition of a symmetric 2x2 matrix.

    Returns ``(lam, basis)`` with eigenvalues in descending order and the
    matching unit eigenvectors as the columns of ``basis``.
    """
    a, b, c = float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1])
    half_tr = 0.5 * (a + c)
    disc = float(np.hypot(0.5 * (a - c), b))
    lam1 = half_tr + disc
    det = a * c - b * b
    # lam2 via the determinant keeps relative accuracy for nearly singular input
    lam2 = det / lam1 if lam1 > 0.0 else half_tr - disc
    if b == 0.0:
        v1 = np.array([1.0, 0.0]) if a >= c else np.array([0.0, 1.0])
    elif a >= c:
        v1 = np.array([lam1 - c, b])
    else:
        v1 = np.array([b, lam1 - a])
    v1 = v1 / np.hypot(v1[0], v1[1])
    basis = np.array([[v1[0], -v1[1]], [v1[1], v1[0]]])
    return np.array([lam1, lam2]), basis


def validate_spd(cov) -> np.ndarray:
    """Return the symmetrized covariance, or raise if it is not SPD."""
    m = _check_symmetric(_as_matrix(cov))
    lam, _ = eig2(m)
    if not lam[1] > 0.0:
        raise NotPositiveDefinite(f"eigenvalues {lam[0]:.6g}, {lam[1]:.6g}")
    return m


@dataclass(frozen=True)
class Gaussian2:
    """Planar Gaussian marginal.

    The covariance must be symmetric positive semi-definite; a zero block is
    allowed so that exactly known nodes (anchors) fit the same type. Operations
    that need strict definiteness call :func:`validate_spd` themselves.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = _check_symmetric(_as_matrix(self.cov))
        lam, _ = eig2(cov)
        if lam[1] < -1e-12 * max(lam[0], 1.0):
            raise NotPositiveDefinite(f"eigenvalues {lam[0]:.6g}, {lam[1]:.6g}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def spd(cls, mean, cov) -> "Gaussian2":
        return cls(mean, validate_spd(cov))


@dataclass(frozen=True)
class SpectralForm:
    lam: np.ndarray  # descending eigenvalues of the covariance
    basis: np.ndarray  # eigenvectors as columns
    b: np.ndarray  # whitened mean expressed in the eigenbasis

    @property
    def b_sq(self) -> np.ndarray:
        return self.b * self.b


def relative_displacement(a: Gaussian2, b: Gaussian2, cross=None) -> Gaussian2:
    """Distribution of ``a - b`` given their cross-covariance ``E[(a-ma)(b-mb)^T]``."""
    cross = np.zeros((2, 2)) if cross is None else _as_matrix(cross)
    cov = a.cov + b.cov - cross - cross.T
    return Gaussian2.spd(a.mean - b.mean, cov)


def spectral_form(d: Gaussian2) -> SpectralForm:
    lam, basis = eig2(validate_spd(d.cov))
    # P^T Sigma^{-1/2} mu == diag(lam^{-1/2}) P^T mu
    b = (basis.T @ d.mean) / np.sqrt(lam)
    return SpectralForm(lam=lam, basis=basis, b=b)
