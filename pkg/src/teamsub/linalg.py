"""Dense matrix kernels used throughout the package.

Everything here is a pure function of its arguments. Matrices are plain
``numpy.ndarray`` objects of dtype float64; vectors passed where a matrix
is expected are promoted to a single column.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, InvalidCovariance, InvalidMatrix

__all__ = [
    "Tolerance",
    "DEFAULT_TOL",
    "as_matrix",
    "pinv",
    "colspace_contains",
    "solve_minimum_norm",
    "quad_cost",
    "psd_factor",
    "Containment",
    "MinNormSolution",
]


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")

    def bound(self, scale: float) -> float:
        return self.abs_tol + self.rel_tol * scale


DEFAULT_TOL = Tolerance()


class Containment(NamedTuple):
    contained: bool
    max_residual: float


class MinNormSolution(NamedTuple):
    solution: np.ndarray
    residual: float
    consistent: bool


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array (1-D input becomes a column)."""
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    elif m.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return m


def pinv(a, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via the SVD.

    Singular values at or below ``max(rows, cols) * s_max * tol.rel_tol`` are
    treated as zero.
    """
    a = as_matrix(a)
    m, n = a.shape
    if a.size == 0:
        return np.zeros((n, m))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = max(m, n) * s[0] * tol.rel_tol
    keep = s > cutoff
    if not np.any(keep):
        return np.zeros((n, m))
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def colspace_contains(target, candidate, tol: Tolerance = DEFAULT_TOL) -> Containment:
    """Check range(target) is contained in range(candidate) by projection.

    Each column ``c`` of ``target`` must satisfy
    ``|P c - c| <= abs_tol + rel_tol * |c|`` with ``P`` the orthogonal
    projector onto the column space of ``candidate``.
    """
    target = as_matrix(target, "target")
    candidate = as_matrix(candidate, "candidate")
    if target.shape[0] != candidate.shape[0]:
        raise DimensionMismatch(
            f"row mismatch: target has {target.shape[0]}, candidate {candidate.shape[0]}"
        )
    if target.shape[1] == 0:
        return Containment(True, 0.0)
    proj = candidate @ (pinv(candidate, tol) @ target)
    res = np.linalg.norm(proj - target, axis=0)
    norms = np.linalg.norm(target, axis=0)
    ok = bool(np.all(res <= tol.abs_tol + tol.rel_tol * norms))
    return Containment(ok, float(res.max()))


def solve_minimum_norm(a, b, tol: Tolerance = DEFAULT_TOL) -> MinNormSolution:
    """Minimum-norm least-squares solution of ``a x = b``."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"a has {a.shape[0]} rows but b has {b.shape[0]}")
    x = pinv(a, tol) @ b
    residual = float(np.linalg.norm(a @ x - b))
    consistent = residual <= tol.bound(float(np.linalg.norm(b)))
    return MinNormSolution(x, residual, consistent)


def _check_covariance(sigma: np.ndarray, tol: Tolerance, name: str = "sigma") -> None:
    if sigma.shape[0] != sigma.shape[1]:
        raise InvalidCovariance(f"{name} must be square, got {sigma.shape}")
    asym = np.abs(sigma - sigma.T).max(initial=0.0)
    if asym > tol.bound(np.abs(sigma).max(initial=0.0)):
        raise InvalidCovariance(f"{name} is not symmetric (max asymmetry {asym:.3g})")


def quad_cost(m_eff, sigma, tol: Tolerance = DEFAULT_TOL) -> float:
    """``E|G xi|^2 = trace(G sigma G^T)`` for ``xi ~ N(0, sigma)``."""
    g = as_matrix(m_eff, "m_eff")
    sigma = as_matrix(sigma, "sigma")
    _check_covariance(sigma, tol)
    if g.shape[1] != sigma.shape[0]:
        raise DimensionMismatch(f"m_eff has {g.shape[1]} columns, sigma is {sigma.shape}")
    val = float(np.einsum("ij,jk,ik->", g, sigma, g))
    # PSD sigma makes this nonnegative up to round-off
    return max(val, 0.0)


def psd_factor(sigma) -> np.ndarray:
    """Return ``F`` with ``F F^T = sigma`` for a symmetric PSD ``sigma``.

    Works for singular covariances, where a Cholesky factor does not exist.
    """
    sigma = as_matrix(sigma, "sigma")
    if sigma.size == 0:
        return sigma.copy()
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.T))
    return v * np.sqrt(np.clip(w, 0.0, None))
