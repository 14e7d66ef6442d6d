"""Unit-triangular factorization of the error covariance.

Sigma = L diag(1/gamma) L' with L unit lower triangular.  U = L^{-1} is
also unit lower triangular with U[j, t] = -beta[j, t] for t < j, where
beta[j, :j] are the coefficients of the regression of component j on
components 1..j-1 and gamma[j] is the residual precision.  All sampler
updates and imputation rules work on (beta, gamma) directly; Sigma is
only ever reconstructed for reporting.  No general matrix inverses:
everything is forward/back substitution on unit triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "LDLFactor",
    "UPartition",
    "ldl_decompose",
    "ldl_reconstruct",
    "u_matrix",
    "l_matrix",
    "transform_coefficients",
    "untransform_coefficients",
    "u_partition",
    "solve_unit_lower",
    "sigma_inverse",
]

# relative pivot floor for the decomposition
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class LDLFactor:
    """Strictly-lower regression coefficients and residual precisions."""

    beta: np.ndarray   # (p, p), zero on and above the diagonal
    gamma: np.ndarray  # (p,), positive

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        p = gamma.shape[0]
        if beta.shape != (p, p):
            raise ValueError("beta must be (p, p) to match gamma")
        if np.any(np.triu(beta) != 0.0):
            raise ValueError("beta must be strictly lower triangular")
        if np.any(gamma <= 0.0):
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def p(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class UPartition:
    """Blocks of U for a split after component s (prefix s, suffix p-s)."""

    s: int
    u11: np.ndarray  # (s, s)
    u21: np.ndarray  # (p-s, s)
    u22: np.ndarray  # (p-s, p-s), unit lower triangular


def ldl_decompose(sigma, rtol: float = PIVOT_RTOL) -> LDLFactor:
    """Factor an SPD matrix into sequential-regression form.

    Raises ValueError when a pivot falls at or below rtol * max diagonal,
    which flags a non-SPD (or numerically singular) input.
    """
    sigma = np.asarray(sigma, dtype=float)
    p = sigma.shape[0]
    if sigma.shape != (p, p):
        raise ValueError("sigma must be square")
    if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(sigma).max())):
        raise ValueError("sigma must be symmetric")
    floor = rtol * float(np.max(np.diag(sigma))) if p else 0.0
    lmat = np.eye(p)
    dvec = np.empty(p)
    for j in range(p):
        for k in range(j):
            lmat[j, k] = (sigma[j, k] - lmat[j, :k] * dvec[:k] @ lmat[k, :k]) / dvec[k]
        dvec[j] = sigma[j, j] - lmat[j, :j] ** 2 @ dvec[:j]
        if dvec[j] <= floor:
            raise ValueError(f"pivot {dvec[j]:.3e} at position {j + 1}: matrix not positive definite")
    umat = solve_triangular(lmat, np.eye(p), lower=True, unit_diagonal=True)
    beta = -np.tril(umat, k=-1)
    return LDLFactor(beta=beta, gamma=1.0 / dvec)


def u_matrix(factor: LDLFactor) -> np.ndarray:
    """Unit lower triangle U with -beta below the diagonal."""
    return np.eye(factor.p) - np.tril(factor.beta, k=-1)


def l_matrix(factor: LDLFactor) -> np.ndarray:
    """L = U^{-1}, again unit lower triangular."""
    return solve_triangular(u_matrix(factor), np.eye(factor.p), lower=True, unit_diagonal=True)


def ldl_reconstruct(factor: LDLFactor) -> np.ndarray:
    """Rebuild Sigma = L diag(1/gamma) L'."""
    lmat = l_matrix(factor)
    return (lmat / factor.gamma) @ lmat.T


def sigma_inverse(factor: LDLFactor) -> np.ndarray:
    """Sigma^{-1} = U' diag(gamma) U (used by tests and reporting only)."""
    umat = u_matrix(factor)
    return umat.T @ (factor.gamma[:, None] * umat)


def transform_coefficients(alpha, psi, factor: LDLFactor):
    """Map per-visit coefficients to sequential (conditional) coefficients.

    alpha has one row per visit; row j maps to
    alpha[j] - sum_{t<j} beta[j, t] alpha[t], i.e. U @ alpha, and the
    same for the skewness loadings psi.
    """
    umat = u_matrix(factor)
    alpha = np.asarray(alpha, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return umat @ alpha, umat @ psi


def untransform_coefficients(alpha_under, psi_under, factor: LDLFactor):
    """Inverse of transform_coefficients (forward substitution by U)."""
    umat = u_matrix(factor)
    alpha = solve_triangular(umat, np.asarray(alpha_under, dtype=float), lower=True, unit_diagonal=True)
    psi = solve_triangular(umat, np.asarray(psi_under, dtype=float), lower=True, unit_diagonal=True)
    return alpha, psi


def u_partition(factor: LDLFactor, s: int) -> UPartition:
    """Split U after component s; u22 drives suffix draws and offsets."""
    if not 0 <= s <= factor.p:
        raise ValueError("split point must lie in [0, p]")
    umat = u_matrix(factor)
    return UPartition(s=s, u11=umat[:s, :s], u21=umat[s:, :s], u22=umat[s:, s:])


def solve_unit_lower(umat, b):
    """Forward substitution with a unit lower triangle."""
    b = np.asarray(b, dtype=float)
    if umat.shape[0] == 0:
        return b.copy()
    return solve_triangular(umat, b, lower=True, unit_diagonal=True)
