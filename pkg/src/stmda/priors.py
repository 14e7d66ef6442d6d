"""Prior specifications for the sequential-regression MMRM.

Covers the hierarchical covariance prior (per-component precision
hyperparameters rho_j feeding an inverse-Wishart-type cross-product
matrix), the heavy-tailed prior on the sequential skewness loadings,
the penalized-complexity prior on the degrees of freedom, and the
assembly of the prior cross-product matrix that enters the conjugate
regression updates.

Three covariance-prior modes:

* ``"hw"``      hierarchical half-t marginals on the error SDs (default);
* ``"invw"``    fixed inverse-Wishart style (a_w, n_w) supplied by the user;
* ``"jeffreys"``  a_w = 0, n_w = 0, valid for the symmetric variants only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .ldl import LDLFactor

__all__ = [
    "PriorConfig",
    "n_w",
    "a_w_matrix",
    "rank_r",
    "pc_distance",
    "pc_distance_deriv",
    "pc_logpdf",
    "calibrate_pc_lambda",
    "resolve_pc_lambda",
    "huang_wand_shape_rate",
    "huang_wand_rho_update",
    "skewness_hyper_shape_rate",
    "skewness_hyper_update",
    "build_e_matrix",
]

PI2 = math.pi**2

# radicand floor: below this the squared prior distance is treated as zero
_DIST_EPS = 1e-15


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters; None picks the documented defaults at fit time.

    alpha0 / m_mat give the conjugate normal prior on the regression
    coefficients (zero matrices mean a flat coefficient prior).  eta0 /
    v_eta0 control the constant-effect covariates (None means flat).
    pc_lambda None means: calibrate so that P(nu < 10) = 0.5.
    """

    n0: float = 2.0
    a0: float = 1e5
    alpha0: np.ndarray | None = None   # (p, q) prior mean of per-visit coefficients
    m_mat: np.ndarray | None = None    # (q, q) PSD prior precision-like matrix
    eta0: np.ndarray | None = None
    v_eta0: np.ndarray | None = None
    pc_lambda: float | None = None
    nu_l: float = 2.0
    nu_m: float = 1000.0
    cov_prior: str = "hw"              # "hw" | "invw" | "jeffreys"
    aw_fixed: np.ndarray | None = None
    nw_fixed: float | None = None

    def __post_init__(self):
        if self.cov_prior not in ("hw", "invw", "jeffreys"):
            raise ValueError("cov_prior must be 'hw', 'invw' or 'jeffreys'")
        if self.cov_prior == "invw" and (self.aw_fixed is None or self.nw_fixed is None):
            raise ValueError("invw mode needs aw_fixed and nw_fixed")
        if self.n0 <= 0 or self.a0 <= 0:
            raise ValueError("n0 and a0 must be positive")
        if not 0 < self.nu_l < self.nu_m:
            raise ValueError("need 0 < nu_l < nu_m")


def n_w(cfg: PriorConfig, p: int) -> float:
    if cfg.cov_prior == "hw":
        return cfg.n0 + p - 1.0
    if cfg.cov_prior == "invw":
        return float(cfg.nw_fixed)
    return 0.0


def a_w_matrix(cfg: PriorConfig, rho: np.ndarray | None, p: int) -> np.ndarray:
    if cfg.cov_prior == "hw":
        if rho is None:
            raise ValueError("hw mode needs the rho hyperparameter vector")
        return 2.0 * cfg.n0 * np.diag(np.asarray(rho, dtype=float))
    if cfg.cov_prior == "invw":
        return np.asarray(cfg.aw_fixed, dtype=float)
    return np.zeros((p, p))


def rank_r(cfg: PriorConfig, q: int, has_skew: bool) -> int:
    """Rank of the coefficient-block prior; +1 when a skewness slot exists."""
    r_star = 0 if cfg.m_mat is None else int(np.linalg.matrix_rank(np.asarray(cfg.m_mat)))
    return r_star + (1 if has_skew else 0)


# ---------------------------------------------------------------------------
# penalized-complexity prior on the degrees of freedom
# ---------------------------------------------------------------------------


def pc_distance(nu, p: int):
    """Complexity distance sqrt(2 KL) from the t_nu base to the normal.

    KL is between the p-variate t with unit covariance (scale (nu-2)/nu)
    and the standard normal; it decreases strictly in nu and vanishes as
    nu -> inf.  The radicand is clamped at zero against cancellation noise.
    """
    nu = np.asarray(nu, dtype=float)
    half = nu / 2.0
    halfp = (nu + p) / 2.0
    two_kl = (
        p * (1.0 + np.log(2.0 / (nu - 2.0)))
        + 2.0 * (special.gammaln(halfp) - special.gammaln(half))
        - (nu + p) * (special.digamma(halfp) - special.digamma(half))
    )
    out = np.sqrt(np.where(two_kl < _DIST_EPS, 0.0, two_kl))
    return float(out) if out.ndim == 0 else out


def pc_distance_deriv(nu, p: int):
    """d/dnu of the complexity distance (negative on the support)."""
    nu = np.asarray(nu, dtype=float)
    num = p / (nu - 2.0) + (nu + p) / 2.0 * (
        special.polygamma(1, (nu + p) / 2.0) - special.polygamma(1, nu / 2.0)
    )
    out = -num / (2.0 * pc_distance(nu, p))
    return float(out) if out.ndim == 0 else out


def pc_logpdf(nu, lam: float, p: int, nu_l: float = 2.0, nu_m: float = 1000.0):
    """Log density lambda exp(-lambda d(nu)) |d'(nu)| on (nu_l, nu_m).

    The support truncation at nu_m is not renormalized (the missing mass
    is ~exp(-lambda d(nu_m)) shy of 1, a constant that cancels in MH
    ratios).  Returns -inf outside the support.
    """
    nu = np.asarray(nu, dtype=float)
    inside = (nu > nu_l) & (nu < nu_m)
    safe = np.where(inside, nu, 4.0)
    val = math.log(lam) - lam * pc_distance(safe, p) + np.log(np.abs(pc_distance_deriv(safe, p)))
    out = np.where(inside, val, -np.inf)
    return float(out) if out.ndim == 0 else out


def calibrate_pc_lambda(p: int, nu_target: float = 10.0, prob: float = 0.5) -> float:
    """Rate such that P(nu < nu_target) = prob under the untruncated prior.

    The prior is exactly exponential in distance space, so the tail
    condition inverts in closed form: lambda = -log(prob) / d(nu_target).
    """
    return -math.log(prob) / pc_distance(nu_target, p)


def resolve_pc_lambda(cfg: PriorConfig, p: int) -> float:
    return cfg.pc_lambda if cfg.pc_lambda is not None else calibrate_pc_lambda(p)


# ---------------------------------------------------------------------------
# covariance hyperparameters
# ---------------------------------------------------------------------------


def huang_wand_shape_rate(factor: LDLFactor, cfg: PriorConfig):
    """Gamma shape/rate for each rho_j given the current factorization.

    rate_j = n0 * sum_{k >= j} gamma_k beta[k, j]^2 (with beta[j, j] = 1
    understood) + 1/a0^2; shape = (n0 + p) / 2 for every component.
    """
    p = factor.p
    bsq = factor.beta**2
    np.fill_diagonal(bsq, 1.0)
    rates = cfg.n0 * (factor.gamma @ np.tril(bsq)) + 1.0 / cfg.a0**2
    shape = (cfg.n0 + p) / 2.0
    return shape, rates


def huang_wand_rho_update(factor: LDLFactor, cfg: PriorConfig, rng: np.random.Generator):
    shape, rates = huang_wand_shape_rate(factor, cfg)
    return rng.gamma(shape, 1.0 / rates)


# ---------------------------------------------------------------------------
# skewness-loading hyperparameters
# ---------------------------------------------------------------------------


def skewness_hyper_shape_rate(gamma, psi_under):
    """Gamma shape/rate of d_psi_j given (gamma_j, psi_under_j).

    Prior d_psi_j ~ G(1/4, 1/4) with psi_under_j | . ~ N(0, pi^2/(4 d gamma))
    yields the conjugate update G(3/4, 1/4 + 2 gamma psi_under^2 / pi^2);
    marginally the loading has a half-unit-df t prior.
    """
    gamma = np.asarray(gamma, dtype=float)
    psi_under = np.asarray(psi_under, dtype=float)
    return 0.75, 0.25 + 2.0 * gamma * psi_under**2 / PI2


def skewness_hyper_update(gamma, psi_under, rng: np.random.Generator):
    shape, rates = skewness_hyper_shape_rate(gamma, psi_under)
    return rng.gamma(shape, 1.0 / rates)


# ---------------------------------------------------------------------------
# prior cross-product matrix for the regression updates
# ---------------------------------------------------------------------------


def build_e_matrix(cfg: PriorConfig, rho, d_psi_j: float, p: int, q: int, j: int, has_skew: bool) -> np.ndarray:
    """Leading block of the prior cross-product matrix for component j.

    Slot order matches the regression design for component j: the q
    subject covariates, then (if present) the skewness slot, then the j
    preceding outcome components and the component itself.  The returned
    matrix is (q + skew + j) square; its last row/column pairs with the
    -1 entry of the extended coefficient vector.
    """
    skew = 1 if has_skew else 0
    alpha0 = np.zeros((p, q)) if cfg.alpha0 is None else np.asarray(cfg.alpha0, dtype=float)
    m_mat = np.zeros((q, q)) if cfg.m_mat is None else np.asarray(cfg.m_mat, dtype=float)
    if alpha0.shape != (p, q) or m_mat.shape != (q, q):
        raise ValueError("alpha0 must be (p, q) and m_mat (q, q)")
    dim = q + skew + p
    e_full = np.zeros((dim, dim))
    e_full[:q, :q] = m_mat
    if has_skew:
        e_full[q, q] = 4.0 * float(d_psi_j) / PI2
    yb = q + skew
    am = alpha0 @ m_mat
    e_full[yb:, :q] = am
    e_full[:q, yb:] = am.T
    e_full[yb:, yb:] = am @ alpha0.T + a_w_matrix(cfg, rho, p)
    k = q + skew + j
    return e_full[:k, :k]
