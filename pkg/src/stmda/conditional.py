"""Conditional laws of the latent scale, skew factor, and missing outcomes.

Everything here conditions on the regression/covariance state and works
on the sequential parameterization: residual precisions gamma_j,
regression loadings beta[j, t], sequential coefficient offsets
mu_under, and sequential skewness loadings psi_under.

Key objects, for one subject with observed prefix y_1..y_s (possibly
with interior gaps):

* PrefixStats      -- scalar sufficient statistics (A, B, nu_d) of the
                      (d, W) posterior given a complete prefix;
* AugmentedPosterior -- joint posterior of (d, W, gap outcomes) built
                      from a reversed-order Cholesky of the precision
                      of (W, gaps), never inverting a full matrix;
* suffix draws     -- the monotone tail given (d, W), in sequential or
                      matrix (block-solve) form, identical in law;
* observed-data log likelihood -- triangular shortcut for gap-free
                      subjects, dense marginal for subjects with gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from .distributions import (
    SkewTMulti,
    logpdf_sn_multi,
    logpdf_st_multi,
    trunc_norm_lower,
    trunc_t_lower,
)
from .ldl import LDLFactor, solve_unit_lower, u_matrix, u_partition

__all__ = [
    "PrefixStats",
    "prefix_stats",
    "prefix_residuals",
    "draw_dw",
    "draw_suffix",
    "draw_suffix_matrix",
    "AugmentedPosterior",
    "augmented_posterior",
    "draw_augmented",
    "loglik_monotone_prefix",
    "loglik_observed_dense",
]

LOG2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# complete-prefix sufficient statistics and (d, W) draws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrefixStats:
    """Sufficient statistics of (d, W) given a gap-free prefix of length s.

    a: 1 + sum_j gamma_j psi_under_j^2
    b: sum_j gamma_j psi_under_j r_j        (r_j sequential residuals)
    ss: sum_j gamma_j r_j^2
    """

    a: float
    b: float
    ss: float
    s: int
    nu: float

    @property
    def nu_d(self) -> float:
        return self.nu + self.ss - self.b**2 / self.a


def prefix_residuals(y, mu_under, beta, s: int) -> np.ndarray:
    """Sequential residuals r_j = y_j - sum_{t<j} beta[j,t] y_t - mu_under_j, j <= s."""
    y = np.asarray(y, dtype=float)
    out = np.empty(s)
    for j in range(s):
        out[j] = y[j] - beta[j, :j] @ y[:j] - mu_under[j]
    return out


def prefix_stats(y, mu_under, factor: LDLFactor, psi_under, nu: float, s: int) -> PrefixStats:
    """Statistics of the (d, W) posterior after observing y_1..y_s complete."""
    resid = prefix_residuals(y, mu_under, factor.beta, s)
    g = factor.gamma[:s]
    pu = np.asarray(psi_under, dtype=float)[:s]
    a = 1.0 + float(g * pu @ pu)
    b = float(g * pu @ resid)
    ss = float(g * resid @ resid)
    return PrefixStats(a=a, b=b, ss=ss, s=s, nu=nu)


def draw_dw(stats: PrefixStats, rng: np.random.Generator, has_skew: bool, has_tails: bool):
    """One draw of (d, W) given a complete prefix.

    Skew variants draw W from its exact truncated-t (or truncated-normal)
    marginal and then d | W from its Gamma conditional; symmetric
    variants have no W and draw d directly (or return d = 1).
    """
    s, a, b = stats.s, stats.a, stats.b
    loc = b / a
    if has_skew:
        if has_tails:
            nu_d = stats.nu_d
            w = trunc_t_lower(loc, math.sqrt(nu_d / (a * (stats.nu + s))), stats.nu + s, 0.0, rng)
            d = rng.gamma((stats.nu + s + 1.0) / 2.0, 2.0 / (nu_d + a * (w - loc) ** 2))
        else:
            w = trunc_norm_lower(loc, math.sqrt(1.0 / a), 0.0, rng)
            d = 1.0
        return float(d), float(w)
    if has_tails:
        d = rng.gamma((stats.nu + s) / 2.0, 2.0 / (stats.nu + stats.ss))
        return float(d), 0.0
    return 1.0, 0.0


# ---------------------------------------------------------------------------
# monotone-suffix draws given (d, W)
# ---------------------------------------------------------------------------


def draw_suffix(y_prefix, w, d, mu_under, factor: LDLFactor, psi_under, s: int, rng):
    """Sequential draw of y_{s+1}..y_p given prefix and latents."""
    p = factor.p
    y = np.empty(p)
    y[:s] = np.asarray(y_prefix, dtype=float)[:s]
    rt_d = math.sqrt(d)
    for j in range(s, p):
        mean = factor.beta[j, :j] @ y[:j] + mu_under[j] + psi_under[j] * w
        y[j] = mean + rng.standard_normal() / (math.sqrt(factor.gamma[j]) * rt_d)
    return y[s:]


def draw_suffix_matrix(y_prefix, w, d, mu_under, factor: LDLFactor, psi_under, s: int, rng):
    """Block-solve form of the suffix draw; identical in law to draw_suffix.

    With U partitioned after s:  y_suf = mu_suf - U22^{-1} U21 (y_pre -
    mu_pre) + U22^{-1} (psi_under_suf w + eps / sqrt(d)), eps_j ~
    N(0, 1/gamma_j).  mu here is the plain-scale location, recovered from
    mu_under by forward substitution.
    """
    part = u_partition(factor, s)
    mu_under = np.asarray(mu_under, dtype=float)
    mu = solve_triangular(u_matrix(factor), mu_under, lower=True, unit_diagonal=True)
    eps = rng.standard_normal(factor.p - s) / np.sqrt(factor.gamma[s:])
    rhs = np.asarray(psi_under, dtype=float)[s:] * w + eps / math.sqrt(d)
    adj = part.u21 @ (np.asarray(y_prefix, dtype=float)[:s] - mu[:s])
    return mu[s:] + solve_unit_lower(part.u22, rhs - adj)


# ---------------------------------------------------------------------------
# joint posterior of (d, W, gap outcomes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentedPosterior:
    """Posterior pieces for one subject's latents and interior gaps.

    The unknown block is (W, gaps) for skew variants or just (gaps)
    otherwise.  l_w is the reversed-order Cholesky factor (A = L'L with
    L lower triangular), u_w its inverse; mu_w the joint posterior
    location; b_a / b_d the degrees-of-freedom and rate terms of the
    marginal scale law.
    """

    s: int
    o: int
    gap_idx: np.ndarray       # visit indices (0-based) of interior gaps
    has_w: bool
    nu: float
    mu_w: np.ndarray          # (m~,) location of (W, gaps) or (gaps)
    l_w: np.ndarray           # (m~, m~) lower, A = L' L
    u_w: np.ndarray           # (m~, m~) lower, L^{-1}
    b_a: float
    b_d: float


def augmented_posterior(
    theta: list,
    gamma,
    x_i,
    y_row,
    obs_row,
    s_i: int,
    nu: float,
    has_skew: bool,
    zeta: np.ndarray | None = None,
) -> AugmentedPosterior:
    """Build the joint posterior of (d, W, gaps) for one subject.

    theta[j] holds the component-j regression vector (q covariate
    loadings, the skewness slot when present, then j regression loadings
    on earlier components); zeta, when given, is the per-visit offset
    from shared-coefficient covariates.

    Slot order of the extended design is (covariates, [W], y_1..y_{s}).
    For each j <= s_i the extended coefficient vector has -1 at y_j;
    splitting it into observed and unknown slots yields the normal
    quadratic form whose precision is accumulated here and factored in
    reversed order so the W slot ends up in the top-left corner.
    """
    x_i = np.asarray(x_i, dtype=float)
    q = x_i.shape[0]
    skew = 1 if has_skew else 0
    obs_prefix = np.asarray(obs_row, dtype=bool)[:s_i]
    gap_idx = np.flatnonzero(~obs_prefix)
    o_i = int(obs_prefix.sum())
    m_t = skew + gap_idx.size

    # unknown-slot positions within the extended design (after the x block)
    unknown = np.zeros(skew + s_i, dtype=bool)
    if has_skew:
        unknown[0] = True
    unknown[skew + gap_idx] = True

    known_x = np.concatenate([x_i, np.asarray(y_row, dtype=float)[:s_i][obs_prefix]])

    a_mat = np.zeros((m_t, m_t))
    if has_skew:
        a_mat[0, 0] = 1.0
    b_vec = np.zeros(m_t)
    ss = 0.0
    for j in range(s_i):
        v = np.zeros(q + skew + s_i)
        tj = np.asarray(theta[j], dtype=float)
        v[: q + skew + j] = tj
        v[q + skew + j] = -1.0
        tail = v[q:]
        u_m = tail[unknown]
        u_o = np.concatenate([v[:q], tail[~unknown]])
        ystar = -float(u_o @ known_x)
        if zeta is not None:
            ystar -= float(zeta[j])
        g = gamma[j]
        if m_t:
            a_mat += g * np.outer(u_m, u_m)
            b_vec += g * u_m * ystar
        ss += g * ystar * ystar

    b_a = nu + o_i
    if m_t == 0:
        return AugmentedPosterior(
            s=s_i, o=o_i, gap_idx=gap_idx, has_w=False, nu=nu,
            mu_w=np.zeros(0), l_w=np.zeros((0, 0)), u_w=np.zeros((0, 0)),
            b_a=b_a, b_d=nu + ss,
        )

    # reversed-order Cholesky: A = L' L with L lower triangular
    try:
        c = np.linalg.cholesky(a_mat[::-1, ::-1])
    except np.linalg.LinAlgError as exc:
        raise ValueError("augmented precision not positive definite") from exc
    l_w = c[::-1, ::-1].T
    u_w = solve_triangular(l_w, np.eye(m_t), lower=True)
    c_w = u_w.T @ b_vec
    mu_w = u_w @ c_w
    b_d = nu + ss - float(c_w @ c_w)
    if not math.isinf(nu) and b_d <= 0.0:
        raise ValueError("nonpositive posterior rate term; inputs inconsistent")
    return AugmentedPosterior(
        s=s_i, o=o_i, gap_idx=gap_idx, has_w=has_skew, nu=nu,
        mu_w=mu_w, l_w=l_w, u_w=u_w, b_a=b_a, b_d=b_d,
    )


def draw_augmented(post: AugmentedPosterior, rng: np.random.Generator, has_tails: bool):
    """Draw (d, w, y_gaps) from an AugmentedPosterior.

    Skew variants: W from its truncated-t (or truncated-normal) marginal,
    d | W from its Gamma conditional, gaps from the conditional normal.
    Symmetric variants: d from its Gamma marginal (or 1), gaps normal.
    """
    m_t = post.mu_w.shape[0]
    if post.has_w:
        loc = post.mu_w[0]
        u11 = post.u_w[0, 0]
        if has_tails:
            w = trunc_t_lower(loc, abs(u11) * math.sqrt(post.b_d / post.b_a), post.b_a, 0.0, rng)
            d = rng.gamma(
                (post.b_a + 1.0) / 2.0,
                2.0 / (post.b_d + (w - loc) ** 2 * post.l_w[0, 0] ** 2),
            )
        else:
            w = trunc_norm_lower(loc, abs(u11), 0.0, rng)
            d = 1.0
        if m_t > 1:
            mu_gap = post.mu_w[1:] + post.u_w[1:, 0] * post.l_w[0, 0] * (w - loc)
            y_gap = mu_gap + post.u_w[1:, 1:] @ rng.standard_normal(m_t - 1) / math.sqrt(d)
        else:
            y_gap = np.zeros(0)
        return float(d), float(w), y_gap

    d = rng.gamma(post.b_a / 2.0, 2.0 / post.b_d) if has_tails else 1.0
    if m_t:
        y_gap = post.mu_w + post.u_w @ rng.standard_normal(m_t) / math.sqrt(d)
    else:
        y_gap = np.zeros(0)
    return float(d), 0.0, y_gap


# ---------------------------------------------------------------------------
# observed-data log likelihood
# ---------------------------------------------------------------------------


def loglik_monotone_prefix(resid, gamma, psi_under, nu: float, has_skew: bool) -> float:
    """Observed-data log density for a gap-free prefix, from sequential residuals.

    Uses the triangular identities: (y-mu)' Sigma_s^{-1} (y-mu) =
    sum gamma_t r_t^2, psi' Sigma_s^{-1} (y-mu) = sum gamma_t r_t
    psi_under_t, and |Omega_s| = (prod 1/gamma_t) (1 + sum gamma_t
    psi_under_t^2); no matrix is formed or inverted.
    """
    resid = np.asarray(resid, dtype=float)
    s = resid.shape[0]
    if s == 0:
        return 0.0
    g = np.asarray(gamma, dtype=float)[:s]
    qf = float(g * resid @ resid)
    logdet_sig = -float(np.sum(np.log(g)))
    if has_skew:
        pu = np.asarray(psi_under, dtype=float)[:s]
        a = 1.0 + float(g * pu @ pu)
        ip = float(g * pu @ resid)
        q_om = qf - ip * ip / a
        proj = ip / math.sqrt(a)
        logdet = logdet_sig + math.log(a)
    else:
        q_om = qf
        proj = 0.0
        logdet = logdet_sig

    if math.isinf(nu):
        core = -0.5 * (s * LOG2PI + logdet + q_om)
        if has_skew:
            return math.log(2.0) + core + float(special.log_ndtr(proj))
        return core
    core = (
        special.gammaln((nu + s) / 2.0)
        - special.gammaln(nu / 2.0)
        - s / 2.0 * math.log(nu * math.pi)
        - 0.5 * logdet
        - (nu + s) / 2.0 * math.log1p(q_om / nu)
    )
    if has_skew:
        arg = proj * math.sqrt((nu + s) / (nu + q_om))
        tail = float(special.stdtr(nu + s, arg))
        return math.log(2.0) + core + math.log(max(tail, 1e-320))
    return float(core)


def loglik_observed_dense(y_obs, obs_idx, mu_full, sigma, psi, nu: float, has_skew: bool) -> float:
    """Dense observed-data log density on an arbitrary observed subset.

    The skew-t family is closed under marginalization in convolution
    form, so the observed subvector is skew-t with the sliced
    (mu, Sigma, psi).  Used for subjects with interior gaps.
    """
    obs_idx = np.asarray(obs_idx, dtype=int)
    if obs_idx.size == 0:
        return 0.0
    y = np.asarray(y_obs, dtype=float)
    mu_s = np.asarray(mu_full, dtype=float)[obs_idx]
    sig_s = np.asarray(sigma, dtype=float)[np.ix_(obs_idx, obs_idx)]
    if has_skew:
        psi_s = np.asarray(psi, dtype=float)[obs_idx]
        dist = SkewTMulti(mu=mu_s, sigma=sig_s, psi=psi_s, nu=nu)
        val = logpdf_sn_multi(y, dist) if math.isinf(nu) else logpdf_st_multi(y, dist)
    else:
        val = _log_mvnorm(y, mu_s, sig_s) if math.isinf(nu) else _log_mvt(y, mu_s, sig_s, nu)
    return float(val)


def _log_mvnorm(y, mu, sigma):
    chol = np.linalg.cholesky(sigma)
    half = solve_triangular(chol, y - mu, lower=True)
    return -0.5 * (y.shape[0] * LOG2PI + 2.0 * np.sum(np.log(np.diag(chol))) + half @ half)


def _log_mvt(y, mu, sigma, nu):
    s = y.shape[0]
    chol = np.linalg.cholesky(sigma)
    half = solve_triangular(chol, y - mu, lower=True)
    quad = float(half @ half)
    return (
        special.gammaln((nu + s) / 2.0)
        - special.gammaln(nu / 2.0)
        - s / 2.0 * math.log(nu * math.pi)
        - np.sum(np.log(np.diag(chol)))
        - (nu + s) / 2.0 * math.log1p(quad / nu)
    )
