"""Skew-normal and skew-t distributions in convolution form.

Throughout the package a skew-t vector is represented as

    y = mu + psi * W + eps / sqrt(d),
    W = |Z| / sqrt(d),  Z ~ N(0, 1),  d ~ Gamma(nu/2, rate=nu/2),
    eps ~ N(0, Sigma) independent of (Z, d),

so that marginally y is skew-t with location mu, scale matrix
Omega = Sigma + psi psi', skewness loadings psi and tail degrees of
freedom nu.  Gaussian tails are selected with ``nu = math.inf`` (then
d == 1 and the law is skew-normal); ``psi = 0`` gives Student-t or
normal errors.  The infinite sentinel is used everywhere in the
package: nu is never approximated by a large finite number.

Half-open truncated draws (values above a lower bound, used for the
positivity constraint on W) are sampled exactly: inverse-survival for
both the normal and the t case, with an exponential-rejection branch
for far normal tails.  Compounding a Gamma mixing draw with a
truncated normal is *not* exact when the location is nonzero and is
deliberately not offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "SkewTUni",
    "SkewTMulti",
    "TruncatedSpec",
    "pdf_st_uni",
    "logpdf_st_uni",
    "pdf_sn_uni",
    "logpdf_sn_uni",
    "pdf_st_multi",
    "logpdf_st_multi",
    "pdf_sn_multi",
    "logpdf_sn_multi",
    "lambda_star",
    "lambda_star_from_omega",
    "tail_mean_factor",
    "st_mean",
    "sample_st",
    "sample_st_parts",
    "sample_mixing",
    "sample_truncated",
    "truncated_cdf",
    "trunc_norm_lower",
    "trunc_t_lower",
]

LOG2PI = math.log(2.0 * math.pi)

# switch to exponential rejection for standardized normal tails beyond this
_FAR_TAIL = 5.0


def _as_float_array(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkewTUni:
    """Univariate skew-t parameters (convolution form).

    Attributes
    ----------
    mu : location
    sigma2 : variance of the symmetric part, > 0
    psi : skewness loading (0 recovers Student-t / normal)
    nu : tail degrees of freedom, > 2; ``math.inf`` for skew-normal
    """

    mu: float
    sigma2: float
    psi: float
    nu: float

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be positive")
        if not self.nu > 2.0:
            raise ValueError("nu must exceed 2 (use math.inf for Gaussian tails)")

    @property
    def omega2(self) -> float:
        """Scale of the skew-t form: sigma2 + psi**2."""
        return self.sigma2 + self.psi**2

    @property
    def lam(self) -> float:
        """Shape parameter psi / sigma of the classical parameterization."""
        return self.psi / math.sqrt(self.sigma2)


@dataclass(frozen=True)
class SkewTMulti:
    """Multivariate skew-t parameters (convolution form).

    ``sigma`` must be symmetric positive definite; this is checked once
    with a Cholesky factorization at construction.
    """

    mu: np.ndarray
    sigma: np.ndarray
    psi: np.ndarray
    nu: float
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = _as_float_array(self.mu)
        sigma = _as_float_array(self.sigma)
        psi = _as_float_array(self.psi)
        p = mu.shape[0]
        if sigma.shape != (p, p) or psi.shape != (p,):
            raise ValueError("inconsistent dimensions for mu / sigma / psi")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(sigma).max())):
            raise ValueError("sigma must be symmetric")
        if not self.nu > 2.0:
            raise ValueError("nu must exceed 2 (use math.inf for Gaussian tails)")
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma is not positive definite") from exc
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "_chol", chol)

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @property
    def omega(self) -> np.ndarray:
        """Scale matrix of the skew-t form: sigma + psi psi'."""
        return self.sigma + np.outer(self.psi, self.psi)


@dataclass(frozen=True)
class TruncatedSpec:
    """Lower-truncated scalar normal/t law: base(loc, scale2, nu) given x > lower."""

    loc: float
    scale2: float
    nu: float
    lower: float = 0.0

    def __post_init__(self):
        if not self.scale2 > 0.0:
            raise ValueError("scale2 must be positive")
        if not (self.nu > 0.0):
            raise ValueError("nu must be positive (math.inf for normal)")


# ---------------------------------------------------------------------------
# scalar building blocks
# ---------------------------------------------------------------------------


def _log_norm_pdf(x, mean, var):
    return -0.5 * (LOG2PI + np.log(var) + (x - mean) ** 2 / var)


def _log_t_pdf(x, loc, scale2, df):
    z2 = (x - loc) ** 2 / scale2
    return (
        special.gammaln((df + 1.0) / 2.0)
        - special.gammaln(df / 2.0)
        - 0.5 * (np.log(df * np.pi) + np.log(scale2))
        - (df + 1.0) / 2.0 * np.log1p(z2 / df)
    )


def _norm_cdf(x):
    return special.ndtr(x)


def _log_norm_cdf(x):
    return special.log_ndtr(x)


def _t_cdf(x, df):
    return special.stdtr(df, x)


def _log_t_cdf(x, df):
    # no dedicated log routine; clip to keep the log finite in far tails
    return np.log(np.clip(special.stdtr(df, x), 1e-320, None))


# ---------------------------------------------------------------------------
# univariate densities
# ---------------------------------------------------------------------------


def logpdf_st_uni(y, dist: SkewTUni):
    """Log density of the univariate skew-t.

    For finite nu:  2 t(y | mu, omega2, nu) T_{nu+1}(lam r sqrt((nu+1)/(nu+r^2)))
    with r = (y - mu)/omega; delegates to the skew-normal for nu = inf.
    """
    if math.isinf(dist.nu):
        return logpdf_sn_uni(y, dist)
    y = _as_float_array(y)
    omega = math.sqrt(dist.omega2)
    r = (y - dist.mu) / omega
    base = _log_t_pdf(y, dist.mu, dist.omega2, dist.nu)
    arg = dist.lam * r * np.sqrt((dist.nu + 1.0) / (dist.nu + r * r))
    return math.log(2.0) + base + _log_t_cdf(arg, dist.nu + 1.0)


def pdf_st_uni(y, dist: SkewTUni):
    return np.exp(logpdf_st_uni(y, dist))


def logpdf_sn_uni(y, dist: SkewTUni):
    """Log density of the univariate skew-normal: 2 N(y|mu, omega2) Phi(lam r)."""
    y = _as_float_array(y)
    omega = math.sqrt(dist.omega2)
    r = (y - dist.mu) / omega
    return math.log(2.0) + _log_norm_pdf(y, dist.mu, dist.omega2) + _log_norm_cdf(dist.lam * r)


def pdf_sn_uni(y, dist: SkewTUni):
    return np.exp(logpdf_sn_uni(y, dist))


# ---------------------------------------------------------------------------
# multivariate densities
# ---------------------------------------------------------------------------


def lambda_star(sigma, psi):
    """Skewness direction of the density form, from the symmetric-part scale.

    lambda* = Sigma^{-1} psi / sqrt(1 + psi' Sigma^{-1} psi).
    """
    sigma = _as_float_array(sigma)
    psi = _as_float_array(psi)
    chol = np.linalg.cholesky(sigma)
    half = np.linalg.solve(chol, psi)
    si_psi = np.linalg.solve(chol.T, half)
    return si_psi / math.sqrt(1.0 + float(half @ half))


def lambda_star_from_omega(omega, psi):
    """Same direction computed from Omega = Sigma + psi psi'.

    lambda* = Omega^{-1} psi / sqrt(1 - psi' Omega^{-1} psi).
    """
    omega = _as_float_array(omega)
    psi = _as_float_array(psi)
    oi_psi = np.linalg.solve(omega, psi)
    inner = float(psi @ oi_psi)
    if inner >= 1.0:
        raise ValueError("psi' Omega^{-1} psi must be < 1 for a valid skew scale")
    return oi_psi / math.sqrt(1.0 - inner)


def _omega_quad(dist: SkewTMulti, y):
    """(log|Omega|, quadratic form, lambda*'(y - mu)) for rows of y."""
    omega = dist.omega
    chol = np.linalg.cholesky(omega)
    dev = y - dist.mu
    half = np.linalg.solve(chol, dev.T)  # (p, n)
    quad = np.einsum("ij,ij->j", half, half)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    lam = lambda_star(dist.sigma, dist.psi)
    proj = dev @ lam
    return logdet, quad, proj


def logpdf_st_multi(y, dist: SkewTMulti):
    """Log density of the p-variate skew-t.

    2 t_p(y | mu, Omega, nu) T_{nu+p}(lambda*'(y-mu) sqrt((nu+p)/(nu+Q)))
    where Q is the Omega-Mahalanobis quadratic form.
    """
    if math.isinf(dist.nu):
        return logpdf_sn_multi(y, dist)
    y = np.atleast_2d(_as_float_array(y))
    p = dist.p
    nu = dist.nu
    logdet, quad, proj = _omega_quad(dist, y)
    log_t = (
        special.gammaln((nu + p) / 2.0)
        - special.gammaln(nu / 2.0)
        - p / 2.0 * math.log(nu * math.pi)
        - 0.5 * logdet
        - (nu + p) / 2.0 * np.log1p(quad / nu)
    )
    arg = proj * np.sqrt((nu + p) / (nu + quad))
    out = math.log(2.0) + log_t + _log_t_cdf(arg, nu + p)
    return out[0] if out.shape == (1,) else out


def pdf_st_multi(y, dist: SkewTMulti):
    return np.exp(logpdf_st_multi(y, dist))


def logpdf_sn_multi(y, dist: SkewTMulti):
    """Log density of the p-variate skew-normal: 2 N_p(y|mu, Omega) Phi(lambda*'(y-mu))."""
    y = np.atleast_2d(_as_float_array(y))
    p = dist.p
    logdet, quad, proj = _omega_quad(dist, y)
    log_n = -0.5 * (p * LOG2PI + logdet + quad)
    out = math.log(2.0) + log_n + _log_norm_cdf(proj)
    return out[0] if out.shape == (1,) else out


def pdf_sn_multi(y, dist: SkewTMulti):
    return np.exp(logpdf_sn_multi(y, dist))


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def tail_mean_factor(nu) -> float:
    """E[W] for the latent W = |Z|/sqrt(d): sqrt(nu/pi) G((nu-1)/2)/G(nu/2).

    Equals sqrt(2/pi) for nu = inf.  Finite only for nu > 1.
    """
    if math.isinf(nu):
        return math.sqrt(2.0 / math.pi)
    if nu <= 1.0:
        raise ValueError("mean of W requires nu > 1")
    return math.sqrt(nu / math.pi) * math.exp(special.gammaln((nu - 1.0) / 2.0) - special.gammaln(nu / 2.0))


def st_mean(dist):
    """Mean vector (or scalar) of the skew-t / skew-normal law: mu + psi E[W]."""
    b = tail_mean_factor(dist.nu)
    if isinstance(dist, SkewTUni):
        return dist.mu + dist.psi * b
    return dist.mu + dist.psi * b


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def sample_mixing(nu, rng: np.random.Generator, size=None):
    """Mixing precision d ~ Gamma(nu/2, rate=nu/2); exactly ones for nu = inf."""
    if math.isinf(nu):
        return np.ones(size if size is not None else ())
    return rng.gamma(nu / 2.0, 2.0 / nu, size=size)


def sample_st_parts(mu, sigma, psi, nu, n, rng: np.random.Generator):
    """Draw (y, w, d) jointly from the convolution representation.

    Returns arrays of shapes (n, p), (n,), (n,).  Exposing the latent
    (w, d) supports conditional-law oracles that bin on y.
    """
    mu = _as_float_array(mu)
    sigma = _as_float_array(sigma)
    psi = _as_float_array(psi)
    p = mu.shape[0]
    d = sample_mixing(nu, rng, size=n)
    w = np.abs(rng.standard_normal(n)) / np.sqrt(d)
    chol = np.linalg.cholesky(sigma)
    eps = rng.standard_normal((n, p)) @ chol.T
    y = mu + np.outer(w, psi) + eps / np.sqrt(d)[:, None]
    return y, w, d


def sample_st(dist, n, rng: np.random.Generator):
    """Draw n variates from a SkewTUni or SkewTMulti law."""
    if isinstance(dist, SkewTUni):
        y, _, _ = sample_st_parts(
            np.array([dist.mu]), np.array([[dist.sigma2]]), np.array([dist.psi]), dist.nu, n, rng
        )
        return y[:, 0]
    y, _, _ = sample_st_parts(dist.mu, dist.sigma, dist.psi, dist.nu, n, rng)
    return y


def trunc_norm_lower(loc, scale, lower, rng: np.random.Generator):
    """Exact draws from N(loc, scale^2) conditioned on x > lower (vectorized).

    Inverse-survival in the bulk; Robert's exponential rejection once the
    standardized bound exceeds ``_FAR_TAIL`` (where the normal survival
    function loses relative accuracy).
    """
    loc, scale, lower = np.broadcast_arrays(
        _as_float_array(loc), _as_float_array(scale), _as_float_array(lower)
    )
    alpha = (lower - loc) / scale
    z = np.empty_like(alpha)

    bulk = alpha <= _FAR_TAIL
    if np.any(bulk):
        a = alpha[bulk]
        sf = _norm_cdf(-a)
        u = 1.0 - rng.uniform(size=a.shape)  # in (0, 1], keeps u*sf > 0
        z[bulk] = -special.ndtri(u * sf)

    far = ~bulk
    if np.any(far):
        a = alpha[far].copy()
        out = np.empty_like(a)
        todo = np.ones(a.shape, dtype=bool)
        lam = (a + np.sqrt(a * a + 4.0)) / 2.0
        while np.any(todo):
            k = int(todo.sum())
            prop = a[todo] + rng.exponential(size=k) / lam[todo]
            ok = rng.uniform(size=k) <= np.exp(-0.5 * (prop - lam[todo]) ** 2)
            idx = np.flatnonzero(todo)[ok]
            out[idx] = prop[ok]
            todo[idx] = False
        z[far] = out

    res = loc + scale * z
    if res.shape == ():
        return float(res)
    return res


def trunc_t_lower(loc, scale, df, lower, rng: np.random.Generator):
    """Exact draws from t_df(loc, scale^2) conditioned on x > lower (vectorized).

    Inverse-survival through the t quantile function; the polynomial tail
    of the t survival function keeps this accurate arbitrarily far out.
    """
    loc, scale, df, lower = np.broadcast_arrays(
        _as_float_array(loc), _as_float_array(scale), _as_float_array(df), _as_float_array(lower)
    )
    alpha = (lower - loc) / scale
    sf = special.stdtr(df, -alpha)
    u = 1.0 - rng.uniform(size=alpha.shape)
    z = -special.stdtrit(df, u * sf)
    res = loc + scale * z
    if res.shape == ():
        return float(res)
    return res


def sample_truncated(spec: TruncatedSpec, rng: np.random.Generator, size=None):
    """Draw from a TruncatedSpec; normal branch for nu = inf, t otherwise."""
    shape = () if size is None else size
    scale = math.sqrt(spec.scale2)
    if math.isinf(spec.nu):
        out = trunc_norm_lower(
            np.broadcast_to(spec.loc, shape), scale, spec.lower, rng
        )
    else:
        out = trunc_t_lower(
            np.broadcast_to(spec.loc, shape), scale, spec.nu, spec.lower, rng
        )
    return out


def truncated_cdf(spec: TruncatedSpec, x):
    """Analytic CDF of the truncated law (for distributional tests)."""
    x = _as_float_array(x)
    scale = math.sqrt(spec.scale2)
    if math.isinf(spec.nu):
        sf = lambda t: _norm_cdf(-(t - spec.loc) / scale)  # noqa: E731
    else:
        sf = lambda t: special.stdtr(spec.nu, -(t - spec.loc) / scale)  # noqa: E731
    sf_low = sf(spec.lower)
    out = (sf_low - sf(np.maximum(x, spec.lower))) / sf_low
    return np.clip(out, 0.0, 1.0)
