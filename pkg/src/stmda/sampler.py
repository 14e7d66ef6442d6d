"""Monotone data augmentation sampler for the sequential-regression MMRM.

One sweep updates, in order: the covariance hyperparameters rho_j, the
skewness hyperparameters d_psi_j together with the blocked per-visit
regression draws (theta_j, gamma_j), the shared-coefficient vector eta,
the degrees of freedom nu by a random-walk Metropolis step on
log(nu - nu_l) against the observed-data likelihood, the per-subject
latents (d_i, W_i) and interior-gap outcomes, and finally two
parameter-expansion rescaling moves that shuttle scale between (d,
gamma) and between (W, psi_under).  Monotone dropout tails are never
augmented; only interior gaps are.

The observed-data likelihood is evaluated with the triangular shortcut
(no matrix inversions) for gap-free subjects and the dense marginal
skew-t density for subjects with interior gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import special, stats
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from . import priors as pr
from .conditional import augmented_posterior, draw_augmented, loglik_observed_dense
from .data import PatternedDataset
from .distributions import trunc_norm_lower, trunc_t_lower
from .ldl import LDLFactor, l_matrix, u_matrix
from .modelspec import ModelSpec

__all__ = [
    "SamplerConfig",
    "ParameterState",
    "DrawStore",
    "DicResult",
    "run_chain",
    "compute_dic",
    "observed_loglik",
]

LOG2PI = math.log(2.0 * math.pi)


@dataclass
class SamplerConfig:
    n_draws: int = 1000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    nu_init: float = 10.0
    mh_scale: float = 1.0          # initial random-walk SD on log(nu - nu_l)
    mh_target: float = 0.45        # Robbins-Monro acceptance target
    adapt: bool = True             # adapt mh_scale during burn-in
    nu_update: str = "blocked"     # "blocked" (observed-data MH) or "conditional"
    px: bool = True                # parameter-expansion moves on/off

    def __post_init__(self):
        if self.n_draws < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("need n_draws >= 1, burn_in >= 0, thin >= 1")
        if self.nu_update not in ("blocked", "conditional"):
            raise ValueError("nu_update must be 'blocked' or 'conditional'")


@dataclass
class ParameterState:
    """Mutable chain state; theta[j] = (alpha_under_j, [psi_under_j], beta_j)."""

    theta: list
    gamma: np.ndarray
    eta: np.ndarray
    nu: float
    rho: np.ndarray
    d_psi: np.ndarray
    d: np.ndarray        # (n,) mixing precisions, subjects with s_i >= 1
    w: np.ndarray        # (n,) skew factors, zeros for symmetric variants
    y_fill: np.ndarray   # (n_tot, p) outcomes with interior gaps filled

    def alpha_under(self, spec: ModelSpec) -> np.ndarray:
        return np.stack([t[: spec.q] for t in self.theta])

    def psi_under(self, spec: ModelSpec) -> np.ndarray:
        if not spec.has_skew:
            return np.zeros(spec.p)
        return np.array([t[spec.q] for t in self.theta])

    def beta(self, spec: ModelSpec) -> np.ndarray:
        p = spec.p
        off = spec.q + (1 if spec.has_skew else 0)
        b = np.zeros((p, p))
        for j in range(p):
            b[j, :j] = self.theta[j][off : off + j]
        return b

    def factor(self, spec: ModelSpec) -> LDLFactor:
        return LDLFactor(beta=self.beta(spec), gamma=self.gamma.copy())


# ---------------------------------------------------------------------------
# residuals and observed-data likelihood
# ---------------------------------------------------------------------------


def _zeta_plain(eta, data: PatternedDataset) -> np.ndarray:
    """(n_tot, p) shared-coefficient offsets sum_k eta_k z_ikj."""
    if data.r_z == 0:
        return np.zeros((data.n_tot, data.p))
    return np.tensordot(np.asarray(eta, dtype=float), data.z, axes=(0, 1))


def _location_residuals(alpha_under, beta, zeta_under, data: PatternedDataset, y=None):
    """r_ij = y_ij - sum_t beta[j,t] y_it - alpha_under_j'x_i - zeta_under_ij.

    Rows are valid through each subject's last observed visit provided
    interior gaps in y have been filled.
    """
    y = data.y if y is None else y
    # zero the unused NaN tail cells: 0 * nan would poison the matmul rows
    y = np.where(np.isnan(y), 0.0, y)
    umat = np.eye(data.p) - np.tril(beta, k=-1)
    resid = y @ umat.T - data.x @ alpha_under.T
    if zeta_under is not None:
        resid = resid - zeta_under
    return resid


def observed_loglik(
    state_or_parts,
    spec: ModelSpec,
    data: PatternedDataset,
    nu: float | None = None,
) -> np.ndarray:
    """Per-subject observed-data log likelihood under the current parameters.

    Gap-free subjects use cumulative triangular identities; subjects
    with interior gaps get the dense marginal density of their observed
    subvector.  Subjects with no observed visits contribute zero.
    """
    st = state_or_parts
    alpha_under = st.alpha_under(spec)
    psi_under = st.psi_under(spec)
    beta = st.beta(spec)
    gamma = st.gamma
    nu = st.nu if nu is None else nu

    zeta_p = _zeta_plain(st.eta, data)
    umat = np.eye(data.p) - np.tril(beta, k=-1)
    zeta_u = zeta_p @ umat.T if data.r_z else None
    resid = _location_residuals(alpha_under, beta, zeta_u, data, y=st.y_fill)

    s = data.s
    p = data.p
    out = np.zeros(data.n_tot)
    clean = (~data.has_gaps) & (s >= 1)

    if np.any(clean):
        g = gamma
        gr2 = np.cumsum(resid**2 * g, axis=1)
        si = s[clean] - 1
        rows = resid[clean]
        qf = np.take_along_axis(gr2[clean], si[:, None], axis=1)[:, 0]
        logdet_sig = np.cumsum(-np.log(g))[si]
        sv = s[clean].astype(float)
        if spec.has_skew:
            gp = g * psi_under
            ip = np.take_along_axis(np.cumsum(rows * gp, axis=1), si[:, None], axis=1)[:, 0]
            a_cum = 1.0 + np.cumsum(gp * psi_under)
            a = a_cum[si]
            q_om = qf - ip**2 / a
            proj = ip / np.sqrt(a)
            logdet = logdet_sig + np.log(a)
        else:
            q_om, proj, logdet = qf, None, logdet_sig
        if math.isinf(nu):
            core = -0.5 * (sv * LOG2PI + logdet + q_om)
            if spec.has_skew:
                core = math.log(2.0) + core + special.log_ndtr(proj)
        else:
            core = (
                special.gammaln((nu + sv) / 2.0)
                - special.gammaln(nu / 2.0)
                - sv / 2.0 * math.log(nu * math.pi)
                - 0.5 * logdet
                - (nu + sv) / 2.0 * np.log1p(q_om / nu)
            )
            if spec.has_skew:
                arg = proj * np.sqrt((nu + sv) / (nu + q_om))
                core = math.log(2.0) + core + np.log(np.clip(special.stdtr(nu + sv, arg), 1e-320, None))
        out[clean] = core

    gap_rows = np.flatnonzero(data.has_gaps)
    if gap_rows.size:
        lmat = solve_triangular(umat, np.eye(p), lower=True, unit_diagonal=True)
        alpha = lmat @ alpha_under
        psi = lmat @ psi_under
        sigma = (lmat / gamma) @ lmat.T
        for i in gap_rows:
            idx = np.flatnonzero(data.observed[i])
            mu_full = alpha @ data.x[i] + zeta_p[i]
            out[i] = loglik_observed_dense(
                data.y[i, idx], idx, mu_full, sigma, psi, nu, spec.has_skew
            )
    return out


# ---------------------------------------------------------------------------
# individual sweep steps
# ---------------------------------------------------------------------------


def _step_rho(state: ParameterState, spec, prior: pr.PriorConfig, rng):
    state.rho = pr.huang_wand_rho_update(state.factor(spec), prior, rng)


def _gamma_exponent(n_j, n_w_val, j1, p, r_eff):
    """Direct power on gamma_j in the blocked conditional (j1 is 1-based)."""
    return (n_j + n_w_val + 2.0 * j1 - p - 3.0 + r_eff) / 2.0


def _step_coeffs(state: ParameterState, spec, prior, data, rng):
    """Blocked draw of (d_psi_j, theta_j, gamma_j) for each component."""
    q, p = spec.q, spec.p
    skew = 1 if spec.has_skew else 0
    n_w_val = pr.n_w(prior, p)
    r_eff = pr.rank_r(prior, q, spec.has_skew)
    zeta_p = _zeta_plain(state.eta, data)
    y_adj = state.y_fill - zeta_p  # responses with shared-coefficient part removed

    for j in range(p):
        if spec.has_skew:
            pu_j = state.theta[j][q]
            state.d_psi[j] = pr.skewness_hyper_update(state.gamma[j], pu_j, rng)
        n_j = data.n_at(j + 1)
        cols = [data.x[:n_j]]
        if skew:
            cols.append(state.w[:n_j, None])
        cols.append(y_adj[:n_j, : j + 1])
        xt = np.concatenate(cols, axis=1)  # (n_j, K+1) with response last
        e_j = pr.build_e_matrix(prior, state.rho, state.d_psi[j], p, q, j + 1, spec.has_skew)
        g_mat = (xt.T * state.d[:n_j]) @ xt + e_j
        k = q + skew + j
        g11 = g_mat[:k, :k]
        g12 = g_mat[:k, k]
        g22 = g_mat[k, k]
        try:
            cf = cho_factor(g11, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                f"regression precision for component {j + 1} is not positive definite; "
                "more data or an informative prior is required"
            ) from exc
        mean = cho_solve(cf, g12)
        s_val = g22 - float(g12 @ mean)
        shape = _gamma_exponent(n_j, n_w_val, j + 1, p, r_eff) - k / 2.0 + 1.0
        if shape <= 0.0 or s_val <= 0.0:
            raise ValueError(
                f"improper conditional for gamma_{j + 1} (shape {shape:.3g}, rate {s_val / 2.0:.3g})"
            )
        gam = rng.gamma(shape, 2.0 / s_val)
        z = rng.standard_normal(k)
        theta = mean + solve_triangular(cf[0].T, z, lower=False) / math.sqrt(gam)
        state.gamma[j] = gam
        state.theta[j] = theta


def _step_eta(state: ParameterState, spec, prior, data, rng):
    """Conjugate draw of the shared coefficients eta."""
    r_z = data.r_z
    umat = np.eye(data.p) - np.tril(state.beta(spec), k=-1)
    # residuals without the eta part: subtract per-visit and skew terms only
    # (NaN tail cells are zeroed first; their resid columns are never read)
    y_safe = np.where(np.isnan(state.y_fill), 0.0, state.y_fill)
    resid = y_safe @ umat.T - data.x @ state.alpha_under(spec).T
    if spec.has_skew:
        resid = resid - np.outer(
            np.concatenate([state.w, np.zeros(data.n_tot - state.w.shape[0])]),
            state.psi_under(spec),
        )
    z_under = np.einsum("jt,nkt->nkj", umat, data.z)
    prec = np.zeros((r_z, r_z))
    rhs = np.zeros(r_z)
    if prior.v_eta0 is not None:
        v0inv = np.linalg.inv(np.asarray(prior.v_eta0, dtype=float))
        prec += v0inv
        if prior.eta0 is not None:
            rhs += v0inv @ np.asarray(prior.eta0, dtype=float)
    for j in range(data.p):
        n_j = data.n_at(j + 1)
        zj = z_under[:n_j, :, j]
        dw = state.d[:n_j]
        prec += state.gamma[j] * (zj.T * dw) @ zj
        rhs += state.gamma[j] * zj.T @ (dw * resid[:n_j, j])
    try:
        cf = cho_factor(prec, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("shared-coefficient precision not positive definite") from exc
    mean = cho_solve(cf, rhs)
    state.eta = mean + solve_triangular(cf[0].T, rng.standard_normal(r_z), lower=False)


def _nu_conditional_logtarget(nu, d, lam, p_dim, nu_l, nu_m):
    if not nu_l < nu < nu_m:
        return -math.inf
    n = d.shape[0]
    h = nu / 2.0
    return (
        pr.pc_logpdf(nu, lam, p_dim, nu_l, nu_m)
        + n * (h * math.log(h) - special.gammaln(h))
        + (h - 1.0) * float(np.sum(np.log(d)))
        - h * float(np.sum(d))
    )


def _step_nu(state, spec, prior, data, rng, mh_state, lam):
    """Random-walk MH on log(nu - nu_l); returns acceptance probability."""
    nu_l, nu_m = prior.nu_l, prior.nu_m
    nu = state.nu
    prop = nu_l + math.exp(math.log(nu - nu_l) + mh_state["scale"] * rng.standard_normal())
    if state.nu <= nu_l:
        raise ValueError("current nu out of support")

    if mh_state["mode"] == "blocked":
        cur = pr.pc_logpdf(nu, lam, data.p, nu_l, nu_m) + float(
            np.sum(observed_loglik(state, spec, data))
        )
        if not nu_l < prop < nu_m:
            new = -math.inf
        else:
            new = pr.pc_logpdf(prop, lam, data.p, nu_l, nu_m) + float(
                np.sum(observed_loglik(state, spec, data, nu=prop))
            )
    else:
        cur = _nu_conditional_logtarget(nu, state.d, lam, data.p, nu_l, nu_m)
        new = _nu_conditional_logtarget(prop, state.d, lam, data.p, nu_l, nu_m)

    log_acc = new - cur + math.log(prop - nu_l) - math.log(nu - nu_l)
    acc_prob = min(1.0, math.exp(min(log_acc, 0.0)))
    if rng.uniform() < acc_prob:
        state.nu = prop
    return acc_prob


def _step_latents(state: ParameterState, spec, prior, data, rng):
    """Draw (d_i, W_i) and interior-gap outcomes for subjects with s_i >= 1.

    Gap-free subjects are handled per dropout pattern with vectorized
    truncated draws; subjects with gaps get the full joint posterior.
    """
    n = state.d.shape[0]
    if n == 0:
        return
    psi_under = state.psi_under(spec)
    alpha_under = state.alpha_under(spec)
    beta = state.beta(spec)
    gamma = state.gamma
    nu = state.nu
    umat = np.eye(data.p) - np.tril(beta, k=-1)
    zeta_p = _zeta_plain(state.eta, data)
    zeta_u = zeta_p @ umat.T if data.r_z else None
    resid = _location_residuals(alpha_under, beta, zeta_u, data, y=state.y_fill)[:n]

    gp = gamma * psi_under
    a_cum = 1.0 + np.cumsum(gp * psi_under)
    clean = ~data.has_gaps[:n]
    svals = data.s[:n]

    for s_level in np.unique(svals[clean]):
        rows = np.flatnonzero(clean & (svals == s_level))
        sl = int(s_level)
        rr = resid[rows, :sl]
        ss = rr**2 @ gamma[:sl]
        if spec.has_skew:
            a = a_cum[sl - 1]
            b = rr @ gp[:sl]
            loc = b / a
            if spec.has_tails:
                nu_d = nu + ss - b**2 / a
                w = trunc_t_lower(loc, np.sqrt(nu_d / (a * (nu + sl))), nu + sl, 0.0, rng)
                d = rng.gamma((nu + sl + 1.0) / 2.0, 2.0 / (nu_d + a * (w - loc) ** 2))
            else:
                w = trunc_norm_lower(loc, math.sqrt(1.0 / a), 0.0, rng)
                d = np.ones(rows.size)
            state.w[rows] = w
            state.d[rows] = d
        elif spec.has_tails:
            state.d[rows] = rng.gamma((nu + sl) / 2.0, 2.0 / (nu + ss))
        # symmetric-normal: d stays 1, w stays 0

    for i in np.flatnonzero(data.has_gaps[:n]):
        zeta_i = zeta_u[i] if zeta_u is not None else None
        post = augmented_posterior(
            state.theta, gamma, data.x[i], state.y_fill[i], data.observed[i],
            int(data.s[i]), nu, spec.has_skew, zeta=zeta_i,
        )
        d_i, w_i, y_gap = draw_augmented(post, rng, spec.has_tails)
        state.d[i] = d_i if spec.has_tails else 1.0
        state.w[i] = w_i
        state.y_fill[i, post.gap_idx] = y_gap


def _draw_gig(lam, chi, psi, rng):
    """Generalized inverse Gaussian draw, density ~ x^{lam-1} e^{-(psi x + chi/x)/2}."""
    if chi <= 0.0:
        if lam <= 0.0:
            raise ValueError("GIG with chi = 0 requires a positive power")
        return rng.gamma(lam, 2.0 / psi)
    if psi <= 0.0:
        if lam >= 0.0:
            raise ValueError("GIG with psi = 0 requires a negative power")
        return 1.0 / rng.gamma(-lam, 2.0 / chi)
    b = math.sqrt(chi * psi)
    return float(stats.geninvgauss.rvs(lam, b, scale=math.sqrt(chi / psi), random_state=rng))


def _prior_quadratic(state, spec, prior):
    """sum_j gamma_j * (-theta_j, 1)' E_j (-theta_j, 1)."""
    total = 0.0
    for j in range(spec.p):
        e_j = pr.build_e_matrix(
            prior, state.rho, state.d_psi[j], spec.p, spec.q, j + 1, spec.has_skew
        )
        v = np.append(-state.theta[j], 1.0)
        total += state.gamma[j] * float(v @ e_j @ v)
    return total


def _step_px_scale(state, spec, prior, data, rng):
    """Rescaling move g: d -> g d, gamma -> gamma / g (heavy-tail variants)."""
    n = state.d.shape[0]
    p = spec.p
    n_w_val = pr.n_w(prior, p)
    r_eff = pr.rank_r(prior, spec.q, spec.has_skew)
    nu = state.nu
    if spec.has_skew:
        lam = (n * (1.0 + nu) - p * (n_w_val + r_eff)) / 2.0
        psi_g = float(np.sum(state.d * (nu + state.w**2)))
    else:
        lam = (n * nu - p * (n_w_val + r_eff)) / 2.0
        psi_g = nu * float(np.sum(state.d))
    chi_g = _prior_quadratic(state, spec, prior)
    g = _draw_gig(lam, chi_g, psi_g, rng)
    state.d *= g
    state.gamma /= g


def _step_px_skew(state, spec, prior, data, rng):
    """Rescaling move h: W -> h W, psi_under -> psi_under / h (skew variants)."""
    n = state.d.shape[0]
    p = spec.p
    if n <= p:
        return  # move undefined for degenerate sample sizes
    psi_under = state.psi_under(spec)
    lam = (n - p) / 2.0
    psi_g = float(np.sum(state.d * state.w**2))
    chi_g = float(np.sum(state.gamma * psi_under**2 * 4.0 * state.d_psi / pr.PI2))
    h = math.sqrt(_draw_gig(lam, chi_g, psi_g, rng))
    state.w *= h
    for j in range(p):
        state.theta[j][spec.q] /= h


# ---------------------------------------------------------------------------
# initialization, storage and the main loop
# ---------------------------------------------------------------------------


def _initial_state(data: PatternedDataset, spec: ModelSpec, prior, cfg, rng) -> ParameterState:
    p, q = spec.p, spec.q
    skew = 1 if spec.has_skew else 0
    n = data.n

    y_fill = data.y.copy()
    col_means = np.nanmean(np.where(data.observed, data.y, np.nan), axis=0)
    col_means = np.where(np.isfinite(col_means), col_means, 0.0)
    gm = data.gap_mask
    y_fill[gm] = np.broadcast_to(col_means, y_fill.shape)[gm]

    w = np.abs(rng.standard_normal(n)) if skew else np.zeros(n)
    theta = []
    gamma = np.empty(p)
    for j in range(p):
        n_j = data.n_at(j + 1)
        cols = [data.x[:n_j]]
        if skew:
            cols.append(w[:n_j, None])
        cols.append(y_fill[:n_j, :j])
        xt = np.concatenate(cols, axis=1)
        yj = y_fill[:n_j, j]
        k = xt.shape[1]
        ridge = 1e-6 * np.eye(k)
        coef = np.linalg.solve(xt.T @ xt + ridge, xt.T @ yj)
        resid = yj - xt @ coef
        dof = max(n_j - k, 1)
        gamma[j] = 1.0 / max(float(resid @ resid) / dof, 1e-8) if n_j else 1.0
        theta.append(coef)

    nu = cfg.nu_init if spec.has_tails else math.inf
    return ParameterState(
        theta=theta,
        gamma=gamma,
        eta=np.zeros(data.r_z),
        nu=nu,
        rho=np.ones(p),
        d_psi=np.ones(p),
        d=np.ones(n),
        w=w,
        y_fill=y_fill,
    )


@dataclass
class DrawStore:
    """Thinned post-burn-in draws plus everything imputation needs."""

    spec: ModelSpec
    theta: list                 # per draw: list of p arrays
    gamma: np.ndarray           # (B, p)
    eta: np.ndarray             # (B, r_z)
    nu: np.ndarray              # (B,)
    d: np.ndarray               # (B, n)
    w: np.ndarray               # (B, n)
    gap_vals: np.ndarray        # (B, n_gap_cells) in data.gap_mask order
    deviance: np.ndarray        # (B,)
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.nu.shape[0]

    def state_at(self, b: int, data: PatternedDataset) -> ParameterState:
        """Reassemble a full ParameterState for draw b."""
        y_fill = data.y.copy()
        if self.gap_vals.shape[1]:
            y_fill[data.gap_mask] = self.gap_vals[b]
        return ParameterState(
            theta=[t.copy() for t in self.theta[b]],
            gamma=self.gamma[b].copy(),
            eta=self.eta[b].copy(),
            nu=float(self.nu[b]),
            rho=np.ones(self.spec.p),
            d_psi=np.ones(self.spec.p),
            d=self.d[b].copy(),
            w=self.w[b].copy(),
            y_fill=y_fill,
        )

    def as_table(self) -> pd.DataFrame:
        """Columnar export: theta[j,k], gamma[j], eta[k], nu, deviance, sigma[j,k], psi[j]."""
        spec = self.spec
        bdraws = self.n_draws
        cols = {}
        for j in range(spec.p):
            klen = self.theta[0][j].shape[0]
            for k in range(klen):
                cols[f"theta[{j + 1},{k + 1}]"] = np.array(
                    [self.theta[b][j][k] for b in range(bdraws)]
                )
        for j in range(spec.p):
            cols[f"gamma[{j + 1}]"] = self.gamma[:, j]
        for k in range(self.eta.shape[1]):
            cols[f"eta[{k + 1}]"] = self.eta[:, k]
        cols["nu"] = self.nu
        cols["deviance"] = self.deviance
        sig = np.empty((bdraws, spec.p, spec.p))
        psis = np.empty((bdraws, spec.p))
        for b in range(bdraws):
            lmat = solve_triangular(
                np.eye(spec.p) - np.tril(_beta_of(self.theta[b], spec), k=-1),
                np.eye(spec.p), lower=True, unit_diagonal=True,
            )
            sig[b] = (lmat / self.gamma[b]) @ lmat.T
            psis[b] = lmat @ _psi_under_of(self.theta[b], spec)
        for j in range(spec.p):
            for k in range(j + 1):
                cols[f"sigma[{j + 1},{k + 1}]"] = sig[:, j, k]
        if spec.has_skew:
            for j in range(spec.p):
                cols[f"psi[{j + 1}]"] = psis[:, j]
        return pd.DataFrame(cols)

    def to_csv(self, path):
        self.as_table().to_csv(path, index=False)


def _beta_of(theta, spec):
    off = spec.q + (1 if spec.has_skew else 0)
    b = np.zeros((spec.p, spec.p))
    for j in range(spec.p):
        b[j, :j] = theta[j][off : off + j]
    return b


def _psi_under_of(theta, spec):
    if not spec.has_skew:
        return np.zeros(spec.p)
    return np.array([t[spec.q] for t in theta])


def run_chain(
    data: PatternedDataset,
    spec: ModelSpec,
    prior: pr.PriorConfig | None = None,
    cfg: SamplerConfig | None = None,
) -> DrawStore:
    """Run one MDA chain and return the thinned post-burn-in draws."""
    prior = prior or pr.PriorConfig()
    cfg = cfg or SamplerConfig()
    if data.p < 1 or data.n_tot < 1:
        raise ValueError("empty dataset")
    if spec.p != data.p or spec.q != data.q or spec.r_z != data.r_z:
        raise ValueError("model spec and dataset shapes disagree")
    if prior.cov_prior == "jeffreys" and spec.has_skew:
        raise ValueError("the jeffreys covariance mode is for symmetric variants only")
    if spec.has_tails and not prior.nu_l < cfg.nu_init < prior.nu_m:
        raise ValueError("nu_init must lie inside (nu_l, nu_m)")

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    state = _initial_state(data, spec, prior, cfg, rng)
    lam = pr.resolve_pc_lambda(prior, data.p)
    mh_state = {"scale": cfg.mh_scale, "mode": cfg.nu_update}
    gap_cells = int(data.gap_mask.sum())

    n_iter = cfg.burn_in + cfg.thin * cfg.n_draws
    kept_theta, kept = [], {
        "gamma": [], "eta": [], "nu": [], "d": [], "w": [], "gap": [], "dev": []
    }
    acc_sum, acc_n = 0.0, 0

    for it in range(n_iter):
        if prior.cov_prior == "hw":
            _step_rho(state, spec, prior, rng)
        _step_coeffs(state, spec, prior, data, rng)
        if data.r_z:
            _step_eta(state, spec, prior, data, rng)
        if spec.has_tails:
            acc = _step_nu(state, spec, prior, data, rng, mh_state, lam)
            acc_sum += acc
            acc_n += 1
            if cfg.adapt and it < cfg.burn_in:
                step = min(0.25, 2.0 / math.sqrt(it + 1.0))
                mh_state["scale"] = float(
                    np.clip(mh_state["scale"] * math.exp(step * (acc - cfg.mh_target)), 1e-3, 20.0)
                )
        _step_latents(state, spec, prior, data, rng)
        if cfg.px:
            if spec.has_tails:
                _step_px_scale(state, spec, prior, data, rng)
            if spec.has_skew:
                _step_px_skew(state, spec, prior, data, rng)

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == cfg.thin - 1:
            kept_theta.append([t.copy() for t in state.theta])
            kept["gamma"].append(state.gamma.copy())
            kept["eta"].append(state.eta.copy())
            kept["nu"].append(state.nu)
            kept["d"].append(state.d.copy())
            kept["w"].append(state.w.copy())
            kept["gap"].append(state.y_fill[data.gap_mask].copy())
            kept["dev"].append(-2.0 * float(np.sum(observed_loglik(state, spec, data))))

    return DrawStore(
        spec=spec,
        theta=kept_theta,
        gamma=np.array(kept["gamma"]),
        eta=np.array(kept["eta"]).reshape(len(kept_theta), data.r_z),
        nu=np.array(kept["nu"]),
        d=np.array(kept["d"]).reshape(len(kept_theta), data.n),
        w=np.array(kept["w"]).reshape(len(kept_theta), data.n),
        gap_vals=np.array(kept["gap"]).reshape(len(kept_theta), gap_cells),
        deviance=np.array(kept["dev"]),
        meta={
            "seed": cfg.seed,
            "pc_lambda": lam,
            "mh_scale_final": mh_state["scale"],
            "mh_acceptance": acc_sum / acc_n if acc_n else None,
            "variant": spec.variant,
            "burn_in": cfg.burn_in,
            "thin": cfg.thin,
            "nu_update": cfg.nu_update,
            "px": cfg.px,
        },
    )


# ---------------------------------------------------------------------------
# model comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DicResult:
    dic: float
    mean_deviance: float
    deviance_at_mean: float
    p_d: float


def compute_dic(store: DrawStore, data: PatternedDataset, spec: ModelSpec) -> DicResult:
    """Deviance information criterion from stored draws.

    DIC = 2 * mean(deviance) - deviance(posterior-mean parameters); the
    plug-in point averages theta, gamma, eta and nu on their raw scales.
    """
    bdraws = store.n_draws
    mean_theta = [
        np.mean([store.theta[b][j] for b in range(bdraws)], axis=0) for j in range(spec.p)
    ]
    state = ParameterState(
        theta=mean_theta,
        gamma=store.gamma.mean(axis=0),
        eta=store.eta.mean(axis=0),
        nu=float(store.nu.mean()) if spec.has_tails else math.inf,
        rho=np.ones(spec.p),
        d_psi=np.ones(spec.p),
        d=np.ones(data.n),
        w=np.zeros(data.n),
        y_fill=data.y.copy(),
    )
    d_hat = -2.0 * float(np.sum(observed_loglik(state, spec, data)))
    d_bar = float(store.deviance.mean())
    return DicResult(
        dic=2.0 * d_bar - d_hat,
        mean_deviance=d_bar,
        deviance_at_mean=d_hat,
        p_d=d_bar - d_hat,
    )
