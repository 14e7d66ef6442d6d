"""Independent numerical oracles used by the test suite.

Nothing here shares formulas with the implementation it checks: the
conditional-law oracle brute-forces conditioning by rejection on a
small ball around the conditioning values; the tail-prior oracle
evaluates the Kullback-Leibler divergence by Monte Carlo or radial
quadrature rather than the closed form; scenario generation produces
synthetic trials with controlled dropout for recovery studies; and the
chain diagnostics implement standard autocorrelation-based effective
sample sizes for draw tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special, stats

from .data import PatternedDataset
from .distributions import sample_st_parts, tail_mean_factor

__all__ = [
    "rejection_conditional_oracle",
    "st_marginal_sd",
    "numerical_kl",
    "mc_log_moments",
    "SyntheticScenario",
    "generate_scenario",
    "acf",
    "ess_geyer",
    "chain_diagnostics",
]


# ---------------------------------------------------------------------------
# rejection oracle for conditional laws
# ---------------------------------------------------------------------------


def st_marginal_sd(sigma, psi, nu) -> np.ndarray:
    """Marginal SDs of the skew-t components (used to scale the ball)."""
    sigma = np.asarray(sigma, dtype=float)
    psi = np.asarray(psi, dtype=float)
    b = tail_mean_factor(nu)
    if math.isinf(nu):
        var = np.diag(sigma) + psi**2 * (1.0 - 2.0 / math.pi)
    else:
        var = (np.diag(sigma) + psi**2) * nu / (nu - 2.0) - psi**2 * b**2
    return np.sqrt(var)


def rejection_conditional_oracle(
    mu,
    sigma,
    psi,
    nu,
    prefix,
    s: int,
    rng: np.random.Generator,
    n_target: int = 4000,
    ball: float = 0.15,
    batch: int = 200_000,
    max_draws: int = 40_000_000,
) -> dict:
    """Moments of (W, d, tail) given y_1..y_s near the prefix values.

    Draws (y, W, d) jointly from the unconditional law and keeps draws
    whose first s components all fall within ball * marginal SD of the
    conditioning values.  Returns means with Monte Carlo SEs; raises
    when the acceptance region is too improbable to populate.
    """
    mu = np.asarray(mu, dtype=float)
    prefix = np.asarray(prefix, dtype=float)[:s]
    sds = st_marginal_sd(sigma, psi, nu)[:s]
    kept_w, kept_d, kept_y = [], [], []
    total = 0
    while sum(len(k) for k in kept_w) < n_target and total < max_draws:
        y, w, d = sample_st_parts(mu, sigma, psi, nu, batch, rng)
        total += batch
        ok = np.all(np.abs(y[:, :s] - prefix) <= ball * sds, axis=1) if s else np.ones(batch, bool)
        kept_w.append(w[ok])
        kept_d.append(d[ok])
        kept_y.append(y[ok, s:])
    w = np.concatenate(kept_w)
    d = np.concatenate(kept_d)
    ytail = np.concatenate(kept_y)
    n_acc = w.shape[0]
    if n_acc < 50:
        raise RuntimeError(
            f"conditional oracle starved: {n_acc} acceptances in {total} draws "
            f"(rate {n_acc / total:.2e}); widen the ball or simplify the case"
        )

    def _m(v):
        return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(n_acc))

    out = {
        "n_accept": n_acc,
        "n_proposals": total,
        "w": _m(w),
        "d": _m(d),
        "tail": [
            (float(np.mean(ytail[:, j])), float(np.std(ytail[:, j], ddof=1) / math.sqrt(n_acc)))
            for j in range(ytail.shape[1])
        ],
    }
    return out


# ---------------------------------------------------------------------------
# numerical KL between the scaled t and the standard normal
# ---------------------------------------------------------------------------


def _log_ratio_terms(nu: float, p: int):
    """Constants of log t(x) - log N(x) as a function of u = x'x."""
    s2 = (nu - 2.0) / nu
    const = (
        special.gammaln((nu + p) / 2.0)
        - special.gammaln(nu / 2.0)
        - p / 2.0 * math.log(nu * math.pi)
        - p / 2.0 * math.log(s2)
        + p / 2.0 * math.log(2.0 * math.pi)
    )

    def log_ratio(u):
        return const - (nu + p) / 2.0 * np.log1p(u / (s2 * nu)) + u / 2.0

    return s2, log_ratio


def numerical_kl(nu: float, p: int, n_mc: int = 1_000_000, rng=None, method: str = "mc"):
    """KL(t_nu with unit covariance || standard normal) in p dimensions.

    method="mc": average log-ratio under t draws; returns (kl, se).
    method="radial": exact 1-D quadrature exploiting that the log-ratio
    depends on x only through u = x'x, with u/(s2 p) ~ F(p, nu);
    returns (kl, 0.0).
    """
    s2, log_ratio = _log_ratio_terms(nu, p)
    if method == "radial":
        fdist = stats.f(p, nu)

        def integrand(f):
            return log_ratio(s2 * p * f) * fdist.pdf(f)

        # full_output swaps quad's subdivision heuristic (which flags the
        # slowly decaying F tail as "probably divergent") for an explicit
        # error bound we can check ourselves
        out = integrate.quad(integrand, 0.0, np.inf, limit=400, full_output=1)
        val, abserr = float(out[0]), float(out[1])
        if abserr > max(1e-7, 1e-5 * abs(val)):
            raise RuntimeError(f"radial KL quadrature error bound {abserr:.2e}")
        return val, 0.0
    if method != "mc":
        raise ValueError("method must be 'mc' or 'radial'")
    rng = rng or np.random.default_rng(0)
    g = rng.gamma(nu / 2.0, 2.0 / nu, n_mc)
    z = rng.standard_normal((n_mc, p))
    u = s2 * np.einsum("ij,ij->i", z, z) / g
    vals = log_ratio(u)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))


def mc_log_moments(nu: float, p: int, n_mc: int, rng: np.random.Generator):
    """MC estimates of E_t[log t(x)] and E_t[log N(x | 0, I)] with SEs."""
    s2 = (nu - 2.0) / nu
    g = rng.gamma(nu / 2.0, 2.0 / nu, n_mc)
    z = rng.standard_normal((n_mc, p))
    u = s2 * np.einsum("ij,ij->i", z, z) / g
    log_t = (
        special.gammaln((nu + p) / 2.0)
        - special.gammaln(nu / 2.0)
        - p / 2.0 * math.log(nu * math.pi)
        - p / 2.0 * math.log(s2)
        - (nu + p) / 2.0 * np.log1p(u / (s2 * nu))
    )
    log_n = -p / 2.0 * math.log(2.0 * math.pi) - u / 2.0
    rt = math.sqrt(n_mc)
    return (
        (float(log_t.mean()), float(log_t.std(ddof=1) / rt)),
        (float(log_n.mean()), float(log_n.std(ddof=1) / rt)),
    )


# ---------------------------------------------------------------------------
# synthetic trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticScenario:
    """Generative configuration for a two-arm longitudinal trial.

    alpha is (p, q) with columns (intercept, baselines..., treatment);
    dropout "mar" hazards depend on the current observed value, "mnar"
    on the value at the next (about-to-be-missed) visit.
    """

    n_tot: int
    alpha: np.ndarray
    sigma: np.ndarray
    psi: np.ndarray
    nu: float
    dropout: str = "none"           # "none" | "mar" | "mnar"
    dropout_rate: float = 0.0
    intermittent_rate: float = 0.0
    n_baseline: int = 1
    treatment: bool = True

    def __post_init__(self):
        if self.dropout not in ("none", "mar", "mnar"):
            raise ValueError("dropout must be none, mar or mnar")
        alpha = np.asarray(self.alpha, dtype=float)
        p = alpha.shape[0]
        q = 1 + self.n_baseline + (1 if self.treatment else 0)
        if alpha.shape != (p, q):
            raise ValueError(f"alpha must be (p, {q}) for this covariate layout")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=float))

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    @property
    def q(self) -> int:
        return self.alpha.shape[1]


def generate_scenario(sc: SyntheticScenario, seed: int = 0):
    """Simulate a trial; returns (PatternedDataset, truth dict)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 911]))
    n, p = sc.n_tot, sc.p
    cols = [np.ones(n)]
    cols += [rng.standard_normal(n) for _ in range(sc.n_baseline)]
    if sc.treatment:
        g = np.zeros(n)
        g[rng.permutation(n)[: n // 2]] = 1.0
        cols.append(g)
    x = np.column_stack(cols)
    mu = x @ sc.alpha.T

    y0, w, d = sample_st_parts(np.zeros(p), sc.sigma, sc.psi, sc.nu, n, rng)
    y = mu + y0

    s = np.full(n, p)
    if sc.dropout != "none" and sc.dropout_rate > 0.0 and p > 1:
        per_visit = 1.0 - (1.0 - sc.dropout_rate) ** (1.0 / (p - 1))
        active = np.ones(n, dtype=bool)
        for j in range(p - 1):
            driver = y[:, j] if sc.dropout == "mar" else y[:, j + 1]
            zdrv = (driver - driver.mean()) / max(driver.std(), 1e-12)

            def mean_hazard(c, idx=np.flatnonzero(active), zv=zdrv):
                return float(np.mean(special.expit(c + zv[idx]))) - per_visit

            if active.any():
                c0 = optimize.brentq(mean_hazard, -30.0, 30.0)
                h = special.expit(c0 + zdrv)
                drop = active & (rng.uniform(size=n) < h)
                s[drop] = j + 1
                active &= ~drop

    ymiss = y.copy()
    for i in range(n):
        ymiss[i, s[i]:] = np.nan
    if sc.intermittent_rate > 0.0:
        inner = np.zeros((n, p), dtype=bool)
        for i in range(n):
            if s[i] >= 2:
                inner[i, : s[i] - 1] = rng.uniform(size=s[i] - 1) < sc.intermittent_rate
        ymiss[inner] = np.nan

    ds = PatternedDataset.build(x=x, y=ymiss)
    truth = {
        "alpha": sc.alpha,
        "sigma": sc.sigma,
        "psi": sc.psi,
        "nu": sc.nu,
        "dropout_fraction": float(np.mean(s < p)),
        "y_complete": y,
        "treatment_effect_last": float(sc.alpha[p - 1, -1]) if sc.treatment else None,
    }
    return ds, truth


# ---------------------------------------------------------------------------
# chain diagnostics
# ---------------------------------------------------------------------------


def acf(x, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations rho_0..rho_max_lag."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xc = x - x.mean()
    c0 = float(xc @ xc) / n
    if c0 == 0.0:
        return np.full(max_lag + 1, np.nan)
    out = np.empty(min(max_lag, n - 1) + 1)
    for k in range(out.shape[0]):
        out[k] = float(xc[: n - k] @ xc[k:]) / n / c0
    if out.shape[0] < max_lag + 1:
        out = np.concatenate([out, np.zeros(max_lag + 1 - out.shape[0])])
    return out


def ess_geyer(x) -> float:
    """Effective sample size by the initial monotone positive-pair method."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float("nan")
    rho = acf(x, n - 2)
    if np.isnan(rho[0]):
        return float("nan")  # constant chain
    pair_max = (rho.shape[0] - 1) // 2
    tau = -1.0
    prev = np.inf
    for mdx in range(pair_max):
        gam = rho[2 * mdx] + rho[2 * mdx + 1]
        if gam <= 0.0:
            break
        gam = min(gam, prev)
        prev = gam
        tau += 2.0 * gam
    tau = max(tau, 1e-8)
    return n / tau


def chain_diagnostics(table: pd.DataFrame, max_lag: int = 50) -> pd.DataFrame:
    """Per-parameter summary: mean, sd, ESS, MCSE, lag-1 ACF, constant flag."""
    rows = []
    for col in table.columns:
        x = table[col].to_numpy(dtype=float)
        sd = float(np.std(x, ddof=1)) if x.shape[0] > 1 else 0.0
        constant = sd == 0.0
        ess = float("nan") if constant else ess_geyer(x)
        rho = acf(x, max_lag)
        rows.append(
            {
                "parameter": col,
                "mean": float(np.mean(x)),
                "sd": sd,
                "ess": ess,
                "mcse": float("nan") if constant or not np.isfinite(ess) else sd / math.sqrt(ess),
                "acf1": float(rho[1]) if rho.shape[0] > 1 else float("nan"),
                "constant": constant,
            }
        )
    return pd.DataFrame(rows)
