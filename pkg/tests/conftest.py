"""Shared fixtures: one small fitted model reused across the suite."""

import numpy as np
import pytest

from stmda.modelspec import ModelSpec
from stmda.oracles import SyntheticScenario, generate_scenario
from stmda.priors import PriorConfig
from stmda.sampler import SamplerConfig, run_chain

ALPHA3 = np.array([
    [1.0, 0.5, 0.0],
    [1.5, 0.5, 0.6],
    [2.0, 0.5, 1.0],
])
SIGMA3 = np.array([
    [1.0, 0.5, 0.25],
    [0.5, 1.2, 0.6],
    [0.25, 0.6, 1.5],
])
PSI3 = np.array([0.8, 0.8, 0.8])


def make_scenario(n=120, nu=8.0, dropout="mar", rate=0.3, psi=PSI3, alpha=ALPHA3,
                  sigma=SIGMA3, intermittent=0.0, seed=3):
    sc = SyntheticScenario(
        n_tot=n, alpha=alpha, sigma=sigma, psi=np.asarray(psi, dtype=float), nu=nu,
        dropout=dropout, dropout_rate=rate, intermittent_rate=intermittent,
    )
    return generate_scenario(sc, seed=seed)


def spec3(variant="st"):
    return ModelSpec(
        variant=variant, p=3,
        x_names=("(intercept)", "baseline_1", "treatment"),
        treatment="treatment",
    )


def plain_alpha(theta_j_list, spec):
    """Per-visit coefficients on the outcome scale for one draw."""
    p, q = spec.p, spec.q
    off = q + (1 if spec.has_skew else 0)
    beta = np.zeros((p, p))
    au = np.zeros((p, q))
    for j in range(p):
        au[j] = theta_j_list[j][:q]
        beta[j, :j] = theta_j_list[j][off:off + j]
    umat = np.eye(p) - np.tril(beta, k=-1)
    return np.linalg.solve(umat, au)


@pytest.fixture(scope="session")
def st_fit():
    """A modest skew-t fit with 30% MAR dropout, shared where exactness
    of downstream identities (not posterior quality) is under test."""
    ds, truth = make_scenario()
    spec = spec3("st")
    store = run_chain(
        ds, spec, prior=PriorConfig(),
        cfg=SamplerConfig(n_draws=200, burn_in=200, seed=11),
    )
    return ds, spec, store, truth
