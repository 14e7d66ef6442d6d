"""Controlled multiple imputation from stored posterior draws.

Each imputed dataset pairs one posterior draw with one pass over the
subjects.  Interior gaps always take the values augmented by the chain
for that draw (they are missing-at-random by construction); the
monotone tail after each subject's last visit is filled according to
the requested strategy:

* MAR    -- the subject's own conditional law given prefix and latents;
* delta  -- the MAR draw plus fixed offsets, either fed through the
            sequential regressions (conditional, default) or added to
            the final values directly;
* J2R    -- the MAR draw minus the per-visit treatment coefficients,
            so treated dropouts jump to the reference profile;
* CIR    -- as J2R but preserving the treatment benefit accrued by the
            last visit on study;
* CR     -- treated dropouts get fresh latents and tail drawn under the
            reference (treatment-zeroed) location.

Randomness is keyed by (imputation index, subject), so strategies that
shift the MAR draw reuse exactly the same underlying values: identities
like J2R = MAR - offsets hold draw by draw, and a zero delta grid cell
reproduces MAR bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conditional import draw_dw, draw_suffix, prefix_stats
from .data import PatternedDataset, to_long
from .ldl import solve_unit_lower, u_matrix, u_partition
from .modelspec import ModelSpec
from .sampler import DrawStore, ParameterState, _zeta_plain

__all__ = [
    "ImputationStrategy",
    "ImputedDataset",
    "impute_dataset",
    "generate_mi_sets",
    "PROV_OBSERVED",
    "PROV_GAP",
    "PROV_TAIL",
    "PROVENANCE_LABELS",
]

KINDS = ("MAR", "delta", "J2R", "CIR", "CR")

PROV_OBSERVED, PROV_GAP, PROV_TAIL = 0, 1, 2
PROVENANCE_LABELS = {PROV_OBSERVED: "observed", PROV_GAP: "gap_draw", PROV_TAIL: "tail_draw"}


@dataclass(frozen=True)
class ImputationStrategy:
    """What to do with the monotone tail.

    delta offsets may be scalars (constant across visits and patterns),
    length-p vectors (per visit), or (p+1, p) arrays (per dropout
    pattern s = 0..p, per visit).  ``conditional`` applies the offsets
    on the sequential-regression scale so later visits inherit them
    through the fitted autoregression.
    """

    kind: str = "MAR"
    delta_control: object = 0.0
    delta_treated: object = 0.0
    conditional: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    def delta_tail(self, arm: int, s: int, p: int) -> np.ndarray:
        """Offsets for visits s+1..p for a subject in the given arm."""
        raw = self.delta_treated if arm == 1 else self.delta_control
        arr = np.asarray(raw, dtype=float)
        if arr.ndim == 0:
            return np.full(p - s, float(arr))
        if arr.shape == (p,):
            return arr[s:]
        if arr.shape == (p + 1, p):
            return arr[s, s:]
        raise ValueError("delta must be scalar, (p,), or (p+1, p)")


@dataclass(frozen=True)
class ImputedDataset:
    """One completed outcome matrix plus cell provenance codes."""

    y: np.ndarray             # (n_tot, p) complete
    provenance: np.ndarray    # (n_tot, p) int8, see PROVENANCE_LABELS
    imputation: int           # 1-based imputation index
    draw_index: int           # index into the DrawStore
    strategy: ImputationStrategy = field(default_factory=ImputationStrategy)

    def to_long(self, data: PatternedDataset):
        labels = np.vectorize(PROVENANCE_LABELS.get)(self.provenance)
        return to_long(data, y=self.y, provenance=labels, imputation_index=self.imputation)


def _subject_rng(seed: int, imputation: int, subject_pos: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(imputation), int(subject_pos)]))


def impute_dataset(
    store: DrawStore,
    data: PatternedDataset,
    spec: ModelSpec,
    strategy: ImputationStrategy,
    draw_index: int,
    imputation: int,
    seed: int,
) -> ImputedDataset:
    """Complete every subject's outcome vector from one stored draw."""
    state = store.state_at(draw_index, data)
    ctx = _DrawContext(state, data, spec, strategy)
    p = data.p
    y_out = state.y_fill.copy()
    prov = np.where(data.observed, PROV_OBSERVED, PROV_GAP).astype(np.int8)
    prov[~data.observed & ~data.gap_mask] = PROV_TAIL

    for i in range(data.n_tot):
        s = int(data.s[i])
        if s == p and not np.any(data.gap_mask[i]):
            continue
        if s < p:
            rng = _subject_rng(seed, imputation, i)
            y_out[i, s:] = _impute_tail(ctx, i, s, rng)
    return ImputedDataset(
        y=y_out, provenance=prov, imputation=imputation, draw_index=draw_index, strategy=strategy
    )


class _DrawContext:
    """Per-draw precomputation shared across subjects."""

    def __init__(self, state: ParameterState, data: PatternedDataset, spec: ModelSpec, strategy):
        self.state = state
        self.data = data
        self.spec = spec
        self.strategy = strategy
        self.factor = state.factor(spec)
        self.psi_under = state.psi_under(spec)
        alpha_under = state.alpha_under(spec)
        umat = u_matrix(self.factor)
        zeta_u = _zeta_plain(state.eta, data) @ umat.T if data.r_z else 0.0
        self.mu_under = data.x @ alpha_under.T + zeta_u
        kind = strategy.kind
        if kind in ("J2R", "CIR", "CR"):
            tcol = spec.require_treatment(f"strategy {kind}")
            self.arm = data.x[:, tcol].astype(int)
            if kind == "CR":
                x_ctl = data.x.copy()
                x_ctl[:, tcol] = 0.0
                self.mu_under_ctl = x_ctl @ alpha_under.T + zeta_u
            else:
                # per-visit treatment coefficients on the plain scale
                alpha_plain = np.linalg.solve(umat, alpha_under)
                self.delta_alpha = alpha_plain[:, tcol]
        elif kind == "delta":
            tcol = spec.q - 1 if spec.treatment is not None else None
            self.arm = data.x[:, tcol].astype(int) if tcol is not None else np.zeros(data.n_tot, int)

    def latents_for(self, i: int, rng: np.random.Generator, mu_under_row=None):
        """Stored latents for on-study subjects; fresh prior draws otherwise."""
        n = self.state.d.shape[0]
        if i < n and mu_under_row is None:
            return float(self.state.d[i]), float(self.state.w[i])
        mu_u = self.mu_under[i] if mu_under_row is None else mu_under_row
        s = int(self.data.s[i])
        stats = prefix_stats(self.state.y_fill[i], mu_u, self.factor, self.psi_under, self.state.nu, s)
        return draw_dw(stats, rng, self.spec.has_skew, self.spec.has_tails)


def _impute_tail(ctx: _DrawContext, i: int, s: int, rng: np.random.Generator) -> np.ndarray:
    data, spec, strat = ctx.data, ctx.spec, ctx.strategy
    p = data.p
    y_row = ctx.state.y_fill[i]

    if strat.kind == "CR" and ctx.arm[i] == 1:
        # fresh latents and tail under the reference location
        d_i, w_i = ctx.latents_for(i, rng, mu_under_row=ctx.mu_under_ctl[i])
        return draw_suffix(y_row, w_i, d_i, ctx.mu_under_ctl[i], ctx.factor, ctx.psi_under, s, rng)

    d_i, w_i = ctx.latents_for(i, rng)
    tail = draw_suffix(y_row, w_i, d_i, ctx.mu_under[i], ctx.factor, ctx.psi_under, s, rng)

    if strat.kind == "MAR" or strat.kind == "CR":
        return tail
    if strat.kind == "delta":
        dvec = strat.delta_tail(ctx.arm[i], s, p)
        if strat.conditional:
            part = u_partition(ctx.factor, s)
            return tail + solve_unit_lower(part.u22, dvec)
        return tail + dvec
    if strat.kind == "J2R":
        return tail - ctx.arm[i] * ctx.delta_alpha[s:]
    if strat.kind == "CIR":
        prev = ctx.delta_alpha[s - 1] if s >= 1 else 0.0
        return tail - ctx.arm[i] * (ctx.delta_alpha[s:] - prev)
    raise AssertionError(strat.kind)


def select_draws(n_stored: int, m: int) -> np.ndarray:
    """Deterministic, evenly spaced draw selection (distinct for m <= stored)."""
    if m < 1:
        raise ValueError("need m >= 1 imputations")
    if m > n_stored:
        raise ValueError(f"requested {m} imputations but only {n_stored} stored draws")
    return np.round(np.linspace(0, n_stored - 1, m)).astype(int)


def generate_mi_sets(
    store: DrawStore,
    data: PatternedDataset,
    spec: ModelSpec,
    strategy: ImputationStrategy,
    m: int,
    seed: int = 0,
) -> list:
    """m completed datasets from evenly spaced stored draws.

    The RNG sub-stream of each (imputation, subject) pair depends only
    on (seed, imputation index, subject position), never on the
    strategy, which is what makes delta = 0 reproduce MAR exactly.
    """
    sel = select_draws(store.n_draws, m)
    return [
        impute_dataset(store, data, spec, strategy, int(b), k + 1, seed)
        for k, b in enumerate(sel)
    ]
