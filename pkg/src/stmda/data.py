"""Patterned longitudinal dataset: sorting, missingness bookkeeping, I/O.

Subjects are kept sorted by dropout time (latest dropouts first), so
the first n_j rows are exactly the subjects still on study at visit j.
Missing cells split into intermittent gaps (before the last observed
visit) and the monotone dropout tail (after it); the two are tracked
separately because the sampler augments gaps while the imputation
engine fills tails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

__all__ = ["PatternedDataset", "read_long", "to_long", "to_wide"]


@dataclass(frozen=True)
class PatternedDataset:
    """Sorted arrays for one trial; build via ``PatternedDataset.build``."""

    subjects: np.ndarray      # (n_tot,) labels
    x: np.ndarray             # (n_tot, q)
    z: np.ndarray             # (n_tot, r_z, p)
    y: np.ndarray             # (n_tot, p), NaN where unobserved
    observed: np.ndarray      # (n_tot, p) bool
    s: np.ndarray             # (n_tot,) last observed visit (1-based; 0 = never seen)
    visit_labels: tuple = field(default=None)

    @classmethod
    def build(cls, x, y, z=None, subjects=None, visit_labels=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n_tot, p = y.shape
        if x.shape[0] != n_tot:
            raise ValueError("x and y must have one row per subject")
        if z is None:
            z = np.zeros((n_tot, 0, p))
        z = np.asarray(z, dtype=float)
        if z.shape[0] != n_tot or z.shape[2] != p:
            raise ValueError("z must be (n_tot, r_z, p)")
        if not np.all(np.isfinite(x)):
            raise ValueError("X covariates must be fully observed and finite")
        if not np.all(np.isfinite(z)):
            raise ValueError("Z covariates must be fully observed and finite")
        if subjects is None:
            subjects = np.arange(1, n_tot + 1)
        subjects = np.asarray(subjects)
        if len(np.unique(subjects)) != n_tot:
            raise ValueError("subject labels must be unique")

        observed = np.isfinite(y)
        s = np.where(observed.any(axis=1), p - np.argmax(observed[:, ::-1], axis=1), 0)
        order = np.argsort(-s, kind="stable")
        if visit_labels is None:
            visit_labels = tuple(range(1, p + 1))
        return cls(
            subjects=subjects[order],
            x=x[order],
            z=z[order],
            y=y[order],
            observed=observed[order],
            s=s[order].astype(int),
            visit_labels=tuple(visit_labels),
        )

    # -- shape helpers -----------------------------------------------------

    @property
    def n_tot(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def q(self) -> int:
        return self.x.shape[1]

    @property
    def r_z(self) -> int:
        return self.z.shape[1]

    @property
    def n(self) -> int:
        """Subjects with at least one observed visit (they carry latents)."""
        return int(np.count_nonzero(self.s >= 1))

    def n_at(self, j: int) -> int:
        """Subjects still on study at visit j (1-based)."""
        return int(np.count_nonzero(self.s >= j))

    @property
    def gap_mask(self) -> np.ndarray:
        """(n_tot, p) bool: unobserved cells at or before the last observed visit."""
        visit = np.arange(1, self.p + 1)
        return (~self.observed) & (visit[None, :] <= self.s[:, None])

    @property
    def has_gaps(self) -> np.ndarray:
        return self.gap_mask.any(axis=1)

    @property
    def pattern_counts(self) -> dict:
        vals, counts = np.unique(self.s, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


# ---------------------------------------------------------------------------
# long-format ingestion and export
# ---------------------------------------------------------------------------


def read_long(
    source,
    subject: str,
    visit: str,
    outcome: str,
    x: list | None = None,
    z: list | None = None,
    treatment: str | None = None,
    intercept: bool = True,
):
    """Build a PatternedDataset from a long-format table.

    source: path or DataFrame with one row per (subject, visit).  x
    columns must be constant within subject; z columns may vary by
    visit but must never be missing.  Rows may omit unobserved visits
    or carry an empty outcome.  Returns (dataset, x_names, z_names).
    """
    df = pd.read_csv(source) if not isinstance(source, pd.DataFrame) else source.copy()
    x = list(x or [])
    z = list(z or [])
    needed = [subject, visit, outcome] + x + z + ([treatment] if treatment else [])
    for col in needed:
        if col not in df.columns:
            raise ValueError(f"missing column {col!r}")
    if df.duplicated([subject, visit]).any():
        dup = df[df.duplicated([subject, visit])].iloc[0]
        raise ValueError(f"duplicate row for subject {dup[subject]!r} visit {dup[visit]!r}")

    visit_labels = sorted(df[visit].unique())
    p = len(visit_labels)
    vmap = {v: i for i, v in enumerate(visit_labels)}
    # sorted labels, not first-appearance order: row order must not affect results
    subj_labels = pd.Index(df[subject].unique()).sort_values().to_numpy()
    smap = {sje: i for i, sje in enumerate(subj_labels)}
    n_tot = len(subj_labels)

    y = np.full((n_tot, p), np.nan)
    xcols = x + ([treatment] if treatment else [])
    x_arr = np.full((n_tot, len(xcols)), np.nan)
    z_arr = np.full((n_tot, len(z), p), np.nan)

    rows = df[subject].map(smap).to_numpy()
    cols = df[visit].map(vmap).to_numpy()
    vals = pd.to_numeric(df[outcome], errors="coerce").to_numpy(dtype=float)
    bad = df[outcome].notna().to_numpy() & ~np.isfinite(vals)
    if bad.any():
        raise ValueError(f"non-numeric outcome value {df[outcome].to_numpy()[bad][0]!r}")
    y[rows, cols] = vals

    for k, col in enumerate(xcols):
        v = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"covariate {col!r} has missing or non-numeric values")
        x_arr[rows, k] = v
        per = pd.DataFrame({"r": rows, "v": v}).groupby("r")["v"].nunique()
        if (per > 1).any():
            raise ValueError(f"covariate {col!r} is not constant within subject")
    for k, col in enumerate(z):
        v = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"covariate {col!r} has missing or non-numeric values")
        z_arr[rows, k, cols] = v
    if z and np.isnan(z_arr).any():
        raise ValueError("Z covariates must be supplied for every visit of every subject")

    if treatment:
        tvals = np.unique(x_arr[:, -1])
        if not np.all(np.isin(tvals, (0.0, 1.0))):
            raise ValueError("treatment must be coded 0/1")

    x_names = x + ([treatment] if treatment else [])
    if intercept:
        x_arr = np.column_stack([np.ones(n_tot), x_arr])
        x_names = ["(intercept)"] + x_names
    if treatment:
        # keep treatment in the last slot
        assert x_names[-1] == treatment

    ds = PatternedDataset.build(
        x=x_arr, y=y, z=z_arr if z else None, subjects=subj_labels, visit_labels=visit_labels
    )
    return ds, x_names, list(z)


def to_long(ds: PatternedDataset, y=None, provenance=None, imputation_index=None) -> pd.DataFrame:
    """One row per (subject, visit); optionally a completed y matrix.

    provenance codes: observed / gap-draw / tail-draw per cell.
    """
    y = ds.y if y is None else np.asarray(y, dtype=float)
    recs = {
        "subject": np.repeat(ds.subjects, ds.p),
        "visit": np.tile(ds.visit_labels, ds.n_tot),
        "value": y.ravel(),
    }
    if provenance is not None:
        recs["provenance"] = np.asarray(provenance).ravel()
    df = pd.DataFrame(recs)
    if imputation_index is not None:
        df.insert(0, "imputation", imputation_index)
    return df


def to_wide(ds: PatternedDataset, y=None) -> pd.DataFrame:
    y = ds.y if y is None else np.asarray(y, dtype=float)
    cols = {f"visit_{v}": y[:, j] for j, v in enumerate(ds.visit_labels)}
    return pd.DataFrame({"subject": ds.subjects, **cols})
