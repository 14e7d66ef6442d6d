"""Model specification: error family, visit grid, covariate roles.

X covariates get one coefficient per visit; Z covariates get a single
coefficient shared across visits.  The treatment indicator, when
present, must be the last X covariate so that the per-visit treatment
effects sit in a fixed coefficient slot (the reference-based imputation
rules read them from there).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["VARIANTS", "ModelSpec", "x_to_z_expand"]

VARIANTS = ("n", "t", "sn", "st")


@dataclass(frozen=True)
class ModelSpec:
    """Error family and covariate layout for one analysis.

    variant: "n" normal, "t" Student-t, "sn" skew-normal, "st" skew-t.
    x_names: per-visit-coefficient covariates, treatment last if any.
    z_names: shared-coefficient covariates.
    treatment: name of the treatment indicator within x_names, or None.
    """

    variant: str
    p: int
    x_names: tuple
    z_names: tuple = ()
    treatment: str | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.p < 1:
            raise ValueError("need at least one visit")
        if len(self.x_names) < 1:
            raise ValueError("need at least one X covariate (an intercept)")
        if len(set(self.x_names) | set(self.z_names)) != len(self.x_names) + len(self.z_names):
            raise ValueError("covariate names must be unique across X and Z")
        if self.treatment is not None and (not self.x_names or self.x_names[-1] != self.treatment):
            raise ValueError("the treatment indicator must be the last X covariate")
        object.__setattr__(self, "x_names", tuple(self.x_names))
        object.__setattr__(self, "z_names", tuple(self.z_names))

    @property
    def q(self) -> int:
        return len(self.x_names)

    @property
    def r_z(self) -> int:
        return len(self.z_names)

    @property
    def has_skew(self) -> bool:
        return self.variant in ("sn", "st")

    @property
    def has_tails(self) -> bool:
        return self.variant in ("t", "st")

    def require_treatment(self, why: str) -> int:
        """Index of the treatment column; raises when the model has none."""
        if self.treatment is None:
            raise ValueError(f"{why} requires a treatment indicator in the model")
        return self.q - 1


def x_to_z_expand(spec: ModelSpec, x, z, name: str):
    """Re-express one X covariate as p visit-indicator Z covariates.

    A covariate with free per-visit coefficients is equivalent to p
    shared-coefficient covariates x * 1{visit = j}.  Returns the new
    spec and the transformed (x, z) arrays; used to check that the two
    parameterizations agree.  The treatment column cannot be moved
    (reference-based rules need its per-visit coefficients).
    """
    if name not in spec.x_names:
        raise ValueError(f"{name!r} is not an X covariate")
    if name == spec.treatment:
        raise ValueError("cannot move the treatment indicator out of X")
    k = spec.x_names.index(name)
    x = np.asarray(x, dtype=float)
    n_tot = x.shape[0]
    p = spec.p
    col = x[:, k]
    new_cols = np.zeros((n_tot, p, p))
    for j in range(p):
        new_cols[:, j, j] = col
    z = np.zeros((n_tot, 0, p)) if z is None else np.asarray(z, dtype=float)
    new_z = np.concatenate([z, new_cols], axis=1)
    new_x = np.delete(x, k, axis=1)
    new_spec = replace(
        spec,
        x_names=tuple(n for n in spec.x_names if n != name),
        z_names=spec.z_names + tuple(f"{name}@visit{j + 1}" for j in range(p)),
    )
    return new_spec, new_x, new_z
