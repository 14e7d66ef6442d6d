"""Bayesian multiple imputation for longitudinal trials with skew-t errors.

Monotone data augmentation for MMRMs under normal, Student-t,
skew-normal and skew-t errors; controlled imputation (MAR, delta
adjustment, jump/copy reference schemes); Rubin pooling with
small-sample degrees of freedom; tipping-point analysis.
"""

__version__ = "0.1.0"

from .modelspec import ModelSpec, VARIANTS, x_to_z_expand
from .data import PatternedDataset, read_long, to_long, to_wide
from .priors import PriorConfig, calibrate_pc_lambda
from .sampler import SamplerConfig, run_chain, compute_dic
from .impute import ImputationStrategy, generate_mi_sets
from .analyze import ancova_final_visit, rubin_pool, tipping_point

__all__ = [
    "ModelSpec",
    "VARIANTS",
    "x_to_z_expand",
    "PatternedDataset",
    "read_long",
    "to_long",
    "to_wide",
    "PriorConfig",
    "calibrate_pc_lambda",
    "SamplerConfig",
    "run_chain",
    "compute_dic",
    "ImputationStrategy",
    "generate_mi_sets",
    "ancova_final_visit",
    "rubin_pool",
    "tipping_point",
    "__version__",
]
