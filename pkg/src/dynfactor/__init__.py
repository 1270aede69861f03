"""Static and generalized dynamic factor models for large panels of time series."""

from .errors import FactorError
from .gdfm import gdfm_decompose, select_q_hl
from .panel import Panel, Permutation, ingest_csv, permute, standardize
from .static_fm import select_r_ic, select_r_ratio, select_r_tuned, static_decompose
from .weakdecomp import orthogonality_report, three_term

__version__ = "0.1.0"

__all__ = [
    "FactorError",
    "Panel",
    "Permutation",
    "gdfm_decompose",
    "ingest_csv",
    "orthogonality_report",
    "permute",
    "select_q_hl",
    "select_r_ic",
    "select_r_ratio",
    "select_r_tuned",
    "standardize",
    "static_decompose",
    "three_term",
]
