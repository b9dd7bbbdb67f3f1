"""Similarity-record filtering of image datasets before and after generative oversampling."""

from simfilter.errors import DataError
from simfilter.kernels import BACKEND
from simfilter.simkernel import compute_records, pairwise_scores
from simfilter.filtering import fagt_pool_size, fbgt_count, filter_by_records, run_fagt, run_fbgt

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DataError",
    "compute_records",
    "pairwise_scores",
    "fbgt_count",
    "fagt_pool_size",
    "filter_by_records",
    "run_fbgt",
    "run_fagt",
]
