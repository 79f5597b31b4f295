"""Banded approximations of pseudoinverses on metric-indexed block matrices."""

__version__ = "0.1.0"

from .blockmat import (
    BandedBlockMatrix,
    BlockPartition,
    band_product,
    band_sum,
    band_transpose,
    certify,
    measure_bandwidth,
    spectral_interval,
    truncate_to_band,
)
from .metric import Graph, MetricSpace, graph_geodesic, line_metric, set_distance, validate_metric
from .pinv_approx import approx_pinv, exact_pinv, offdiag_decay, verify_bound
from .saddle import assemble_saddle, estimate_thetas, singular_interval

__all__ = [
    "BandedBlockMatrix",
    "BlockPartition",
    "Graph",
    "MetricSpace",
    "approx_pinv",
    "assemble_saddle",
    "band_product",
    "band_sum",
    "band_transpose",
    "certify",
    "estimate_thetas",
    "exact_pinv",
    "graph_geodesic",
    "line_metric",
    "measure_bandwidth",
    "offdiag_decay",
    "set_distance",
    "singular_interval",
    "spectral_interval",
    "truncate_to_band",
    "validate_metric",
    "verify_bound",
]
