"""Depth-prediction uncertainty toolkit.

Thin wrapper over the compiled core: per-pixel Gaussian fusion, Laplace
losses, calibration and sparsification metrics, a small trainable regressor
with MC-dropout and ensembling, and uncertainty-aware point-cloud tools.
Rasters are (height, width) float64 arrays; point clouds are (n, 3) arrays
paired with an (n,) sigma vector.
"""

from ._core import (
    Ensemble,
    ToyModel,
    __version__,
    auce,
    ause_rmse,
    backproject,
    depth_metrics,
    fuse_samples,
    icp_align,
    laplace_nll,
    laplace_nll_grad,
    make_regress1d,
    normal_cdf,
    normal_quantile,
    percentile_filter,
    read_ply,
    rotation_angle_deg,
    write_ply,
)

__all__ = [
    "Ensemble",
    "ToyModel",
    "__version__",
    "auce",
    "ause_rmse",
    "backproject",
    "depth_metrics",
    "fuse_samples",
    "icp_align",
    "laplace_nll",
    "laplace_nll_grad",
    "make_regress1d",
    "normal_cdf",
    "normal_quantile",
    "percentile_filter",
    "read_ply",
    "rotation_angle_deg",
    "write_ply",
]
