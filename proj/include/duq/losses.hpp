#pragma once

#include "duq/raster.hpp"

namespace duq {

/// Heteroscedastic Laplace negative log-likelihood, averaged over the valid
/// pixels of gt:
///   (1/N) sum_j |d_j - mean_j| / sigma_j + log sigma_j
/// Throws EmptyInputError when no pixel is valid and DomainError on a
/// nonpositive sigma at a valid pixel.
double laplace_nll(const Raster& pred_mean, const SigmaRaster& pred_sigma, const DepthRaster& gt);

struct LaplaceNllGrad {
    Raster d_mean;       // dL / d(mean)
    Raster d_raw_sigma;  // dL / d(raw), with sigma = exp(raw)
};

/// Analytic gradient of laplace_nll under sigma = exp(raw):
///   dL/dmean_j = -sign(d_j - mean_j) / (sigma_j * N)
///   dL/draw_j  = (1 - |d_j - mean_j| / sigma_j) / N
/// sign(0) is taken as 0 at the absolute-value kink. Invalid pixels get a
/// zero gradient.
LaplaceNllGrad laplace_nll_grad(const Raster& pred_mean, const Raster& pred_raw_sigma,
                                const DepthRaster& gt);

}  // namespace duq
