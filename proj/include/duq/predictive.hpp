#pragma once

#include <vector>

#include "duq/raster.hpp"

namespace duq {

/// One stochastic forward pass: predicted depth mean and its paired
/// aleatoric sigma.
struct PredictiveSample {
    Raster mean;
    SigmaRaster sigma;
};

/// Ordered set of M passes (MC-dropout mask draws or ensemble members).
struct PredictiveSampleSet {
    std::vector<PredictiveSample> samples;

    int count() const { return static_cast<int>(samples.size()); }
};

/// Moment-matched Gaussian over the M-component mixture. The variance is
/// kept split: epistemic is the spread of the per-sample means, aleatoric
/// the average of the per-sample variances, and var_total is stored as
/// exactly their sum.
struct GaussianPrediction {
    Raster mean;
    Raster var_epistemic;
    Raster var_aleatoric;
    Raster var_total;
};

/// Sigmas below this are lifted before squaring so aleatoric variance stays
/// strictly positive.
inline constexpr double kSigmaMin = 1e-12;

/// Per-pixel fusion of M samples:
///   mean      = (1/M) sum_m mean_m
///   epistemic = (1/M) sum_m (mean - mean_m)^2
///   aleatoric = (1/M) sum_m sigma_m^2
/// Accumulation runs in double with a fixed per-pixel reduction order, so
/// results are deterministic. Throws EmptyInputError when M = 0 and
/// ShapeError on dimension mismatches.
GaussianPrediction fuse_samples(const PredictiveSampleSet& set);

}  // namespace duq
