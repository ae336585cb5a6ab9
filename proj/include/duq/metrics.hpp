#pragma once

#include <array>

#include "duq/predictive.hpp"
#include "duq/raster.hpp"

namespace duq {

/// Standard depth regression error metrics over the valid pixels.
struct DepthMetrics {
    double abs_rel = 0.0;   // mean |d - p| / d
    double sq_rel = 0.0;    // mean (d - p)^2 / d
    double rmse = 0.0;      // sqrt(mean (d - p)^2), meters
    double rmse_log = 0.0;  // sqrt(mean (log d - log p)^2)
    double delta1 = 0.0;    // fraction with max(d/p, p/d) < 1.25
    double delta2 = 0.0;    // ... < 1.25^2
    double delta3 = 0.0;    // ... < 1.25^3
};

inline constexpr int kCalibrationLevels = 100;

/// Empirical coverage of symmetric central Gaussian prediction intervals at
/// 100 confidence levels, plus the mean absolute calibration gap.
struct CalibrationCurve {
    std::array<double, kCalibrationLevels> levels{};    // k/100, k = 1..100
    std::array<double, kCalibrationLevels> coverage{};  // empirical per level
    double auce = 0.0;
};

inline constexpr int kSparsificationSteps = 100;

/// Normalized retained-RMSE curves under progressive removal of the most
/// uncertain pixels (1% steps), against the oracle ordering by true error.
struct SparsificationResult {
    std::array<double, kSparsificationSteps> fractions{};  // k/100, k = 0..99
    std::array<double, kSparsificationSteps> curve_by_uncertainty{};
    std::array<double, kSparsificationSteps> curve_oracle{};
    std::array<double, kSparsificationSteps> error_curve{};
    double ause = 0.0;
};

/// Throws DomainError on a nonpositive prediction at a valid pixel and
/// EmptyInputError if no pixel is valid.
DepthMetrics depth_metrics(const Raster& pred, const DepthRaster& gt);

/// Prediction intervals are mean +- z_k * sigma_t with z_k the Gaussian
/// quantile at (1 + p_k)/2; the p = 1.00 interval uses the largest
/// representable sub-1 quantile (~8.21 sigma) so it stays finite.
/// Throws DomainError on nonpositive total variance at a valid pixel.
CalibrationCurve auce(const GaussianPrediction& pred, const DepthRaster& gt);

/// Requires at least 100 valid pixels so every 1% bin is nonempty, and a
/// nonzero full-set RMSE for normalization. Removal order ties break by
/// ascending pixel index.
SparsificationResult ause_rmse(const Raster& uncertainty, const Raster& pred_mean,
                               const DepthRaster& gt);

}  // namespace duq
