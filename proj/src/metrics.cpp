#include "duq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "duq/normal.hpp"

namespace duq {

namespace {

int checked_valid_count(const Raster& pred, const DepthRaster& gt, const char* what) {
    gt.validate();
    require_same_shape(pred, gt.depth, what);
    const int n = gt.valid_count();
    if (n == 0) throw EmptyInputError(std::string(what) + ": ground truth has no valid pixels");
    return n;
}

// Retained-RMSE curve for one removal ordering. `order` lists valid-pixel
// slots sorted by removal priority (first removed first); sq_err is indexed
// by the same slots.
std::array<double, kSparsificationSteps> removal_curve(const std::vector<int>& order,
                                                       const std::vector<double>& sq_err) {
    const int n = static_cast<int>(order.size());
    // Suffix sums over the removal order: suffix[m] = sum of squared errors
    // of everything still retained after removing the first m.
    std::vector<double> suffix(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) suffix[i] = suffix[i + 1] + sq_err[order[i]];

    std::array<double, kSparsificationSteps> curve{};
    for (int k = 0; k < kSparsificationSteps; ++k) {
        const int removed = static_cast<int>(std::floor(k / 100.0 * n));
        curve[k] = std::sqrt(suffix[removed] / (n - removed));
    }
    return curve;
}

}  // namespace

DepthMetrics depth_metrics(const Raster& pred, const DepthRaster& gt) {
    const int n = checked_valid_count(pred, gt, "depth_metrics");

    double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
    int n1 = 0, n2 = 0, n3 = 0;
    constexpr double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;

    for (std::size_t j = 0; j < gt.valid.size(); ++j) {
        if (!gt.valid[j]) continue;
        const double d = gt.depth.values[j];
        const double p = pred.values[j];
        if (!(p > 0.0))
            throw DomainError("depth_metrics: nonpositive prediction at valid pixel " +
                              std::to_string(j));
        const double err = d - p;
        abs_rel += std::abs(err) / d;
        sq_rel += err * err / d;
        sq += err * err;
        const double dl = std::log(d) - std::log(p);
        sq_log += dl * dl;
        const double ratio = std::max(d / p, p / d);
        if (ratio < t1) ++n1;
        if (ratio < t2) ++n2;
        if (ratio < t3) ++n3;
    }

    DepthMetrics m;
    m.abs_rel = abs_rel / n;
    m.sq_rel = sq_rel / n;
    m.rmse = std::sqrt(sq / n);
    m.rmse_log = std::sqrt(sq_log / n);
    m.delta1 = static_cast<double>(n1) / n;
    m.delta2 = static_cast<double>(n2) / n;
    m.delta3 = static_cast<double>(n3) / n;
    return m;
}

CalibrationCurve auce(const GaussianPrediction& pred, const DepthRaster& gt) {
    const int n = checked_valid_count(pred.mean, gt, "auce");
    require_same_shape(pred.mean, pred.var_total, "auce var_total");

    std::vector<double> abs_err;
    std::vector<double> sigma;
    abs_err.reserve(n);
    sigma.reserve(n);
    for (std::size_t j = 0; j < gt.valid.size(); ++j) {
        if (!gt.valid[j]) continue;
        const double var = pred.var_total.values[j];
        if (!(var > 0.0))
            throw DomainError("auce: nonpositive total variance at valid pixel " +
                              std::to_string(j));
        abs_err.push_back(std::abs(gt.depth.values[j] - pred.mean.values[j]));
        sigma.push_back(std::sqrt(var));
    }

    CalibrationCurve out;
    double gap_sum = 0.0;
    for (int k = 1; k <= kCalibrationLevels; ++k) {
        const double p = k / 100.0;
        const double z = normal_quantile(std::min(0.5 * (1.0 + p), 1.0 - 1e-16));
        int covered = 0;
        for (int i = 0; i < n; ++i)
            if (abs_err[i] <= z * sigma[i]) ++covered;
        const double coverage = static_cast<double>(covered) / n;
        out.levels[k - 1] = p;
        out.coverage[k - 1] = coverage;
        gap_sum += std::abs(p - coverage);
    }
    out.auce = gap_sum / kCalibrationLevels;
    return out;
}

SparsificationResult ause_rmse(const Raster& uncertainty, const Raster& pred_mean,
                               const DepthRaster& gt) {
    const int n = checked_valid_count(pred_mean, gt, "ause_rmse");
    require_same_shape(pred_mean, uncertainty, "ause_rmse uncertainty");
    if (n < kSparsificationSteps)
        throw EmptyInputError("ause_rmse: needs at least 100 valid pixels, got " +
                              std::to_string(n));

    // Gather valid pixels; slot order preserves ascending pixel index so that
    // tie-breaking below is reproducible.
    std::vector<double> unc, sq_err;
    unc.reserve(n);
    sq_err.reserve(n);
    for (std::size_t j = 0; j < gt.valid.size(); ++j) {
        if (!gt.valid[j]) continue;
        const double e = gt.depth.values[j] - pred_mean.values[j];
        unc.push_back(uncertainty.values[j]);
        sq_err.push_back(e * e);
    }

    const double total_sq = std::accumulate(sq_err.begin(), sq_err.end(), 0.0);
    const double rmse_full = std::sqrt(total_sq / n);
    if (!(rmse_full > 0.0))
        throw DegenerateError("ause_rmse: full-set RMSE is zero, nothing to normalize by");

    std::vector<int> by_unc(n), by_err(n);
    std::iota(by_unc.begin(), by_unc.end(), 0);
    by_err = by_unc;
    std::stable_sort(by_unc.begin(), by_unc.end(),
                     [&](int a, int b) { return unc[a] > unc[b]; });
    std::stable_sort(by_err.begin(), by_err.end(),
                     [&](int a, int b) { return sq_err[a] > sq_err[b]; });

    SparsificationResult out;
    out.curve_by_uncertainty = removal_curve(by_unc, sq_err);
    out.curve_oracle = removal_curve(by_err, sq_err);

    double acc = 0.0;
    for (int k = 0; k < kSparsificationSteps; ++k) {
        out.fractions[k] = k / 100.0;
        out.curve_by_uncertainty[k] /= rmse_full;
        out.curve_oracle[k] /= rmse_full;
        out.error_curve[k] = out.curve_by_uncertainty[k] - out.curve_oracle[k];
        acc += out.error_curve[k];
    }
    out.ause = acc / kSparsificationSteps;
    return out;
}

}  // namespace duq
