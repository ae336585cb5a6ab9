#include "duq/losses.hpp"

#include <cmath>
#include <string>

namespace duq {

namespace {

int checked_valid_count(const Raster& pred, const DepthRaster& gt, const char* what) {
    gt.validate();
    require_same_shape(pred, gt.depth, what);
    const int n = gt.valid_count();
    if (n == 0) throw EmptyInputError(std::string(what) + ": ground truth has no valid pixels");
    return n;
}

}  // namespace

double laplace_nll(const Raster& pred_mean, const SigmaRaster& pred_sigma, const DepthRaster& gt) {
    const int n_valid = checked_valid_count(pred_mean, gt, "laplace_nll");
    require_same_shape(pred_mean, pred_sigma, "laplace_nll sigma");

    double acc = 0.0;
    for (std::size_t j = 0; j < gt.valid.size(); ++j) {
        if (!gt.valid[j]) continue;
        const double sigma = pred_sigma.values[j];
        if (!(sigma > 0.0))
            throw DomainError("laplace_nll: nonpositive sigma at pixel " + std::to_string(j));
        acc += std::abs(gt.depth.values[j] - pred_mean.values[j]) / sigma + std::log(sigma);
    }
    return acc / n_valid;
}

LaplaceNllGrad laplace_nll_grad(const Raster& pred_mean, const Raster& pred_raw_sigma,
                                const DepthRaster& gt) {
    const int n_valid = checked_valid_count(pred_mean, gt, "laplace_nll_grad");
    require_same_shape(pred_mean, pred_raw_sigma, "laplace_nll_grad raw sigma");

    LaplaceNllGrad out;
    out.d_mean = Raster(pred_mean.width, pred_mean.height);
    out.d_raw_sigma = Raster(pred_mean.width, pred_mean.height);

    const double inv_n = 1.0 / n_valid;
    for (std::size_t j = 0; j < gt.valid.size(); ++j) {
        if (!gt.valid[j]) continue;
        const double sigma = std::exp(pred_raw_sigma.values[j]);
        const double residual = gt.depth.values[j] - pred_mean.values[j];
        const double sgn = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
        out.d_mean.values[j] = -sgn / sigma * inv_n;
        out.d_raw_sigma.values[j] = (1.0 - std::abs(residual) / sigma) * inv_n;
    }
    return out;
}

}  // namespace duq
