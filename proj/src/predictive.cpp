#include "duq/predictive.hpp"

#include <algorithm>
#include <string>

namespace duq {

GaussianPrediction fuse_samples(const PredictiveSampleSet& set) {
    const int m_count = set.count();
    if (m_count == 0) throw EmptyInputError("fuse_samples: sample set is empty");

    const Raster& first = set.samples.front().mean;
    if (first.width <= 0 || first.height <= 0)
        throw ShapeError("fuse_samples: sample rasters must have positive dimensions");
    for (const PredictiveSample& s : set.samples) {
        require_same_shape(first, s.mean, "fuse_samples mean");
        require_same_shape(first, s.sigma, "fuse_samples sigma");
    }

    const std::size_t n = first.size();
    const double inv_m = 1.0 / static_cast<double>(m_count);

    GaussianPrediction out;
    out.mean = Raster(first.width, first.height);
    out.var_epistemic = Raster(first.width, first.height);
    out.var_aleatoric = Raster(first.width, first.height);
    out.var_total = Raster(first.width, first.height);

    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (const PredictiveSample& s : set.samples) sum += s.mean.values[j];
        const double mu = sum * inv_m;

        double epi = 0.0;
        double ale = 0.0;
        for (const PredictiveSample& s : set.samples) {
            const double d = mu - s.mean.values[j];
            epi += d * d;
            const double sig = std::max(s.sigma.values[j], kSigmaMin);
            ale += sig * sig;
        }
        epi *= inv_m;
        ale *= inv_m;

        out.mean.values[j] = mu;
        out.var_epistemic.values[j] = epi;
        out.var_aleatoric.values[j] = ale;
        out.var_total.values[j] = epi + ale;
    }
    return out;
}

}  // namespace duq
