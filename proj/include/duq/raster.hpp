#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "duq/errors.hpp"

namespace duq {

/// Row-major grid of doubles. Carries depth, sigma, or variance planes;
/// values are stored in double even when files store float32.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Raster() = default;
    Raster(int w, int h, double fill = 0.0);

    std::size_t size() const { return values.size(); }
    bool same_shape(const Raster& o) const { return width == o.width && height == o.height; }

    double operator()(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
    double& operator()(int x, int y) {
        return values[static_cast<std::size_t>(y) * width + x];
    }
};

/// Per-pixel standard deviation; positive everywhere by construction
/// (producers use an exponential parameterization).
using SigmaRaster = Raster;

/// Ground-truth depth plus a validity mask. Invalid pixels carry no depth
/// meaning and are skipped by every loss and metric.
struct DepthRaster {
    Raster depth;
    std::vector<std::uint8_t> valid;  // 1 = usable

    static DepthRaster dense(Raster d);

    int width() const { return depth.width; }
    int height() const { return depth.height; }
    int valid_count() const;

    // Throws ShapeError / DomainError on inconsistent dims, mask length,
    // or nonpositive depth at a valid pixel.
    void validate() const;
};

void require_same_shape(const Raster& a, const Raster& b, const char* what);

}  // namespace duq
