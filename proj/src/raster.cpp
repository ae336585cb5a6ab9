#include "duq/raster.hpp"

#include <cmath>
#include <string>

namespace duq {

Raster::Raster(int w, int h, double fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

DepthRaster DepthRaster::dense(Raster d) {
    DepthRaster out;
    out.valid.assign(d.size(), 1);
    out.depth = std::move(d);
    return out;
}

int DepthRaster::valid_count() const {
    int n = 0;
    for (std::uint8_t v : valid) n += v ? 1 : 0;
    return n;
}

void DepthRaster::validate() const {
    if (depth.width <= 0 || depth.height <= 0)
        throw ShapeError("depth raster dimensions must be positive, got " +
                         std::to_string(depth.width) + "x" + std::to_string(depth.height));
    if (depth.values.size() != static_cast<std::size_t>(depth.width) * depth.height)
        throw ShapeError("depth raster value count does not match its dimensions");
    if (valid.size() != depth.values.size())
        throw ShapeError("validity mask length does not match the depth raster");
    for (std::size_t j = 0; j < valid.size(); ++j) {
        if (valid[j] && !(depth.values[j] > 0.0))
            throw DomainError("valid pixel " + std::to_string(j) + " has nonpositive depth");
    }
}

void require_same_shape(const Raster& a, const Raster& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch, " + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height));
}

}  // namespace duq
