#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "duq/geometry.hpp"
#include "duq/metrics.hpp"
#include "duq/predictive.hpp"
#include "duq/toynet.hpp"

namespace duq {

// Plane tags of the raster container.
inline constexpr std::uint8_t kPlaneDepth = 0;
inline constexpr std::uint8_t kPlaneSigma = 1;
inline constexpr std::uint8_t kPlaneVar = 2;
inline constexpr std::uint8_t kPlaneMask = 3;

/// In-memory form of the "DUQ1" raster container: magic, u32 width / height /
/// channel count, one tag byte per plane, then channel-planar float32
/// row-major data. All integers and floats little-endian.
struct RasterBundle {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> tags;
    std::vector<Raster> planes;

    int channels() const { return static_cast<int>(planes.size()); }
    void validate() const;
};

/// Rejects bad magic, truncated or oversized payloads, NaN in a depth plane,
/// and mask values other than 0 or 1; every rejection names a byte offset.
RasterBundle read_raster(const std::string& path);

/// Values are rounded to float32 on write; write(read(f)) reproduces f
/// byte for byte.
void write_raster(const RasterBundle& bundle, const std::string& path);

// Fixed plane layouts over the container.
RasterBundle bundle_from_samples(const PredictiveSampleSet& set);     // mean,sigma per sample
PredictiveSampleSet samples_from_bundle(const RasterBundle& bundle);
RasterBundle bundle_from_prediction(const GaussianPrediction& pred);  // mean,epi,ale,total
GaussianPrediction prediction_from_bundle(const RasterBundle& bundle);
RasterBundle bundle_from_gt(const DepthRaster& gt);                   // depth,mask
DepthRaster gt_from_bundle(const RasterBundle& bundle);

/// ASCII PLY with vertex properties float x, y, z, sigma. Extra comment
/// lines land verbatim after "format"; parse errors name the line number.
void write_ply(const UncertainPointCloud& cloud, const std::string& path,
               const std::vector<std::string>& comments = {});
UncertainPointCloud read_ply(const std::string& path,
                             std::vector<std::string>* comments = nullptr);

/// Trained-model container, magic "DUQM", version 1, little-endian:
///   u32 version; u32 size count S; u32 layer_sizes[S]; u8 dropout[S-2];
///   f64 dropout_p; u32 activation (0 = ELU); u64 seed; f64 init_std;
///   f64 learning_rate; u32 batch; u32 epochs; u64 param count; f64 params[]
/// in flatten_params order.
struct Checkpoint {
    ToyNetConfig config;
    ToyNetParams params;
    std::uint64_t seed = 0;
    double init_std = 0.1;
    TrainSettings settings;
};

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

/// Deterministic JSON value: object keys serialize sorted, doubles print as
/// %.9g, so equal values give byte-equal text.
class Json {
  public:
    Json() = default;  // null
    static Json object();
    static Json array();
    static Json str(std::string v);
    static Json num(double v);        // %.9g, the report convention
    static Json num_exact(double v);  // %.17g, round-trips the double
    static Json integer(std::int64_t v);
    static Json boolean(bool v);

    Json& set(const std::string& key, Json v);  // object only
    Json& push(Json v);                         // array only
    std::string dump(int indent = 2) const;

  private:
    enum class Kind { null, object, array, string, number, integer, boolean };
    Kind kind_ = Kind::null;
    std::map<std::string, Json> members_;
    std::vector<Json> elements_;
    std::string string_;
    double number_ = 0.0;
    bool exact_ = false;
    std::int64_t integer_ = 0;
    bool boolean_ = false;

    void write(std::string& out, int indent, int depth) const;
};

/// Evaluation output: whichever metric blocks ran, plus provenance.
struct MetricsReport {
    int schema_version = 1;
    std::optional<DepthMetrics> depth;
    std::optional<CalibrationCurve> calibration;
    std::optional<SparsificationResult> sparsification;
    std::string aggregate = "pooled";
    std::vector<std::string> inputs;
    std::uint64_t seed = 0;
    std::string config_hash;
};

std::string render_report(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::string& path);

/// Header is exactly `percentile,rmse_t_m,rmse_r_deg,n_pairs,n_failed`;
/// percentiles print with two decimals.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

/// Two-column x,y table for the 1D regression sets.
void write_xy_csv(const Dataset& data, const std::string& path);
Dataset read_xy_csv(const std::string& path);

std::string format_g9(double v);
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace duq
