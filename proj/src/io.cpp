#include "duq/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace duq {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and this code assumes a little-endian host");

namespace {

constexpr char kRasterMagic[4] = {'D', 'U', 'Q', '1'};
constexpr char kCheckpointMagic[4] = {'D', 'U', 'Q', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr int kMaxDim = 1 << 20;

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

  private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
  public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string name)
        : bytes_(bytes), name_(std::move(name)) {}

    std::uint8_t u8() { return *next(1); }
    std::uint32_t u32() { return load<std::uint32_t>(); }
    std::uint64_t u64() { return load<std::uint64_t>(); }
    float f32() { return load<float>(); }
    double f64() { return load<double>(); }
    void skip(std::size_t n) { next(n); }
    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(name_ + ": " + what + " at byte " + std::to_string(pos_));
    }

  private:
    template <typename T>
    T load() {
        T v;
        std::memcpy(&v, next(sizeof(T)), sizeof(T));
        return v;
    }
    const std::uint8_t* next(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw FormatError(name_ + ": truncated, need " + std::to_string(n) +
                              " bytes at byte " + std::to_string(pos_) + " but only " +
                              std::to_string(bytes_.size() - pos_) + " remain");
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    const std::vector<std::uint8_t>& bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

std::string escape_json(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char hex[8];
                    std::snprintf(hex, sizeof hex, "\\u%04x", c);
                    out += hex;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

void check_plane_content(const Raster& plane, std::uint8_t tag, const char* context) {
    for (std::size_t i = 0; i < plane.values.size(); ++i) {
        const double v = plane.values[i];
        if (tag == kPlaneDepth && std::isnan(v))
            throw FormatError(std::string(context) + ": NaN in depth plane at element " +
                              std::to_string(i));
        if (tag == kPlaneMask && v != 0.0 && v != 1.0)
            throw FormatError(std::string(context) + ": mask value " + format_g9(v) +
                              " outside {0, 1} at element " + std::to_string(i));
    }
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to '" + path + "'");
}

void RasterBundle::validate() const {
    if (width < 1 || height < 1)
        throw ShapeError("raster bundle: empty dimensions " + std::to_string(width) + "x" +
                         std::to_string(height));
    if (planes.empty()) throw ShapeError("raster bundle: no planes");
    if (tags.size() != planes.size())
        throw ShapeError("raster bundle: " + std::to_string(tags.size()) + " tags for " +
                         std::to_string(planes.size()) + " planes");
    for (std::size_t p = 0; p < planes.size(); ++p) {
        if (planes[p].width != width || planes[p].height != height)
            throw ShapeError("raster bundle: plane " + std::to_string(p) + " has mismatched shape");
        if (tags[p] > kPlaneMask)
            throw FormatError("raster bundle: unknown plane tag " + std::to_string(tags[p]));
        check_plane_content(planes[p], tags[p], "raster bundle");
    }
}

RasterBundle read_raster(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kRasterMagic, 4) != 0)
        throw FormatError(path + ": bad magic at byte 0, expected \"DUQ1\"");

    ByteReader r(bytes, path);
    r.skip(4);
    const std::uint32_t w = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t c = r.u32();
    if (w < 1 || h < 1 || w > kMaxDim || h > kMaxDim)
        throw FormatError(path + ": implausible dimensions " + std::to_string(w) + "x" +
                          std::to_string(h));
    if (c < 1 || c > 4096) throw FormatError(path + ": implausible channel count " +
                                             std::to_string(c));

    const std::uint64_t expected =
        16ull + c + 4ull * w * h * c;
    if (bytes.size() != expected)
        throw FormatError(path + ": expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));

    RasterBundle bundle;
    bundle.width = static_cast<int>(w);
    bundle.height = static_cast<int>(h);
    bundle.tags.resize(c);
    bundle.planes.resize(c);
    for (std::uint32_t p = 0; p < c; ++p) {
        bundle.tags[p] = r.u8();
        if (bundle.tags[p] > kPlaneMask) {
            throw FormatError(path + ": unknown plane tag " + std::to_string(bundle.tags[p]) +
                              " at byte " + std::to_string(r.offset() - 1));
        }
    }
    for (std::uint32_t p = 0; p < c; ++p) {
        Raster plane(bundle.width, bundle.height);
        for (std::size_t i = 0; i < plane.values.size(); ++i) {
            const std::size_t at = r.offset();
            const float v = r.f32();
            if (bundle.tags[p] == kPlaneDepth && std::isnan(v))
                throw FormatError(path + ": NaN in depth plane at byte " + std::to_string(at));
            if (bundle.tags[p] == kPlaneMask && v != 0.0f && v != 1.0f)
                throw FormatError(path + ": mask value " + format_g9(v) +
                                  " outside {0, 1} at byte " + std::to_string(at));
            plane.values[i] = v;
        }
        bundle.planes[p] = std::move(plane);
    }
    return bundle;
}

void write_raster(const RasterBundle& bundle, const std::string& path) {
    bundle.validate();
    ByteWriter w;
    for (char ch : kRasterMagic) w.u8(static_cast<std::uint8_t>(ch));
    w.u32(static_cast<std::uint32_t>(bundle.width));
    w.u32(static_cast<std::uint32_t>(bundle.height));
    w.u32(static_cast<std::uint32_t>(bundle.channels()));
    for (std::uint8_t tag : bundle.tags) w.u8(tag);
    for (const Raster& plane : bundle.planes)
        for (double v : plane.values) w.f32(static_cast<float>(v));
    write_file_bytes(path, w.take());
}

RasterBundle bundle_from_samples(const PredictiveSampleSet& set) {
    if (set.count() == 0) throw EmptyInputError("bundle_from_samples: no samples");
    RasterBundle bundle;
    bundle.width = set.samples[0].mean.width;
    bundle.height = set.samples[0].mean.height;
    for (const PredictiveSample& s : set.samples) {
        bundle.tags.push_back(kPlaneDepth);
        bundle.planes.push_back(s.mean);
        bundle.tags.push_back(kPlaneSigma);
        bundle.planes.push_back(s.sigma);
    }
    bundle.validate();
    return bundle;
}

PredictiveSampleSet samples_from_bundle(const RasterBundle& bundle) {
    bundle.validate();
    if (bundle.channels() < 2 || bundle.channels() % 2 != 0)
        throw FormatError("sample set bundle: expected an even channel count, got " +
                          std::to_string(bundle.channels()));
    PredictiveSampleSet set;
    for (int p = 0; p < bundle.channels(); p += 2) {
        if (bundle.tags[p] != kPlaneDepth || bundle.tags[p + 1] != kPlaneSigma)
            throw FormatError("sample set bundle: plane " + std::to_string(p) +
                              " is not a (depth, sigma) pair");
        set.samples.push_back({bundle.planes[p], bundle.planes[p + 1]});
    }
    return set;
}

RasterBundle bundle_from_prediction(const GaussianPrediction& pred) {
    RasterBundle bundle;
    bundle.width = pred.mean.width;
    bundle.height = pred.mean.height;
    bundle.tags = {kPlaneDepth, kPlaneVar, kPlaneVar, kPlaneVar};
    bundle.planes = {pred.mean, pred.var_epistemic, pred.var_aleatoric, pred.var_total};
    bundle.validate();
    return bundle;
}

GaussianPrediction prediction_from_bundle(const RasterBundle& bundle) {
    bundle.validate();
    const std::vector<std::uint8_t> want = {kPlaneDepth, kPlaneVar, kPlaneVar, kPlaneVar};
    if (bundle.tags != want)
        throw FormatError("prediction bundle: expected planes (depth, var, var, var)");
    return {bundle.planes[0], bundle.planes[1], bundle.planes[2], bundle.planes[3]};
}

RasterBundle bundle_from_gt(const DepthRaster& gt) {
    gt.validate();
    RasterBundle bundle;
    bundle.width = gt.width();
    bundle.height = gt.height();
    Raster mask(gt.width(), gt.height());
    for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = gt.valid[i] ? 1.0 : 0.0;
    bundle.tags = {kPlaneDepth, kPlaneMask};
    // invalid pixels may hold junk depth; zero them so the file is readable
    Raster depth = gt.depth;
    for (std::size_t i = 0; i < depth.values.size(); ++i)
        if (!gt.valid[i]) depth.values[i] = 0.0;
    bundle.planes = {std::move(depth), std::move(mask)};
    bundle.validate();
    return bundle;
}

DepthRaster gt_from_bundle(const RasterBundle& bundle) {
    bundle.validate();
    const std::vector<std::uint8_t> want = {kPlaneDepth, kPlaneMask};
    if (bundle.tags != want)
        throw FormatError("ground-truth bundle: expected planes (depth, mask)");
    DepthRaster gt;
    gt.depth = bundle.planes[0];
    gt.valid.resize(gt.depth.size());
    for (std::size_t i = 0; i < gt.valid.size(); ++i)
        gt.valid[i] = bundle.planes[1].values[i] != 0.0 ? 1 : 0;
    gt.validate();
    return gt;
}

void write_ply(const UncertainPointCloud& cloud, const std::string& path,
               const std::vector<std::string>& comments) {
    cloud.validate();
    std::string out;
    out += "ply\n";
    out += "format ascii 1.0\n";
    for (const std::string& c : comments) out += "comment " + c + "\n";
    out += "element vertex " + std::to_string(cloud.size()) + "\n";
    out += "property float x\n";
    out += "property float y\n";
    out += "property float z\n";
    out += "property float sigma\n";
    out += "end_header\n";
    for (int i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d& p = cloud.points[i];
        out += format_g9(static_cast<float>(p.x())) + " " +
               format_g9(static_cast<float>(p.y())) + " " +
               format_g9(static_cast<float>(p.z())) + " " +
               format_g9(static_cast<float>(cloud.sigma[i])) + "\n";
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    f << out;
    if (!f) throw FormatError("short write to '" + path + "'");
}

UncertainPointCloud read_ply(const std::string& path, std::vector<std::string>* comments) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open '" + path + "' for reading");

    int line_no = 0;
    auto next_line = [&](std::string& line) {
        if (!std::getline(f, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return true;
    };
    auto fail = [&](const std::string& what) -> void {
        throw FormatError(path + ":" + std::to_string(line_no) + ": " + what);
    };

    std::string line;
    if (!next_line(line) || line != "ply") fail("expected \"ply\"");
    if (!next_line(line) || line != "format ascii 1.0") fail("expected \"format ascii 1.0\"");

    long n_vertices = -1;
    const char* expected_props[] = {"property float x", "property float y", "property float z",
                                    "property float sigma"};
    int props_seen = 0;
    while (true) {
        if (!next_line(line)) fail("header ended before end_header");
        if (line.rfind("comment ", 0) == 0) {
            if (comments) comments->push_back(line.substr(8));
            continue;
        }
        if (line.rfind("element vertex ", 0) == 0) {
            if (n_vertices >= 0) fail("duplicate element line");
            const std::string count = line.substr(15);
            auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), n_vertices);
            if (ec != std::errc() || ptr != count.data() + count.size() || n_vertices < 0)
                fail("bad vertex count '" + count + "'");
            continue;
        }
        if (line.rfind("property ", 0) == 0) {
            if (n_vertices < 0) fail("property before element line");
            if (props_seen >= 4 || line != expected_props[props_seen])
                fail("expected \"" + std::string(props_seen < 4 ? expected_props[props_seen]
                                                                : "end_header") + "\"");
            ++props_seen;
            continue;
        }
        if (line == "end_header") {
            if (n_vertices < 0) fail("end_header before element line");
            if (props_seen != 4) fail("vertex element must have exactly x y z sigma");
            break;
        }
        fail("unrecognized header line '" + line + "'");
    }

    UncertainPointCloud cloud;
    cloud.points.reserve(n_vertices);
    cloud.sigma.reserve(n_vertices);
    for (long i = 0; i < n_vertices; ++i) {
        if (!next_line(line)) fail("expected " + std::to_string(n_vertices) +
                                   " vertex lines, file ended after " + std::to_string(i));
        double vals[4];
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int k = 0; k < 4; ++k) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            auto [ptr, ec] = std::from_chars(p, end, vals[k]);
            if (ec != std::errc()) fail("bad number in vertex line");
            p = ptr;
        }
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        if (p != end) fail("trailing content after vertex values");
        cloud.points.emplace_back(vals[0], vals[1], vals[2]);
        cloud.sigma.push_back(vals[3]);
    }
    cloud.validate();
    return cloud;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ckpt.config.validate();
    const int n_layers = ckpt.config.n_layers();
    if (static_cast<int>(ckpt.params.weights.size()) != n_layers ||
        static_cast<int>(ckpt.params.biases.size()) != n_layers)
        throw ShapeError("checkpoint: parameter layer count does not match config");
    for (int l = 0; l < n_layers; ++l) {
        const std::size_t in_dim = ckpt.config.layer_sizes[l];
        const std::size_t out_dim = ckpt.config.layer_sizes[l + 1];
        if (ckpt.params.weights[l].size() != in_dim * out_dim ||
            ckpt.params.biases[l].size() != out_dim)
            throw ShapeError("checkpoint: parameter shape mismatch at layer " + std::to_string(l));
    }

    ByteWriter w;
    for (char ch : kCheckpointMagic) w.u8(static_cast<std::uint8_t>(ch));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.config.layer_sizes.size()));
    for (int s : ckpt.config.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
    for (std::uint8_t flag : ckpt.config.dropout_flags) w.u8(flag ? 1 : 0);
    w.f64(ckpt.config.dropout_p);
    w.u32(0);  // activation id: ELU
    w.u64(ckpt.seed);
    w.f64(ckpt.init_std);
    w.f64(ckpt.settings.learning_rate);
    w.u32(static_cast<std::uint32_t>(ckpt.settings.batch_size));
    w.u32(static_cast<std::uint32_t>(ckpt.settings.epochs));
    const std::vector<double> flat = flatten_params(ckpt.params);
    w.u64(flat.size());
    for (double v : flat) w.f64(v);
    write_file_bytes(path, w.take());
}

Checkpoint read_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw FormatError(path + ": bad magic at byte 0, expected \"DUQM\"");

    ByteReader r(bytes, path);
    r.skip(4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));

    const std::uint32_t n_sizes = r.u32();
    if (n_sizes < 3 || n_sizes > 64)
        throw FormatError(path + ": implausible layer size count " + std::to_string(n_sizes));

    Checkpoint ckpt;
    ckpt.config.layer_sizes.resize(n_sizes);
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
        const std::uint32_t s = r.u32();
        if (s < 1 || s > 1000000) r.fail("implausible layer width " + std::to_string(s));
        ckpt.config.layer_sizes[i] = static_cast<int>(s);
    }
    ckpt.config.dropout_flags.resize(n_sizes - 2);
    for (std::uint32_t i = 0; i + 2 < n_sizes; ++i) {
        const std::uint8_t flag = r.u8();
        if (flag > 1) r.fail("dropout flag must be 0 or 1");
        ckpt.config.dropout_flags[i] = flag;
    }
    ckpt.config.dropout_p = r.f64();
    const std::uint32_t activation = r.u32();
    if (activation != 0)
        throw FormatError(path + ": unsupported activation id " + std::to_string(activation));
    ckpt.seed = r.u64();
    ckpt.init_std = r.f64();
    ckpt.settings.learning_rate = r.f64();
    ckpt.settings.batch_size = static_cast<int>(r.u32());
    ckpt.settings.epochs = static_cast<int>(r.u32());

    std::uint64_t expected = 0;
    for (std::uint32_t l = 0; l + 1 < n_sizes; ++l)
        expected += static_cast<std::uint64_t>(ckpt.config.layer_sizes[l]) *
                        ckpt.config.layer_sizes[l + 1] +
                    ckpt.config.layer_sizes[l + 1];
    const std::uint64_t declared = r.u64();
    if (declared != expected)
        throw FormatError(path + ": parameter count " + std::to_string(declared) +
                          " does not match layer sizes (need " + std::to_string(expected) + ")");
    if (r.remaining() != 8 * expected)
        throw FormatError(path + ": expected " + std::to_string(8 * expected) +
                          " parameter bytes, got " + std::to_string(r.remaining()));

    std::vector<double> flat(expected);
    for (std::uint64_t i = 0; i < expected; ++i) flat[i] = r.f64();
    try {
        ckpt.config.validate();
    } catch (const Error& e) {
        throw FormatError(path + ": invalid stored config: " + e.what());
    }
    ckpt.params = unflatten_params(ckpt.config, flat);
    return ckpt;
}

Json Json::object() {
    Json j;
    j.kind_ = Kind::object;
    return j;
}

Json Json::array() {
    Json j;
    j.kind_ = Kind::array;
    return j;
}

Json Json::str(std::string v) {
    Json j;
    j.kind_ = Kind::string;
    j.string_ = std::move(v);
    return j;
}

Json Json::num(double v) {
    Json j;
    j.kind_ = Kind::number;
    j.number_ = v;
    return j;
}

Json Json::num_exact(double v) {
    Json j;
    j.kind_ = Kind::number;
    j.number_ = v;
    j.exact_ = true;
    return j;
}

Json Json::integer(std::int64_t v) {
    Json j;
    j.kind_ = Kind::integer;
    j.integer_ = v;
    return j;
}

Json Json::boolean(bool v) {
    Json j;
    j.kind_ = Kind::boolean;
    j.boolean_ = v;
    return j;
}

Json& Json::set(const std::string& key, Json v) {
    if (kind_ != Kind::object) throw ParameterError("Json::set on a non-object");
    members_[key] = std::move(v);
    return *this;
}

Json& Json::push(Json v) {
    if (kind_ != Kind::array) throw ParameterError("Json::push on a non-array");
    elements_.push_back(std::move(v));
    return *this;
}

void Json::write(std::string& out, int indent, int depth) const {
    const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
    switch (kind_) {
        case Kind::null:
            out += "null";
            break;
        case Kind::boolean:
            out += boolean_ ? "true" : "false";
            break;
        case Kind::integer:
            out += std::to_string(integer_);
            break;
        case Kind::number:
            if (!std::isfinite(number_)) {
                out += "null";  // keep the document valid JSON
            } else if (exact_) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", number_);
                out += buf;
            } else {
                out += format_g9(number_);
            }
            break;
        case Kind::string:
            out += '"' + escape_json(string_) + '"';
            break;
        case Kind::object: {
            if (members_.empty()) {
                out += "{}";
                break;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [key, value] : members_) {  // std::map: sorted keys
                if (!first) out += ",\n";
                first = false;
                out += pad + '"' + escape_json(key) + "\": ";
                value.write(out, indent, depth + 1);
            }
            out += "\n" + close_pad + "}";
            break;
        }
        case Kind::array: {
            if (elements_.empty()) {
                out += "[]";
                break;
            }
            out += "[\n";
            bool first = true;
            for (const Json& value : elements_) {
                if (!first) out += ",\n";
                first = false;
                out += pad;
                value.write(out, indent, depth + 1);
            }
            out += "\n" + close_pad + "]";
            break;
        }
    }
}

std::string Json::dump(int indent) const {
    std::string out;
    write(out, indent, 0);
    out += "\n";
    return out;
}

std::string render_report(const MetricsReport& report) {
    Json root = Json::object();
    root.set("schema_version", Json::integer(report.schema_version));

    Json prov = Json::object();
    prov.set("aggregate", Json::str(report.aggregate));
    prov.set("config_hash", Json::str(report.config_hash));
    Json inputs = Json::array();
    for (const std::string& p : report.inputs) inputs.push(Json::str(p));
    prov.set("inputs", std::move(inputs));
    prov.set("seed", Json::str(std::to_string(report.seed)));
    root.set("provenance", std::move(prov));

    if (report.depth) {
        Json d = Json::object();
        d.set("abs_rel", Json::num(report.depth->abs_rel));
        d.set("sq_rel", Json::num(report.depth->sq_rel));
        d.set("rmse", Json::num(report.depth->rmse));
        d.set("rmse_log", Json::num(report.depth->rmse_log));
        d.set("delta1", Json::num(report.depth->delta1));
        d.set("delta2", Json::num(report.depth->delta2));
        d.set("delta3", Json::num(report.depth->delta3));
        root.set("depth", std::move(d));
    }
    if (report.calibration) {
        Json c = Json::object();
        c.set("auce", Json::num(report.calibration->auce));
        Json levels = Json::array();
        Json coverage = Json::array();
        for (double v : report.calibration->levels) levels.push(Json::num(v));
        for (double v : report.calibration->coverage) coverage.push(Json::num(v));
        c.set("levels", std::move(levels));
        c.set("coverage", std::move(coverage));
        root.set("calibration", std::move(c));
    }
    if (report.sparsification) {
        Json s = Json::object();
        s.set("ause", Json::num(report.sparsification->ause));
        Json fr = Json::array(), cu = Json::array(), co = Json::array(), ec = Json::array();
        for (double v : report.sparsification->fractions) fr.push(Json::num(v));
        for (double v : report.sparsification->curve_by_uncertainty) cu.push(Json::num(v));
        for (double v : report.sparsification->curve_oracle) co.push(Json::num(v));
        for (double v : report.sparsification->error_curve) ec.push(Json::num(v));
        s.set("fractions", std::move(fr));
        s.set("curve_by_uncertainty", std::move(cu));
        s.set("curve_oracle", std::move(co));
        s.set("error_curve", std::move(ec));
        root.set("sparsification", std::move(s));
    }
    return root.dump();
}

void write_report(const MetricsReport& report, const std::string& path) {
    const std::string text = render_report(report);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw FormatError("short write to '" + path + "'");
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::string out = "percentile,rmse_t_m,rmse_r_deg,n_pairs,n_failed\n";
    char buf[32];
    for (const SweepRow& row : rows) {
        std::snprintf(buf, sizeof buf, "%.2f", row.percentile);
        out += buf;
        out += "," + format_g9(row.rmse_t) + "," + format_g9(row.rmse_r) + "," +
               std::to_string(row.n_pairs) + "," + std::to_string(row.n_failed) + "\n";
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    f << out;
    if (!f) throw FormatError("short write to '" + path + "'");
}

void write_xy_csv(const Dataset& data, const std::string& path) {
    if (data.feature_dim != 1)
        throw ShapeError("write_xy_csv: only 1-feature datasets are supported");
    if (data.targets.size() != static_cast<std::size_t>(data.size()))
        throw ShapeError("write_xy_csv: dataset has no targets");
    std::string out = "x,y\n";
    for (int i = 0; i < data.size(); ++i)
        out += format_g9(data.features[i]) + "," + format_g9(data.targets[i]) + "\n";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    f << out;
    if (!f) throw FormatError("short write to '" + path + "'");
}

Dataset read_xy_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open '" + path + "' for reading");
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw FormatError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    auto next_line = [&](std::string& l) {
        if (!std::getline(f, l)) return false;
        if (!l.empty() && l.back() == '\r') l.pop_back();
        ++line_no;
        return true;
    };

    if (!next_line(line) || line != "x,y") fail("expected header \"x,y\"");
    Dataset data;
    data.feature_dim = 1;
    while (next_line(line)) {
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) fail("expected two comma-separated values");
        double x = 0.0, y = 0.0;
        auto r1 = std::from_chars(line.data(), line.data() + comma, x);
        auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), y);
        if (r1.ec != std::errc() || r1.ptr != line.data() + comma || r2.ec != std::errc() ||
            r2.ptr != line.data() + line.size())
            fail("bad number in row");
        data.features.push_back(x);
        data.targets.push_back(y);
    }
    return data;
}

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace duq
