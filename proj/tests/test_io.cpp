#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "duq/errors.hpp"
#include "duq/io.hpp"
#include "duq/predictive.hpp"
#include "duq/toynet.hpp"
#include "support/oracles.hpp"

using duq::Checkpoint;
using duq::DepthRaster;
using duq::GaussianPrediction;
using duq::Json;
using duq::MetricsReport;
using duq::PredictiveSample;
using duq::PredictiveSampleSet;
using duq::Raster;
using duq::RasterBundle;
using duq::UncertainPointCloud;

namespace {

// float32-representable values so write -> read is lossless
RasterBundle sample_bundle() {
    RasterBundle b;
    b.width = 17;
    b.height = 13;
    Raster depth(17, 13), mask(17, 13);
    for (int i = 0; i < depth.size(); ++i) {
        depth.values[i] = 0.25 * i + 1.0;
        mask.values[i] = (i % 3 == 0) ? 1.0 : 0.0;
    }
    b.tags = {duq::kPlaneDepth, duq::kPlaneMask};
    b.planes = {depth, mask};
    return b;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string thrown_message(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const duq::Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("raster containers survive a write/read/write cycle byte for byte") {
    oracle::TempDir dir;
    const std::string path = dir.file("a.duq");
    const RasterBundle b = sample_bundle();
    duq::write_raster(b, path);

    const RasterBundle back = duq::read_raster(path);
    CHECK(back.width == 17);
    CHECK(back.height == 13);
    CHECK(back.tags == b.tags);
    REQUIRE(back.channels() == 2);
    CHECK(back.planes[0].values == b.planes[0].values);
    CHECK(back.planes[1].values == b.planes[1].values);

    const std::string path2 = dir.file("b.duq");
    duq::write_raster(back, path2);
    CHECK(duq::read_file_bytes(path) == duq::read_file_bytes(path2));
}

TEST_CASE("raster reader rejects malformed files with located errors") {
    oracle::TempDir dir;
    const std::string path = dir.file("a.duq");
    duq::write_raster(sample_bundle(), path);
    const std::vector<std::uint8_t> good = duq::read_file_bytes(path);

    SUBCASE("bad magic") {
        std::vector<std::uint8_t> bad = good;
        bad[0] = 'X';
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_raster(path); });
        CHECK(msg.find("bad magic at byte 0") != std::string::npos);
        CHECK(msg.find("DUQ1") != std::string::npos);
    }
    SUBCASE("truncated payload") {
        std::vector<std::uint8_t> bad(good.begin(), good.end() - 7);
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_raster(path); });
        CHECK(msg.find("expected " + std::to_string(good.size()) + " bytes, got " +
                       std::to_string(good.size() - 7)) != std::string::npos);
    }
    SUBCASE("oversized payload") {
        std::vector<std::uint8_t> bad = good;
        bad.push_back(0);
        duq::write_file_bytes(path, bad);
        CHECK_THROWS_AS(duq::read_raster(path), duq::FormatError);
    }
    SUBCASE("NaN in the depth plane, byte offset named") {
        std::vector<std::uint8_t> bad = good;
        const float nan_f = std::numeric_limits<float>::quiet_NaN();
        const std::size_t at = 16 + 2 + 4 * 5;  // header, tags, element 5 of plane 0
        std::memcpy(bad.data() + at, &nan_f, 4);
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_raster(path); });
        CHECK(msg.find("NaN in depth plane at byte " + std::to_string(at)) !=
              std::string::npos);
    }
    SUBCASE("mask value outside {0, 1}, byte offset named") {
        std::vector<std::uint8_t> bad = good;
        const float half = 0.5f;
        const std::size_t at = 16 + 2 + 4 * 17 * 13 + 4 * 3;  // element 3 of plane 1
        std::memcpy(bad.data() + at, &half, 4);
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_raster(path); });
        CHECK(msg.find("mask value 0.5 outside {0, 1} at byte " + std::to_string(at)) !=
              std::string::npos);
    }
    SUBCASE("unknown plane tag") {
        std::vector<std::uint8_t> bad = good;
        bad[16] = 9;
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_raster(path); });
        CHECK(msg.find("unknown plane tag 9") != std::string::npos);
    }
}

TEST_CASE("raster writer refuses invalid bundles") {
    oracle::TempDir dir;
    const std::string path = dir.file("x.duq");

    RasterBundle nan_depth = sample_bundle();
    nan_depth.planes[0].values[4] = std::nan("");
    const std::string msg =
        thrown_message([&] { duq::write_raster(nan_depth, path); });
    CHECK(msg.find("NaN in depth plane at element 4") != std::string::npos);

    RasterBundle bad_mask = sample_bundle();
    bad_mask.planes[1].values[7] = 0.5;
    CHECK_THROWS_AS(duq::write_raster(bad_mask, path), duq::FormatError);

    RasterBundle mismatched = sample_bundle();
    mismatched.planes[1] = Raster(16, 13, 0.0);
    CHECK_THROWS_AS(duq::write_raster(mismatched, path), duq::ShapeError);

    RasterBundle missing_tag = sample_bundle();
    missing_tag.tags.pop_back();
    CHECK_THROWS_AS(duq::write_raster(missing_tag, path), duq::ShapeError);

    RasterBundle alien_tag = sample_bundle();
    alien_tag.tags[1] = 17;
    CHECK_THROWS_AS(duq::write_raster(alien_tag, path), duq::FormatError);

    RasterBundle empty;
    CHECK_THROWS_AS(duq::write_raster(empty, path), duq::ShapeError);
}

TEST_CASE("sample sets map onto alternating depth/sigma planes") {
    std::mt19937_64 rng(41);
    const PredictiveSampleSet set = oracle::random_samples(rng, 3, 5, 4);

    const RasterBundle b = duq::bundle_from_samples(set);
    CHECK(b.tags == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1});

    const PredictiveSampleSet back = duq::samples_from_bundle(b);
    REQUIRE(back.count() == 3);
    for (int m = 0; m < 3; ++m) {
        CHECK(back.samples[m].mean.values == set.samples[m].mean.values);
        CHECK(back.samples[m].sigma.values == set.samples[m].sigma.values);
    }

    RasterBundle odd = b;
    odd.tags.pop_back();
    odd.planes.pop_back();
    CHECK_THROWS_AS(duq::samples_from_bundle(odd), duq::FormatError);

    RasterBundle swapped = b;
    std::swap(swapped.tags[0], swapped.tags[1]);
    CHECK_THROWS_AS(duq::samples_from_bundle(swapped), duq::FormatError);

    CHECK_THROWS_AS(duq::bundle_from_samples(PredictiveSampleSet{}), duq::EmptyInputError);
}

TEST_CASE("fused predictions round-trip through their four-plane layout") {
    std::mt19937_64 rng(42);
    const GaussianPrediction pred =
        duq::fuse_samples(oracle::random_samples(rng, 4, 6, 3, 0.5, 4.0));

    const RasterBundle b = duq::bundle_from_prediction(pred);
    CHECK(b.tags == std::vector<std::uint8_t>{0, 2, 2, 2});

    const GaussianPrediction back = duq::prediction_from_bundle(b);
    CHECK(back.mean.values == pred.mean.values);
    CHECK(back.var_epistemic.values == pred.var_epistemic.values);
    CHECK(back.var_aleatoric.values == pred.var_aleatoric.values);
    CHECK(back.var_total.values == pred.var_total.values);

    RasterBundle wrong = b;
    wrong.tags = {0, 1, 2, 2};
    CHECK_THROWS_AS(duq::prediction_from_bundle(wrong), duq::FormatError);
}

TEST_CASE("ground truth bundles zero the junk behind invalid pixels") {
    DepthRaster gt;
    gt.depth = Raster(3, 2, 2.5);
    gt.valid = {1, 0, 1, 1, 0, 1};
    gt.depth.values[1] = -77.0;  // junk allowed where valid = 0
    gt.depth.values[4] = 1e9;

    const RasterBundle b = duq::bundle_from_gt(gt);
    CHECK(b.tags == std::vector<std::uint8_t>{duq::kPlaneDepth, duq::kPlaneMask});
    CHECK(b.planes[0].values[1] == 0.0);
    CHECK(b.planes[0].values[4] == 0.0);
    CHECK(b.planes[1].values == std::vector<double>{1, 0, 1, 1, 0, 1});

    const DepthRaster back = duq::gt_from_bundle(b);
    CHECK(back.valid == gt.valid);
    CHECK(back.depth.values[0] == 2.5);

    RasterBundle wrong = b;
    wrong.tags = {duq::kPlaneDepth, duq::kPlaneSigma};
    CHECK_THROWS_AS(duq::gt_from_bundle(wrong), duq::FormatError);
}

TEST_CASE("ply files carry points, sigmas, and comments through a round trip") {
    oracle::TempDir dir;
    const std::string path = dir.file("cloud.ply");

    UncertainPointCloud cloud;
    cloud.points = {{1.5, -2.25, 0.125}, {0.0, 4.0, -1.0}, {100.5, 0.25, 3.0}};
    cloud.sigma = {0.5, 0.25, 2.0};
    duq::write_ply(cloud, path, {"first remark", "second remark"});

    std::vector<std::string> comments;
    const UncertainPointCloud back = duq::read_ply(path, &comments);
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(back.points[i] == cloud.points[i]);
        CHECK(back.sigma[i] == cloud.sigma[i]);
    }
    CHECK(comments == std::vector<std::string>{"first remark", "second remark"});

    const std::string path2 = dir.file("cloud2.ply");
    duq::write_ply(back, path2, comments);
    CHECK(read_text(path) == read_text(path2));
}

TEST_CASE("ply header follows the fixed property order") {
    oracle::TempDir dir;
    const std::string path = dir.file("tiny.ply");
    UncertainPointCloud one;
    one.points = {{1.0, 2.0, 3.0}};
    one.sigma = {0.5};
    duq::write_ply(one, path);

    CHECK(read_text(path) ==
          "ply\n"
          "format ascii 1.0\n"
          "element vertex 1\n"
          "property float x\n"
          "property float y\n"
          "property float z\n"
          "property float sigma\n"
          "end_header\n"
          "1 2 3 0.5\n");

    const std::string empty_path = dir.file("empty.ply");
    duq::write_ply(UncertainPointCloud{}, empty_path);
    CHECK(read_text(empty_path).find("element vertex 0\n") != std::string::npos);
    CHECK(duq::read_ply(empty_path).size() == 0);
}

TEST_CASE("ply parse errors name the file and line") {
    oracle::TempDir dir;

    auto write_text_file = [&](const std::string& name, const std::string& text) {
        const std::string path = dir.file(name);
        std::ofstream f(path);
        f << text;
        f.close();
        return path;
    };

    const std::string not_ply = write_text_file("a.ply", "plyx\n");
    std::string msg = thrown_message([&] { duq::read_ply(not_ply); });
    CHECK(msg.find(not_ply + ":1: expected \"ply\"") != std::string::npos);

    const std::string bad_vertex = write_text_file(
        "b.ply",
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
        "property float z\nproperty float sigma\nend_header\n1 2 3 0.5\n1 2 froth 0.5\n");
    msg = thrown_message([&] { duq::read_ply(bad_vertex); });
    CHECK(msg.find(":10: bad number in vertex line") != std::string::npos);

    const std::string short_file = write_text_file(
        "c.ply",
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
        "property float z\nproperty float sigma\nend_header\n1 2 3 0.5\n");
    msg = thrown_message([&] { duq::read_ply(short_file); });
    CHECK(msg.find("file ended after 1") != std::string::npos);

    const std::string odd_props = write_text_file(
        "d.ply", "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\n"
                 "property float nx\nend_header\n");
    msg = thrown_message([&] { duq::read_ply(odd_props); });
    CHECK(msg.find(":5: expected \"property float y\"") != std::string::npos);

    CHECK_THROWS_AS(duq::read_ply(dir.file("missing.ply")), duq::FormatError);
}

TEST_CASE("checkpoints restore parameters bit for bit") {
    oracle::TempDir dir;
    const std::string path = dir.file("model.duqm");

    Checkpoint ckpt;
    ckpt.config.layer_sizes = {2, 8, 5, 2};
    ckpt.config.dropout_flags = {1, 0};
    ckpt.config.dropout_p = 0.35;
    ckpt.params = duq::init_params(ckpt.config, 321);
    ckpt.seed = 321;
    ckpt.init_std = 0.1;
    ckpt.settings.learning_rate = 0.004;
    ckpt.settings.batch_size = 24;
    ckpt.settings.epochs = 17;
    duq::write_checkpoint(ckpt, path);

    const Checkpoint back = duq::read_checkpoint(path);
    CHECK(back.config.layer_sizes == ckpt.config.layer_sizes);
    CHECK(back.config.dropout_flags == ckpt.config.dropout_flags);
    CHECK(back.config.dropout_p == 0.35);
    CHECK(back.seed == 321);
    CHECK(back.init_std == 0.1);
    CHECK(back.settings.learning_rate == 0.004);
    CHECK(back.settings.batch_size == 24);
    CHECK(back.settings.epochs == 17);
    CHECK(duq::flatten_params(back.params) == duq::flatten_params(ckpt.params));

    // restored nets answer identically
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        const std::vector<double> x = {u(rng), u(rng)};
        const duq::ToyNetOutput a = duq::forward(ckpt.params, ckpt.config, x);
        const duq::ToyNetOutput b = duq::forward(back.params, back.config, x);
        CHECK(a.mean == b.mean);
        CHECK(a.raw_sigma == b.raw_sigma);
    }
}

TEST_CASE("checkpoint reader rejects corruption") {
    oracle::TempDir dir;
    const std::string path = dir.file("model.duqm");
    Checkpoint ckpt;
    ckpt.config.layer_sizes = {1, 4, 2};
    ckpt.config.dropout_flags = {0};
    ckpt.params = duq::init_params(ckpt.config, 5);
    duq::write_checkpoint(ckpt, path);
    const std::vector<std::uint8_t> good = duq::read_file_bytes(path);

    SUBCASE("bad magic") {
        std::vector<std::uint8_t> bad = good;
        bad[3] = 'Z';
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_checkpoint(path); });
        CHECK(msg.find("expected \"DUQM\"") != std::string::npos);
    }
    SUBCASE("unsupported version") {
        std::vector<std::uint8_t> bad = good;
        bad[4] = 99;
        duq::write_file_bytes(path, bad);
        const std::string msg =
            thrown_message([&] { duq::read_checkpoint(path); });
        CHECK(msg.find("unsupported version 99") != std::string::npos);
    }
    SUBCASE("truncated parameters") {
        std::vector<std::uint8_t> bad(good.begin(), good.end() - 5);
        duq::write_file_bytes(path, bad);
        CHECK_THROWS_AS(duq::read_checkpoint(path), duq::FormatError);
    }
    SUBCASE("declared parameter count disagrees with the layer sizes") {
        std::vector<std::uint8_t> bad = good;
        // layer sizes live at bytes 12..23; widen the hidden layer
        bad[16] = 7;
        duq::write_file_bytes(path, bad);
        CHECK_THROWS_AS(duq::read_checkpoint(path), duq::FormatError);
    }
}

TEST_CASE("json output is deterministic, sorted, and valid") {
    Json root = Json::object();
    root.set("zeta", Json::num(0.1));
    root.set("alpha", Json::integer(-7));
    root.set("mid", Json::boolean(true));
    Json arr = Json::array();
    arr.push(Json::num(1.0 / 3.0));
    arr.push(Json::str("a\"b\\c\nd"));
    arr.push(Json::num(std::nan("")));
    root.set("list", std::move(arr));

    const std::string text = root.dump();
    CHECK(text ==
          "{\n"
          "  \"alpha\": -7,\n"
          "  \"list\": [\n"
          "    0.333333333,\n"
          "    \"a\\\"b\\\\c\\nd\",\n"
          "    null\n"
          "  ],\n"
          "  \"mid\": true,\n"
          "  \"zeta\": 0.1\n"
          "}\n");

    CHECK(Json::num(0.1).dump() == "0.1\n");
    CHECK(Json::num_exact(0.1).dump() == "0.10000000000000001\n");
    CHECK(Json::num(std::numeric_limits<double>::infinity()).dump() == "null\n");
    CHECK(Json::integer(1234567890123456789LL).dump() == "1234567890123456789\n");
    CHECK(Json::object().dump() == "{}\n");
    CHECK(Json::array().dump() == "[]\n");

    CHECK_THROWS_AS(Json::array().set("k", Json::num(1)), duq::ParameterError);
    CHECK_THROWS_AS(Json::object().push(Json::num(1)), duq::ParameterError);
    CHECK_THROWS_AS(Json::num(1).set("k", Json::num(1)), duq::ParameterError);
}

TEST_CASE("metric reports render identically for identical inputs") {
    MetricsReport report;
    report.aggregate = "pooled";
    report.inputs = {"scene_000.pred.duq", "scene_001.pred.duq"};
    report.seed = 17;
    report.config_hash = "deadbeef00000000";
    duq::DepthMetrics depth;
    depth.abs_rel = 0.05;
    depth.sq_rel = 0.01;
    depth.rmse = 0.5;
    depth.rmse_log = 0.07;
    depth.delta1 = 0.9;
    depth.delta2 = 0.97;
    depth.delta3 = 0.99;
    report.depth = depth;

    const std::string a = duq::render_report(report);
    const std::string b = duq::render_report(report);
    CHECK(a == b);
    CHECK(a.find("\"schema_version\": 1") != std::string::npos);
    CHECK(a.find("\"abs_rel\": 0.05") != std::string::npos);
    CHECK(a.find("\"seed\": \"17\"") != std::string::npos);

    // keys render sorted at every level
    CHECK(a.find("\"depth\"") < a.find("\"provenance\""));

    oracle::TempDir dir;
    const std::string path = dir.file("report.json");
    duq::write_report(report, path);
    CHECK(read_text(path) == a);
}

TEST_CASE("config hashing is the reference fnv-1a") {
    CHECK(duq::fnv1a64("") == 14695981039346656037ull);
    CHECK(duq::hex64(duq::fnv1a64("a")) == "af63dc4c8601ec8c");
    CHECK(duq::fnv1a64("ab") != duq::fnv1a64("ba"));
    CHECK(duq::hex64(1) == "0000000000000001");
    CHECK(duq::hex64(0) == "0000000000000000");
}

TEST_CASE("sweep tables use the frozen header and formatting") {
    oracle::TempDir dir;
    const std::string path = dir.file("sweep.csv");
    std::vector<duq::SweepRow> rows(2);
    rows[0] = {0.30, 0.0125, 1.5, 8, 0};
    rows[1] = {1.00, 0.25, 12.125, 7, 1};
    duq::write_sweep_csv(rows, path);
    CHECK(read_text(path) ==
          "percentile,rmse_t_m,rmse_r_deg,n_pairs,n_failed\n"
          "0.30,0.0125,1.5,8,0\n"
          "1.00,0.25,12.125,7,1\n");
}

TEST_CASE("xy tables round-trip exactly for short decimal values") {
    oracle::TempDir dir;
    const std::string path = dir.file("data.csv");
    duq::Dataset data;
    data.feature_dim = 1;
    data.features = {0.125, -2.25, 3.5, 1e-3};
    data.targets = {1.0, 0.5, -0.375, 42.0};
    duq::write_xy_csv(data, path);
    CHECK(read_text(path) == "x,y\n0.125,1\n-2.25,0.5\n3.5,-0.375\n0.001,42\n");

    const duq::Dataset back = duq::read_xy_csv(path);
    CHECK(back.feature_dim == 1);
    CHECK(back.features == data.features);
    CHECK(back.targets == data.targets);

    std::ofstream f(dir.file("bad.csv"));
    f << "x;y\n1,2\n";
    f.close();
    const std::string msg =
        thrown_message([&] { duq::read_xy_csv(dir.file("bad.csv")); });
    CHECK(msg.find(":1: expected header \"x,y\"") != std::string::npos);

    std::ofstream g(dir.file("bad2.csv"));
    g << "x,y\n1,fog\n";
    g.close();
    CHECK_THROWS_AS(duq::read_xy_csv(dir.file("bad2.csv")), duq::FormatError);
    CHECK_THROWS_AS(duq::read_xy_csv(dir.file("absent.csv")), duq::FormatError);
}

TEST_CASE("raw byte helpers round-trip and report missing files") {
    oracle::TempDir dir;
    const std::string path = dir.file("blob.bin");
    const std::vector<std::uint8_t> payload = {0, 1, 2, 255, 128, 7};
    duq::write_file_bytes(path, payload);
    CHECK(duq::read_file_bytes(path) == payload);
    CHECK_THROWS_AS(duq::read_file_bytes(dir.file("no-such-file")), duq::FormatError);

    duq::write_file_bytes(path, {});
    CHECK(duq::read_file_bytes(path).empty());
}
