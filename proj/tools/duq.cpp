// duq: command-line surface over the depth-uncertainty library.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error.
// Every output file carries the seed and a config hash, inline where the
// format allows it and in a  <file>.meta.json  sidecar otherwise.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "duq/io.hpp"
#include "duq/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int thread_cap() {
    const char* env = std::getenv("DUQ_THREADS");
    if (!env || !*env) return 0;  // auto
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) {
        std::cerr << "warning: ignoring invalid DUQ_THREADS value '" << env << "'\n";
        return 0;
    }
    return static_cast<int>(v);
}

std::string hash_args(const duq::Json& args) {
    return duq::hex64(duq::fnv1a64(args.dump()));
}

void write_sidecar(const std::string& out_path, const std::string& command,
                   std::uint64_t seed, const duq::Json& args) {
    duq::Json meta = duq::Json::object();
    meta.set("command", duq::Json::str(command));
    meta.set("config_hash", duq::Json::str(hash_args(args)));
    meta.set("seed", duq::Json::str(std::to_string(seed)));
    duq::Json args_copy = args;
    meta.set("args", std::move(args_copy));
    std::ofstream f(out_path + ".meta.json", std::ios::trunc);
    if (!f) throw duq::FormatError("cannot write sidecar for '" + out_path + "'");
    f << meta.dump();
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(csv.substr(start));
            break;
        }
        out.push_back(csv.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<int> parse_layer_sizes(const std::string& csv) {
    std::vector<int> sizes;
    for (const std::string& tok : split_list(csv)) {
        try {
            sizes.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw duq::ParameterError("bad layer size '" + tok + "' in --config");
        }
    }
    return sizes;
}

std::vector<double> parse_percentiles(const std::string& csv) {
    std::vector<double> out;
    for (const std::string& tok : split_list(csv)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw duq::ParameterError("bad percentile '" + tok + "'");
        }
    }
    return out;
}

duq::Dataset features_from_csv(const std::string& path) {
    duq::Dataset data = duq::read_xy_csv(path);
    if (data.size() == 0) throw duq::FormatError(path + ": no data rows");
    return data;
}

// ---------------------------------------------------------------- synth ---

struct SynthOpts {
    std::string kind = "regress1d";
    int n = 256;
    std::uint64_t seed = 0;
    std::string noise = "hetero";
    std::string out_dir = ".";
};

void run_synth(const SynthOpts& o) {
    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("synth"));
    args.set("kind", duq::Json::str(o.kind));
    args.set("n", duq::Json::integer(o.n));
    args.set("noise", duq::Json::str(o.noise));
    args.set("seed", duq::Json::str(std::to_string(o.seed)));
    const std::string hash = hash_args(args);

    fs::create_directories(o.out_dir);
    const auto in_dir = [&](const std::string& name) {
        return (fs::path(o.out_dir) / name).string();
    };

    if (o.kind == "regress1d") {
        const duq::synth::Regress1d set =
            duq::synth::make_regress1d(o.n, o.seed, duq::synth::parse_noise_kind(o.noise));
        const std::string out = in_dir("train.csv");
        duq::write_xy_csv(set.data, out);
        write_sidecar(out, "synth", o.seed, args);
        std::cout << "wrote " << out << " (" << o.n << " rows, noise " << o.noise << ")\n";
    } else if (o.kind == "depthscene") {
        for (int i = 0; i < o.n; ++i) {
            const duq::synth::ScenePrediction scene =
                duq::synth::make_scene_prediction(o.seed + static_cast<std::uint64_t>(i));
            char name[64];
            std::snprintf(name, sizeof name, "scene_%03d", i);
            const std::string gt_path = in_dir(std::string(name) + ".gt.duq");
            const std::string pred_path = in_dir(std::string(name) + ".pred.duq");
            duq::write_raster(duq::bundle_from_gt(scene.gt), gt_path);
            duq::write_raster(duq::bundle_from_prediction(scene.pred), pred_path);
            write_sidecar(gt_path, "synth", o.seed, args);
            write_sidecar(pred_path, "synth", o.seed, args);
        }
        std::cout << "wrote " << o.n << " scene(s) under " << o.out_dir << "\n";
    } else if (o.kind == "pairset") {
        duq::synth::SceneOptions opt;
        if (o.noise == "corrupt")
            opt.corrupt = true;
        else if (o.noise == "clean")
            opt.corrupt = false;
        else
            throw duq::ParameterError("pairset --noise must be clean or corrupt, got '" +
                                      o.noise + "'");
        const std::vector<duq::CloudPair> pairs = duq::synth::make_pair_set(o.n, o.seed, opt);

        duq::Json manifest = duq::Json::object();
        duq::Json rows = duq::Json::array();
        for (int i = 0; i < o.n; ++i) {
            char stem[64];
            std::snprintf(stem, sizeof stem, "pair_%03d", i);
            const std::string src_name = std::string(stem) + "_source.ply";
            const std::string dst_name = std::string(stem) + "_target.ply";
            const std::vector<std::string> comments = {
                "seed=" + std::to_string(o.seed), "config=" + hash};
            duq::write_ply(pairs[i].source, in_dir(src_name), comments);
            duq::write_ply(pairs[i].target, in_dir(dst_name), comments);

            duq::Json row = duq::Json::object();
            row.set("source", duq::Json::str(src_name));
            row.set("target", duq::Json::str(dst_name));
            // full precision: the pose is read back and must still be orthonormal
            duq::Json rot = duq::Json::array();
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    rot.push(duq::Json::num_exact(pairs[i].gt.rotation(r, c)));
            duq::Json trans = duq::Json::array();
            for (int r = 0; r < 3; ++r)
                trans.push(duq::Json::num_exact(pairs[i].gt.translation(r)));
            row.set("rotation", std::move(rot));
            row.set("translation", std::move(trans));
            rows.push(std::move(row));
        }
        manifest.set("pairs", std::move(rows));
        duq::Json prov = duq::Json::object();
        prov.set("config_hash", duq::Json::str(hash));
        prov.set("seed", duq::Json::str(std::to_string(o.seed)));
        prov.set("corruption", duq::Json::str(opt.corrupt ? "corrupt" : "clean"));
        manifest.set("provenance", std::move(prov));
        const std::string man_path = in_dir("manifest.json");
        std::ofstream f(man_path, std::ios::trunc);
        if (!f) throw duq::FormatError("cannot write '" + man_path + "'");
        f << manifest.dump();
        std::cout << "wrote " << o.n << " pair(s) and " << man_path << "\n";
    } else {
        throw duq::ParameterError("unknown synth kind '" + o.kind +
                                  "' (expected regress1d, depthscene, or pairset)");
    }
}

// ---------------------------------------------------------------- train ---

struct TrainOpts {
    std::string config = "1,16,16,2";
    std::string dropout = "none";
    double p = 0.5;
    std::string data;
    int epochs = 100;
    int batch = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::string out = "model.duqm";
};

void run_train(const TrainOpts& o) {
    duq::ToyNetConfig config;
    config.layer_sizes = parse_layer_sizes(o.config);
    if (config.layer_sizes.size() < 3)
        throw duq::ParameterError("--config needs at least input,hidden,output sizes");
    config.dropout_flags = duq::expand_dropout_plan(duq::parse_dropout_plan(o.dropout),
                                                    config.n_hidden());
    config.dropout_p = o.p;
    config.validate();

    const duq::Dataset data = features_from_csv(o.data);
    duq::TrainSettings settings;
    settings.learning_rate = o.lr;
    settings.batch_size = o.batch;
    settings.epochs = o.epochs;

    const duq::TrainResult result = duq::train(config, data, settings, o.seed);

    duq::Checkpoint ckpt;
    ckpt.config = config;
    ckpt.params = result.params;
    ckpt.seed = o.seed;
    ckpt.init_std = 0.1;
    ckpt.settings = settings;
    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    duq::write_checkpoint(ckpt, o.out);

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("train"));
    args.set("config", duq::Json::str(o.config));
    args.set("dropout", duq::Json::str(o.dropout));
    args.set("p", duq::Json::num(o.p));
    args.set("data", duq::Json::str(o.data));
    args.set("epochs", duq::Json::integer(o.epochs));
    args.set("batch", duq::Json::integer(o.batch));
    args.set("lr", duq::Json::num(o.lr));
    args.set("seed", duq::Json::str(std::to_string(o.seed)));
    write_sidecar(o.out, "train", o.seed, args);
    std::cout << "trained " << result.steps << " steps, final loss "
              << duq::format_g9(result.final_loss) << ", wrote " << o.out << "\n";
}

// -------------------------------------------------------------- predict ---

struct PredictOpts {
    std::string model;
    std::string ensemble_dir;
    std::string mode = "mcdropout";
    int samples = 32;
    std::uint64_t seed = 0;
    std::string input;
    std::string out = "samples.duq";
};

void run_predict(const PredictOpts& o) {
    const duq::Dataset inputs = features_from_csv(o.input);
    duq::PredictiveSampleSet set;

    if (o.mode == "mcdropout") {
        if (o.model.empty()) throw duq::ParameterError("--mode mcdropout requires --model");
        const duq::Checkpoint ckpt = duq::read_checkpoint(o.model);
        set = duq::mc_dropout_sample(ckpt.params, ckpt.config, inputs, o.samples, o.seed);
    } else if (o.mode == "ensemble") {
        if (o.ensemble_dir.empty()) throw duq::ParameterError("--mode ensemble requires --ensemble");
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(o.ensemble_dir))
            if (entry.path().extension() == ".duqm") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw duq::FormatError("no .duqm checkpoints in '" + o.ensemble_dir + "'");
        duq::EnsembleModel ensemble;
        duq::ToyNetConfig config;
        for (std::size_t i = 0; i < files.size(); ++i) {
            const duq::Checkpoint ckpt = duq::read_checkpoint(files[i]);
            if (i == 0)
                config = ckpt.config;
            else if (ckpt.config.layer_sizes != config.layer_sizes)
                throw duq::FormatError("ensemble members disagree on layer sizes ('" + files[i] +
                                       "')");
            ensemble.members.push_back(ckpt.params);
            ensemble.seeds.push_back(ckpt.seed);
        }
        set = duq::ensemble_sample(ensemble, config, inputs);
    } else {
        throw duq::ParameterError("--mode must be mcdropout or ensemble, got '" + o.mode + "'");
    }

    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    duq::write_raster(duq::bundle_from_samples(set), o.out);

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("predict"));
    args.set("mode", duq::Json::str(o.mode));
    args.set("model", duq::Json::str(o.mode == "mcdropout" ? o.model : o.ensemble_dir));
    args.set("samples", duq::Json::integer(set.count()));
    args.set("input", duq::Json::str(o.input));
    args.set("seed", duq::Json::str(std::to_string(o.seed)));
    write_sidecar(o.out, "predict", o.seed, args);
    std::cout << "wrote " << set.count() << " predictive sample(s) to " << o.out << "\n";
}

// ----------------------------------------------------------------- fuse ---

struct FuseOpts {
    std::string input;
    std::string out = "pred.duq";
};

void run_fuse(const FuseOpts& o) {
    const duq::PredictiveSampleSet set = duq::samples_from_bundle(duq::read_raster(o.input));
    const duq::GaussianPrediction pred = duq::fuse_samples(set);
    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    duq::write_raster(duq::bundle_from_prediction(pred), o.out);

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("fuse"));
    args.set("input", duq::Json::str(o.input));
    args.set("samples", duq::Json::integer(set.count()));
    write_sidecar(o.out, "fuse", 0, args);
    std::cout << "fused " << set.count() << " sample(s) into " << o.out << "\n";
}

// ----------------------------------------------------------------- eval ---

struct EvalOpts {
    std::string pred;
    std::string gt;
    std::string metrics = "depth,auce,ause";
    std::string aggregate = "pooled";
    std::string out = "report.json";
};

// n x 1 concatenation of every image's valid-pixel-preserving planes.
struct PooledEval {
    duq::GaussianPrediction pred;
    duq::DepthRaster gt;
};

PooledEval pool_images(const std::vector<duq::GaussianPrediction>& preds,
                       const std::vector<duq::DepthRaster>& gts) {
    PooledEval pooled;
    std::size_t total = 0;
    for (const auto& g : gts) total += g.depth.size();
    const int n = static_cast<int>(total);
    pooled.pred.mean = duq::Raster(n, 1);
    pooled.pred.var_epistemic = duq::Raster(n, 1);
    pooled.pred.var_aleatoric = duq::Raster(n, 1);
    pooled.pred.var_total = duq::Raster(n, 1);
    pooled.gt.depth = duq::Raster(n, 1);
    pooled.gt.valid.resize(total);
    std::size_t at = 0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        const std::size_t m = gts[i].depth.size();
        for (std::size_t j = 0; j < m; ++j, ++at) {
            pooled.pred.mean.values[at] = preds[i].mean.values[j];
            pooled.pred.var_epistemic.values[at] = preds[i].var_epistemic.values[j];
            pooled.pred.var_aleatoric.values[at] = preds[i].var_aleatoric.values[j];
            pooled.pred.var_total.values[at] = preds[i].var_total.values[j];
            pooled.gt.depth.values[at] = gts[i].depth.values[j];
            pooled.gt.valid[at] = gts[i].valid[j];
        }
    }
    return pooled;
}

void run_eval(const EvalOpts& o) {
    const std::vector<std::string> pred_paths = split_list(o.pred);
    const std::vector<std::string> gt_paths = split_list(o.gt);
    if (pred_paths.size() != gt_paths.size())
        throw duq::ParameterError("--pred and --gt must list the same number of files");
    if (o.aggregate != "pooled" && o.aggregate != "per-image")
        throw duq::ParameterError("--aggregate must be pooled or per-image");

    bool want_depth = false, want_auce = false, want_ause = false;
    for (const std::string& m : split_list(o.metrics)) {
        if (m == "depth")
            want_depth = true;
        else if (m == "auce")
            want_auce = true;
        else if (m == "ause")
            want_ause = true;
        else
            throw duq::ParameterError("unknown metric '" + m +
                                      "' (expected depth, auce, or ause)");
    }

    std::vector<duq::GaussianPrediction> preds;
    std::vector<duq::DepthRaster> gts;
    for (std::size_t i = 0; i < pred_paths.size(); ++i) {
        preds.push_back(duq::prediction_from_bundle(duq::read_raster(pred_paths[i])));
        gts.push_back(duq::gt_from_bundle(duq::read_raster(gt_paths[i])));
        duq::require_same_shape(preds.back().mean, gts.back().depth, "eval");
    }

    duq::MetricsReport report;
    report.aggregate = o.aggregate;
    report.inputs = pred_paths;
    report.inputs.insert(report.inputs.end(), gt_paths.begin(), gt_paths.end());

    if (o.aggregate == "pooled") {
        const PooledEval pooled = pool_images(preds, gts);
        if (want_depth) report.depth = duq::depth_metrics(pooled.pred.mean, pooled.gt);
        if (want_auce) report.calibration = duq::auce(pooled.pred, pooled.gt);
        if (want_ause)
            report.sparsification =
                duq::ause_rmse(pooled.pred.var_total, pooled.pred.mean, pooled.gt);
    } else {
        // arithmetic mean of every per-image metric, curves included
        const double inv = 1.0 / static_cast<double>(preds.size());
        duq::DepthMetrics depth_acc;
        duq::CalibrationCurve cal_acc;
        duq::SparsificationResult spars_acc;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (want_depth) {
                const duq::DepthMetrics m = duq::depth_metrics(preds[i].mean, gts[i]);
                depth_acc.abs_rel += m.abs_rel * inv;
                depth_acc.sq_rel += m.sq_rel * inv;
                depth_acc.rmse += m.rmse * inv;
                depth_acc.rmse_log += m.rmse_log * inv;
                depth_acc.delta1 += m.delta1 * inv;
                depth_acc.delta2 += m.delta2 * inv;
                depth_acc.delta3 += m.delta3 * inv;
            }
            if (want_auce) {
                const duq::CalibrationCurve c = duq::auce(preds[i], gts[i]);
                cal_acc.auce += c.auce * inv;
                for (int k = 0; k < duq::kCalibrationLevels; ++k) {
                    cal_acc.levels[k] = c.levels[k];
                    cal_acc.coverage[k] += c.coverage[k] * inv;
                }
            }
            if (want_ause) {
                const duq::SparsificationResult s =
                    duq::ause_rmse(preds[i].var_total, preds[i].mean, gts[i]);
                spars_acc.ause += s.ause * inv;
                for (int k = 0; k < duq::kSparsificationSteps; ++k) {
                    spars_acc.fractions[k] = s.fractions[k];
                    spars_acc.curve_by_uncertainty[k] += s.curve_by_uncertainty[k] * inv;
                    spars_acc.curve_oracle[k] += s.curve_oracle[k] * inv;
                    spars_acc.error_curve[k] += s.error_curve[k] * inv;
                }
            }
        }
        if (want_depth) report.depth = depth_acc;
        if (want_auce) report.calibration = cal_acc;
        if (want_ause) report.sparsification = spars_acc;
    }

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("eval"));
    args.set("pred", duq::Json::str(o.pred));
    args.set("gt", duq::Json::str(o.gt));
    args.set("metrics", duq::Json::str(o.metrics));
    args.set("aggregate", duq::Json::str(o.aggregate));
    report.config_hash = hash_args(args);

    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    duq::write_report(report, o.out);
    std::cout << "wrote " << o.out << "\n";
}

// ---------------------------------------------------------- backproject ---

struct BackprojectOpts {
    std::string depth;
    std::string sigma;
    double fx = 48.0, fy = 48.0, cx = 31.5, cy = 23.5;
    int stride = 1;
    std::string out = "cloud.ply";
};

void run_backproject(const BackprojectOpts& o) {
    const duq::RasterBundle depth_bundle = duq::read_raster(o.depth);
    const duq::RasterBundle sigma_bundle =
        o.sigma.empty() || o.sigma == o.depth ? depth_bundle : duq::read_raster(o.sigma);

    const duq::Raster* depth = nullptr;
    for (int p = 0; p < depth_bundle.channels(); ++p)
        if (depth_bundle.tags[p] == duq::kPlaneDepth) {
            depth = &depth_bundle.planes[p];
            break;
        }
    if (!depth) throw duq::FormatError(o.depth + ": no depth plane in bundle");

    // a sigma plane is used as-is; otherwise the last variance plane (the
    // total in fused prediction bundles) is square-rooted
    duq::Raster sigma;
    bool found = false;
    for (int p = 0; p < sigma_bundle.channels(); ++p)
        if (sigma_bundle.tags[p] == duq::kPlaneSigma) {
            sigma = sigma_bundle.planes[p];
            found = true;
            break;
        }
    if (!found) {
        for (int p = sigma_bundle.channels() - 1; p >= 0; --p)
            if (sigma_bundle.tags[p] == duq::kPlaneVar) {
                sigma = sigma_bundle.planes[p];
                for (double& v : sigma.values) v = std::sqrt(std::max(v, 0.0));
                found = true;
                break;
            }
    }
    if (!found)
        throw duq::FormatError((o.sigma.empty() ? o.depth : o.sigma) +
                               ": no sigma or variance plane in bundle");

    const duq::CameraIntrinsics intrinsics{o.fx, o.fy, o.cx, o.cy};
    const duq::UncertainPointCloud cloud = duq::backproject(*depth, sigma, intrinsics, o.stride);

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("backproject"));
    args.set("depth", duq::Json::str(o.depth));
    args.set("sigma", duq::Json::str(o.sigma.empty() ? o.depth : o.sigma));
    args.set("fx", duq::Json::num(o.fx));
    args.set("fy", duq::Json::num(o.fy));
    args.set("cx", duq::Json::num(o.cx));
    args.set("cy", duq::Json::num(o.cy));
    args.set("stride", duq::Json::integer(o.stride));

    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    duq::write_ply(cloud, o.out, {"seed=0", "config=" + hash_args(args)});
    std::cout << "wrote " << cloud.size() << " point(s) to " << o.out << "\n";
}

// ------------------------------------------------------------------ icp ---

struct IcpOpts {
    std::string source;
    std::string target;
    double percentile = 1.0;
    int max_iter = 50;
    double tol = 1e-6;
    double max_corr_dist = 0.0;
    std::string out = "icp.json";
};

void run_icp(const IcpOpts& o) {
    duq::UncertainPointCloud source = duq::read_ply(o.source);
    duq::UncertainPointCloud target = duq::read_ply(o.target);
    if (o.percentile < 1.0) {
        source = duq::percentile_filter(source, o.percentile);
        target = duq::percentile_filter(target, o.percentile);
    }

    duq::IcpConfig config;
    config.max_iterations = o.max_iter;
    config.tol_delta_rmse = o.tol;
    config.max_corr_dist = o.max_corr_dist;
    const duq::IcpResult result = duq::icp_align(source, target, config);

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("icp"));
    args.set("source", duq::Json::str(o.source));
    args.set("target", duq::Json::str(o.target));
    args.set("percentile", duq::Json::num(o.percentile));
    args.set("max_iter", duq::Json::integer(o.max_iter));
    args.set("tol", duq::Json::num(o.tol));
    args.set("max_corr_dist", duq::Json::num(o.max_corr_dist));

    duq::Json out = duq::Json::object();
    duq::Json rot = duq::Json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            rot.push(duq::Json::num_exact(result.transform.rotation(r, c)));
    duq::Json trans = duq::Json::array();
    for (int r = 0; r < 3; ++r) trans.push(duq::Json::num_exact(result.transform.translation(r)));
    out.set("rotation", std::move(rot));
    out.set("translation", std::move(trans));
    out.set("iterations", duq::Json::integer(result.iterations));
    out.set("final_rmse", duq::Json::num(result.final_rmse));
    out.set("converged", duq::Json::boolean(result.converged));
    out.set("matched_fraction", duq::Json::num(result.matched_fraction));
    out.set("corr_dist_used", duq::Json::num(result.corr_dist_used));
    duq::Json prov = duq::Json::object();
    prov.set("config_hash", duq::Json::str(hash_args(args)));
    prov.set("seed", duq::Json::str("0"));
    out.set("provenance", std::move(prov));

    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream f(o.out, std::ios::trunc);
    if (!f) throw duq::FormatError("cannot write '" + o.out + "'");
    f << out.dump();
    std::cout << "aligned in " << result.iterations << " iteration(s), rmse "
              << duq::format_g9(result.final_rmse) << ", wrote " << o.out << "\n";
}

// ---------------------------------------------------------------- sweep ---

struct SweepOpts {
    std::string pairs;
    std::string percentiles = "0.30,0.50,0.75,0.90,0.95,0.99,1.00";
    int max_iter = 50;
    double tol = 1e-6;
    std::string out = "sweep.csv";
};

void run_sweep(const SweepOpts& o) {
    std::ifstream f(o.pairs);
    if (!f) throw duq::FormatError("cannot open '" + o.pairs + "' for reading");
    json manifest;
    try {
        manifest = json::parse(f);
    } catch (const json::exception& e) {
        throw duq::FormatError(o.pairs + ": " + e.what());
    }
    if (!manifest.contains("pairs") || !manifest["pairs"].is_array())
        throw duq::FormatError(o.pairs + ": missing \"pairs\" array");

    const fs::path base = fs::path(o.pairs).parent_path();
    std::vector<duq::CloudPair> pairs;
    for (const json& row : manifest["pairs"]) {
        if (!row.contains("source") || !row.contains("target") || !row.contains("rotation") ||
            !row.contains("translation"))
            throw duq::FormatError(o.pairs + ": pair entries need source, target, rotation, "
                                             "translation");
        duq::CloudPair pair;
        pair.source = duq::read_ply((base / row["source"].get<std::string>()).string());
        pair.target = duq::read_ply((base / row["target"].get<std::string>()).string());
        const auto rot = row["rotation"].get<std::vector<double>>();
        const auto trans = row["translation"].get<std::vector<double>>();
        if (rot.size() != 9 || trans.size() != 3)
            throw duq::FormatError(o.pairs + ": rotation must have 9 entries, translation 3");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) pair.gt.rotation(r, c) = rot[3 * r + c];
        for (int r = 0; r < 3; ++r) pair.gt.translation(r) = trans[r];
        pair.gt.validate();
        pairs.push_back(std::move(pair));
    }

    duq::IcpConfig config;
    config.max_iterations = o.max_iter;
    config.tol_delta_rmse = o.tol;
    const std::vector<double> percentiles = parse_percentiles(o.percentiles);
    const std::vector<duq::SweepRow> rows =
        duq::percentile_sweep(pairs, percentiles, config, thread_cap());

    duq::Json args = duq::Json::object();
    args.set("command", duq::Json::str("sweep"));
    args.set("pairs", duq::Json::str(o.pairs));
    args.set("percentiles", duq::Json::str(o.percentiles));
    args.set("max_iter", duq::Json::integer(o.max_iter));
    args.set("tol", duq::Json::num(o.tol));

    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    duq::write_sweep_csv(rows, o.out);
    write_sidecar(o.out, "sweep", 0, args);
    std::cout << "wrote " << rows.size() << " row(s) to " << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depth uncertainty estimation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    SynthOpts synth_opts;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic datasets");
    synth->add_option("--kind", synth_opts.kind, "regress1d, depthscene, or pairset")
        ->capture_default_str();
    synth->add_option("--n", synth_opts.n, "rows / scenes / pairs")->capture_default_str();
    synth->add_option("--seed", synth_opts.seed, "RNG seed")->capture_default_str();
    synth
        ->add_option("--noise", synth_opts.noise,
                     "regress1d: hetero|homo|none; pairset: corrupt|clean")
        ->capture_default_str();
    synth->add_option("--out-dir", synth_opts.out_dir, "output directory")->capture_default_str();

    TrainOpts train_opts;
    CLI::App* train = app.add_subcommand("train", "fit the two-head regressor");
    train->add_option("--config", train_opts.config, "comma-separated layer sizes")
        ->capture_default_str();
    train
        ->add_option("--dropout", train_opts.dropout,
                     "none|first_half|second_half|all|first_layer|last_layer")
        ->capture_default_str();
    train->add_option("--p", train_opts.p, "dropout rate")->capture_default_str();
    train->add_option("--data", train_opts.data, "training csv (x,y)")->required();
    train->add_option("--epochs", train_opts.epochs)->capture_default_str();
    train->add_option("--batch", train_opts.batch)->capture_default_str();
    train->add_option("--lr", train_opts.lr)->capture_default_str();
    train->add_option("--seed", train_opts.seed)->capture_default_str();
    train->add_option("--out", train_opts.out, "checkpoint path")->capture_default_str();

    PredictOpts predict_opts;
    CLI::App* predict = app.add_subcommand("predict", "draw predictive samples");
    predict->add_option("--model", predict_opts.model, "checkpoint for --mode mcdropout");
    predict->add_option("--ensemble", predict_opts.ensemble_dir,
                        "directory of checkpoints for --mode ensemble");
    predict->add_option("--mode", predict_opts.mode, "mcdropout|ensemble")->capture_default_str();
    predict->add_option("--samples", predict_opts.samples, "stochastic passes M")
        ->capture_default_str();
    predict->add_option("--seed", predict_opts.seed)->capture_default_str();
    predict->add_option("--input", predict_opts.input, "feature csv (x,y; y ignored)")
        ->required();
    predict->add_option("--out", predict_opts.out, "sample-set raster")->capture_default_str();

    FuseOpts fuse_opts;
    CLI::App* fuse = app.add_subcommand("fuse", "moment-match samples into one prediction");
    fuse->add_option("--input", fuse_opts.input, "sample-set raster")->required();
    fuse->add_option("--out", fuse_opts.out, "prediction raster")->capture_default_str();

    EvalOpts eval_opts;
    CLI::App* eval = app.add_subcommand("eval", "score a prediction against ground truth");
    eval->add_option("--pred", eval_opts.pred, "prediction raster(s), comma-separated")
        ->required();
    eval->add_option("--gt", eval_opts.gt, "ground-truth raster(s), comma-separated")->required();
    eval->add_option("--metrics", eval_opts.metrics, "subset of depth,auce,ause")
        ->capture_default_str();
    eval->add_option("--aggregate", eval_opts.aggregate, "pooled|per-image")
        ->capture_default_str();
    eval->add_option("--out", eval_opts.out, "report path")->capture_default_str();

    BackprojectOpts bp_opts;
    CLI::App* backproject = app.add_subcommand("backproject", "lift a depth raster to a cloud");
    backproject->add_option("--depth", bp_opts.depth, "raster with a depth plane")->required();
    backproject->add_option("--sigma", bp_opts.sigma,
                            "raster with a sigma or variance plane (default: --depth file)");
    backproject->add_option("--fx", bp_opts.fx)->capture_default_str();
    backproject->add_option("--fy", bp_opts.fy)->capture_default_str();
    backproject->add_option("--cx", bp_opts.cx)->capture_default_str();
    backproject->add_option("--cy", bp_opts.cy)->capture_default_str();
    backproject->add_option("--stride", bp_opts.stride)->capture_default_str();
    backproject->add_option("--out", bp_opts.out, "PLY path")->capture_default_str();

    IcpOpts icp_opts;
    CLI::App* icp = app.add_subcommand("icp", "align two PLY clouds");
    icp->add_option("--source", icp_opts.source)->required();
    icp->add_option("--target", icp_opts.target)->required();
    icp->add_option("--percentile", icp_opts.percentile, "certainty cut applied to both clouds")
        ->capture_default_str();
    icp->add_option("--max-iter", icp_opts.max_iter)->capture_default_str();
    icp->add_option("--tol", icp_opts.tol, "RMSE-delta stop")->capture_default_str();
    icp->add_option("--max-corr-dist", icp_opts.max_corr_dist, "0 = 5x median NN spacing")
        ->capture_default_str();
    icp->add_option("--out", icp_opts.out, "result JSON")->capture_default_str();

    SweepOpts sweep_opts;
    CLI::App* sweep = app.add_subcommand("sweep", "ICP error vs certainty percentile");
    sweep->add_option("--pairs", sweep_opts.pairs, "pair-set manifest JSON")->required();
    sweep->add_option("--percentiles", sweep_opts.percentiles, "comma-separated list in (0,1]")
        ->capture_default_str();
    sweep->add_option("--max-iter", sweep_opts.max_iter)->capture_default_str();
    sweep->add_option("--tol", sweep_opts.tol)->capture_default_str();
    sweep->add_option("--out", sweep_opts.out, "CSV path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) run_synth(synth_opts);
        if (train->parsed()) run_train(train_opts);
        if (predict->parsed()) run_predict(predict_opts);
        if (fuse->parsed()) run_fuse(fuse_opts);
        if (eval->parsed()) run_eval(eval_opts);
        if (backproject->parsed()) run_backproject(bp_opts);
        if (icp->parsed()) run_icp(icp_opts);
        if (sweep->parsed()) run_sweep(sweep_opts);
    } catch (const duq::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const duq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
