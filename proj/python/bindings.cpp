// Python surface over the core library. Rasters cross the boundary as 2D
// float64 numpy arrays of shape (height, width); point clouds as (n, 3)
// coordinates plus an (n,) sigma vector.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "duq/errors.hpp"
#include "duq/geometry.hpp"
#include "duq/io.hpp"
#include "duq/losses.hpp"
#include "duq/metrics.hpp"
#include "duq/normal.hpp"
#include "duq/predictive.hpp"
#include "duq/synth.hpp"
#include "duq/toynet.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

duq::Raster raster_from(const DoubleArray& a, const char* name) {
    if (a.ndim() != 2)
        throw duq::ShapeError(std::string(name) + ": expected a 2D array, got " +
                              std::to_string(a.ndim()) + "D");
    duq::Raster r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    const double* src = a.data();
    std::copy(src, src + r.size(), r.values.begin());
    return r;
}

py::array_t<double> array_from(const duq::Raster& r) {
    py::array_t<double> a({r.height, r.width});
    std::copy(r.values.begin(), r.values.end(), a.mutable_data());
    return a;
}

// valid=None means every pixel counts
duq::DepthRaster gt_from(const DoubleArray& depth, const py::object& valid) {
    duq::DepthRaster gt;
    gt.depth = raster_from(depth, "depth");
    if (valid.is_none()) {
        gt.valid.assign(gt.depth.size(), 1);
    } else {
        const DoubleArray v = valid.cast<DoubleArray>();
        const duq::Raster mask = raster_from(v, "valid");
        duq::require_same_shape(gt.depth, mask, "depth/valid");
        gt.valid.resize(mask.values.size());
        for (std::size_t i = 0; i < mask.values.size(); ++i)
            gt.valid[i] = mask.values[i] != 0.0 ? 1 : 0;
    }
    gt.validate();
    return gt;
}

std::vector<Eigen::Vector3d> points_from(const DoubleArray& a) {
    if (a.ndim() != 2 || a.shape(1) != 3)
        throw duq::ShapeError("points: expected an (n, 3) array");
    std::vector<Eigen::Vector3d> pts(static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        pts[static_cast<std::size_t>(i)] = {a.at(i, 0), a.at(i, 1), a.at(i, 2)};
    return pts;
}

duq::UncertainPointCloud cloud_from(const DoubleArray& points, const DoubleArray& sigma) {
    duq::UncertainPointCloud cloud;
    cloud.points = points_from(points);
    if (sigma.ndim() != 1)
        throw duq::ShapeError("sigma: expected a 1D array");
    cloud.sigma.assign(sigma.data(), sigma.data() + sigma.shape(0));
    cloud.validate();
    return cloud;
}

py::tuple cloud_to(const duq::UncertainPointCloud& cloud) {
    const py::ssize_t n = cloud.size();
    py::array_t<double> pts({n, static_cast<py::ssize_t>(3)});
    py::array_t<double> sig(n);
    for (py::ssize_t i = 0; i < n; ++i) {
        pts.mutable_at(i, 0) = cloud.points[static_cast<std::size_t>(i)].x();
        pts.mutable_at(i, 1) = cloud.points[static_cast<std::size_t>(i)].y();
        pts.mutable_at(i, 2) = cloud.points[static_cast<std::size_t>(i)].z();
        sig.mutable_at(i) = cloud.sigma[static_cast<std::size_t>(i)];
    }
    return py::make_tuple(pts, sig);
}

py::dict prediction_to(const duq::GaussianPrediction& pred) {
    py::dict d;
    d["mean"] = array_from(pred.mean);
    d["var_epistemic"] = array_from(pred.var_epistemic);
    d["var_aleatoric"] = array_from(pred.var_aleatoric);
    d["var_total"] = array_from(pred.var_total);
    return d;
}

// Per-row model predictions come back as flat vectors, not 1-pixel-high
// rasters.
py::dict prediction_to_1d(const duq::GaussianPrediction& pred) {
    py::dict d;
    d["mean"] = py::array_t<double>(pred.mean.values.size(), pred.mean.values.data());
    d["var_epistemic"] = py::array_t<double>(pred.var_epistemic.values.size(),
                                             pred.var_epistemic.values.data());
    d["var_aleatoric"] = py::array_t<double>(pred.var_aleatoric.values.size(),
                                             pred.var_aleatoric.values.data());
    d["var_total"] =
        py::array_t<double>(pred.var_total.values.size(), pred.var_total.values.data());
    return d;
}

duq::Dataset dataset_from(const DoubleArray& x, const py::object& y) {
    duq::Dataset data;
    if (x.ndim() == 1) {
        data.feature_dim = 1;
        data.features.assign(x.data(), x.data() + x.shape(0));
    } else if (x.ndim() == 2) {
        data.feature_dim = static_cast<int>(x.shape(1));
        data.features.assign(x.data(), x.data() + x.shape(0) * x.shape(1));
    } else {
        throw duq::ShapeError("x: expected a 1D or (n, features) array");
    }
    if (!y.is_none()) {
        const DoubleArray t = y.cast<DoubleArray>();
        if (t.ndim() != 1)
            throw duq::ShapeError("y: expected a 1D array");
        data.targets.assign(t.data(), t.data() + t.shape(0));
    }
    return data;
}

duq::ToyNetConfig config_from(const std::vector<int>& layer_sizes,
                              const py::object& dropout, double p) {
    duq::ToyNetConfig config;
    config.layer_sizes = layer_sizes;
    if (dropout.is_none()) {
        config.dropout_flags.assign(
            layer_sizes.size() >= 2 ? layer_sizes.size() - 2 : 0, 0);
    } else {
        for (const py::handle flag : dropout.cast<py::iterable>())
            config.dropout_flags.push_back(flag.cast<bool>() ? 1 : 0);
    }
    config.dropout_p = p;
    config.validate();
    return config;
}

// Trained two-head regressor plus everything needed to rebuild it from disk.
class ToyModel {
  public:
    ToyModel(duq::ToyNetConfig config, duq::ToyNetParams params, std::uint64_t seed,
             duq::TrainSettings settings)
        : config_(std::move(config)), params_(std::move(params)), seed_(seed),
          settings_(settings) {}

    static ToyModel train(const DoubleArray& x, const DoubleArray& y,
                          const std::vector<int>& layer_sizes, const py::object& dropout,
                          double p, double learning_rate, int batch_size, int epochs,
                          std::uint64_t seed) {
        const duq::ToyNetConfig config = config_from(layer_sizes, dropout, p);
        const duq::Dataset data = dataset_from(x, y);
        duq::TrainSettings settings;
        settings.learning_rate = learning_rate;
        settings.batch_size = batch_size;
        settings.epochs = epochs;
        duq::TrainResult result = duq::train(config, data, settings, seed);
        ToyModel model(config, std::move(result.params), seed, settings);
        model.final_loss_ = result.final_loss;
        model.steps_ = result.steps;
        model.epoch_loss_ = std::move(result.epoch_loss);
        return model;
    }

    static ToyModel load(const std::string& path) {
        duq::Checkpoint ckpt = duq::read_checkpoint(path);
        return ToyModel(ckpt.config, std::move(ckpt.params), ckpt.seed, ckpt.settings);
    }

    void save(const std::string& path) const {
        duq::Checkpoint ckpt;
        ckpt.config = config_;
        ckpt.params = params_;
        ckpt.seed = seed_;
        ckpt.settings = settings_;
        duq::write_checkpoint(ckpt, path);
    }

    py::tuple predict(const DoubleArray& x) const {
        const duq::Dataset data = dataset_from(x, py::none());
        const py::ssize_t n = data.size();
        py::array_t<double> mean(n), sigma(n);
        for (py::ssize_t i = 0; i < n; ++i) {
            const duq::ToyNetOutput out =
                duq::forward(params_, config_, data.row(static_cast<int>(i)));
            mean.mutable_at(i) = out.mean;
            sigma.mutable_at(i) = std::exp(out.raw_sigma);
        }
        return py::make_tuple(mean, sigma);
    }

    py::dict predict_mc(const DoubleArray& x, int m_samples, std::uint64_t seed) const {
        const duq::Dataset data = dataset_from(x, py::none());
        const duq::PredictiveSampleSet set =
            duq::mc_dropout_sample(params_, config_, data, m_samples, seed);
        return prediction_to_1d(duq::fuse_samples(set));
    }

    std::vector<int> layer_sizes() const { return config_.layer_sizes; }
    std::vector<bool> dropout_flags() const {
        return {config_.dropout_flags.begin(), config_.dropout_flags.end()};
    }
    std::size_t param_count() const { return params_.param_count(); }
    double final_loss() const { return final_loss_; }
    long steps() const { return steps_; }
    std::vector<double> epoch_loss() const { return epoch_loss_; }

    const duq::ToyNetConfig& config() const { return config_; }
    const duq::ToyNetParams& params() const { return params_; }

  private:
    duq::ToyNetConfig config_;
    duq::ToyNetParams params_;
    std::uint64_t seed_ = 0;
    duq::TrainSettings settings_;
    double final_loss_ = 0.0;
    long steps_ = 0;
    std::vector<double> epoch_loss_;
};

// Independently seeded members sharing one architecture.
class Ensemble {
  public:
    static Ensemble train(const DoubleArray& x, const DoubleArray& y,
                          const std::vector<int>& layer_sizes,
                          const std::vector<std::uint64_t>& seeds, double learning_rate,
                          int batch_size, int epochs) {
        Ensemble e;
        e.config_ = config_from(layer_sizes, py::none(), 0.5);
        const duq::Dataset data = dataset_from(x, y);
        duq::TrainSettings settings;
        settings.learning_rate = learning_rate;
        settings.batch_size = batch_size;
        settings.epochs = epochs;
        e.model_ = duq::train_ensemble(e.config_, data, settings, seeds);
        return e;
    }

    py::dict predict(const DoubleArray& x) const {
        const duq::Dataset data = dataset_from(x, py::none());
        const duq::PredictiveSampleSet set =
            duq::ensemble_sample(model_, config_, data);
        return prediction_to_1d(duq::fuse_samples(set));
    }

    int size() const { return static_cast<int>(model_.members.size()); }

  private:
    duq::ToyNetConfig config_;
    duq::EnsembleModel model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "depth-prediction uncertainty toolkit";
    m.attr("__version__") = "0.1.0";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const duq::FormatError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const duq::TrainingError& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        } catch (const duq::Error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def(
        "fuse_samples",
        [](const DoubleArray& means, const DoubleArray& sigmas) {
            if (means.ndim() != 3 || sigmas.ndim() != 3)
                throw duq::ShapeError("fuse_samples: expected (m, height, width) arrays");
            duq::PredictiveSampleSet set;
            for (py::ssize_t s = 0; s < means.shape(0); ++s) {
                duq::PredictiveSample sample;
                sample.mean = duq::Raster(static_cast<int>(means.shape(2)),
                                          static_cast<int>(means.shape(1)));
                sample.sigma = sample.mean;
                const std::size_t plane = sample.mean.values.size();
                std::copy(means.data() + s * plane, means.data() + (s + 1) * plane,
                          sample.mean.values.begin());
                if (sigmas.shape(0) != means.shape(0) || sigmas.shape(1) != means.shape(1) ||
                    sigmas.shape(2) != means.shape(2))
                    throw duq::ShapeError("fuse_samples: means and sigmas differ in shape");
                std::copy(sigmas.data() + s * plane, sigmas.data() + (s + 1) * plane,
                          sample.sigma.values.begin());
                set.samples.push_back(std::move(sample));
            }
            return prediction_to(duq::fuse_samples(set));
        },
        py::arg("means"), py::arg("sigmas"),
        "Moment-match m per-pixel Gaussians into mean / epistemic / aleatoric / "
        "total variance planes.");

    m.def(
        "laplace_nll",
        [](const DoubleArray& mean, const DoubleArray& sigma, const DoubleArray& depth,
           const py::object& valid) {
            return duq::laplace_nll(raster_from(mean, "mean"), raster_from(sigma, "sigma"),
                                    gt_from(depth, valid));
        },
        py::arg("mean"), py::arg("sigma"), py::arg("depth"), py::arg("valid") = py::none(),
        "Mean |d - mean| / sigma + log sigma over valid pixels.");

    m.def(
        "laplace_nll_grad",
        [](const DoubleArray& mean, const DoubleArray& raw_sigma, const DoubleArray& depth,
           const py::object& valid) {
            const duq::LaplaceNllGrad g =
                duq::laplace_nll_grad(raster_from(mean, "mean"),
                                      raster_from(raw_sigma, "raw_sigma"),
                                      gt_from(depth, valid));
            return py::make_tuple(array_from(g.d_mean), array_from(g.d_raw_sigma));
        },
        py::arg("mean"), py::arg("raw_sigma"), py::arg("depth"),
        py::arg("valid") = py::none(),
        "Analytic loss gradient wrt the mean and the log-sigma head.");

    m.def(
        "depth_metrics",
        [](const DoubleArray& pred, const DoubleArray& depth, const py::object& valid) {
            const duq::DepthMetrics r =
                duq::depth_metrics(raster_from(pred, "pred"), gt_from(depth, valid));
            py::dict d;
            d["abs_rel"] = r.abs_rel;
            d["sq_rel"] = r.sq_rel;
            d["rmse"] = r.rmse;
            d["rmse_log"] = r.rmse_log;
            d["delta1"] = r.delta1;
            d["delta2"] = r.delta2;
            d["delta3"] = r.delta3;
            return d;
        },
        py::arg("pred"), py::arg("depth"), py::arg("valid") = py::none(),
        "Standard depth error suite: abs_rel, sq_rel, rmse, rmse_log, delta1..3.");

    m.def(
        "auce",
        [](const DoubleArray& mean, const DoubleArray& var_total, const DoubleArray& depth,
           const py::object& valid) {
            duq::GaussianPrediction pred;
            pred.mean = raster_from(mean, "mean");
            pred.var_total = raster_from(var_total, "var_total");
            pred.var_epistemic = duq::Raster(pred.mean.width, pred.mean.height, 0.0);
            pred.var_aleatoric = pred.var_total;
            const duq::CalibrationCurve c = duq::auce(pred, gt_from(depth, valid));
            py::dict d;
            d["auce"] = c.auce;
            d["levels"] = py::array_t<double>(c.levels.size(), c.levels.data());
            d["coverage"] = py::array_t<double>(c.coverage.size(), c.coverage.data());
            return d;
        },
        py::arg("mean"), py::arg("var_total"), py::arg("depth"),
        py::arg("valid") = py::none(),
        "Coverage of central Gaussian intervals at 100 levels and the mean "
        "absolute calibration gap.");

    m.def(
        "ause_rmse",
        [](const DoubleArray& uncertainty, const DoubleArray& mean, const DoubleArray& depth,
           const py::object& valid) {
            const duq::SparsificationResult r =
                duq::ause_rmse(raster_from(uncertainty, "uncertainty"),
                               raster_from(mean, "mean"), gt_from(depth, valid));
            py::dict d;
            d["ause"] = r.ause;
            d["fractions"] = py::array_t<double>(r.fractions.size(), r.fractions.data());
            d["curve_by_uncertainty"] = py::array_t<double>(r.curve_by_uncertainty.size(),
                                                            r.curve_by_uncertainty.data());
            d["curve_oracle"] =
                py::array_t<double>(r.curve_oracle.size(), r.curve_oracle.data());
            d["error_curve"] =
                py::array_t<double>(r.error_curve.size(), r.error_curve.data());
            return d;
        },
        py::arg("uncertainty"), py::arg("mean"), py::arg("depth"),
        py::arg("valid") = py::none(),
        "Sparsification curves and the area between the uncertainty-ranked and "
        "oracle-ranked RMSE curves.");

    m.def("normal_quantile", &duq::normal_quantile, py::arg("p"),
          "Inverse standard normal CDF.");
    m.def("normal_cdf", &duq::normal_cdf, py::arg("x"), "Standard normal CDF.");

    m.def(
        "backproject",
        [](const DoubleArray& depth, const DoubleArray& sigma, double fx, double fy,
           double cx, double cy, int stride) {
            const duq::CameraIntrinsics intr{fx, fy, cx, cy};
            return cloud_to(duq::backproject(raster_from(depth, "depth"),
                                             raster_from(sigma, "sigma"), intr, stride));
        },
        py::arg("depth"), py::arg("sigma"), py::arg("fx"), py::arg("fy"), py::arg("cx"),
        py::arg("cy"), py::arg("stride") = 1,
        "Pinhole lift of a depth raster to (points, sigma); nonpositive depths "
        "are skipped.");

    m.def(
        "percentile_filter",
        [](const DoubleArray& points, const DoubleArray& sigma, double q) {
            return cloud_to(duq::percentile_filter(cloud_from(points, sigma), q));
        },
        py::arg("points"), py::arg("sigma"), py::arg("q"),
        "Keep the ceil(q * n) most certain points, original order preserved.");

    m.def(
        "icp_align",
        [](const DoubleArray& source_points, const DoubleArray& source_sigma,
           const DoubleArray& target_points, const DoubleArray& target_sigma,
           int max_iterations, double tol_delta_rmse, double max_corr_dist) {
            duq::IcpConfig config;
            config.max_iterations = max_iterations;
            config.tol_delta_rmse = tol_delta_rmse;
            config.max_corr_dist = max_corr_dist;
            const duq::IcpResult r =
                duq::icp_align(cloud_from(source_points, source_sigma),
                               cloud_from(target_points, target_sigma), config);
            py::array_t<double> rot({3, 3});
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) rot.mutable_at(i, j) = r.transform.rotation(i, j);
            py::array_t<double> trans(3);
            for (int i = 0; i < 3; ++i) trans.mutable_at(i) = r.transform.translation(i);
            py::dict d;
            d["rotation"] = rot;
            d["translation"] = trans;
            d["iterations"] = r.iterations;
            d["final_rmse"] = r.final_rmse;
            d["converged"] = r.converged;
            d["matched_fraction"] = r.matched_fraction;
            d["corr_dist_used"] = r.corr_dist_used;
            return d;
        },
        py::arg("source_points"), py::arg("source_sigma"), py::arg("target_points"),
        py::arg("target_sigma"), py::arg("max_iterations") = 50,
        py::arg("tol_delta_rmse") = 1e-6, py::arg("max_corr_dist") = 0.0,
        "Point-to-point ICP mapping source into the target frame.");

    m.def("rotation_angle_deg",
          [](const DoubleArray& rotation) {
              if (rotation.ndim() != 2 || rotation.shape(0) != 3 || rotation.shape(1) != 3)
                  throw duq::ShapeError("rotation: expected a (3, 3) array");
              Eigen::Matrix3d r;
              for (int i = 0; i < 3; ++i)
                  for (int j = 0; j < 3; ++j) r(i, j) = rotation.at(i, j);
              return duq::rotation_angle_deg(r);
          },
          py::arg("rotation"), "Geodesic angle of a rotation matrix, degrees.");

    m.def(
        "write_ply",
        [](const DoubleArray& points, const DoubleArray& sigma, const std::string& path,
           const std::vector<std::string>& comments) {
            duq::write_ply(cloud_from(points, sigma), path, comments);
        },
        py::arg("points"), py::arg("sigma"), py::arg("path"),
        py::arg("comments") = std::vector<std::string>{});

    m.def(
        "read_ply",
        [](const std::string& path) { return cloud_to(duq::read_ply(path)); },
        py::arg("path"), "Returns (points, sigma).");

    m.def(
        "make_regress1d",
        [](int n, std::uint64_t seed, const std::string& noise) {
            const duq::synth::Regress1d set =
                duq::synth::make_regress1d(n, seed, duq::synth::parse_noise_kind(noise));
            py::dict d;
            d["x"] = py::array_t<double>(set.data.features.size(), set.data.features.data());
            d["y"] = py::array_t<double>(set.data.targets.size(), set.data.targets.data());
            d["noise_scale"] =
                py::array_t<double>(set.noise_scale.size(), set.noise_scale.data());
            return d;
        },
        py::arg("n"), py::arg("seed") = 0, py::arg("noise") = "hetero",
        "1D sine benchmark with Laplace noise: hetero, homo, or none.");

    py::class_<ToyModel>(m, "ToyModel",
                         "Two-head (mean, log-sigma) regressor with optional "
                         "inverted dropout, trained by minibatch Adam on the "
                         "Laplace NLL.")
        .def_static("train", &ToyModel::train, py::arg("x"), py::arg("y"),
                    py::arg("layer_sizes") = std::vector<int>{1, 16, 16, 2},
                    py::arg("dropout") = py::none(), py::arg("p") = 0.5,
                    py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 64,
                    py::arg("epochs") = 100, py::arg("seed") = 0)
        .def_static("load", &ToyModel::load, py::arg("path"))
        .def("save", &ToyModel::save, py::arg("path"))
        .def("predict", &ToyModel::predict, py::arg("x"),
             "Deterministic pass; returns (mean, sigma).")
        .def("predict_mc", &ToyModel::predict_mc, py::arg("x"), py::arg("m_samples") = 32,
             py::arg("seed") = 0,
             "Fused MC-dropout prediction: dict of per-row mean and variance "
             "vectors.")
        .def_property_readonly("layer_sizes", &ToyModel::layer_sizes)
        .def_property_readonly("dropout_flags", &ToyModel::dropout_flags)
        .def_property_readonly("param_count", &ToyModel::param_count)
        .def_property_readonly("final_loss", &ToyModel::final_loss)
        .def_property_readonly("steps", &ToyModel::steps)
        .def_property_readonly("epoch_loss", &ToyModel::epoch_loss);

    py::class_<Ensemble>(m, "Ensemble",
                         "Independently trained members; predict() fuses one "
                         "deterministic pass per member.")
        .def_static("train", &Ensemble::train, py::arg("x"), py::arg("y"),
                    py::arg("layer_sizes") = std::vector<int>{1, 16, 16, 2},
                    py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3, 4},
                    py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 64,
                    py::arg("epochs") = 100)
        .def("predict", &Ensemble::predict, py::arg("x"))
        .def_property_readonly("size", &Ensemble::size);
}
