#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "duq/predictive.hpp"

namespace duq {

/// Fully connected regressor. layer_sizes runs input -> hidden... -> 2; the
/// two output units are read as (mean, raw_sigma) with sigma = exp(raw_sigma).
/// Hidden layers use ELU. dropout_flags marks the hidden layers that apply
/// inverted dropout (mask then scale by 1/(1-p)) after their activation.
struct ToyNetConfig {
    std::vector<int> layer_sizes;
    std::vector<std::uint8_t> dropout_flags;  // one per hidden layer
    double dropout_p = 0.5;

    int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int n_hidden() const { return static_cast<int>(layer_sizes.size()) - 2; }
    int input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    bool any_dropout() const;

    // >= 1 hidden layer, 2-unit output head, flags match hidden count,
    // 0 < p < 1 whenever a flag is set.
    void validate() const;
};

/// Named dropout placements over the hidden layers. first_half is the
/// encoder-like preset, second_half the decoder-like one; with an odd hidden
/// count the middle layer belongs to both halves.
enum class DropoutPlan { none, first_half, second_half, all, first_layer, last_layer };

std::vector<std::uint8_t> expand_dropout_plan(DropoutPlan plan, int n_hidden);
DropoutPlan parse_dropout_plan(const std::string& name);
std::string dropout_plan_name(DropoutPlan plan);

struct ToyNetParams {
    std::vector<std::vector<double>> weights;  // [layer], out x in row-major
    std::vector<std::vector<double>> biases;   // [layer], out

    std::size_t param_count() const;
};

std::vector<double> flatten_params(const ToyNetParams& params);
ToyNetParams unflatten_params(const ToyNetConfig& config, std::span<const double> flat);

/// Per-hidden-layer keep masks (1 = kept). Layers without dropout keep an
/// empty vector.
struct DropoutMasks {
    std::vector<std::vector<std::uint8_t>> keep;
};

DropoutMasks sample_masks(const ToyNetConfig& config, std::mt19937_64& rng);

struct ToyNetOutput {
    double mean = 0.0;
    double raw_sigma = 0.0;
};

/// Every weight and bias drawn iid from N(0, 1e-2) — variance 1e-2, i.e.
/// standard deviation 0.1 — using the seeded generator.
ToyNetParams init_params(const ToyNetConfig& config, std::uint64_t seed);

ToyNetOutput forward(const ToyNetParams& params, const ToyNetConfig& config,
                     std::span<const double> input, const DropoutMasks* masks = nullptr);

/// Laplace NLL of one example: |y - mean| / sigma + log sigma.
double example_loss(const ToyNetParams& params, const ToyNetConfig& config,
                    std::span<const double> input, double target,
                    const DropoutMasks* masks = nullptr);

/// Gradient of example_loss with respect to every parameter, by backprop.
/// sign(0) at the residual kink is taken as 0.
ToyNetParams loss_gradient(const ToyNetParams& params, const ToyNetConfig& config,
                           std::span<const double> input, double target,
                           const DropoutMasks* masks = nullptr);

/// Row-major feature block plus optional targets; doubles as the inference
/// input type (targets empty).
struct Dataset {
    int feature_dim = 1;
    std::vector<double> features;  // n * feature_dim
    std::vector<double> targets;   // n, or empty

    int size() const {
        return feature_dim > 0 ? static_cast<int>(features.size()) / feature_dim : 0;
    }
    std::span<const double> row(int i) const {
        return {features.data() + static_cast<std::size_t>(i) * feature_dim,
                static_cast<std::size_t>(feature_dim)};
    }
};

struct TrainSettings {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 100;
};

struct TrainResult {
    ToyNetParams params;
    double final_loss = 0.0;  // moving-average minibatch loss at the end
    long steps = 0;
    std::vector<double> epoch_loss;  // moving average at each epoch end
};

/// Minibatch Adam on the Laplace NLL. Fresh dropout masks are drawn per
/// example per step wherever flags are set. Throws TrainingError naming the
/// step at which the loss became non-finite.
TrainResult train(const ToyNetConfig& config, const Dataset& data, const TrainSettings& settings,
                  std::uint64_t seed);

struct EnsembleModel {
    std::vector<ToyNetParams> members;
    std::vector<std::uint64_t> seeds;
};

/// Independently trained members from per-member seeds; the shared config
/// must have no dropout flags.
EnsembleModel train_ensemble(const ToyNetConfig& config, const Dataset& data,
                             const TrainSettings& settings,
                             std::span<const std::uint64_t> seeds);

/// M stochastic passes over `inputs`. Each pass draws one mask set and
/// applies it to every row, so a pass realizes a single weight sample.
/// Output rasters are n x 1. Throws ParameterError when the config has no
/// dropout flag (epistemic sampling would be undefined).
PredictiveSampleSet mc_dropout_sample(const ToyNetParams& params, const ToyNetConfig& config,
                                      const Dataset& inputs, int m_samples, std::uint64_t seed);

/// One deterministic pass per member, no dropout.
PredictiveSampleSet ensemble_sample(const EnsembleModel& ensemble, const ToyNetConfig& config,
                                    const Dataset& inputs);

}  // namespace duq
