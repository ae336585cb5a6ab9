#include "duq/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace duq {

namespace {

double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
double elu_deriv(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

// Stream separation so that init_params(seed) and the shuffle/mask stream of
// train(seed) do not collide.
constexpr std::uint64_t kTrainStreamSalt = 0x9e3779b97f4a7c15ull;

struct Trace {
    // act[0] is the input row; act[l+1] the (post-activation, post-dropout)
    // output of linear layer l. pre[l] is the pre-activation of layer l.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
};

void run_forward(const ToyNetParams& params, const ToyNetConfig& config,
                 std::span<const double> input, const DropoutMasks* masks, Trace* trace,
                 ToyNetOutput* out) {
    const int n_layers = config.n_layers();
    std::vector<double> a(input.begin(), input.end());
    if (trace) {
        trace->pre.resize(n_layers);
        trace->act.resize(n_layers + 1);
        trace->act[0] = a;
    }

    const double keep_scale = 1.0 / (1.0 - config.dropout_p);
    for (int l = 0; l < n_layers; ++l) {
        const int in_dim = config.layer_sizes[l];
        const int out_dim = config.layer_sizes[l + 1];
        const std::vector<double>& w = params.weights[l];
        const std::vector<double>& b = params.biases[l];

        std::vector<double> z(out_dim);
        for (int o = 0; o < out_dim; ++o) {
            double acc = b[o];
            const double* wrow = w.data() + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += wrow[i] * a[i];
            z[o] = acc;
        }
        if (trace) trace->pre[l] = z;

        if (l < n_layers - 1) {
            for (int o = 0; o < out_dim; ++o) z[o] = elu(z[o]);
            if (config.dropout_flags[l] && masks) {
                const std::vector<std::uint8_t>& keep = (*masks).keep[l];
                for (int o = 0; o < out_dim; ++o) z[o] = keep[o] ? z[o] * keep_scale : 0.0;
            }
        }
        a = std::move(z);
        if (trace) trace->act[l + 1] = a;
    }

    if (out) {
        out->mean = a[0];
        out->raw_sigma = a[1];
    }
}

void check_input(const ToyNetConfig& config, std::span<const double> input,
                 const DropoutMasks* masks) {
    if (static_cast<int>(input.size()) != config.input_dim())
        throw ShapeError("toynet forward: input dim " + std::to_string(input.size()) +
                         " does not match config input width " +
                         std::to_string(config.input_dim()));
    if (masks) {
        if (static_cast<int>(masks->keep.size()) != config.n_hidden())
            throw ShapeError("toynet forward: mask layer count mismatch");
        for (int l = 0; l < config.n_hidden(); ++l) {
            const std::size_t want =
                config.dropout_flags[l] ? static_cast<std::size_t>(config.layer_sizes[l + 1]) : 0;
            if (masks->keep[l].size() != want)
                throw ShapeError("toynet forward: mask width mismatch at hidden layer " +
                                 std::to_string(l));
        }
    }
}

void check_params(const ToyNetParams& params, const ToyNetConfig& config) {
    if (static_cast<int>(params.weights.size()) != config.n_layers() ||
        static_cast<int>(params.biases.size()) != config.n_layers())
        throw ShapeError("toynet: parameter layer count does not match config");
    for (int l = 0; l < config.n_layers(); ++l) {
        const std::size_t in_dim = config.layer_sizes[l];
        const std::size_t out_dim = config.layer_sizes[l + 1];
        if (params.weights[l].size() != in_dim * out_dim ||
            params.biases[l].size() != out_dim)
            throw ShapeError("toynet: parameter shape mismatch at layer " + std::to_string(l));
    }
}

ToyNetParams zeros_like(const ToyNetParams& p) {
    ToyNetParams g;
    g.weights.resize(p.weights.size());
    g.biases.resize(p.biases.size());
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        g.weights[l].assign(p.weights[l].size(), 0.0);
        g.biases[l].assign(p.biases[l].size(), 0.0);
    }
    return g;
}

}  // namespace

bool ToyNetConfig::any_dropout() const {
    return std::any_of(dropout_flags.begin(), dropout_flags.end(),
                       [](std::uint8_t f) { return f != 0; });
}

void ToyNetConfig::validate() const {
    if (layer_sizes.size() < 3)
        throw ParameterError("toynet config needs at least one hidden layer");
    if (layer_sizes.back() != 2)
        throw ParameterError("toynet config must end in a 2-unit (mean, raw_sigma) head");
    for (int s : layer_sizes)
        if (s <= 0) throw ParameterError("toynet config has a nonpositive layer width");
    if (dropout_flags.size() != static_cast<std::size_t>(n_hidden()))
        throw ParameterError("toynet config dropout flag count must equal hidden layer count");
    if (any_dropout() && !(dropout_p > 0.0 && dropout_p < 1.0))
        throw ParameterError("toynet dropout rate must lie in (0,1) when any flag is set");
}

std::vector<std::uint8_t> expand_dropout_plan(DropoutPlan plan, int n_hidden) {
    if (n_hidden < 1) throw ParameterError("dropout plan needs at least one hidden layer");
    std::vector<std::uint8_t> flags(n_hidden, 0);
    switch (plan) {
        case DropoutPlan::none:
            break;
        case DropoutPlan::all:
            std::fill(flags.begin(), flags.end(), 1);
            break;
        case DropoutPlan::first_layer:
            flags[0] = 1;
            break;
        case DropoutPlan::last_layer:
            flags[n_hidden - 1] = 1;
            break;
        case DropoutPlan::first_half:
            for (int i = 0; i < (n_hidden + 1) / 2; ++i) flags[i] = 1;
            break;
        case DropoutPlan::second_half:
            for (int i = n_hidden / 2; i < n_hidden; ++i) flags[i] = 1;
            break;
    }
    return flags;
}

DropoutPlan parse_dropout_plan(const std::string& name) {
    if (name == "none") return DropoutPlan::none;
    if (name == "first_half") return DropoutPlan::first_half;
    if (name == "second_half") return DropoutPlan::second_half;
    if (name == "all") return DropoutPlan::all;
    if (name == "first_layer") return DropoutPlan::first_layer;
    if (name == "last_layer") return DropoutPlan::last_layer;
    throw ParameterError("unknown dropout plan '" + name + "'");
}

std::string dropout_plan_name(DropoutPlan plan) {
    switch (plan) {
        case DropoutPlan::none: return "none";
        case DropoutPlan::first_half: return "first_half";
        case DropoutPlan::second_half: return "second_half";
        case DropoutPlan::all: return "all";
        case DropoutPlan::first_layer: return "first_layer";
        case DropoutPlan::last_layer: return "last_layer";
    }
    return "none";
}

std::size_t ToyNetParams::param_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

std::vector<double> flatten_params(const ToyNetParams& params) {
    std::vector<double> flat;
    flat.reserve(params.param_count());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        flat.insert(flat.end(), params.weights[l].begin(), params.weights[l].end());
        flat.insert(flat.end(), params.biases[l].begin(), params.biases[l].end());
    }
    return flat;
}

ToyNetParams unflatten_params(const ToyNetConfig& config, std::span<const double> flat) {
    config.validate();
    ToyNetParams p;
    std::size_t pos = 0;
    for (int l = 0; l < config.n_layers(); ++l) {
        const std::size_t nw =
            static_cast<std::size_t>(config.layer_sizes[l]) * config.layer_sizes[l + 1];
        const std::size_t nb = config.layer_sizes[l + 1];
        if (pos + nw + nb > flat.size())
            throw ShapeError("unflatten_params: flat vector too short");
        p.weights.emplace_back(flat.begin() + pos, flat.begin() + pos + nw);
        pos += nw;
        p.biases.emplace_back(flat.begin() + pos, flat.begin() + pos + nb);
        pos += nb;
    }
    if (pos != flat.size()) throw ShapeError("unflatten_params: flat vector too long");
    return p;
}

ToyNetParams init_params(const ToyNetConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.1);  // N(0, 1e-2) variance
    ToyNetParams p;
    for (int l = 0; l < config.n_layers(); ++l) {
        const std::size_t nw =
            static_cast<std::size_t>(config.layer_sizes[l]) * config.layer_sizes[l + 1];
        std::vector<double> w(nw);
        for (double& v : w) v = dist(rng);
        std::vector<double> b(config.layer_sizes[l + 1]);
        for (double& v : b) v = dist(rng);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

DropoutMasks sample_masks(const ToyNetConfig& config, std::mt19937_64& rng) {
    DropoutMasks masks;
    masks.keep.resize(config.n_hidden());
    std::bernoulli_distribution keep_dist(1.0 - config.dropout_p);
    for (int l = 0; l < config.n_hidden(); ++l) {
        if (!config.dropout_flags[l]) continue;
        masks.keep[l].resize(config.layer_sizes[l + 1]);
        for (std::uint8_t& k : masks.keep[l]) k = keep_dist(rng) ? 1 : 0;
    }
    return masks;
}

ToyNetOutput forward(const ToyNetParams& params, const ToyNetConfig& config,
                     std::span<const double> input, const DropoutMasks* masks) {
    config.validate();
    check_params(params, config);
    check_input(config, input, masks);
    ToyNetOutput out;
    run_forward(params, config, input, masks, nullptr, &out);
    return out;
}

double example_loss(const ToyNetParams& params, const ToyNetConfig& config,
                    std::span<const double> input, double target, const DropoutMasks* masks) {
    const ToyNetOutput out = forward(params, config, input, masks);
    const double sigma = std::exp(out.raw_sigma);
    return std::abs(target - out.mean) / sigma + out.raw_sigma;
}

ToyNetParams loss_gradient(const ToyNetParams& params, const ToyNetConfig& config,
                           std::span<const double> input, double target,
                           const DropoutMasks* masks) {
    config.validate();
    check_params(params, config);
    check_input(config, input, masks);

    Trace trace;
    ToyNetOutput out;
    run_forward(params, config, input, masks, &trace, &out);

    const int n_layers = config.n_layers();
    ToyNetParams grad = zeros_like(params);

    const double sigma = std::exp(out.raw_sigma);
    const double residual = target - out.mean;
    const double sgn = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
    std::vector<double> delta = {-sgn / sigma, 1.0 - std::abs(residual) / sigma};

    const double keep_scale = 1.0 / (1.0 - config.dropout_p);
    for (int l = n_layers - 1; l >= 0; --l) {
        const int in_dim = config.layer_sizes[l];
        const int out_dim = config.layer_sizes[l + 1];
        const std::vector<double>& a_in = trace.act[l];

        for (int o = 0; o < out_dim; ++o) {
            double* gw = grad.weights[l].data() + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) gw[i] += delta[o] * a_in[i];
            grad.biases[l][o] += delta[o];
        }
        if (l == 0) break;

        std::vector<double> prev(in_dim, 0.0);
        const std::vector<double>& w = params.weights[l];
        for (int o = 0; o < out_dim; ++o) {
            const double* wrow = w.data() + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) prev[i] += wrow[i] * delta[o];
        }
        // back through dropout, then through the ELU of hidden layer l-1
        if (config.dropout_flags[l - 1] && masks) {
            const std::vector<std::uint8_t>& keep = masks->keep[l - 1];
            for (int i = 0; i < in_dim; ++i) prev[i] = keep[i] ? prev[i] * keep_scale : 0.0;
        }
        for (int i = 0; i < in_dim; ++i) prev[i] *= elu_deriv(trace.pre[l - 1][i]);
        delta = std::move(prev);
    }
    return grad;
}

TrainResult train(const ToyNetConfig& config, const Dataset& data, const TrainSettings& settings,
                  std::uint64_t seed) {
    config.validate();
    if (data.size() == 0) throw EmptyInputError("train: dataset is empty");
    if (data.targets.size() != static_cast<std::size_t>(data.size()))
        throw ShapeError("train: dataset target count does not match row count");
    if (data.feature_dim != config.input_dim())
        throw ShapeError("train: dataset feature dim does not match config input width");
    if (settings.batch_size < 1 || settings.epochs < 1)
        throw ParameterError("train: batch size and epochs must be positive");

    ToyNetParams params = init_params(config, seed);
    std::mt19937_64 rng(seed ^ kTrainStreamSalt);

    // Adam state
    ToyNetParams m = zeros_like(params);
    ToyNetParams v = zeros_like(params);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    const int n = data.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const bool use_dropout = config.any_dropout();

    TrainResult result;
    result.epoch_loss.reserve(static_cast<std::size_t>(settings.epochs));
    double avg_loss = 0.0;
    bool have_avg = false;
    long step = 0;

    for (int epoch = 0; epoch < settings.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < n; start += settings.batch_size) {
            const int end = std::min(n, start + settings.batch_size);
            const int bs = end - start;
            ToyNetParams grad = zeros_like(params);
            double batch_loss = 0.0;

            for (int bi = start; bi < end; ++bi) {
                const int idx = order[bi];
                DropoutMasks masks;
                if (use_dropout) masks = sample_masks(config, rng);
                const DropoutMasks* mp = use_dropout ? &masks : nullptr;

                Trace trace;
                ToyNetOutput out;
                run_forward(params, config, data.row(idx), mp, &trace, &out);
                const double sigma = std::exp(out.raw_sigma);
                const double residual = data.targets[idx] - out.mean;
                batch_loss += std::abs(residual) / sigma + out.raw_sigma;

                const double sgn = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
                std::vector<double> delta = {-sgn / sigma, 1.0 - std::abs(residual) / sigma};

                const double keep_scale = 1.0 / (1.0 - config.dropout_p);
                const int n_layers = config.n_layers();
                for (int l = n_layers - 1; l >= 0; --l) {
                    const int in_dim = config.layer_sizes[l];
                    const int out_dim = config.layer_sizes[l + 1];
                    const std::vector<double>& a_in = trace.act[l];
                    for (int o = 0; o < out_dim; ++o) {
                        double* gw = grad.weights[l].data() + static_cast<std::size_t>(o) * in_dim;
                        for (int i = 0; i < in_dim; ++i) gw[i] += delta[o] * a_in[i];
                        grad.biases[l][o] += delta[o];
                    }
                    if (l == 0) break;
                    std::vector<double> prev(in_dim, 0.0);
                    const std::vector<double>& w = params.weights[l];
                    for (int o = 0; o < out_dim; ++o) {
                        const double* wrow = w.data() + static_cast<std::size_t>(o) * in_dim;
                        for (int i = 0; i < in_dim; ++i) prev[i] += wrow[i] * delta[o];
                    }
                    if (config.dropout_flags[l - 1] && mp) {
                        const std::vector<std::uint8_t>& keep = masks.keep[l - 1];
                        for (int i = 0; i < in_dim; ++i)
                            prev[i] = keep[i] ? prev[i] * keep_scale : 0.0;
                    }
                    for (int i = 0; i < in_dim; ++i) prev[i] *= elu_deriv(trace.pre[l - 1][i]);
                    delta = std::move(prev);
                }
            }

            batch_loss /= bs;
            if (!std::isfinite(batch_loss))
                throw TrainingError("train: loss became non-finite at step " +
                                    std::to_string(step));
            avg_loss = have_avg ? 0.95 * avg_loss + 0.05 * batch_loss : batch_loss;
            have_avg = true;

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            const double inv_bs = 1.0 / bs;
            for (std::size_t l = 0; l < params.weights.size(); ++l) {
                auto adam_update = [&](std::vector<double>& p, std::vector<double>& gm,
                                       std::vector<double>& gv, const std::vector<double>& g) {
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        const double gi = g[i] * inv_bs;
                        gm[i] = beta1 * gm[i] + (1.0 - beta1) * gi;
                        gv[i] = beta2 * gv[i] + (1.0 - beta2) * gi * gi;
                        p[i] -= settings.learning_rate * (gm[i] / bc1) /
                                (std::sqrt(gv[i] / bc2) + eps);
                    }
                };
                adam_update(params.weights[l], m.weights[l], v.weights[l], grad.weights[l]);
                adam_update(params.biases[l], m.biases[l], v.biases[l], grad.biases[l]);
            }
        }
        result.epoch_loss.push_back(avg_loss);
    }

    result.params = std::move(params);
    result.final_loss = avg_loss;
    result.steps = step;
    return result;
}

EnsembleModel train_ensemble(const ToyNetConfig& config, const Dataset& data,
                             const TrainSettings& settings,
                             std::span<const std::uint64_t> seeds) {
    config.validate();
    if (seeds.empty()) throw EmptyInputError("train_ensemble: needs at least one seed");
    if (config.any_dropout())
        throw ParameterError("train_ensemble: ensemble config must not set dropout flags");
    EnsembleModel model;
    for (std::uint64_t s : seeds) {
        model.members.push_back(train(config, data, settings, s).params);
        model.seeds.push_back(s);
    }
    return model;
}

PredictiveSampleSet mc_dropout_sample(const ToyNetParams& params, const ToyNetConfig& config,
                                      const Dataset& inputs, int m_samples, std::uint64_t seed) {
    config.validate();
    check_params(params, config);
    if (!config.any_dropout())
        throw ParameterError("mc_dropout_sample: config has no dropout flags; "
                             "epistemic sampling is undefined");
    if (m_samples < 1) throw ParameterError("mc_dropout_sample: M must be >= 1");
    const int n = inputs.size();
    if (n == 0) throw EmptyInputError("mc_dropout_sample: no input rows");

    std::mt19937_64 rng(seed);
    PredictiveSampleSet set;
    for (int m = 0; m < m_samples; ++m) {
        const DropoutMasks masks = sample_masks(config, rng);
        PredictiveSample sample{Raster(n, 1), Raster(n, 1)};
        for (int i = 0; i < n; ++i) {
            ToyNetOutput out;
            run_forward(params, config, inputs.row(i), &masks, nullptr, &out);
            sample.mean.values[i] = out.mean;
            sample.sigma.values[i] = std::exp(out.raw_sigma);
        }
        set.samples.push_back(std::move(sample));
    }
    return set;
}

PredictiveSampleSet ensemble_sample(const EnsembleModel& ensemble, const ToyNetConfig& config,
                                    const Dataset& inputs) {
    config.validate();
    if (ensemble.members.empty()) throw EmptyInputError("ensemble_sample: ensemble is empty");
    const int n = inputs.size();
    if (n == 0) throw EmptyInputError("ensemble_sample: no input rows");

    PredictiveSampleSet set;
    for (const ToyNetParams& member : ensemble.members) {
        check_params(member, config);
        PredictiveSample sample{Raster(n, 1), Raster(n, 1)};
        for (int i = 0; i < n; ++i) {
            ToyNetOutput out;
            run_forward(member, config, inputs.row(i), nullptr, nullptr, &out);
            sample.mean.values[i] = out.mean;
            sample.sigma.values[i] = std::exp(out.raw_sigma);
        }
        set.samples.push_back(std::move(sample));
    }
    return set;
}

}  // namespace duq
