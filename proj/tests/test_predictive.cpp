#include <doctest.h>

#include <algorithm>
#include <random>

#include "duq/errors.hpp"
#include "duq/predictive.hpp"
#include "support/oracles.hpp"

using duq::fuse_samples;
using duq::GaussianPrediction;
using duq::PredictiveSample;
using duq::PredictiveSampleSet;
using duq::Raster;

namespace {

PredictiveSampleSet scalar_set(const std::vector<double>& means,
                               const std::vector<double>& sigmas) {
    PredictiveSampleSet set;
    for (std::size_t i = 0; i < means.size(); ++i) {
        PredictiveSample s{Raster(1, 1, means[i]), Raster(1, 1, sigmas[i])};
        set.samples.push_back(std::move(s));
    }
    return set;
}

}  // namespace

TEST_CASE("fusion of a single sample keeps its mean and squares its sigma") {
    const GaussianPrediction p = fuse_samples(scalar_set({2.0}, {0.5}));
    CHECK(p.mean.values[0] == 2.0);
    CHECK(p.var_epistemic.values[0] == 0.0);
    CHECK(p.var_aleatoric.values[0] == 0.25);
    CHECK(p.var_total.values[0] == 0.25);
}

TEST_CASE("fusion of means {1,3} gives unit spread, zero sigmas get clamped") {
    const GaussianPrediction p = fuse_samples(scalar_set({1.0, 3.0}, {0.0, 0.0}));
    CHECK(p.mean.values[0] == 2.0);
    CHECK(p.var_epistemic.values[0] == 1.0);
    // clamp lifts sigma to 1e-12 before squaring
    CHECK(p.var_aleatoric.values[0] == duq::kSigmaMin * duq::kSigmaMin);
    CHECK(p.var_total.values[0] == p.var_epistemic.values[0] + p.var_aleatoric.values[0]);
}

TEST_CASE("fusion of means 1..4 with unit sigma, every value dyadic") {
    const GaussianPrediction p = fuse_samples(scalar_set({1, 2, 3, 4}, {1, 1, 1, 1}));
    CHECK(p.mean.values[0] == 2.5);
    CHECK(p.var_epistemic.values[0] == 1.25);
    CHECK(p.var_aleatoric.values[0] == 1.0);
    CHECK(p.var_total.values[0] == 2.25);
}

TEST_CASE("fusion matches long-double mixture moments per pixel") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> m_d(1, 16);
    for (int trial = 0; trial < 200; ++trial) {
        const PredictiveSampleSet set = oracle::random_samples(rng, m_d(rng), 7, 5);
        const GaussianPrediction p = fuse_samples(set);
        for (std::size_t j = 0; j < p.mean.values.size(); ++j) {
            std::vector<double> means, sigmas;
            for (const PredictiveSample& s : set.samples) {
                means.push_back(s.mean.values[j]);
                sigmas.push_back(s.sigma.values[j]);
            }
            const oracle::Moments want = oracle::mixture_moments(means, sigmas);
            CHECK(oracle::rel_err(p.mean.values[j], want.mean) <= 1e-12);
            CHECK(oracle::rel_err(p.var_aleatoric.values[j], want.var_ale) <= 1e-12);
            CHECK(std::abs(p.var_epistemic.values[j] - want.var_epi) <=
                  1e-12 * std::max(1e-12, want.var_total));
            CHECK(oracle::rel_err(p.var_total.values[j], want.var_total) <= 1e-12);
        }
    }
}

TEST_CASE("law of total variance: var_total equals the raw second-moment form") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> m_d(2, 32);
    for (int trial = 0; trial < 200; ++trial) {
        const PredictiveSampleSet set = oracle::random_samples(rng, m_d(rng), 3, 3, -4.0, 4.0,
                                                               0.1, 2.0);
        const GaussianPrediction p = fuse_samples(set);
        for (std::size_t j = 0; j < p.mean.values.size(); ++j) {
            std::vector<double> means, sigmas;
            for (const PredictiveSample& s : set.samples) {
                means.push_back(s.mean.values[j]);
                sigmas.push_back(s.sigma.values[j]);
            }
            const double want = oracle::mixture_second_moment_var(means, sigmas);
            CHECK(oracle::rel_err(p.var_total.values[j], want) <= 1e-12);
        }
    }
}

TEST_CASE("fusion is invariant to sample order") {
    std::mt19937_64 rng(43);
    const PredictiveSampleSet set = oracle::random_samples(rng, 9, 6, 4);
    PredictiveSampleSet shuffled = set;
    std::shuffle(shuffled.samples.begin(), shuffled.samples.end(), rng);

    const GaussianPrediction a = fuse_samples(set);
    const GaussianPrediction b = fuse_samples(shuffled);
    for (std::size_t j = 0; j < a.mean.values.size(); ++j) {
        CHECK(std::abs(a.mean.values[j] - b.mean.values[j]) <= 1e-12);
        CHECK(std::abs(a.var_epistemic.values[j] - b.var_epistemic.values[j]) <= 1e-12);
        CHECK(std::abs(a.var_aleatoric.values[j] - b.var_aleatoric.values[j]) <= 1e-12);
        CHECK(std::abs(a.var_total.values[j] - b.var_total.values[j]) <= 1e-12);
    }
}

TEST_CASE("duplicating the whole sample set leaves the moments unchanged") {
    std::mt19937_64 rng(44);
    const PredictiveSampleSet set = oracle::random_samples(rng, 6, 5, 5);
    PredictiveSampleSet doubled = set;
    for (const PredictiveSample& s : set.samples) doubled.samples.push_back(s);

    const GaussianPrediction a = fuse_samples(set);
    const GaussianPrediction b = fuse_samples(doubled);
    for (std::size_t j = 0; j < a.mean.values.size(); ++j) {
        CHECK(std::abs(a.mean.values[j] - b.mean.values[j]) <= 1e-12);
        CHECK(std::abs(a.var_epistemic.values[j] - b.var_epistemic.values[j]) <= 1e-12);
        CHECK(std::abs(a.var_aleatoric.values[j] - b.var_aleatoric.values[j]) <= 1e-12);
    }
}

TEST_CASE("a single sample always has identically zero epistemic variance") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 20; ++trial) {
        const GaussianPrediction p = fuse_samples(oracle::random_samples(rng, 1, 4, 6));
        for (double v : p.var_epistemic.values) CHECK(v == 0.0);
    }
}

TEST_CASE("var_total is stored as the exact sum of its two parts") {
    std::mt19937_64 rng(46);
    const GaussianPrediction p = fuse_samples(oracle::random_samples(rng, 11, 8, 3));
    for (std::size_t j = 0; j < p.var_total.values.size(); ++j)
        CHECK(p.var_total.values[j] ==
              p.var_epistemic.values[j] + p.var_aleatoric.values[j]);
}

TEST_CASE("fusion rejects empty and inconsistent sample sets") {
    CHECK_THROWS_AS(fuse_samples(PredictiveSampleSet{}), duq::EmptyInputError);

    PredictiveSampleSet lopsided;
    lopsided.samples.push_back({Raster(2, 2, 1.0), Raster(2, 3, 1.0)});
    CHECK_THROWS_AS(fuse_samples(lopsided), duq::ShapeError);

    PredictiveSampleSet mismatched;
    mismatched.samples.push_back({Raster(2, 2, 1.0), Raster(2, 2, 1.0)});
    mismatched.samples.push_back({Raster(3, 2, 1.0), Raster(3, 2, 1.0)});
    CHECK_THROWS_AS(fuse_samples(mismatched), duq::ShapeError);
}
