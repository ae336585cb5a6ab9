#pragma once

// Reference implementations used only by the tests. Each one reaches its
// answer along a different route than the library (long-double moments,
// quaternion angles, rank statistics), so agreement is evidence rather
// than tautology.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "duq/geometry.hpp"
#include "duq/predictive.hpp"
#include "duq/raster.hpp"

namespace oracle {

struct Moments {
    double mean = 0.0;
    double var_epi = 0.0;
    double var_ale = 0.0;
    double var_total = 0.0;
};

// Exact Gaussian-mixture moments of one pixel, accumulated in long double.
// Epistemic spread uses the two-pass deviation form (no cancellation); the
// total is checked elsewhere against the E[X^2] - E[X]^2 identity.
inline Moments mixture_moments(const std::vector<double>& means,
                               const std::vector<double>& sigmas) {
    const std::size_t m = means.size();
    long double mu = 0.0L;
    for (double v : means) mu += v;
    mu /= static_cast<long double>(m);

    long double epi = 0.0L, ale = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
        const long double d = mu - means[i];
        epi += d * d;
        const long double s = std::max(sigmas[i], duq::kSigmaMin);
        ale += s * s;
    }
    epi /= static_cast<long double>(m);
    ale /= static_cast<long double>(m);

    Moments out;
    out.mean = static_cast<double>(mu);
    out.var_epi = static_cast<double>(epi);
    out.var_ale = static_cast<double>(ale);
    out.var_total = static_cast<double>(epi + ale);
    return out;
}

// Second raw moment of the mixture, for the law-of-total-variance identity
// var_total == E[X^2] - E[X]^2.
inline double mixture_second_moment_var(const std::vector<double>& means,
                                        const std::vector<double>& sigmas) {
    const std::size_t m = means.size();
    long double e1 = 0.0L, e2 = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
        const long double s = std::max(sigmas[i], duq::kSigmaMin);
        e1 += means[i];
        e2 += s * s + static_cast<long double>(means[i]) * means[i];
    }
    e1 /= static_cast<long double>(m);
    e2 /= static_cast<long double>(m);
    return static_cast<double>(e2 - e1 * e1);
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-300);
    return std::abs(got - want) / denom;
}

// Scalar Laplace NLL of one observation, straight from the formula.
inline double laplace_nll_point(double d, double mean, double sigma) {
    return std::abs(d - mean) / sigma + std::log(sigma);
}

template <class F>
double central_diff(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |analytic - fd| <= tol * max(1, |analytic|, |fd|), the usual mixed
// absolute/relative criterion.
inline bool fd_close(double analytic, double fd, double tol) {
    return std::abs(analytic - fd) <= tol * std::max({1.0, std::abs(analytic), std::abs(fd)});
}

// Rotation angle through the quaternion, not the trace.
inline double quat_angle_deg(const Eigen::Matrix3d& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    const double v = Eigen::Vector3d(q.x(), q.y(), q.z()).norm();
    return 2.0 * std::atan2(v, std::abs(q.w())) * 180.0 / M_PI;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Midranks: tied values share the average of the ranks they occupy.
inline std::vector<double> midranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    return rank;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(midranks(x), midranks(y));
}

inline duq::PredictiveSampleSet random_samples(std::mt19937_64& rng, int m, int w, int h,
                                               double mean_lo = -4.0, double mean_hi = 4.0,
                                               double sigma_lo = 0.0, double sigma_hi = 2.0) {
    std::uniform_real_distribution<double> mean_d(mean_lo, mean_hi);
    std::uniform_real_distribution<double> sigma_d(sigma_lo, sigma_hi);
    duq::PredictiveSampleSet set;
    for (int i = 0; i < m; ++i) {
        duq::PredictiveSample s{duq::Raster(w, h), duq::Raster(w, h)};
        for (double& v : s.mean.values) v = mean_d(rng);
        for (double& v : s.sigma.values) v = sigma_d(rng);
        set.samples.push_back(std::move(s));
    }
    return set;
}

inline duq::UncertainPointCloud random_box_cloud(std::mt19937_64& rng, int n,
                                                 double extent = 1.0) {
    std::uniform_real_distribution<double> coord(-extent, extent);
    std::uniform_real_distribution<double> sig(0.01, 0.2);
    duq::UncertainPointCloud cloud;
    cloud.points.reserve(n);
    cloud.sigma.reserve(n);
    for (int i = 0; i < n; ++i) {
        cloud.points.emplace_back(coord(rng), coord(rng), coord(rng));
        cloud.sigma.push_back(sig(rng));
    }
    return cloud;
}

inline duq::RigidTransform make_transform(double angle_deg, const Eigen::Vector3d& axis,
                                          const Eigen::Vector3d& t) {
    duq::RigidTransform tf;
    tf.rotation =
        Eigen::AngleAxisd(angle_deg * M_PI / 180.0, axis.normalized()).toRotationMatrix();
    tf.translation = t;
    return tf;
}

inline duq::UncertainPointCloud apply_transform(const duq::RigidTransform& tf,
                                                const duq::UncertainPointCloud& cloud) {
    duq::UncertainPointCloud out = cloud;
    for (auto& p : out.points) p = tf.apply(p);
    return out;
}

// Fresh scratch directory under the system temp root. Removed on destruction
// so test runs do not accumulate litter.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        const auto tag = std::to_string(rd()) + "_" + std::to_string(counter++);
        path_ = std::filesystem::temp_directory_path() / ("duq_test_" + tag);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

}  // namespace oracle
