#include "duq/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include <Eigen/SVD>

namespace duq {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool finite(const Eigen::Vector3d& p) {
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

// Closed-form least-squares rigid fit mapping src[i] onto dst[i] (Umeyama
// without scale). Reflection is corrected by flipping the sign of the last
// singular vector when the naive solution has det < 0.
RigidTransform fit_rigid(const std::vector<Eigen::Vector3d>& src,
                         const std::vector<Eigen::Vector3d>& dst) {
    const double n = static_cast<double>(src.size());
    Eigen::Vector3d cs = Eigen::Vector3d::Zero();
    Eigen::Vector3d cd = Eigen::Vector3d::Zero();
    for (const auto& p : src) cs += p;
    for (const auto& p : dst) cd += p;
    cs /= n;
    cd /= n;

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        h += (src[i] - cs) * (dst[i] - cd).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((v * u.transpose()).determinant() < 0.0) d.z() = -1.0;

    RigidTransform out;
    out.rotation = v * d.asDiagonal() * u.transpose();
    out.translation = cd - out.rotation * cs;
    return out;
}

double median_nn_spacing(const NearestNeighborIndex& index,
                         const std::vector<Eigen::Vector3d>& points) {
    std::vector<double> spacing(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d2 = 0.0;
        index.nearest(points[i], static_cast<int>(i), &d2);
        spacing[i] = std::sqrt(d2);
    }
    const std::size_t mid = spacing.size() / 2;
    std::nth_element(spacing.begin(), spacing.begin() + mid, spacing.end());
    double med = spacing[mid];
    if (spacing.size() % 2 == 0) {
        const double lo = *std::max_element(spacing.begin(), spacing.begin() + mid);
        med = 0.5 * (lo + med);
    }
    return med;
}

}  // namespace

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw ParameterError("camera intrinsics: focal lengths must be positive");
}

void UncertainPointCloud::validate() const {
    if (points.size() != sigma.size())
        throw ShapeError("point cloud: " + std::to_string(points.size()) + " points vs " +
                         std::to_string(sigma.size()) + " sigma entries");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!finite(points[i]))
            throw DomainError("point cloud: non-finite coordinate at point " + std::to_string(i));
        if (!(sigma[i] >= 0.0))
            throw DomainError("point cloud: negative or NaN sigma at point " + std::to_string(i));
    }
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
    RigidTransform out;
    out.rotation = rotation * inner.rotation;
    out.translation = rotation * inner.translation + translation;
    return out;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
}

void RigidTransform::validate() const {
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    const double dev = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (dev >= 1e-9)
        throw DomainError("rigid transform: rotation is not orthonormal (max deviation " +
                          std::to_string(dev) + ")");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw DomainError("rigid transform: rotation determinant is not +1");
    if (!finite(translation)) throw DomainError("rigid transform: non-finite translation");
}

NearestNeighborIndex::NearestNeighborIndex(const std::vector<Eigen::Vector3d>& points)
    : points_(points) {
    if (size() < kBruteForceThreshold) return;  // linear scan path
    std::vector<int> indices(points_.size());
    std::iota(indices.begin(), indices.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(indices, 0);
}

int NearestNeighborIndex::build(std::span<int> indices, int depth) {
    if (indices.empty()) return -1;
    const int axis = depth % 3;
    const std::size_t mid = indices.size() / 2;
    // Sort key includes the index so equal coordinates still split the same
    // way on every platform.
    std::nth_element(indices.begin(), indices.begin() + mid, indices.end(),
                     [&](int a, int b) {
                         const double ca = points_[a][axis], cb = points_[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    Node node;
    node.point = indices[mid];
    node.axis = axis;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(indices.subspan(0, mid), depth + 1);
    const int right = build(indices.subspan(mid + 1), depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void NearestNeighborIndex::search(int node_id, const Eigen::Vector3d& query, int exclude,
                                  int& best, double& best_dist_sq) const {
    if (node_id < 0) return;
    const Node& node = nodes_[node_id];
    const int pi = node.point;
    if (pi != exclude) {
        const double d2 = (points_[pi] - query).squaredNorm();
        if (d2 < best_dist_sq || (d2 == best_dist_sq && pi < best)) {
            best = pi;
            best_dist_sq = d2;
        }
    }
    const double diff = query[node.axis] - points_[pi][node.axis];
    const int near_child = diff < 0.0 ? node.left : node.right;
    const int far_child = diff < 0.0 ? node.right : node.left;
    search(near_child, query, exclude, best, best_dist_sq);
    if (diff * diff <= best_dist_sq)  // the far half-space can still tie
        search(far_child, query, exclude, best, best_dist_sq);
}

int NearestNeighborIndex::nearest(const Eigen::Vector3d& query, int exclude,
                                  double* dist_sq) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (brute_force()) {
        for (int i = 0; i < size(); ++i) {
            if (i == exclude) continue;
            const double d2 = (points_[i] - query).squaredNorm();
            if (d2 < best_d2) {  // ascending scan, so ties keep the lower index
                best = i;
                best_d2 = d2;
            }
        }
    } else {
        search(root_, query, exclude, best, best_d2);
    }
    if (dist_sq) *dist_sq = best_d2;
    return best;
}

UncertainPointCloud backproject(const Raster& depth, const Raster& sigma_total,
                                const CameraIntrinsics& intrinsics, int stride) {
    require_same_shape(depth, sigma_total, "backproject");
    intrinsics.validate();
    if (stride < 1) throw ParameterError("backproject: stride must be >= 1");

    UncertainPointCloud cloud;
    for (int v = 0; v < depth.height; v += stride) {
        for (int u = 0; u < depth.width; u += stride) {
            const double z = depth(u, v);
            if (!(z > 0.0) || !std::isfinite(z)) continue;
            cloud.points.emplace_back((u - intrinsics.cx) * z / intrinsics.fx,
                                      (v - intrinsics.cy) * z / intrinsics.fy, z);
            cloud.sigma.push_back(sigma_total(u, v));
        }
    }
    return cloud;
}

UncertainPointCloud percentile_filter(const UncertainPointCloud& cloud, double q) {
    cloud.validate();
    if (cloud.size() == 0) throw EmptyInputError("percentile_filter: empty cloud");
    if (!(q > 0.0) || q > 1.0)
        throw ParameterError("percentile_filter: q must lie in (0, 1], got " + std::to_string(q));

    const int n = cloud.size();
    const int keep = static_cast<int>(std::ceil(q * n));
    if (keep >= n) return cloud;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return cloud.sigma[a] < cloud.sigma[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());  // retained points keep cloud order

    UncertainPointCloud out;
    out.points.reserve(keep);
    out.sigma.reserve(keep);
    for (int i : order) {
        out.points.push_back(cloud.points[i]);
        out.sigma.push_back(cloud.sigma[i]);
    }
    return out;
}

IcpResult icp_align(const UncertainPointCloud& source, const UncertainPointCloud& target,
                    const IcpConfig& config) {
    source.validate();
    target.validate();
    if (source.size() < 3 || target.size() < 3)
        throw DegenerateError("icp_align: both clouds need at least 3 points");
    if (config.max_iterations < 1) throw ParameterError("icp_align: max_iterations must be >= 1");
    config.initial.validate();

    NearestNeighborIndex index(target.points);
    const double gate = config.max_corr_dist > 0.0
                            ? config.max_corr_dist
                            : 5.0 * median_nn_spacing(index, target.points);
    const double gate_sq = gate * gate;

    IcpResult result;
    result.transform = config.initial;
    result.corr_dist_used = gate;

    std::vector<Eigen::Vector3d> matched_src, matched_dst;
    double prev_rmse = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        matched_src.clear();
        matched_dst.clear();
        double sum_sq = 0.0;
        for (int i = 0; i < source.size(); ++i) {
            const Eigen::Vector3d moved = result.transform.apply(source.points[i]);
            double d2 = 0.0;
            const int j = index.nearest(moved, -1, &d2);
            if (d2 > gate_sq) continue;
            matched_src.push_back(source.points[i]);
            matched_dst.push_back(target.points[j]);
            sum_sq += d2;
        }
        if (static_cast<int>(matched_src.size()) < 3)
            throw DegenerateError("icp_align: fewer than 3 correspondences survive the gate at "
                                  "iteration " + std::to_string(iter));

        // Refit the absolute source->target transform from the original
        // source points, then score it on the same correspondence set.
        result.transform = fit_rigid(matched_src, matched_dst);
        double fit_sq = 0.0;
        for (std::size_t k = 0; k < matched_src.size(); ++k)
            fit_sq += (result.transform.apply(matched_src[k]) - matched_dst[k]).squaredNorm();

        result.iterations = iter;
        result.final_rmse = std::sqrt(fit_sq / static_cast<double>(matched_src.size()));
        result.matched_fraction =
            static_cast<double>(matched_src.size()) / static_cast<double>(source.size());
        if (std::abs(prev_rmse - result.final_rmse) < config.tol_delta_rmse) {
            result.converged = true;
            break;
        }
        prev_rmse = result.final_rmse;
    }

    result.transform.validate();  // orthonormality is asserted, not assumed
    return result;
}

double rotation_angle_deg(const Eigen::Matrix3d& rotation) {
    const double arg = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(arg) * 180.0 / kPi;
}

PoseErrorStats pose_error(const std::vector<RigidTransform>& estimates,
                          const std::vector<RigidTransform>& ground_truth) {
    if (estimates.size() != ground_truth.size())
        throw ShapeError("pose_error: " + std::to_string(estimates.size()) + " estimates vs " +
                         std::to_string(ground_truth.size()) + " ground-truth transforms");
    if (estimates.empty()) throw EmptyInputError("pose_error: no transform pairs");

    double sum_t_sq = 0.0, sum_r_sq = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        sum_t_sq += (estimates[i].translation - ground_truth[i].translation).squaredNorm();
        const double ang =
            rotation_angle_deg(ground_truth[i].rotation.transpose() * estimates[i].rotation);
        sum_r_sq += ang * ang;
    }
    const double n = static_cast<double>(estimates.size());
    return {std::sqrt(sum_t_sq / n), std::sqrt(sum_r_sq / n), static_cast<int>(estimates.size())};
}

std::vector<SweepRow> percentile_sweep(const std::vector<CloudPair>& pairs,
                                       std::span<const double> percentiles,
                                       const IcpConfig& config, int n_threads) {
    if (pairs.empty()) throw EmptyInputError("percentile_sweep: no cloud pairs");
    if (percentiles.empty()) throw ParameterError("percentile_sweep: no percentiles");
    for (double q : percentiles)
        if (!(q > 0.0) || q > 1.0)
            throw ParameterError("percentile_sweep: percentile " + std::to_string(q) +
                                 " outside (0, 1]");

    const int n_pairs = static_cast<int>(pairs.size());
    const int n_q = static_cast<int>(percentiles.size());
    const int n_tasks = n_pairs * n_q;

    struct Cell {
        RigidTransform estimate;
        bool ok = false;
    };
    std::vector<Cell> cells(n_tasks);

    auto run_task = [&](int task) {
        const int qi = task / n_pairs;
        const int pi = task % n_pairs;
        const CloudPair& pair = pairs[pi];
        try {
            const UncertainPointCloud src = percentile_filter(pair.source, percentiles[qi]);
            const UncertainPointCloud dst = percentile_filter(pair.target, percentiles[qi]);
            cells[task].estimate = icp_align(src, dst, config).transform;
            cells[task].ok = true;
        } catch (const DegenerateError&) {
            cells[task].ok = false;  // excluded and counted per row
        }
    };

    int workers = n_threads > 0 ? n_threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, n_tasks);
    if (workers == 1) {
        for (int t = 0; t < n_tasks; ++t) run_task(t);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) run_task(t);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<SweepRow> rows;
    rows.reserve(n_q);
    for (int qi = 0; qi < n_q; ++qi) {
        std::vector<RigidTransform> est, gt;
        int failed = 0;
        for (int pi = 0; pi < n_pairs; ++pi) {
            const Cell& cell = cells[qi * n_pairs + pi];
            if (!cell.ok) {
                ++failed;
                continue;
            }
            est.push_back(cell.estimate);
            gt.push_back(pairs[pi].gt);
        }
        SweepRow row;
        row.percentile = percentiles[qi];
        row.n_pairs = static_cast<int>(est.size());
        row.n_failed = failed;
        if (!est.empty()) {
            const PoseErrorStats stats = pose_error(est, gt);
            row.rmse_t = stats.rmse_t;
            row.rmse_r = stats.rmse_r;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace duq
