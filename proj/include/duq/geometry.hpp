#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "duq/raster.hpp"

namespace duq {

struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    void validate() const;  // fx > 0, fy > 0
};

/// Points in meters with a per-point standard deviation (depth-axis
/// uncertainty carried through back-projection unchanged).
struct UncertainPointCloud {
    std::vector<Eigen::Vector3d> points;
    std::vector<double> sigma;

    int size() const { return static_cast<int>(points.size()); }
    void validate() const;  // lengths match, sigma >= 0, coordinates finite
};

/// y = R x + t. validate() enforces orthonormality and det(R) = 1 to 1e-9.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
    RigidTransform compose(const RigidTransform& inner) const;  // this ∘ inner
    RigidTransform inverse() const;
    void validate() const;
};

struct IcpConfig {
    int max_iterations = 50;
    double tol_delta_rmse = 1e-6;
    // <= 0 selects the data-adaptive gate: 5x the median nearest-neighbor
    // spacing of the target cloud. The value used is recorded in the result.
    double max_corr_dist = 0.0;
    RigidTransform initial;
};

struct IcpResult {
    RigidTransform transform;  // maps source into the target frame
    int iterations = 0;
    double final_rmse = 0.0;
    bool converged = false;
    double matched_fraction = 0.0;  // surviving correspondences / source size
    double corr_dist_used = 0.0;
};

struct PoseErrorStats {
    double rmse_t = 0.0;  // meters
    double rmse_r = 0.0;  // degrees
    int n_pairs = 0;
};

/// Nearest-neighbor index over 3D points. Kd-tree above the brute-force
/// threshold, linear scan below it; both break distance ties toward the
/// lowest point index.
class NearestNeighborIndex {
  public:
    static constexpr int kBruteForceThreshold = 2000;

    explicit NearestNeighborIndex(const std::vector<Eigen::Vector3d>& points);

    // Index of the nearest stored point, skipping `exclude` (-1 = none).
    // dist_sq receives the squared distance when non-null. -1 when empty.
    int nearest(const Eigen::Vector3d& query, int exclude = -1,
                double* dist_sq = nullptr) const;

    int size() const { return static_cast<int>(points_.size()); }
    bool brute_force() const { return nodes_.empty(); }

  private:
    struct Node {
        int point = -1;   // index into points_
        int axis = 0;     // split dimension
        int left = -1;    // child node ids
        int right = -1;
    };

    int build(std::span<int> indices, int depth);
    void search(int node_id, const Eigen::Vector3d& query, int exclude, int& best,
                double& best_dist_sq) const;

    std::vector<Eigen::Vector3d> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Pinhole back-projection of one uncertainty-tagged depth raster. A pixel
/// (u, v) with depth z maps to ((u-cx) z / fx, (v-cy) z / fy, z); pixels with
/// nonpositive or non-finite depth are skipped, as is anything off the
/// stride-n subgrid. Point order is row-major scan order.
UncertainPointCloud backproject(const Raster& depth, const Raster& sigma_total,
                                const CameraIntrinsics& intrinsics, int stride = 1);

/// Keeps the ceil(q * n) points with smallest sigma, ties broken toward the
/// lower point index; retained points stay in their original order, so
/// q = 1 is the identity. q outside (0, 1] is a parameter error.
UncertainPointCloud percentile_filter(const UncertainPointCloud& cloud, double q);

/// Point-to-point ICP. Each iteration matches transformed source points to
/// their nearest target point, drops pairs beyond the gate, then refits the
/// full source->target transform in closed form (SVD with reflection
/// correction). Stops when |delta RMSE| < tol or at the iteration cap.
/// Fewer than 3 surviving correspondences is a DegenerateError; non-finite
/// input is a DomainError.
IcpResult icp_align(const UncertainPointCloud& source, const UncertainPointCloud& target,
                    const IcpConfig& config = {});

/// Geodesic angle of a rotation matrix, degrees: acos((trace - 1) / 2) with
/// the argument clamped to [-1, 1].
double rotation_angle_deg(const Eigen::Matrix3d& rotation);

/// rmse_t over translation residual norms; rmse_r over per-pair relative
/// rotation angles in degrees.
PoseErrorStats pose_error(const std::vector<RigidTransform>& estimates,
                          const std::vector<RigidTransform>& ground_truth);

/// One registration problem: ICP should map source into the target frame,
/// and gt is the transform that actually does.
struct CloudPair {
    UncertainPointCloud source;
    UncertainPointCloud target;
    RigidTransform gt;
};

struct SweepRow {
    double percentile = 0.0;
    double rmse_t = 0.0;
    double rmse_r = 0.0;
    int n_pairs = 0;
    int n_failed = 0;
};

inline constexpr std::array<double, 7> kDefaultPercentiles = {0.30, 0.50, 0.75,
                                                              0.90, 0.95, 0.99, 1.00};

/// For each percentile: filter both clouds, align, and aggregate pose error
/// over the pairs whose ICP survived. Pairs that fail with a degenerate
/// correspondence set are excluded and counted in n_failed. Percentiles must
/// lie in (0, 1]. n_threads caps the worker count (0 = hardware auto);
/// results are independent of the thread count.
std::vector<SweepRow> percentile_sweep(const std::vector<CloudPair>& pairs,
                                       std::span<const double> percentiles,
                                       const IcpConfig& config = {}, int n_threads = 0);

}  // namespace duq
