#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "duq/geometry.hpp"
#include "duq/predictive.hpp"
#include "duq/toynet.hpp"

namespace duq::synth {

/// Zero-mean Laplace draw with the given scale, by inverse CDF.
double laplace_sample(std::mt19937_64& rng, double scale);

enum class NoiseKind { heteroscedastic, homoscedastic, none };

NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind kind);

/// Generative noise scale b(x) of the 1D benchmark: 0.05 + 0.1|x| for the
/// heteroscedastic set, a flat 0.1 for the homoscedastic one, 0 for none.
double noise_scale_1d(double x, NoiseKind kind);

struct Regress1d {
    Dataset data;                     // x, y = sin(x) + Laplace(b(x))
    std::vector<double> noise_scale;  // b(x_i), the recovery target
};

/// n draws with x ~ U(x_lo, x_hi).
Regress1d make_regress1d(int n, std::uint64_t seed, NoiseKind kind, double x_lo = -3.0,
                         double x_hi = 3.0);

/// Evenly spaced x grid with targets sin(x); the held-out set for fit and
/// noise-recovery checks.
Dataset make_grid_1d(int n, double x_lo, double x_hi);

struct Box {
    Eigen::Vector3d lo, hi;
};

struct Sphere {
    Eigen::Vector3d center;
    double radius = 0.0;
};

/// Room interior (rays exit through its walls) plus boxes and spheres
/// floating in front of the cameras.
struct Scene {
    Eigen::Vector3d room_lo{-2.2, -1.6, -1.0};
    Eigen::Vector3d room_hi{2.2, 1.2, 5.0};
    std::vector<Box> boxes;
    std::vector<Sphere> spheres;
};

struct SceneOptions {
    int width = 128;
    int height = 96;
    CameraIntrinsics intrinsics{96.0, 96.0, 63.5, 47.5};
    int objects_min = 5;
    int objects_max = 8;
    int fov_margin = 4;  // boundary pixels dropped from pair clouds; the
                         // non-overlap band there biases point-to-point ICP

    double edge_jump = 0.25;  // neighbor depth step that marks a discontinuity
    int edge_dilate = 1;      // pixels; the high-sigma band extends this far
                              // beyond the discontinuity itself
    double sigma_flat_lo = 0.01, sigma_flat_hi = 0.05;
    double sigma_edge_lo = 0.35, sigma_edge_hi = 0.65;
    double depth_power = 2.0;  // flat sigma scales with (z / z_ref)^power,
                               // stereo-style; the most-trusted subset is
                               // then the near, grazing room shell, which
                               // anchors a pose poorly
    double z_ref = 2.5;
    double jitter_std = 0.004;   // Gaussian depth noise everywhere
    double point_jitter = 0.02;  // isotropic 3D scatter added to pair clouds;
                                 // dithers the pixel lattice so point-to-point
                                 // ICP cannot lock onto grid alignment

    // Corruption displaces patches of edge pixels coherently, the way real
    // spurious depth comes in blobs and streaks. Independent per-pixel errors
    // would average out in a least-squares pose fit and leave nothing for a
    // sigma filter to rescue. Patch offsets sit just below the correspondence
    // gate (about 0.19 m at this resolution), so unfiltered ICP cannot reject
    // them and the pose absorbs the pull.
    bool corrupt = false;
    double corrupt_prob = 0.9;    // target fraction of edge pixels covered
    double corrupt_scale = 0.04;  // Laplace scale of a patch's shared offset
    double spike_lo = 0.10, spike_hi = 0.16;  // extra +-U(lo, hi) per patch
    double spike_prob = 0.9;
    int blob_px_lo = 12, blob_px_hi = 24;  // patch radius range, pixels; a
                                           // view gets a few large patches

    double rot_deg_lo = 0.4, rot_deg_hi = 1.0;    // second-camera motion
    double trans_lo = 0.012, trans_hi = 0.03;
};

Scene make_room_scene(std::mt19937_64& rng, const SceneOptions& opt);

/// Smallest s > 0 with origin + s * dir on a scene surface. dir need not be
/// normalized; the caller uses z-depth parameterization (dir.z = 1 in camera
/// coordinates), so s is the camera-frame depth.
double cast_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

/// Depth render from a camera with pose cam_to_world.
Raster render_depth(const Scene& scene, const RigidTransform& cam_to_world,
                    const CameraIntrinsics& intrinsics, int width, int height);

/// 1 where the 4-neighborhood depth step exceeds `jump`.
std::vector<std::uint8_t> edge_mask(const Raster& depth, double jump);

struct RenderedView {
    Raster depth;        // jittered, possibly corrupted
    Raster depth_clean;  // raw render
    SigmaRaster sigma;   // large on discontinuities, small elsewhere
};

RenderedView render_view(const Scene& scene, const RigidTransform& cam_to_world,
                         std::mt19937_64& rng, const SceneOptions& opt);

/// Two views of one random scene. source is the second camera's cloud in its
/// own frame, target the first camera's, and gt maps source into the target
/// frame. The second pose differs by a rot_deg / trans-range motion.
CloudPair make_scene_pair(std::uint64_t seed, const SceneOptions& opt = {});

/// Independent pairs with per-pair seeds drawn from `seed`.
std::vector<CloudPair> make_pair_set(int n, std::uint64_t seed, const SceneOptions& opt = {});

struct ScenePrediction {
    DepthRaster gt;
    GaussianPrediction pred;
};

/// Depth prediction whose error is drawn from its own reported variance,
/// i.e. perfectly calibrated by construction. Used for evaluation demos.
ScenePrediction make_scene_prediction(std::uint64_t seed, int width = 160, int height = 120);

}  // namespace duq::synth
