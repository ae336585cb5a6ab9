#include "duq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace duq::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
    // rejection-sampled from the cube; bias-free and cheap
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (true) {
        Eigen::Vector3d v(u(rng), u(rng), u(rng));
        const double n2 = v.squaredNorm();
        if (n2 > 1e-6 && n2 <= 1.0) return v / std::sqrt(n2);
    }
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
    return Eigen::AngleAxisd(angle_rad, axis).toRotationMatrix();
}

// Exit parameter of a ray starting inside an AABB.
double exit_aabb(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                 const Eigen::Vector3d& hi) {
    double s = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (d[a] > 0.0)
            s = std::min(s, (hi[a] - o[a]) / d[a]);
        else if (d[a] < 0.0)
            s = std::min(s, (lo[a] - o[a]) / d[a]);
    }
    return s;
}

// Entry parameter of a ray into an AABB, or +inf on a miss.
double enter_aabb(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                  const Eigen::Vector3d& hi) {
    double t_near = 0.0;
    double t_far = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < lo[a] || o[a] > hi[a]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a];
        double t1 = (hi[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
    }
    if (t_near > t_far || t_near <= 0.0) return std::numeric_limits<double>::infinity();
    return t_near;
}

double enter_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Sphere& sph) {
    const Eigen::Vector3d oc = o - sph.center;
    const double a = d.squaredNorm();
    const double b = 2.0 * oc.dot(d);
    const double c = oc.squaredNorm() - sph.radius * sph.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    const double sq = std::sqrt(disc);
    const double s0 = (-b - sq) / (2.0 * a);
    if (s0 > 0.0) return s0;
    const double s1 = (-b + sq) / (2.0 * a);
    if (s1 > 0.0) return s1;
    return std::numeric_limits<double>::infinity();
}

}  // namespace

double laplace_sample(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double v = dist(rng);
    while (v == 0.0) v = dist(rng);  // keep the inverse CDF finite
    const double u = v - 0.5;
    const double sgn = u < 0.0 ? -1.0 : 1.0;
    return -scale * sgn * std::log1p(-2.0 * std::abs(u));
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "hetero" || name == "heteroscedastic") return NoiseKind::heteroscedastic;
    if (name == "homo" || name == "homoscedastic") return NoiseKind::homoscedastic;
    if (name == "none") return NoiseKind::none;
    throw ParameterError("unknown noise kind '" + name + "'");
}

std::string noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::heteroscedastic: return "hetero";
        case NoiseKind::homoscedastic: return "homo";
        case NoiseKind::none: return "none";
    }
    return "none";
}

double noise_scale_1d(double x, NoiseKind kind) {
    switch (kind) {
        case NoiseKind::heteroscedastic: return 0.05 + 0.1 * std::abs(x);
        case NoiseKind::homoscedastic: return 0.1;
        case NoiseKind::none: return 0.0;
    }
    return 0.0;
}

Regress1d make_regress1d(int n, std::uint64_t seed, NoiseKind kind, double x_lo, double x_hi) {
    if (n < 1) throw ParameterError("make_regress1d: n must be >= 1");
    if (!(x_lo < x_hi)) throw ParameterError("make_regress1d: empty x range");
    std::mt19937_64 rng(seed);
    Regress1d out;
    out.data.feature_dim = 1;
    out.data.features.reserve(n);
    out.data.targets.reserve(n);
    out.noise_scale.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double x = uniform(rng, x_lo, x_hi);
        const double b = noise_scale_1d(x, kind);
        const double y = std::sin(x) + (b > 0.0 ? laplace_sample(rng, b) : 0.0);
        out.data.features.push_back(x);
        out.data.targets.push_back(y);
        out.noise_scale.push_back(b);
    }
    return out;
}

Dataset make_grid_1d(int n, double x_lo, double x_hi) {
    if (n < 2) throw ParameterError("make_grid_1d: n must be >= 2");
    Dataset grid;
    grid.feature_dim = 1;
    for (int i = 0; i < n; ++i) {
        const double x = x_lo + (x_hi - x_lo) * i / (n - 1);
        grid.features.push_back(x);
        grid.targets.push_back(std::sin(x));
    }
    return grid;
}

Scene make_room_scene(std::mt19937_64& rng, const SceneOptions& opt) {
    Scene scene;
    const int n_objects = std::uniform_int_distribution<int>(opt.objects_min, opt.objects_max)(rng);
    for (int i = 0; i < n_objects; ++i) {
        // kept close to the back wall: a narrow parallax gap keeps the band
        // each camera sees occluded behind an object thin
        const Eigen::Vector3d center(uniform(rng, -1.2, 1.2), uniform(rng, -0.8, 0.8),
                                     uniform(rng, 3.0, 4.5));
        if (std::bernoulli_distribution(0.5)(rng)) {
            const Eigen::Vector3d half(uniform(rng, 0.1, 0.2), uniform(rng, 0.1, 0.2),
                                       uniform(rng, 0.1, 0.2));
            scene.boxes.push_back({center - half, center + half});
        } else {
            scene.spheres.push_back({center, uniform(rng, 0.1, 0.18)});
        }
    }
    return scene;
}

double cast_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
    double s = exit_aabb(origin, dir, scene.room_lo, scene.room_hi);
    for (const Box& b : scene.boxes) s = std::min(s, enter_aabb(origin, dir, b.lo, b.hi));
    for (const Sphere& sph : scene.spheres) s = std::min(s, enter_sphere(origin, dir, sph));
    return s;
}

Raster render_depth(const Scene& scene, const RigidTransform& cam_to_world,
                    const CameraIntrinsics& intrinsics, int width, int height) {
    intrinsics.validate();
    if (width < 1 || height < 1) throw ParameterError("render_depth: empty raster");
    Raster depth(width, height);
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            const Eigen::Vector3d dir_cam((u - intrinsics.cx) / intrinsics.fx,
                                          (v - intrinsics.cy) / intrinsics.fy, 1.0);
            // dir keeps z = 1 in camera coordinates, so the ray parameter
            // returned by cast_ray is the camera-frame depth
            const Eigen::Vector3d dir_world = cam_to_world.rotation * dir_cam;
            depth(u, v) = cast_ray(scene, cam_to_world.translation, dir_world);
        }
    }
    return depth;
}

std::vector<std::uint8_t> edge_mask(const Raster& depth, double jump) {
    std::vector<std::uint8_t> mask(depth.size(), 0);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const double d = depth(x, y);
            const bool edge =
                (x > 0 && std::abs(d - depth(x - 1, y)) > jump) ||
                (x + 1 < depth.width && std::abs(d - depth(x + 1, y)) > jump) ||
                (y > 0 && std::abs(d - depth(x, y - 1)) > jump) ||
                (y + 1 < depth.height && std::abs(d - depth(x, y + 1)) > jump);
            if (edge) mask[static_cast<std::size_t>(y) * depth.width + x] = 1;
        }
    }
    return mask;
}

namespace {

// One 8-neighborhood growth step per round.
std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& mask, int width, int height,
                                 int rounds) {
    std::vector<std::uint8_t> cur = mask;
    for (int r = 0; r < rounds; ++r) {
        std::vector<std::uint8_t> next = cur;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                if (next[static_cast<std::size_t>(y) * width + x]) continue;
                for (int dy = -1; dy <= 1 && !next[static_cast<std::size_t>(y) * width + x]; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                        if (cur[static_cast<std::size_t>(ny) * width + nx]) {
                            next[static_cast<std::size_t>(y) * width + x] = 1;
                            break;
                        }
                    }
            }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace

RenderedView render_view(const Scene& scene, const RigidTransform& cam_to_world,
                         std::mt19937_64& rng, const SceneOptions& opt) {
    RenderedView view;
    view.depth_clean =
        render_depth(scene, cam_to_world, opt.intrinsics, opt.width, opt.height);
    const std::vector<std::uint8_t> edges =
        dilate(edge_mask(view.depth_clean, opt.edge_jump), opt.width, opt.height,
               opt.edge_dilate);

    view.depth = view.depth_clean;
    view.sigma = Raster(opt.width, opt.height);

    std::vector<double> offset(view.depth.values.size(), 0.0);
    if (opt.corrupt) {
        std::vector<int> edge_idx;
        for (std::size_t i = 0; i < edges.size(); ++i)
            if (edges[i]) edge_idx.push_back(static_cast<int>(i));
        if (!edge_idx.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, edge_idx.size() - 1);
            std::bernoulli_distribution spike(opt.spike_prob);
            const auto want =
                static_cast<std::size_t>(opt.corrupt_prob * static_cast<double>(edge_idx.size()));
            std::vector<std::uint8_t> hit(offset.size(), 0);
            std::size_t covered = 0;
            for (int guard = 0; covered < want && guard < 256; ++guard) {
                const int center = edge_idx[pick(rng)];
                const int cx = center % opt.width, cy = center / opt.width;
                const int r = static_cast<int>(
                    uniform(rng, static_cast<double>(opt.blob_px_lo),
                            static_cast<double>(opt.blob_px_hi) + 1.0));
                double delta = laplace_sample(rng, opt.corrupt_scale);
                if (spike(rng)) {
                    const double mag = uniform(rng, opt.spike_lo, opt.spike_hi);
                    delta += std::bernoulli_distribution(0.5)(rng) ? mag : -mag;
                }
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        if (dx * dx + dy * dy > r * r) continue;
                        const int x = cx + dx, y = cy + dy;
                        if (x < 0 || y < 0 || x >= opt.width || y >= opt.height) continue;
                        const std::size_t j = static_cast<std::size_t>(y) * opt.width + x;
                        if (!edges[j] || hit[j]) continue;
                        offset[j] = delta;
                        hit[j] = 1;
                        ++covered;
                    }
            }
        }
    }

    std::normal_distribution<double> jitter(0.0, opt.jitter_std);
    std::uniform_real_distribution<double> flat(opt.sigma_flat_lo, opt.sigma_flat_hi);
    std::uniform_real_distribution<double> edgy(opt.sigma_edge_lo, opt.sigma_edge_hi);
    for (std::size_t i = 0; i < view.depth.values.size(); ++i) {
        if (edges[i]) {
            view.sigma.values[i] = edgy(rng);
        } else {
            const double scale = std::pow(view.depth_clean.values[i] / opt.z_ref,
                                          opt.depth_power);
            view.sigma.values[i] = flat(rng) * scale;
        }
        const double d = view.depth.values[i] + jitter(rng) + offset[i];
        view.depth.values[i] = std::max(d, 1e-3);  // keep every pixel back-projectable
    }
    return view;
}

CloudPair make_scene_pair(std::uint64_t seed, const SceneOptions& opt) {
    std::mt19937_64 rng(seed);
    const Scene scene = make_room_scene(rng, opt);

    RigidTransform pose_b;  // second camera to world; world is camera A
    const double angle = uniform(rng, opt.rot_deg_lo, opt.rot_deg_hi) * kPi / 180.0;
    pose_b.rotation = axis_angle(random_unit(rng), angle);
    pose_b.translation = random_unit(rng) * uniform(rng, opt.trans_lo, opt.trans_hi);

    RenderedView view_a = render_view(scene, RigidTransform{}, rng, opt);
    RenderedView view_b = render_view(scene, pose_b, rng, opt);

    const int m = opt.fov_margin;
    if (m > 0) {
        // zero depth marks a pixel as skipped by backproject
        for (Raster* d : {&view_a.depth, &view_b.depth})
            for (int y = 0; y < d->height; ++y)
                for (int x = 0; x < d->width; ++x)
                    if (x < m || y < m || x >= d->width - m || y >= d->height - m)
                        (*d)(x, y) = 0.0;
    }

    CloudPair pair;
    pair.target = backproject(view_a.depth, view_a.sigma, opt.intrinsics, 1);
    pair.source = backproject(view_b.depth, view_b.sigma, opt.intrinsics, 1);
    if (opt.point_jitter > 0.0) {
        std::normal_distribution<double> scatter(0.0, opt.point_jitter);
        for (UncertainPointCloud* cloud : {&pair.target, &pair.source})
            for (Eigen::Vector3d& p : cloud->points)
                p += Eigen::Vector3d(scatter(rng), scatter(rng), scatter(rng));
    }
    pair.gt = pose_b;  // x_target = R x_source + t
    return pair;
}

std::vector<CloudPair> make_pair_set(int n, std::uint64_t seed, const SceneOptions& opt) {
    if (n < 1) throw ParameterError("make_pair_set: n must be >= 1");
    std::mt19937_64 master(seed);
    std::vector<CloudPair> pairs;
    pairs.reserve(n);
    for (int i = 0; i < n; ++i) pairs.push_back(make_scene_pair(master(), opt));
    return pairs;
}

ScenePrediction make_scene_prediction(std::uint64_t seed, int width, int height) {
    std::mt19937_64 rng(seed);
    SceneOptions opt;
    opt.width = width;
    opt.height = height;
    opt.intrinsics = {0.75 * width, 0.75 * width, (width - 1) / 2.0, (height - 1) / 2.0};
    const Scene scene = make_room_scene(rng, opt);
    const Raster clean = render_depth(scene, RigidTransform{}, opt.intrinsics, width, height);
    const std::vector<std::uint8_t> edges = edge_mask(clean, opt.edge_jump);

    ScenePrediction out;
    out.gt.depth = clean;
    out.gt.valid.assign(clean.size(), 1);

    const int n = static_cast<int>(clean.size());
    out.pred.mean = Raster(width, height);
    out.pred.var_epistemic = Raster(width, height);
    out.pred.var_aleatoric = Raster(width, height);
    out.pred.var_total = Raster(width, height);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> epi(0.005, 0.02);
    std::uniform_real_distribution<double> flat(opt.sigma_flat_lo, opt.sigma_flat_hi);
    std::uniform_real_distribution<double> edgy(opt.sigma_edge_lo, opt.sigma_edge_hi);
    for (int i = 0; i < n; ++i) {
        const double sig_ale = edges[i] ? edgy(rng) : flat(rng);
        const double sig_epi = epi(rng);
        const double var_total = sig_ale * sig_ale + sig_epi * sig_epi;
        out.pred.var_aleatoric.values[i] = sig_ale * sig_ale;
        out.pred.var_epistemic.values[i] = sig_epi * sig_epi;
        out.pred.var_total.values[i] = var_total;
        // error drawn from the reported distribution: calibrated by design
        out.pred.mean.values[i] = clean.values[i] + std::sqrt(var_total) * gauss(rng);
    }
    return out;
}

}  // namespace duq::synth
