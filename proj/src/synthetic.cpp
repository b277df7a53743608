#include "rsba/synthetic.hpp"

#include "rsba/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace rsba {

namespace {

constexpr int kMaxRedraws = 1000;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-9) return v / len;
  }
}

double deg2rad(double deg) { return deg * M_PI / 180.0; }

void validate(const SceneConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (c.n_cameras == 0) fail("n_cameras must be > 0");
  if (c.n_points == 0) fail("n_points must be > 0");
  if (!(c.sphere_radius > 0.0)) fail("sphere_radius must be > 0");
  if (!(c.cube_side > 0.0)) fail("cube_side must be > 0");
  if (c.image_w <= 0 || c.image_h <= 0) fail("image size must be > 0");
  if (!(c.focal > 0.0)) fail("focal must be > 0");
  if (!(c.angular_speed_deg >= 0.0) || !(c.linear_speed >= 0.0)) fail("speeds must be >= 0");
  if (!(c.noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  for (double a : c.readout_angle_deg) {
    if (!(a >= 0.0 && a <= 90.0)) fail("readout angles must lie in [0, 90]");
  }
}

// Rows are the camera axes in world coordinates; the optical axis points at the origin.
Mat3 look_at_origin(const Vec3& center, const Vec3& up_hint) {
  const Vec3 z = -center.normalized();
  Vec3 up = up_hint;
  if (std::abs(up.dot(z)) > 0.99) up = Vec3::UnitX();
  const Vec3 x = up.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  return R;
}

bool observe_all(const RsCamera& cam, const std::vector<Vec3>& points, const SceneConfig& cfg,
                 std::size_t cam_id, std::vector<Observation>& out) {
  std::vector<Observation> obs;
  obs.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    DcProjection dc;
    try {
      dc = project_dc(cam, points[i]);
    } catch (const Error&) {
      return false;
    }
    const Vec2 m = denormalize_measurement(dc.q, cam);
    if (!(m.x() >= 0.0 && m.x() < cfg.image_w && m.y() >= 0.0 && m.y() < cfg.image_h)) return false;
    obs.push_back(make_observation(cam_id, i, m, cam));
  }
  out.insert(out.end(), obs.begin(), obs.end());
  return true;
}

}  // namespace

double angular_speed_per_row(const SceneConfig& config) {
  return deg2rad(config.angular_speed_deg) * config.focal / config.image_h;
}

double linear_speed_per_row(const SceneConfig& config) {
  return config.linear_speed * config.focal / config.image_h;
}

std::vector<Vec3> cube_points(std::size_t n, double side, std::uint64_t seed) {
  const double h = 0.5 * side;
  std::vector<Vec3> pts;
  for (int k = 2; k <= 64; ++k) {
    const std::size_t count = static_cast<std::size_t>(k * k * k - (k - 2) * (k - 2) * (k - 2));
    if (count > n) break;
    if (count != n) continue;
    auto coord = [&](int i) { return -h + side * i / (k - 1); };
    for (int ix = 0; ix < k; ++ix) {
      for (int iy = 0; iy < k; ++iy) {
        for (int iz = 0; iz < k; ++iz) {
          const bool surface = ix == 0 || iy == 0 || iz == 0 || ix == k - 1 || iy == k - 1 || iz == k - 1;
          if (surface) pts.emplace_back(coord(ix), coord(iy), coord(iz));
        }
      }
    }
    return pts;
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-h, h);
  std::uniform_int_distribution<int> face(0, 5);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p(u(rng), u(rng), u(rng));
    const int f = face(rng);
    p[f / 2] = (f % 2 == 0) ? -h : h;
    pts.push_back(p);
  }
  return pts;
}

Scene generate_scene(const SceneConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  Scene scene;
  GroundTruth& gt = scene.truth;
  gt.points = cube_points(config.n_points, config.cube_side, config.seed);

  const double w_row = angular_speed_per_row(config);
  const double d_row = linear_speed_per_row(config);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * M_PI);

  for (std::size_t c = 0; c < config.n_cameras; ++c) {
    const double readout = c < config.readout_angle_deg.size() ? config.readout_angle_deg[c] : 0.0;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRedraws && !placed; ++attempt) {
      Vec3 center;
      double roll = 0.0;
      if (config.layout == CameraLayout::Ring) {
        const double phi = azimuth(rng);
        center = config.sphere_radius * Vec3(std::cos(phi), std::sin(phi), 0.0);
      } else {
        center = config.sphere_radius * random_unit(rng);
        roll = azimuth(rng);
      }
      RsCamera cam;
      cam.fx = cam.fy = config.focal;
      cam.cx = 0.5 * config.image_w;
      cam.cy = 0.5 * config.image_h;
      set_rotation(cam, so3_exp(Vec3(0.0, 0.0, deg2rad(readout) + roll)) *
                            look_at_origin(center, Vec3::UnitZ()));
      cam.t0 = -cam.R0 * center;
      cam.omega = w_row * random_unit(rng);
      cam.d = d_row * random_unit(rng);
      if (observe_all(cam, gt.points, config, c, gt.observations)) {
        gt.cameras.push_back(cam);
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::GenerationFailure,
                  "camera " + std::to_string(c) + " could not see every point in 1000 redraws");
    }
  }

  scene.problem.cameras = gt.cameras;
  scene.problem.points = gt.points;
  scene.problem.observations = gt.observations;
  const double s2 = config.noise_sigma > 0.0 ? config.noise_sigma * config.noise_sigma : 1.0;
  scene.problem.prior.Sigma = s2 * Mat2::Identity();
  return scene;
}

Problem add_noise(const Problem& problem, double sigma_px, std::uint64_t seed) {
  if (!(sigma_px >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  Problem out = problem;
  if (sigma_px == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma_px);
  for (auto& obs : out.observations) {
    const RsCamera& cam = out.cameras.at(obs.cam_id);
    const Vec2 noise(n(rng), n(rng));
    if (obs.m) {
      obs.m = *obs.m + noise;
      obs.q = normalize_measurement(*obs.m, cam);
    } else {
      obs.q += Vec2(noise.x() / cam.fx, noise.y() / cam.fy);
    }
  }
  return out;
}

namespace {

struct CameraDraw {
  Vec3 rot, trans, omega, d;
};

void draw_perturbation(std::size_t nc, std::size_t np, std::uint64_t seed,
                       std::vector<CameraDraw>& cams, std::vector<Vec3>& points) {
  std::mt19937_64 rng(seed);
  cams.resize(nc);
  for (auto& c : cams) {
    c.rot = random_unit(rng);
    c.trans = random_unit(rng);
    c.omega = random_unit(rng);
    c.d = random_unit(rng);
  }
  points.resize(np);
  for (auto& p : points) p = random_unit(rng);
}

Problem apply_perturbation(const Problem& problem, const PerturbationMagnitudes& mag,
                           std::uint64_t seed, double sign) {
  std::vector<CameraDraw> cams;
  std::vector<Vec3> pts;
  draw_perturbation(problem.cameras.size(), problem.points.size(), seed, cams, pts);
  Problem out = problem;
  const double a = sign * deg2rad(mag.rotation_deg);
  for (std::size_t c = 0; c < out.cameras.size(); ++c) {
    RsCamera& cam = out.cameras[c];
    if (a != 0.0) set_rotation(cam, so3_exp(a * cams[c].rot) * cam.R0);
    cam.t0 += sign * mag.translation * cams[c].trans;
    // Velocity errors scale with the unperturbed magnitude; see undo_relative().
    if (sign > 0) {
      cam.omega += mag.velocity_fraction * cam.omega.norm() * cams[c].omega;
      cam.d += mag.velocity_fraction * cam.d.norm() * cams[c].d;
    }
  }
  for (std::size_t i = 0; i < out.points.size(); ++i) out.points[i] += sign * mag.point * pts[i];
  return out;
}

// Solves v = x + f |x| u for x.
Vec3 undo_relative(const Vec3& v, double f, const Vec3& u) {
  if (f == 0.0 || v.isZero(0.0)) return v;
  // x = s * w with |x| = s: v = s (w + f u). Find s with |v - s f u| = s.
  const double vu = v.dot(u);
  const double vv = v.squaredNorm();
  // (1 - f^2) s^2 + 2 f vu s - vv = 0
  const double a = 1.0 - f * f;
  const double b = 2.0 * f * vu;
  const double s = (-b + std::sqrt(b * b + 4.0 * a * vv)) / (2.0 * a);
  return v - s * f * u;
}

}  // namespace

Problem perturb_initialization(const Problem& problem, const PerturbationMagnitudes& magnitudes,
                               std::uint64_t seed) {
  return apply_perturbation(problem, magnitudes, seed, 1.0);
}

Problem remove_perturbation(const Problem& perturbed, const PerturbationMagnitudes& magnitudes,
                            std::uint64_t seed) {
  Problem out = apply_perturbation(perturbed, magnitudes, seed, -1.0);
  std::vector<CameraDraw> cams;
  std::vector<Vec3> pts;
  draw_perturbation(out.cameras.size(), out.points.size(), seed, cams, pts);
  for (std::size_t c = 0; c < out.cameras.size(); ++c) {
    out.cameras[c].omega = undo_relative(out.cameras[c].omega, magnitudes.velocity_fraction, cams[c].omega);
    out.cameras[c].d = undo_relative(out.cameras[c].d, magnitudes.velocity_fraction, cams[c].d);
  }
  return out;
}

Problem planar_collapse(const Problem& problem) {
  Problem out = problem;
  for (auto& P : out.points) P.z() = 0.0;
  for (auto& cam : out.cameras) {
    cam.t0.y() = 0.0;
    // With (R0 P)_y = 0 this gives Pc(r) = [X + tx, r Zc, Zc], so Yc / Zc = r.
    cam.omega = Vec3(-1.0, 0.0, 0.0);
    cam.d = Vec3(0.0, cam.t0.z(), 0.0);
  }
  return out;
}

DegeneracyScene make_degeneracy_scene(std::size_t n_cameras, double noise_sigma, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.n_cameras = n_cameras;
  cfg.layout = CameraLayout::Ring;
  cfg.angular_speed_deg = 0.0;
  cfg.linear_speed = 0.0;
  cfg.noise_sigma = noise_sigma;
  cfg.seed = seed;
  const Scene scene = generate_scene(cfg);
  DegeneracyScene out;
  out.ground_truth = add_noise(scene.problem, noise_sigma, seed + 1);
  out.collapsed = planar_collapse(out.ground_truth);
  return out;
}

Problem interpolate(const Problem& a, const Problem& b, double s) {
  if (a.cameras.size() != b.cameras.size() || a.points.size() != b.points.size()) {
    throw Error(ErrorCode::DimensionMismatch, "interpolated problems differ in size");
  }
  Problem out = a;
  for (std::size_t c = 0; c < out.cameras.size(); ++c) {
    RsCamera& cam = out.cameras[c];
    const RsCamera& cb = b.cameras[c];
    cam.t0 = (1.0 - s) * cam.t0 + s * cb.t0;
    cam.omega = (1.0 - s) * cam.omega + s * cb.omega;
    cam.d = (1.0 - s) * cam.d + s * cb.d;
  }
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    out.points[i] = (1.0 - s) * out.points[i] + s * b.points[i];
  }
  return out;
}

}  // namespace rsba
