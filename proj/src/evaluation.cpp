#include "rsba/evaluation.hpp"

#include "rsba/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace rsba {

namespace {

Eigen::Matrix3Xd to_matrix(const std::vector<Vec3>& v) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

bool spans_plane(const Eigen::Matrix3Xd& m) {
  if (m.cols() < 3) return false;
  const Eigen::Matrix3Xd c = m.colwise() - m.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(c);
  const Vec3 s = svd.singularValues();
  return s(0) > 0.0 && s(1) > 1e-10 * s(0);
}

double clamped_acos(double x) { return std::acos(std::clamp(x, -1.0, 1.0)); }

}  // namespace

Sim3 sim3_align(const std::vector<Vec3>& est, const std::vector<Vec3>& gt) {
  if (est.size() != gt.size()) {
    throw Error(ErrorCode::DimensionMismatch, "alignment needs equal point counts");
  }
  const Eigen::Matrix3Xd src = to_matrix(est);
  const Eigen::Matrix3Xd dst = to_matrix(gt);
  if (!spans_plane(src) || !spans_plane(dst)) {
    throw Error(ErrorCode::DegenerateConfiguration, "alignment needs three non-collinear points");
  }
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
  Sim3 out;
  const Mat3 sR = T.topLeftCorner<3, 3>();
  out.scale = std::cbrt(sR.determinant());
  out.R = sR / out.scale;
  out.t = T.topRightCorner<3, 1>();
  return out;
}

double absolute_trajectory_error(const std::vector<Vec3>& est, const std::vector<Vec3>& gt) {
  return metric_point(est, gt, sim3_align(est, gt));
}

double metric_point(const std::vector<Vec3>& P_est, const std::vector<Vec3>& P_gt, const Sim3& T) {
  if (P_est.size() != P_gt.size()) {
    throw Error(ErrorCode::DimensionMismatch, "point metric needs equal point counts");
  }
  if (P_est.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < P_est.size(); ++i) sum += (T.apply(P_est[i]) - P_gt[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(P_est.size()));
}

double metric_rot(const std::vector<Mat3>& R_est, const std::vector<Mat3>& R_gt) {
  if (R_est.size() != R_gt.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rotation metric needs equal camera counts");
  }
  if (R_est.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < R_est.size(); ++i) {
    const Mat3 D = R_est[i] * R_gt[i].transpose();
    sum += std::atan2(0.5 * vee(D - D.transpose()).norm(), 0.5 * (D.trace() - 1.0));
  }
  return sum / static_cast<double>(R_est.size());
}

double metric_trans(const std::vector<Vec3>& t_est, const std::vector<Vec3>& t_gt) {
  if (t_est.size() != t_gt.size()) {
    throw Error(ErrorCode::DimensionMismatch, "translation metric needs equal camera counts");
  }
  if (t_est.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < t_est.size(); ++i) {
    const double n = t_est[i].norm() * t_gt[i].norm();
    if (n < 1e-300) throw Error(ErrorCode::ZeroTranslation, "translation metric of a zero vector");
    sum += clamped_acos(t_est[i].dot(t_gt[i]) / n);
  }
  return sum / static_cast<double>(t_est.size());
}

std::vector<RsCamera> align_cameras(const std::vector<RsCamera>& est, const Sim3& T) {
  std::vector<RsCamera> out = est;
  for (auto& cam : out) {
    set_rotation(cam, cam.R0 * T.R.transpose());
    cam.t0 = T.scale * cam.t0 - cam.R0 * T.t;
    cam.d = T.scale * cam.d - cam.omega.cross(cam.R0 * T.t);
  }
  return out;
}

Metrics evaluate(const Problem& estimate, const GroundTruth& truth) {
  if (estimate.cameras.size() != truth.cameras.size()) {
    throw Error(ErrorCode::DimensionMismatch, "estimate and ground truth differ in camera count");
  }
  const Sim3 T = sim3_align(estimate.points, truth.points);
  Metrics m;
  m.e_point = metric_point(estimate.points, truth.points, T);
  const std::vector<RsCamera> aligned = align_cameras(estimate.cameras, T);
  std::vector<Mat3> Re, Rg;
  std::vector<Vec3> te, tg, ce, cg;
  for (std::size_t c = 0; c < aligned.size(); ++c) {
    Re.push_back(aligned[c].R0);
    Rg.push_back(truth.cameras[c].R0);
    te.push_back(aligned[c].t0);
    tg.push_back(truth.cameras[c].t0);
    ce.push_back(-estimate.cameras[c].R0.transpose() * estimate.cameras[c].t0);
    cg.push_back(-truth.cameras[c].R0.transpose() * truth.cameras[c].t0);
  }
  m.e_rot = metric_rot(Re, Rg);
  m.e_trans = metric_trans(te, tg);
  try {
    m.ate = absolute_trajectory_error(ce, cg);
  } catch (const Error&) {
    m.ate.reset();
  }
  return m;
}

std::string_view to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::Speed: return "speed";
    case SweepKind::Noise: return "noise";
    case SweepKind::Readout: return "readout";
    case SweepKind::Runtime: return "runtime";
  }
  return "unknown";
}

SweepKind parse_sweep_kind(std::string_view name) {
  if (name == "speed") return SweepKind::Speed;
  if (name == "noise") return SweepKind::Noise;
  if (name == "readout") return SweepKind::Readout;
  if (name == "runtime") return SweepKind::Runtime;
  throw Error(ErrorCode::InvalidArgument, "unknown sweep kind '" + std::string(name) + "'");
}

std::vector<double> default_coordinates(SweepKind kind) {
  switch (kind) {
    case SweepKind::Speed: return {0.0, 5.0, 10.0, 15.0, 20.0};
    case SweepKind::Noise: return {0.0, 0.5, 1.0, 1.5, 2.0};
    case SweepKind::Readout: return {0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0};
    case SweepKind::Runtime: return {50.0, 100.0, 150.0, 200.0, 250.0};
  }
  return {};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base_seed, SweepKind kind, std::size_t index, std::size_t trial) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ index);
  return splitmix64(h ^ trial);
}

SceneConfig sweep_config(SweepKind kind, const SceneConfig& base, double coordinate) {
  SceneConfig cfg = base;
  switch (kind) {
    case SweepKind::Speed:
      cfg.angular_speed_deg = coordinate;
      cfg.linear_speed = coordinate / 10.0;
      break;
    case SweepKind::Noise:
      cfg.noise_sigma = coordinate;
      break;
    case SweepKind::Readout:
      cfg.layout = CameraLayout::Ring;
      cfg.readout_angle_deg.assign(cfg.n_cameras, 0.0);
      for (std::size_t c = 1; c < cfg.n_cameras; c += 2) cfg.readout_angle_deg[c] = coordinate;
      break;
    case SweepKind::Runtime:
      cfg.n_cameras = static_cast<std::size_t>(std::llround(coordinate));
      cfg.readout_angle_deg.clear();
      break;
  }
  return cfg;
}

namespace {

struct TrialTask {
  std::size_t index;
  double coordinate;
  std::size_t trial;
};

void run_trial(SweepKind kind, const SceneConfig& base, const SweepOptions& options,
               const TrialTask& task, TrialResult* rows) {
  const std::uint64_t seed = trial_seed(base.seed, kind, task.index, task.trial);
  std::size_t slot = 0;
  auto fill = [&](TrialResult& r, Method m, Backend b) {
    r.kind = kind;
    r.method = m;
    r.backend = b;
    r.coordinate = task.coordinate;
    r.trial = task.trial;
    r.seed = seed;
  };
  Scene scene;
  Problem init;
  std::string setup_error;
  try {
    SceneConfig cfg = sweep_config(kind, base, task.coordinate);
    cfg.seed = seed;
    scene = generate_scene(cfg);
    const Problem noisy = add_noise(scene.problem, cfg.noise_sigma, splitmix64(seed ^ 1));
    init = perturb_initialization(noisy, options.perturbation, splitmix64(seed ^ 2));
  } catch (const Error& e) {
    setup_error = std::string("failed:") + std::string(to_string(e.code()));
  }

  for (Method m : options.methods) {
    for (Backend b : options.backends) {
      TrialResult& r = rows[slot++];
      fill(r, m, b);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      r.e_point = r.e_rot = r.e_trans = nan;
      if (!setup_error.empty()) {
        r.status = setup_error;
        continue;
      }
      try {
        SolverConfig sc = options.solver;
        sc.method = m;
        sc.backend = b;
        const auto t0 = std::chrono::steady_clock::now();
        const SolveReport rep = optimize(init, sc);
        r.time_total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.times = rep.times;
        r.iterations = rep.iterations;
        r.rejected_steps = rep.rejected_steps;
        const Metrics met = evaluate(rep.solution, scene.truth);
        r.e_point = met.e_point;
        r.e_rot = met.e_rot;
        r.e_trans = met.e_trans;
        r.ate = met.ate;
        r.status = "ok";
      } catch (const Error& e) {
        r.status = std::string("failed:") + std::string(to_string(e.code()));
      }
    }
  }
}

}  // namespace

std::vector<TrialResult> run_sweep(SweepKind kind, const SceneConfig& base, const SweepOptions& options) {
  if (options.trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  const std::vector<double> coords =
      options.coordinates.empty() ? default_coordinates(kind) : options.coordinates;
  std::vector<TrialTask> tasks;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t t = 0; t < options.trials; ++t) tasks.push_back({i, coords[i], t});
  }
  const std::size_t per_task = options.methods.size() * options.backends.size();
  std::vector<TrialResult> rows(tasks.size() * per_task);

  std::size_t threads = kind == SweepKind::Runtime ? 1 : std::max<std::size_t>(1, options.threads);
  threads = std::min(threads, tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      run_trial(kind, base, options, tasks[k], rows.data() + k * per_task);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

namespace {

std::string number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<TrialResult>& rows,
               const std::vector<std::string>& metadata) {
  for (const auto& line : metadata) os << "# " << line << '\n';
  os << "sweep_kind,method,backend,coordinate,trial,seed,e_point,e_rot,e_trans,"
        "time_assembly,time_schur,time_solve,time_total,status\n";
  for (const auto& r : rows) {
    os << to_string(r.kind) << ',' << to_string(r.method) << ',' << to_string(r.backend) << ','
       << number(r.coordinate) << ',' << r.trial << ',' << r.seed << ',' << number(r.e_point) << ','
       << number(r.e_rot) << ',' << number(r.e_trans) << ',' << number(r.times.assembly) << ','
       << number(r.times.schur_construction) << ','
       << number(r.times.reduced_solve + r.times.back_substitution) << ',' << number(r.time_total)
       << ',' << r.status << '\n';
  }
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = values.size();
  std::nth_element(values.begin(), values.begin() + n / 2, values.end());
  const double hi = values[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + n / 2);
  return 0.5 * (lo + hi);
}

bool JacobianCheckResult::all_pass() const {
  return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
}

JacobianCheckResult check_jacobians(const JacobianCheckOptions& options) {
  JacobianCheckResult res;
  res.pass.fill(true);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < options.trials; ++t) {
    SceneConfig cfg;
    cfg.n_cameras = 1;
    cfg.seed = rng();
    cfg.angular_speed_deg = options.static_motion ? 0.0 : options.max_angular_speed_deg * unit(rng);
    cfg.linear_speed = options.static_motion ? 0.0 : options.max_linear_speed * unit(rng);
    cfg.noise_sigma = options.max_noise * unit(rng);
    const Scene scene = generate_scene(cfg);
    Problem p = add_noise(scene.problem, cfg.noise_sigma, rng());
    // Away from ground truth so that residuals and the C-correction terms are nonzero.
    PerturbationMagnitudes mag;
    if (options.static_motion) mag.velocity_fraction = 0.0;
    p = perturb_initialization(p, mag, rng());
    std::uniform_int_distribution<std::size_t> pick(0, p.observations.size() - 1);
    const Observation& obs = p.observations[pick(rng)];
    const RsCamera& cam = p.cameras[obs.cam_id];
    const Vec3& P = p.points[obs.point_id];

    ObservationJacobian Ja = jac_observation(cam, P, obs, p.prior);
    if (options.mutate) options.mutate(Ja);
    ObservationJacobian Jf = jac_finite_difference(cam, P, obs, p.prior, options.step);
    if (options.richardson) {
      const ObservationJacobian Jh = jac_finite_difference(cam, P, obs, p.prior, 0.5 * options.step);
      for (int b = 0; b < 5; ++b) Jf.block(b) = (4.0 * Jh.block(b) - Jf.block(b)) / 3.0;
    }
    for (int b = 0; b < 5; ++b) {
      const double mag_fd = Jf.block(b).cwiseAbs().maxCoeff();
      const double err = (Ja.block(b) - Jf.block(b)).cwiseAbs().maxCoeff();
      if (mag_fd >= 1.0) {
        const double rel = err / mag_fd;
        res.max_relative[b] = std::max(res.max_relative[b], rel);
        if (!(rel < kJacobianRelativeTolerance)) res.pass[b] = false;
      } else {
        res.max_absolute[b] = std::max(res.max_absolute[b], err);
        if (!(err < kJacobianAbsoluteTolerance)) res.pass[b] = false;
      }
    }
    ++res.trials;
  }
  return res;
}

}  // namespace rsba
