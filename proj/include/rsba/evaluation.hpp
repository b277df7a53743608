#pragma once

#include "rsba/problem.hpp"
#include "rsba/solver.hpp"
#include "rsba/synthetic.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rsba {

/// x_gt ~ scale * R * x_est + t
struct Sim3 {
  double scale = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * R * x + t; }
};

/// Closed-form least-squares similarity mapping est onto gt.
/// Throws DimensionMismatch, or DegenerateConfiguration for fewer than three
/// non-collinear correspondences.
Sim3 sim3_align(const std::vector<Vec3>& est, const std::vector<Vec3>& gt);

/// RMS residual of sim3_align.
double absolute_trajectory_error(const std::vector<Vec3>& est, const std::vector<Vec3>& gt);

/// RMSE of ||T(P_est) - P_gt|| after alignment T.
double metric_point(const std::vector<Vec3>& P_est, const std::vector<Vec3>& P_gt, const Sim3& T);

/// Mean geodesic angle, radians.
double metric_rot(const std::vector<Mat3>& R_est, const std::vector<Mat3>& R_gt);

/// Mean angle between translation vectors, radians. Throws ZeroTranslation.
double metric_trans(const std::vector<Vec3>& t_est, const std::vector<Vec3>& t_gt);

/// Cameras of `est` expressed in the ground-truth gauge given by T.
std::vector<RsCamera> align_cameras(const std::vector<RsCamera>& est, const Sim3& T);

struct Metrics {
  double e_point = 0.0;
  double e_rot = 0.0;
  double e_trans = 0.0;
  std::optional<double> ate;
};

/// Aligns on the points, then compares points, R0 and t0.
Metrics evaluate(const Problem& estimate, const GroundTruth& truth);

enum class SweepKind { Speed, Noise, Readout, Runtime };

std::string_view to_string(SweepKind kind);
SweepKind parse_sweep_kind(std::string_view name);

struct TrialResult {
  SweepKind kind = SweepKind::Speed;
  Method method = Method::Nw;
  Backend backend = Backend::Schur2;
  double coordinate = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double e_point = 0.0;
  double e_rot = 0.0;
  double e_trans = 0.0;
  std::optional<double> ate;
  StageTimes times;
  double time_total = 0.0;  // wall time of optimize
  int iterations = 0;
  int rejected_steps = 0;
  std::string status = "ok";
};

struct SweepOptions {
  std::vector<Method> methods{Method::Gsba, Method::Dm, Method::Nm, Method::Nw};
  std::vector<Backend> backends{Backend::Schur2};
  std::size_t trials = 50;
  std::vector<double> coordinates;  // empty: the default grid of the sweep kind
  std::size_t threads = 1;
  PerturbationMagnitudes perturbation;
  SolverConfig solver;
};

/// Default grid: Speed 0..20 deg/frame (linear speed = angular / 10), Noise 0..2 px,
/// Readout 0..90 deg, Runtime 50..250 cameras.
std::vector<double> default_coordinates(SweepKind kind);

/// Seed of trial `trial` at grid index `index`; independent of method and backend.
std::uint64_t trial_seed(std::uint64_t base_seed, SweepKind kind, std::size_t index, std::size_t trial);

/// Scene configuration realized at one sweep coordinate.
SceneConfig sweep_config(SweepKind kind, const SceneConfig& base, double coordinate);

/// One row per (coordinate, trial, method, backend). Failures become rows with
/// a non-"ok" status. Runtime sweeps always run single-threaded.
std::vector<TrialResult> run_sweep(SweepKind kind, const SceneConfig& base, const SweepOptions& options);

/// Header, '#' metadata lines and one row per result.
void write_csv(std::ostream& os, const std::vector<TrialResult>& rows,
               const std::vector<std::string>& metadata);

double median(std::vector<double> values);

/// Analytical against central-difference Jacobians over seeded observations.
/// Blocks whose finite-difference magnitude is below 1 are judged on the
/// absolute error, the others on the relative error.
/// With richardson set the oracle is (4 D(h/2) - D(h)) / 3.
struct JacobianCheckOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  double step = 1e-3;
  bool richardson = true;
  bool static_motion = false;  // omega = d = 0 in every trial
  double max_angular_speed_deg = 20.0;
  double max_linear_speed = 2.0;
  double max_noise = 2.0;
  std::function<void(ObservationJacobian&)> mutate;  // applied to the analytical Jacobian
};

struct JacobianCheckResult {
  std::array<double, 5> max_relative{};  // per block, over blocks judged relatively
  std::array<double, 5> max_absolute{};  // per block, over blocks judged absolutely
  std::array<bool, 5> pass{};
  std::size_t trials = 0;

  bool all_pass() const;
};

constexpr double kJacobianRelativeTolerance = 1e-4;
constexpr double kJacobianAbsoluteTolerance = 1e-8;

JacobianCheckResult check_jacobians(const JacobianCheckOptions& options);

}  // namespace rsba
