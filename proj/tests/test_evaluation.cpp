#include "rsba/error.hpp"
#include "rsba/evaluation.hpp"
#include "rsba/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

namespace rsba {
namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidArgument;
}

TEST(MetricPoint, Examples) {
  const std::vector<Vec3> gt = random_points(20, 1);
  EXPECT_EQ(metric_point(gt, gt, Sim3{}), 0.0);
  EXPECT_LT(metric_point(gt, gt, sim3_align(gt, gt)), 1e-12);

  std::vector<Vec3> doubled = gt;
  for (Vec3& p : doubled) p *= 2.0;
  EXPECT_LT(metric_point(doubled, gt, sim3_align(doubled, gt)), 1e-12);

  const std::vector<Vec3> four{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const std::vector<Vec3> off{{1, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 1}};
  std::vector<Vec3> est = four;
  for (std::size_t i = 0; i < 4; ++i) est[i] += off[i];
  EXPECT_NEAR(metric_point(est, four, Sim3{}), std::sqrt((1.0 + 4.0 + 4.0 + 3.0) / 4.0), 1e-15);

  EXPECT_EQ(code_of([&] { metric_point(est, gt, Sim3{}); }), ErrorCode::DimensionMismatch);
}

TEST(MetricRot, Examples) {
  const Mat3 R = so3_exp(Vec3(0.3, -0.2, 0.9));
  EXPECT_LT(metric_rot({R}, {R}), 1e-7);
  const Mat3 Rz = so3_exp(Vec3(0, 0, 10.0 * M_PI / 180.0));
  EXPECT_NEAR(metric_rot({Rz * R}, {R}), 0.17453292519943295, 1e-12);
  const Mat3 G = so3_exp(Vec3(-1.0, 0.4, 2.0));
  EXPECT_NEAR(metric_rot({G * Rz * R}, {G * R}), metric_rot({Rz * R}, {R}), 1e-12);
  EXPECT_NEAR(metric_rot({Rz, Mat3::Identity()}, {Mat3::Identity(), Mat3::Identity()}),
              0.5 * 0.17453292519943295, 1e-12);
}

TEST(MetricTrans, Examples) {
  EXPECT_NEAR(metric_trans({Vec3(1, 2, 3)}, {Vec3(2, 4, 6)}), 0.0, 1e-7);
  EXPECT_NEAR(metric_trans({Vec3(1, 0, 0)}, {Vec3(0, 3, 0)}), M_PI / 2, 1e-15);
  const Vec3 t(0.3, -1, 2), g(1, 1, 1);
  EXPECT_EQ(metric_trans({2.0 * t}, {g}), metric_trans({t}, {g}));
  EXPECT_EQ(code_of([] { metric_trans({Vec3::Zero()}, {Vec3(1, 0, 0)}); }),
            ErrorCode::ZeroTranslation);
}

TEST(Sim3Align, IdentityAndKnownTransform) {
  const std::vector<Vec3> gt = random_points(10, 2);
  const Sim3 I = sim3_align(gt, gt);
  EXPECT_NEAR(I.scale, 1.0, 1e-12);
  EXPECT_LT((I.R - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(I.t.norm(), 1e-12);
  EXPECT_LT(absolute_trajectory_error(gt, gt), 1e-12);

  // est = T^-1(gt), so aligning est onto gt recovers T.
  Sim3 T;
  T.scale = 0.7;
  T.R = so3_exp(Vec3(0.5, 1.0, -0.3));
  T.t = Vec3(4, -2, 1);
  std::vector<Vec3> est;
  for (const Vec3& p : gt) est.push_back(T.R.transpose() * (p - T.t) / T.scale);
  const Sim3 got = sim3_align(est, gt);
  EXPECT_NEAR(got.scale, T.scale, 1e-12);
  EXPECT_LT((got.R - T.R).norm(), 1e-12);
  EXPECT_LT((got.t - T.t).norm(), 1e-11);
  EXPECT_LT(absolute_trajectory_error(est, gt), 1e-10);
}

TEST(Sim3Align, NoisyAteBelowUnaligned) {
  const std::vector<Vec3> gt = random_points(30, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<Vec3> est = gt;
  for (Vec3& p : est) p += Vec3(n(rng), n(rng), n(rng));
  EXPECT_LE(absolute_trajectory_error(est, gt), metric_point(est, gt, Sim3{}));
}

TEST(Sim3Align, Degenerate) {
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_EQ(code_of([&] { sim3_align(line, line); }), ErrorCode::DegenerateConfiguration);
  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_EQ(code_of([&] { sim3_align(two, two); }), ErrorCode::DegenerateConfiguration);
  EXPECT_EQ(code_of([&] { sim3_align(line, two); }), ErrorCode::DimensionMismatch);
}

TEST(Evaluate, GaugeInvariant) {
  SceneConfig cfg;
  cfg.seed = 90;
  const Scene s = generate_scene(cfg);
  const Problem est = perturb_initialization(s.problem, PerturbationMagnitudes{}, 91);
  const Metrics base = evaluate(est, s.truth);
  EXPECT_GT(base.e_point, 0.0);
  EXPECT_GT(base.e_rot, 0.0);
  EXPECT_GT(base.e_trans, 0.0);

  Sim3 G;
  G.scale = 3.0;
  G.R = so3_exp(Vec3(0.2, -1.3, 0.4));
  G.t = Vec3(10, 5, -7);
  Problem moved = est;
  for (Vec3& P : moved.points) P = G.apply(P);
  moved.cameras = align_cameras(est.cameras, G);
  const Metrics m = evaluate(moved, s.truth);
  EXPECT_NEAR(m.e_point, base.e_point, 1e-9);
  EXPECT_NEAR(m.e_rot, base.e_rot, 1e-9);
  EXPECT_NEAR(m.e_trans, base.e_trans, 1e-9);

  const Metrics exact = evaluate(s.problem, s.truth);
  EXPECT_LT(exact.e_point, 1e-12);
  EXPECT_LT(exact.e_rot, 1e-7);
  EXPECT_LT(exact.e_trans, 1e-7);
}

TEST(Sweep, CoordinatesAndConfig) {
  EXPECT_EQ(default_coordinates(SweepKind::Runtime).front(), 50.0);
  EXPECT_EQ(default_coordinates(SweepKind::Runtime).back(), 250.0);
  EXPECT_EQ(default_coordinates(SweepKind::Noise).back(), 2.0);
  EXPECT_EQ(default_coordinates(SweepKind::Readout).back(), 90.0);
  EXPECT_EQ(default_coordinates(SweepKind::Speed).back(), 20.0);
  const SceneConfig base;
  const SceneConfig sp = sweep_config(SweepKind::Speed, base, 20.0);
  EXPECT_EQ(sp.angular_speed_deg, 20.0);
  EXPECT_EQ(sp.linear_speed, 2.0);
  EXPECT_EQ(sweep_config(SweepKind::Noise, base, 1.5).noise_sigma, 1.5);
  EXPECT_EQ(sweep_config(SweepKind::Runtime, base, 150.0).n_cameras, 150u);
  for (SweepKind k : {SweepKind::Speed, SweepKind::Noise, SweepKind::Readout, SweepKind::Runtime}) {
    EXPECT_EQ(parse_sweep_kind(to_string(k)), k);
  }
  EXPECT_NE(trial_seed(1, SweepKind::Speed, 0, 0), trial_seed(1, SweepKind::Speed, 0, 1));
  EXPECT_NE(trial_seed(1, SweepKind::Speed, 0, 0), trial_seed(1, SweepKind::Noise, 0, 0));
}

TEST(Sweep, DeterministicRows) {
  SceneConfig base;
  base.seed = 92;
  SweepOptions opt;
  opt.trials = 2;
  opt.coordinates = {0.0, 10.0};
  const auto a = run_sweep(SweepKind::Speed, base, opt);
  opt.threads = 2;
  const auto b = run_sweep(SweepKind::Speed, base, opt);
  ASSERT_EQ(a.size(), 2u * 2u * 4u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].status, "ok");
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].method, b[i].method);
    EXPECT_EQ(a[i].e_point, b[i].e_point);
    EXPECT_GE(a[i].e_point, 0.0);
    EXPECT_GE(a[i].e_rot, 0.0);
    EXPECT_GE(a[i].e_trans, 0.0);
  }
  EXPECT_THROW(
      [&] {
        SweepOptions none = opt;
        none.trials = 0;
        run_sweep(SweepKind::Speed, base, none);
      }(),
      Error);
}

TEST(Sweep, FailuresBecomeRows) {
  SceneConfig base;
  base.sphere_radius = 3.0;
  SweepOptions opt;
  opt.trials = 1;
  opt.coordinates = {1.0};
  opt.methods = {Method::Nw};
  const auto rows = run_sweep(SweepKind::Noise, base, opt);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].status, "failed:GenerationFailure");
  EXPECT_TRUE(std::isnan(rows[0].e_point));
}

TEST(Csv, HeaderAndRows) {
  TrialResult r;
  r.kind = SweepKind::Noise;
  r.method = Method::Nm;
  r.backend = Backend::Schur1;
  r.coordinate = 0.5;
  r.trial = 3;
  r.seed = 17;
  r.e_point = 0.25;
  std::ostringstream os;
  write_csv(os, {r}, {"format=test"});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# format=test");
  std::getline(is, line);
  EXPECT_EQ(line,
            "sweep_kind,method,backend,coordinate,trial,seed,e_point,e_rot,e_trans,"
            "time_assembly,time_schur,time_solve,time_total,status");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("noise,nm,schur1,0.5,3,17,0.25,", 0), 0u) << line;
  EXPECT_EQ(line.substr(line.size() - 3), ",ok");
}

TEST(Median, OddEvenAndNan) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({std::nan(""), 5.0}), 5.0);
  EXPECT_TRUE(std::isnan(median({})));
}

}  // namespace
}  // namespace rsba
