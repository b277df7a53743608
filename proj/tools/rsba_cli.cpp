#include "rsba/error.hpp"
#include "rsba/evaluation.hpp"
#include "rsba/io.hpp"
#include "rsba/jacobians.hpp"
#include "rsba/solver.hpp"
#include "rsba/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr const char* kReportFormat = "rsba-report v1";
constexpr const char* kCsvFormat = "rsba-sweep v1";

enum Exit { kOk = 0, kConfigError = 2, kSolverFailure = 3, kAcceptanceFailure = 4 };

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 1;
};

struct SceneFlags {
  rsba::SceneConfig scene;
  std::string layout = "sphere";
};

void add_scene_flags(CLI::App* cmd, SceneFlags& f) {
  auto& s = f.scene;
  cmd->add_option("--cameras", s.n_cameras, "number of cameras")->capture_default_str();
  cmd->add_option("--points", s.n_points, "number of cube-surface points")->capture_default_str();
  cmd->add_option("--radius", s.sphere_radius, "camera sphere radius")->capture_default_str();
  cmd->add_option("--cube", s.cube_side, "cube side length")->capture_default_str();
  cmd->add_option("--width", s.image_w, "image width, px")->capture_default_str();
  cmd->add_option("--height", s.image_h, "image height, px")->capture_default_str();
  cmd->add_option("--focal", s.focal, "focal length, px")->capture_default_str();
  cmd->add_option("--speed-ang", s.angular_speed_deg, "angular speed, deg/frame")->capture_default_str();
  cmd->add_option("--speed-lin", s.linear_speed, "linear speed, units/frame")->capture_default_str();
  cmd->add_option("--noise", s.noise_sigma, "pixel noise sigma")->capture_default_str();
  cmd->add_option("--readout", s.readout_angle_deg, "readout direction per camera, deg")->delimiter(',');
  cmd->add_option("--layout", f.layout, "camera layout")
      ->check(CLI::IsMember({"sphere", "ring"}))
      ->capture_default_str();
}

void add_perturb_flags(CLI::App* cmd, rsba::PerturbationMagnitudes& p) {
  cmd->add_option("--perturb-rot", p.rotation_deg, "rotation perturbation, deg")->capture_default_str();
  cmd->add_option("--perturb-trans", p.translation, "translation perturbation")->capture_default_str();
  cmd->add_option("--perturb-vel", p.velocity_fraction, "velocity perturbation, fraction")
      ->capture_default_str();
  cmd->add_option("--perturb-point", p.point, "point perturbation")->capture_default_str();
}

rsba::SceneConfig resolve(const SceneFlags& f, std::uint64_t seed) {
  rsba::SceneConfig s = f.scene;
  s.layout = f.layout == "ring" ? rsba::CameraLayout::Ring : rsba::CameraLayout::Sphere;
  s.seed = seed;
  return s;
}

json scene_json(const rsba::SceneConfig& s) {
  return {{"cameras", s.n_cameras},
          {"points", s.n_points},
          {"radius", s.sphere_radius},
          {"cube", s.cube_side},
          {"width", s.image_w},
          {"height", s.image_h},
          {"focal", s.focal},
          {"speed_ang_deg", s.angular_speed_deg},
          {"speed_lin", s.linear_speed},
          {"noise", s.noise_sigma},
          {"readout_deg", s.readout_angle_deg},
          {"layout", s.layout == rsba::CameraLayout::Ring ? "ring" : "sphere"},
          {"seed", s.seed}};
}

json perturb_json(const rsba::PerturbationMagnitudes& p) {
  return {{"rot_deg", p.rotation_deg},
          {"trans", p.translation},
          {"vel_fraction", p.velocity_fraction},
          {"point", p.point}};
}

json solver_json(const rsba::SolverConfig& c) {
  return {{"method", rsba::to_string(c.method)},
          {"backend", rsba::to_string(c.backend)},
          {"max_iterations", c.max_iterations},
          {"cost_tolerance", c.cost_tolerance},
          {"gradient_tolerance", c.gradient_tolerance},
          {"lm_initial_lambda", c.lm_initial_lambda}};
}

json times_json(const rsba::StageTimes& t) {
  return {{"assembly", t.assembly},
          {"schur_construction", t.schur_construction},
          {"reduced_solve", t.reduced_solve},
          {"back_substitution", t.back_substitution},
          {"total", t.total()}};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void write_with_header(const rsba::Problem& p, const std::string& path, const json& config) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw rsba::Error(rsba::ErrorCode::IoError, "cannot open '" + path + "' for writing");
  os << "# " << config.dump() << '\n';
  rsba::write_problem(os, p);
  if (!os) throw rsba::Error(rsba::ErrorCode::IoError, "write to '" + path + "' failed");
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  SceneFlags flags;
  rsba::PerturbationMagnitudes perturb;
  std::string gt_out;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  const rsba::SceneConfig cfg = resolve(a.flags, g.seed);
  const std::string out = g.out.empty() ? "problem.rsbal" : g.out;
  const std::string gt_out = a.gt_out.empty() ? out + ".gt" : a.gt_out;
  const rsba::Scene scene = rsba::generate_scene(cfg);
  rsba::Problem p = rsba::add_noise(scene.problem, cfg.noise_sigma, derive_seed(g.seed, 1));
  p = rsba::perturb_initialization(p, a.perturb, derive_seed(g.seed, 2));

  rsba::Problem gt = scene.problem;
  const json config = {{"format", kReportFormat},
                       {"subcommand", "synth"},
                       {"seed", g.seed},
                       {"scene", scene_json(cfg)},
                       {"perturbation", perturb_json(a.perturb)}};
  write_with_header(p, out, config);
  write_with_header(gt, gt_out, config);
  std::cout << "wrote " << out << " and " << gt_out << " (" << p.cameras.size() << " cameras, "
            << p.points.size() << " points, " << p.observations.size() << " observations)\n";
  return kOk;
}

// --- solve -----------------------------------------------------------------

struct SolveArgs {
  std::string problem;
  std::string method = "nw";
  std::string backend = "schur2";
  rsba::SolverConfig solver;
  std::string report;
  std::string gt;
};

int cmd_solve(const Globals& g, SolveArgs a) {
  a.solver.method = rsba::parse_method(a.method);
  a.solver.backend = rsba::parse_backend(a.backend);
  const rsba::Problem problem = rsba::read_problem(a.problem);

  std::ofstream report_file;
  std::ostream* report = &std::cout;
  if (!a.report.empty() && a.report != "-") {
    report_file.open(a.report, std::ios::binary);
    if (!report_file) throw rsba::Error(rsba::ErrorCode::IoError, "cannot open '" + a.report + "'");
    report = &report_file;
  }
  const json config = {{"type", "config"},
                       {"format", kReportFormat},
                       {"subcommand", "solve"},
                       {"problem", a.problem},
                       {"seed", g.seed},
                       {"solver", solver_json(a.solver)},
                       {"out", g.out},
                       {"gt", a.gt}};
  *report << config.dump() << '\n';

  const rsba::SolveReport r = rsba::optimize(problem, a.solver);
  for (std::size_t k = 0; k < r.cost_trace.size(); ++k) {
    json it = {{"type", "iteration"}, {"iteration", k}, {"cost", r.cost_trace[k]}};
    if (k > 0) it["lambda"] = r.lambda_trace[k - 1];
    *report << it.dump() << '\n';
    if (report != &std::cout) std::cout << "iter " << k << " cost " << rsba::format_double(r.cost_trace[k]) << '\n';
  }
  json summary = {{"type", "summary"},
                  {"iterations", r.iterations},
                  {"rejected_steps", r.rejected_steps},
                  {"termination", rsba::to_string(r.termination)},
                  {"initial_cost", r.initial_cost()},
                  {"final_cost", r.final_cost()},
                  {"times", times_json(r.times)}};
  if (!a.gt.empty()) {
    const rsba::Problem gt = rsba::read_problem(a.gt);
    const rsba::Metrics m = rsba::evaluate(r.solution, {gt.cameras, gt.points, gt.observations});
    summary["metrics"] = {{"e_point", m.e_point}, {"e_rot", m.e_rot}, {"e_trans", m.e_trans}};
    if (m.ate) summary["metrics"]["ate"] = *m.ate;
  }
  *report << summary.dump() << '\n';
  if (!g.out.empty()) rsba::write_problem(r.solution, g.out);
  return kOk;
}

// --- check-jacobian --------------------------------------------------------

struct CheckArgs {
  std::size_t trials = 1000;
  bool static_motion = false;
  std::string mutate = "none";
};

int cmd_check_jacobian(const Globals& g, const CheckArgs& a) {
  rsba::JacobianCheckOptions opt;
  opt.trials = a.trials;
  opt.seed = g.seed;
  opt.static_motion = a.static_motion;
  if (a.mutate == "flip-omega") {
    opt.mutate = [](rsba::ObservationJacobian& J) { J.J_omega = -J.J_omega; };
  }
  const rsba::JacobianCheckResult r = rsba::check_jacobians(opt);
  std::cout << "# trials=" << r.trials << " seed=" << g.seed << " static=" << a.static_motion
            << " step=" << opt.step << " richardson=" << opt.richardson << '\n';
  std::cout << "block  max_rel        max_abs        result\n";
  for (int b = 0; b < 5; ++b) {
    std::string name(rsba::ObservationJacobian::kBlockNames[b]);
    name.resize(7, ' ');
    std::string rel = rsba::format_double(r.max_relative[b]);
    std::string abs = rsba::format_double(r.max_absolute[b]);
    rel.resize(std::max<std::size_t>(rel.size() + 1, 15), ' ');
    abs.resize(std::max<std::size_t>(abs.size() + 1, 15), ' ');
    std::cout << name << rel << abs << (r.pass[b] ? "PASS" : "FAIL") << '\n';
  }
  return r.all_pass() ? kOk : kAcceptanceFailure;
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  SceneFlags flags;
  std::string kind = "speed";
  std::vector<std::string> methods{"gsba", "dm", "nm", "nw"};
  std::vector<std::string> backends{"schur2"};
  std::size_t trials = 50;
  std::vector<double> coords;
  rsba::PerturbationMagnitudes perturb;
};

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const rsba::SweepKind kind = rsba::parse_sweep_kind(a.kind);
  rsba::SweepOptions opt;
  opt.methods.clear();
  for (const auto& m : a.methods) opt.methods.push_back(rsba::parse_method(m));
  opt.backends.clear();
  for (const auto& b : a.backends) opt.backends.push_back(rsba::parse_backend(b));
  opt.trials = a.trials;
  opt.coordinates = a.coords;
  opt.threads = g.threads;
  opt.perturbation = a.perturb;
  const rsba::SceneConfig base = resolve(a.flags, g.seed);
  const auto rows = rsba::run_sweep(kind, base, opt);

  json cfg = {{"subcommand", "sweep"},
              {"kind", a.kind},
              {"methods", a.methods},
              {"backends", a.backends},
              {"trials", a.trials},
              {"coords", opt.coordinates.empty() ? rsba::default_coordinates(kind) : opt.coordinates},
              {"threads", g.threads},
              {"scene", scene_json(base)},
              {"perturbation", perturb_json(a.perturb)},
              {"solver", solver_json(opt.solver)}};
  const std::vector<std::string> meta{std::string("format=") + kCsvFormat,
                                      "seed=" + std::to_string(g.seed), "config=" + cfg.dump()};
  if (g.out.empty() || g.out == "-") {
    rsba::write_csv(std::cout, rows, meta);
  } else {
    std::ofstream os(g.out, std::ios::binary);
    if (!os) throw rsba::Error(rsba::ErrorCode::IoError, "cannot open '" + g.out + "'");
    rsba::write_csv(os, rows, meta);
  }
  const bool any_ok = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.status == "ok"; });
  return any_ok ? kOk : kSolverFailure;
}

bool is_config_error(rsba::ErrorCode c) {
  switch (c) {
    case rsba::ErrorCode::ParseError:
    case rsba::ErrorCode::IdOutOfRange:
    case rsba::ErrorCode::CountMismatch:
    case rsba::ErrorCode::IoError:
    case rsba::ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rolling-shutter bundle adjustment toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output path (problem, refined problem or CSV)");
  app.add_option("--threads", g.threads, "trial-level worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic problem and its ground truth");
  add_scene_flags(c_synth, synth.flags);
  add_perturb_flags(c_synth, synth.perturb);
  c_synth->add_option("--gt-out", synth.gt_out, "ground-truth path (default <out>.gt)");

  SolveArgs solve;
  auto* c_solve = app.add_subcommand("solve", "refine a problem file");
  c_solve->add_option("problem", solve.problem, "RSBAL problem")->required();
  c_solve->add_option("--method", solve.method)
      ->check(CLI::IsMember({"gsba", "dm", "nm", "nw"}))
      ->capture_default_str();
  c_solve->add_option("--backend", solve.backend)
      ->check(CLI::IsMember({"dense", "schur1", "schur2"}))
      ->capture_default_str();
  c_solve->add_option("--max-iter", solve.solver.max_iterations)->capture_default_str();
  c_solve->add_option("--lambda", solve.solver.lm_initial_lambda, "initial damping, 0 = Gauss-Newton")
      ->capture_default_str();
  c_solve->add_option("--cost-tol", solve.solver.cost_tolerance)->capture_default_str();
  c_solve->add_option("--grad-tol", solve.solver.gradient_tolerance)->capture_default_str();
  c_solve->add_option("--report", solve.report, "JSON-lines report path, '-' for stdout");
  c_solve->add_option("--gt", solve.gt, "ground-truth RSBAL for error metrics");

  CheckArgs check;
  auto* c_check = app.add_subcommand("check-jacobian", "compare analytical and numerical Jacobians");
  c_check->add_option("--trials", check.trials)->check(CLI::PositiveNumber)->capture_default_str();
  c_check->add_flag("--static", check.static_motion, "omega = d = 0 in every trial");
  c_check->add_option("--mutate", check.mutate)
      ->check(CLI::IsMember({"none", "flip-omega"}))
      ->group("");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "run a synthetic evaluation sweep to CSV");
  add_scene_flags(c_sweep, sweep.flags);
  add_perturb_flags(c_sweep, sweep.perturb);
  c_sweep->add_option("--kind", sweep.kind)
      ->check(CLI::IsMember({"speed", "noise", "readout", "runtime"}))
      ->capture_default_str();
  c_sweep->add_option("--methods", sweep.methods)->delimiter(',')->check(
      CLI::IsMember({"gsba", "dm", "nm", "nw"}));
  c_sweep->add_option("--backends", sweep.backends)->delimiter(',')->check(
      CLI::IsMember({"dense", "schur1", "schur2"}));
  c_sweep->add_option("--trials", sweep.trials)->check(CLI::PositiveNumber)->capture_default_str();
  c_sweep->add_option("--coords", sweep.coords, "sweep coordinates")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*c_synth) return cmd_synth(g, synth);
    if (*c_solve) return cmd_solve(g, solve);
    if (*c_check) return cmd_check_jacobian(g, check);
    if (*c_sweep) return cmd_sweep(g, sweep);
  } catch (const rsba::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? kConfigError : kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kConfigError;
}
