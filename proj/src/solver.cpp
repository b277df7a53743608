#include "rsba/solver.hpp"

#include "rsba/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace rsba {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kDampingFloor = 1e-12;

}  // namespace

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::Dense: return "dense";
    case Backend::Schur1: return "schur1";
    case Backend::Schur2: return "schur2";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "dense") return Backend::Dense;
  if (name == "schur1") return Backend::Schur1;
  if (name == "schur2") return Backend::Schur2;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + std::string(name) + "'");
}

std::string_view to_string(Termination reason) {
  switch (reason) {
    case Termination::MaxIterations: return "max_iterations";
    case Termination::CostTolerance: return "cost_tolerance";
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::LambdaOverflow: return "lambda_overflow";
  }
  return "unknown";
}

StageTimes& StageTimes::operator+=(const StageTimes& o) {
  assembly += o.assembly;
  schur_construction += o.schur_construction;
  reduced_solve += o.reduced_solve;
  back_substitution += o.back_substitution;
  return *this;
}

Eigen::VectorXd BlockHessian::gradient() const {
  Eigen::VectorXd g(dimension());
  g << grad_t, grad_u, grad_v;
  return g;
}

double BlockHessian::gradient_inf_norm() const {
  double m = 0.0;
  if (grad_t.size() > 0) m = std::max(m, grad_t.cwiseAbs().maxCoeff());
  if (grad_u.size() > 0) m = std::max(m, grad_u.cwiseAbs().maxCoeff());
  if (grad_v.size() > 0) m = std::max(m, grad_v.cwiseAbs().maxCoeff());
  return m;
}

namespace {

Linearization linearize_checked(Method method, const Problem& problem, std::size_t k,
                                DegeneracyPolicy policy) {
  const Observation& obs = problem.observations[k];
  if (obs.cam_id >= problem.cameras.size() || obs.point_id >= problem.points.size()) {
    throw Error(ErrorCode::IdOutOfRange, "observation " + std::to_string(k) + " has ids out of range");
  }
  try {
    return linearize(method, problem.cameras[obs.cam_id], problem.points[obs.point_id], obs,
                     problem.prior, policy);
  } catch (const Error& e) {
    throw Error(e.code(), "observation " + std::to_string(k) + ": " + e.what());
  }
}

}  // namespace

BlockHessian assemble(const Problem& problem, Method method, double* cost, DegeneracyPolicy policy) {
  const std::size_t nc = problem.cameras.size();
  const std::size_t np = problem.points.size();
  BlockHessian H;
  H.R_blocks.assign(nc, Mat6::Zero());
  H.U_blocks.assign(nc, Mat6::Zero());
  H.S_blocks.assign(nc, Mat6::Zero());
  H.V_blocks.assign(np, Mat3::Zero());
  H.grad_t = Eigen::VectorXd::Zero(6 * nc);
  H.grad_u = Eigen::VectorXd::Zero(6 * nc);
  H.grad_v = Eigen::VectorXd::Zero(3 * np);
  H.edges.reserve(problem.observations.size());

  double total = 0.0;
  Eigen::Matrix<double, 2, 6> Jrs;
  Eigen::Matrix<double, 2, 6> Jgs;
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const Observation& obs = problem.observations[k];
    const Linearization lin = linearize_checked(method, problem, k, policy);
    const ObservationJacobian& J = lin.jacobian;
    const Vec2& e = lin.residual;
    total += 0.5 * e.squaredNorm();

    Jrs << J.J_omega, J.J_d;
    Jgs << J.J_xi, J.J_t;
    const std::size_t c = obs.cam_id;
    const std::size_t p = obs.point_id;

    BlockHessian::Edge edge;
    edge.cam = c;
    edge.point = p;
    if (method != Method::Gsba) {
      H.R_blocks[c].noalias() += Jrs.transpose() * Jrs;
      H.S_blocks[c].noalias() += Jrs.transpose() * Jgs;
      edge.T.noalias() = Jrs.transpose() * J.J_p;
      H.grad_t.segment<6>(6 * c).noalias() += Jrs.transpose() * e;
    }
    H.U_blocks[c].noalias() += Jgs.transpose() * Jgs;
    H.V_blocks[p].noalias() += J.J_p.transpose() * J.J_p;
    edge.W.noalias() = Jgs.transpose() * J.J_p;
    H.grad_u.segment<6>(6 * c).noalias() += Jgs.transpose() * e;
    H.grad_v.segment<3>(3 * p).noalias() += J.J_p.transpose() * e;
    H.edges.push_back(edge);
  }
  if (method == Method::Gsba) {
    for (auto& Rb : H.R_blocks) Rb.setIdentity();
  }
  if (cost) *cost = total;
  return H;
}

double evaluate_cost(const Problem& problem, Method method, DegeneracyPolicy policy) {
  double total = 0.0;
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const Observation& obs = problem.observations[k];
    if (obs.cam_id >= problem.cameras.size() || obs.point_id >= problem.points.size()) {
      throw Error(ErrorCode::IdOutOfRange, "observation " + std::to_string(k) + " has ids out of range");
    }
    const Vec2 e = evaluate_residual(method, problem.cameras[obs.cam_id],
                                     problem.points[obs.point_id], obs, problem.prior, policy);
    total += 0.5 * e.squaredNorm();
  }
  return total;
}

Eigen::MatrixXd densify(const BlockHessian& H) {
  const Eigen::Index nc = static_cast<Eigen::Index>(H.n_cameras());
  const Eigen::Index gs0 = 6 * nc;
  const Eigen::Index p0 = 12 * nc;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(H.dimension(), H.dimension());
  for (Eigen::Index c = 0; c < nc; ++c) {
    D.block<6, 6>(6 * c, 6 * c) = H.R_blocks[c];
    D.block<6, 6>(gs0 + 6 * c, gs0 + 6 * c) = H.U_blocks[c];
    D.block<6, 6>(6 * c, gs0 + 6 * c) = H.S_blocks[c];
    D.block<6, 6>(gs0 + 6 * c, 6 * c) = H.S_blocks[c].transpose();
  }
  for (std::size_t i = 0; i < H.n_points(); ++i) {
    const Eigen::Index p = static_cast<Eigen::Index>(i);
    D.block<3, 3>(p0 + 3 * p, p0 + 3 * p) = H.V_blocks[i];
  }
  for (const auto& e : H.edges) {
    const Eigen::Index c = static_cast<Eigen::Index>(e.cam);
    const Eigen::Index p = p0 + 3 * static_cast<Eigen::Index>(e.point);
    D.block<6, 3>(6 * c, p) += e.T;
    D.block<6, 3>(gs0 + 6 * c, p) += e.W;
    D.block<3, 6>(p, 6 * c) += e.T.transpose();
    D.block<3, 6>(p, gs0 + 6 * c) += e.W.transpose();
  }
  return D;
}

namespace {

template <typename M>
void damp_diagonal(M& A, double lambda) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, i) += lambda * std::max(A(i, i), kDampingFloor);
}

}  // namespace

BlockHessian damped(const BlockHessian& H, double lambda) {
  BlockHessian out = H;
  if (lambda == 0.0) return out;
  for (auto& b : out.R_blocks) damp_diagonal(b, lambda);
  for (auto& b : out.U_blocks) damp_diagonal(b, lambda);
  for (auto& b : out.V_blocks) damp_diagonal(b, lambda);
  return out;
}

Eigen::VectorXd solve_dense(const BlockHessian& H, double lambda, StageTimes* times) {
  auto t0 = Clock::now();
  Eigen::MatrixXd A = densify(H);
  if (lambda != 0.0) damp_diagonal(A, lambda);
  const Eigen::VectorXd g = H.gradient();
  if (times) times->schur_construction += seconds_since(t0);

  t0 = Clock::now();
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(A);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "dense normal matrix is not positive definite");
  }
  Eigen::VectorXd delta = llt.solve(-g);
  if (times) times->reduced_solve += seconds_since(t0);
  return delta;
}

namespace {

struct DampedDiagonal {
  std::vector<Mat6> R, U;
  std::vector<Mat3> V;
};

DampedDiagonal damped_diagonal(const BlockHessian& H, double lambda) {
  DampedDiagonal D{H.R_blocks, H.U_blocks, H.V_blocks};
  if (lambda == 0.0) return D;
  for (auto& b : D.R) damp_diagonal(b, lambda);
  for (auto& b : D.U) damp_diagonal(b, lambda);
  for (auto& b : D.V) damp_diagonal(b, lambda);
  return D;
}

// Camera system left after eliminating every point, in [rs; gs] ordering.
struct PointElimination {
  Eigen::MatrixXd Sp;  // 12C x 12C, lower triangle valid
  Eigen::VectorXd b;   // [t*; u*]
  std::vector<Eigen::LLT<Mat3>> V_factors;
  std::vector<std::vector<std::size_t>> point_edges;
};

PointElimination eliminate_points(const BlockHessian& H, const DampedDiagonal& D) {
  const std::size_t nc = H.n_cameras();
  const std::size_t np = H.n_points();
  const Eigen::Index gs0 = static_cast<Eigen::Index>(6 * nc);
  PointElimination out;
  out.Sp = Eigen::MatrixXd::Zero(12 * nc, 12 * nc);
  out.b.resize(12 * nc);
  out.b << H.grad_t, H.grad_u;

  for (std::size_t c = 0; c < nc; ++c) {
    const Eigen::Index r = static_cast<Eigen::Index>(6 * c);
    out.Sp.block<6, 6>(r, r) = D.R[c];
    out.Sp.block<6, 6>(gs0 + r, gs0 + r) = D.U[c];
    out.Sp.block<6, 6>(r, gs0 + r) = H.S_blocks[c];
    out.Sp.block<6, 6>(gs0 + r, r) = H.S_blocks[c].transpose();
  }

  out.point_edges.assign(np, {});
  for (std::size_t k = 0; k < H.edges.size(); ++k) out.point_edges[H.edges[k].point].push_back(k);

  out.V_factors.resize(np);
  // Sp -= sum_i [T; W]_i V_i^-1 [T; W]_i^T, written as Y Y^T with the columns
  // of point i equal to [T; W]_i L_i^-T and applied in chunks of points.
  constexpr std::size_t kChunk = 256;
  Eigen::MatrixXd Y;
  Eigen::Matrix<double, 6, 3> tmp;
  for (std::size_t i0 = 0; i0 < np; i0 += kChunk) {
    const std::size_t i1 = std::min(np, i0 + kChunk);
    Y.setZero(12 * static_cast<Eigen::Index>(nc), 3 * static_cast<Eigen::Index>(i1 - i0));
    bool any = false;
    for (std::size_t i = i0; i < i1; ++i) {
      auto& llt = out.V_factors[i];
      llt.compute(D.V[i]);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    "point block " + std::to_string(i) + " is not positive definite");
      }
      const Eigen::Matrix3d Linv_t =
          llt.matrixL().solve(Eigen::Matrix3d::Identity()).transpose();  // L^-T
      const Eigen::Vector3d z = llt.solve(H.grad_v.segment<3>(3 * i));
      const Eigen::Index col = 3 * static_cast<Eigen::Index>(i - i0);
      for (std::size_t k : out.point_edges[i]) {
        const auto& e = H.edges[k];
        const Eigen::Index r = static_cast<Eigen::Index>(6 * e.cam);
        out.b.segment<6>(r).noalias() -= e.T * z;
        out.b.segment<6>(gs0 + r).noalias() -= e.W * z;
        tmp.noalias() = e.T * Linv_t;
        Y.block<6, 3>(r, col) += tmp;
        tmp.noalias() = e.W * Linv_t;
        Y.block<6, 3>(gs0 + r, col) += tmp;
        any = true;
      }
    }
    if (any) out.Sp.selfadjointView<Eigen::Lower>().rankUpdate(Y, -1.0);
  }
  return out;
}

// delta_p = V^-1 (-v - T^T delta_rs - W^T delta_gs), per point.
void back_substitute_points(const BlockHessian& H, const PointElimination& pe,
                            Eigen::VectorXd& delta) {
  const std::size_t nc = H.n_cameras();
  const Eigen::Index gs0 = static_cast<Eigen::Index>(6 * nc);
  const Eigen::Index p0 = static_cast<Eigen::Index>(12 * nc);
  for (std::size_t i = 0; i < H.n_points(); ++i) {
    Eigen::Vector3d rhs = -H.grad_v.segment<3>(3 * i);
    for (std::size_t k : pe.point_edges[i]) {
      const auto& e = H.edges[k];
      const Eigen::Index r = static_cast<Eigen::Index>(6 * e.cam);
      rhs.noalias() -= e.T.transpose() * delta.segment<6>(r);
      rhs.noalias() -= e.W.transpose() * delta.segment<6>(gs0 + r);
    }
    delta.segment<3>(p0 + 3 * static_cast<Eigen::Index>(i)) = pe.V_factors[i].solve(rhs);
  }
}

}  // namespace

Eigen::VectorXd solve_schur_one_stage(const BlockHessian& H, double lambda, StageTimes* times) {
  auto t0 = Clock::now();
  PointElimination pe = eliminate_points(H, damped_diagonal(H, lambda));
  if (times) times->schur_construction += seconds_since(t0);

  t0 = Clock::now();
  Eigen::VectorXd delta(H.dimension());
  {
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(pe.Sp);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NotPositiveDefinite, "reduced camera system is not positive definite");
    }
    delta.head(pe.b.size()) = llt.solve(-pe.b);
  }
  if (times) times->reduced_solve += seconds_since(t0);

  t0 = Clock::now();
  back_substitute_points(H, pe, delta);
  if (times) times->back_substitution += seconds_since(t0);
  return delta;
}

Eigen::VectorXd solve_schur_two_stage(const BlockHessian& H, double lambda, StageTimes* times) {
  auto t0 = Clock::now();
  PointElimination pe = eliminate_points(H, damped_diagonal(H, lambda));
  const Eigen::Index n = static_cast<Eigen::Index>(6 * H.n_cameras());

  // S_p = [R* S*; S*^T U*]. Factor U* = L L^T, X = L^-1 S*^T, S_rs = R* - X^T X.
  auto U = pe.Sp.bottomRightCorner(n, n);
  auto X = pe.Sp.bottomLeftCorner(n, n);
  auto Srs = pe.Sp.topLeftCorner(n, n);
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt_u(U);
  if (llt_u.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "U* is not positive definite");
  }
  const auto L = llt_u.matrixL();
  L.solveInPlace(X);
  Srs.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), -1.0);

  const Eigen::VectorXd t_star = pe.b.head(n);
  const Eigen::VectorXd u_star = pe.b.tail(n);
  const Eigen::VectorXd y = L.solve(u_star);
  const Eigen::VectorXd rhs = t_star - X.transpose() * y;
  if (times) times->schur_construction += seconds_since(t0);

  t0 = Clock::now();
  Eigen::VectorXd delta(H.dimension());
  {
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt_rs(Srs);
    if (llt_rs.info() != Eigen::Success) {
      throw Error(ErrorCode::NotPositiveDefinite, "S_rs is not positive definite");
    }
    delta.head(n) = llt_rs.solve(-rhs);
  }
  if (times) times->reduced_solve += seconds_since(t0);

  t0 = Clock::now();
  // U* delta_gs = -u* - S*^T delta_rs, with S*^T = L X.
  Eigen::VectorXd w = -y - X * delta.head(n);
  L.transpose().solveInPlace(w);
  delta.segment(n, n) = w;
  back_substitute_points(H, pe, delta);
  if (times) times->back_substitution += seconds_since(t0);
  return delta;
}

Eigen::VectorXd solve(Backend backend, const BlockHessian& H, double lambda, StageTimes* times) {
  switch (backend) {
    case Backend::Dense: return solve_dense(H, lambda, times);
    case Backend::Schur1: return solve_schur_one_stage(H, lambda, times);
    case Backend::Schur2: return solve_schur_two_stage(H, lambda, times);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown backend");
}

Problem apply_update(const Problem& theta, const Eigen::VectorXd& delta) {
  const std::size_t nc = theta.cameras.size();
  const std::size_t np = theta.points.size();
  if (delta.size() != static_cast<Eigen::Index>(12 * nc + 3 * np)) {
    throw Error(ErrorCode::DimensionMismatch, "update has the wrong dimension");
  }
  const Eigen::Index gs0 = static_cast<Eigen::Index>(6 * nc);
  const Eigen::Index p0 = static_cast<Eigen::Index>(12 * nc);
  Problem out = theta;
  for (std::size_t c = 0; c < nc; ++c) {
    const Eigen::Index r = static_cast<Eigen::Index>(6 * c);
    RsCamera& cam = out.cameras[c];
    cam.omega += delta.segment<3>(r);
    cam.d += delta.segment<3>(r + 3);
    set_rotation(cam, so3_exp(delta.segment<3>(gs0 + r)) * cam.R0);
    cam.t0 += delta.segment<3>(gs0 + r + 3);
  }
  for (std::size_t i = 0; i < np; ++i) {
    out.points[i] += delta.segment<3>(p0 + 3 * static_cast<Eigen::Index>(i));
  }
  return out;
}

namespace {

double try_cost(const Problem& p, Method method) {
  try {
    return evaluate_cost(p, method, DegeneracyPolicy::Clamp);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

SolveReport optimize(const Problem& problem, const SolverConfig& config) {
  const Method method = config.method;
  Problem theta = problem;
  if (method == Method::Dm) {
    for (auto& cam : theta.cameras) cam = to_direct_convention(cam);
  }

  SolveReport report;
  const double initial = try_cost(theta, method);
  if (!std::isfinite(initial)) {
    throw Error(ErrorCode::InitializationInfeasible, "initial cost is not finite");
  }
  double cost = initial;
  report.cost_trace.push_back(cost);
  double lambda = config.lm_initial_lambda;
  report.termination = Termination::MaxIterations;

  const double zero_cost = 0.5 * kResidualFloor * kResidualFloor * 2.0 *
                           static_cast<double>(theta.observations.size());
  bool done = cost <= zero_cost;
  if (done) report.termination = Termination::CostTolerance;
  while (!done && report.iterations < config.max_iterations) {
    auto t0 = Clock::now();
    const BlockHessian H = assemble(theta, method, nullptr, DegeneracyPolicy::Clamp);
    report.times.assembly += seconds_since(t0);
    if (H.gradient_inf_norm() < config.gradient_tolerance) {
      report.termination = Termination::GradientTolerance;
      break;
    }

    while (true) {
      Eigen::VectorXd delta;
      bool factored = true;
      try {
        delta = solve(config.backend, H, lambda, &report.times);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotPositiveDefinite) throw;
        factored = false;
      }
      double next = std::numeric_limits<double>::infinity();
      Problem candidate;
      if (factored && delta.allFinite()) {
        candidate = apply_update(theta, delta);
        next = try_cost(candidate, method);
      }
      const bool gauss_newton = lambda == 0.0;
      if (std::isfinite(next) && (next < cost || (gauss_newton && factored))) {
        const double decrease = (cost - next) / std::max(cost, std::numeric_limits<double>::min());
        theta = std::move(candidate);
        report.lambda_trace.push_back(lambda);
        cost = next;
        report.cost_trace.push_back(cost);
        ++report.iterations;
        if (!gauss_newton) lambda = std::max(lambda / 10.0, config.lm_min_lambda);
        if (decrease < config.cost_tolerance || cost <= zero_cost) {
          report.termination = Termination::CostTolerance;
          done = true;
        }
        break;
      }
      ++report.rejected_steps;
      if (std::isfinite(next) && std::abs(cost - next) <= config.cost_tolerance * cost) {
        report.termination = Termination::CostTolerance;
        done = true;
        break;
      }
      lambda = std::max(lambda * 10.0, config.lm_min_lambda);
      if (lambda > config.lm_max_lambda) {
        report.termination = Termination::LambdaOverflow;
        done = true;
        break;
      }
    }
  }

  if (method == Method::Dm) {
    for (auto& cam : theta.cameras) cam = from_direct_convention(cam);
  }
  report.solution = std::move(theta);
  return report;
}

}  // namespace rsba
