#pragma once

#include "rsba/jacobians.hpp"
#include "rsba/problem.hpp"
#include "rsba/residuals.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace rsba {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Per-camera block layout: rs = [omega, d], gs = [xi, t].
/// Dense ordering of the stacked parameter vector: [rs of every camera; gs of every camera; points].
struct BlockHessian {
  struct Edge {
    std::size_t cam = 0;
    std::size_t point = 0;
    Mat63 T = Mat63::Zero();  // rs-point
    Mat63 W = Mat63::Zero();  // gs-point
  };

  std::vector<Mat6> R_blocks;
  std::vector<Mat6> U_blocks;
  std::vector<Mat6> S_blocks;  // rs (rows) x gs (cols)
  std::vector<Mat3> V_blocks;
  std::vector<Edge> edges;     // one per observation, in observation order
  Eigen::VectorXd grad_t;      // rs segment, 6 per camera
  Eigen::VectorXd grad_u;      // gs segment, 6 per camera
  Eigen::VectorXd grad_v;      // point segment, 3 per point

  std::size_t n_cameras() const { return R_blocks.size(); }
  std::size_t n_points() const { return V_blocks.size(); }
  std::size_t dimension() const { return 12 * n_cameras() + 3 * n_points(); }

  Eigen::VectorXd gradient() const;
  double gradient_inf_norm() const;
};

enum class Backend { Dense, Schur1, Schur2 };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);

struct SolverConfig {
  Method method = Method::Nw;
  Backend backend = Backend::Schur2;
  int max_iterations = 50;
  double cost_tolerance = 1e-10;
  double gradient_tolerance = 1e-10;
  double lm_initial_lambda = 1e-4;
  double lm_min_lambda = 1e-9;
  double lm_max_lambda = 1e16;
};

struct StageTimes {
  double assembly = 0.0;
  double schur_construction = 0.0;
  double reduced_solve = 0.0;
  double back_substitution = 0.0;

  double total() const { return assembly + schur_construction + reduced_solve + back_substitution; }
  StageTimes& operator+=(const StageTimes& o);
};

enum class Termination {
  MaxIterations,
  CostTolerance,
  GradientTolerance,
  LambdaOverflow,
};

std::string_view to_string(Termination reason);

struct SolveReport {
  std::vector<double> cost_trace;   // initial cost, then one entry per accepted step
  std::vector<double> lambda_trace;  // damping used for each accepted step
  int iterations = 0;
  int rejected_steps = 0;
  Termination termination = Termination::MaxIterations;
  Problem solution;
  StageTimes times;

  double initial_cost() const { return cost_trace.front(); }
  double final_cost() const { return cost_trace.back(); }
};

/// Builds J^T J and J^T e block-wise from per-observation linearizations.
/// Gsba gets identity R blocks and zero S, T and grad_t, so its velocity step is zero.
/// Throws CheiralityViolation naming the offending observation.
BlockHessian assemble(const Problem& problem, Method method, double* cost,
                      DegeneracyPolicy policy = DegeneracyPolicy::Clamp);

/// 0.5 * sum of squared residuals. Dm expects cameras in the direct convention.
double evaluate_cost(const Problem& problem, Method method,
                     DegeneracyPolicy policy = DegeneracyPolicy::Clamp);

/// Dense symmetric matrix in the stacked ordering (undamped).
Eigen::MatrixXd densify(const BlockHessian& H);

/// Adds lambda * max(H_ii, 1e-12) to every diagonal entry of R, U and V.
BlockHessian damped(const BlockHessian& H, double lambda);

/// Each solver returns delta in the dense ordering for (H + lambda D) delta = -g.
/// Throws NotPositiveDefinite when a factorization fails.
Eigen::VectorXd solve_dense(const BlockHessian& H, double lambda, StageTimes* times = nullptr);
Eigen::VectorXd solve_schur_one_stage(const BlockHessian& H, double lambda,
                                      StageTimes* times = nullptr);
Eigen::VectorXd solve_schur_two_stage(const BlockHessian& H, double lambda,
                                      StageTimes* times = nullptr);
Eigen::VectorXd solve(Backend backend, const BlockHessian& H, double lambda,
                      StageTimes* times = nullptr);

/// R0 <- Exp(dxi) R0, t0 += dt, omega += domega, d += dd, P += dP.
Problem apply_update(const Problem& theta, const Eigen::VectorXd& delta);

/// RMS residual treated as zero by optimize.
constexpr double kResidualFloor = 1e-10;

/// Levenberg-Marquardt loop. Stops with CostTolerance once the RMS residual is
/// below kResidualFloor. Dm problems are converted to the direct convention
/// internally; the returned solution is always in the normalized convention.
/// Throws InitializationInfeasible when the initial cost is not finite.
SolveReport optimize(const Problem& problem, const SolverConfig& config);

}  // namespace rsba
