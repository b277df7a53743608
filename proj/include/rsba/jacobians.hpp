#pragma once

#include "rsba/geometry.hpp"
#include "rsba/problem.hpp"
#include "rsba/residuals.hpp"

#include <array>
#include <functional>
#include <string_view>

namespace rsba {

/// Derivatives of one observation's residual with respect to its 15 parameters.
/// Rotation derivatives are taken with the left perturbation R0 <- Exp(dxi) R0.
struct ObservationJacobian {
  Mat23 J_p = Mat23::Zero();
  Mat23 J_xi = Mat23::Zero();
  Mat23 J_t = Mat23::Zero();
  Mat23 J_omega = Mat23::Zero();
  Mat23 J_d = Mat23::Zero();

  static constexpr std::array<std::string_view, 5> kBlockNames{"P", "xi", "t", "omega", "d"};

  Mat23& block(int k);
  const Mat23& block(int k) const;
};

/// How the NW residual treats |C[1][1]| < 1e-12: throw (standalone API) or
/// clamp to +-1e-12 (inside the solver).
enum class DegeneracyPolicy { Throw, Clamp };

/// Analytical Jacobian of the whitened NW residual.
ObservationJacobian jac_observation(const RsCamera& cam, const Vec3& P, const Observation& obs,
                                    const NoisePrior& prior,
                                    DegeneracyPolicy policy = DegeneracyPolicy::Throw);

using ResidualFunction = std::function<Vec2(const RsCamera&, const Vec3&)>;

/// Central differences of `residual` over all 15 coordinates with step h.
ObservationJacobian jac_finite_difference(const ResidualFunction& residual, const RsCamera& cam,
                                          const Vec3& P, double h);

/// Central differences of error_nw.
ObservationJacobian jac_finite_difference(const RsCamera& cam, const Vec3& P,
                                          const Observation& obs, const NoisePrior& prior,
                                          double h);

struct Linearization {
  Vec2 residual = Vec2::Zero();
  ObservationJacobian jacobian;
};

/// Residual of any variant. For Dm the camera is expected in the direct convention.
Vec2 evaluate_residual(Method method, const RsCamera& cam, const Vec3& P, const Observation& obs,
                       const NoisePrior& prior, DegeneracyPolicy policy = DegeneracyPolicy::Throw);

/// Residual and analytical Jacobian of any variant. Gsba leaves the velocity
/// blocks at zero.
Linearization linearize(Method method, const RsCamera& cam, const Vec3& P, const Observation& obs,
                        const NoisePrior& prior, DegeneracyPolicy policy = DegeneracyPolicy::Throw);

}  // namespace rsba
