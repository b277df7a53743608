#pragma once

#include "rsba/geometry.hpp"
#include "rsba/problem.hpp"

#include <string_view>

namespace rsba {

/// Reprojection-error variants.
///   Gsba: global shutter, q - Pi(R0 P + t0); velocities are not estimated.
///   Dm:   pixel residual with the direct (first-row, per-pixel-row) model.
///   Nm:   normalized measurement-based residual.
///   Nw:   Nm residual standardized by its own covariance C W Sigma W^T C^T.
enum class Method { Gsba, Dm, Nm, Nw };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// C, W and the camera-frame point they were evaluated at.
struct WeightContext {
  Mat2 C = Mat2::Identity();
  Mat2 W = Mat2::Identity();
  Vec3 pc = Vec3::Zero();
};

/// Residual-covariance threshold below which C[1][1] is treated as singular.
constexpr double kDegenerateThreshold = 1e-12;

Vec2 error_gs(const RsCamera& cam, const Vec3& P, const Observation& obs);
Vec2 error_nm(const RsCamera& cam, const Vec3& P, const Observation& obs);

/// `cam` must be in the direct convention (see to_direct_convention()).
Vec2 error_dm(const RsCamera& cam, const Vec3& P, const Observation& obs);

/// 2x3 derivative of the perspective division at pc.
Mat23 projection_derivative(const Vec3& pc);

/// C = I - gamma delta [0 1], evaluated at the row-r camera point.
WeightContext weight_C(const RsCamera& cam, const Vec3& P, double r);
Mat2 weight_W(const RsCamera& cam);

/// C W Sigma W^T C^T. Throws DegenerateCovariance when |C[1][1]| < 1e-12.
Mat2 residual_covariance(const Mat2& C, const Mat2& W, const Mat2& Sigma);

/// Upper factor F with F^T F = Sigma^-1 (transpose of the Cholesky factor of Sigma^-1).
Mat2 inverse_sqrt_factor(const Mat2& Sigma);

/// F W^-1 C^-1 e. Throws DegenerateCovariance when |C[1][1]| < 1e-12.
Vec2 whiten(const Vec2& e, const Mat2& C, const Mat2& W, const Mat2& Sigma);

Vec2 error_nw(const RsCamera& cam, const Vec3& P, const Observation& obs, const NoisePrior& prior);

/// C[1][1] with the solver guard: values closer to zero than 1e-12 are pushed
/// out to +-1e-12 so that whitening stays finite near degeneracy.
double clamp_c11(double c11);

}  // namespace rsba
