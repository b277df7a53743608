#include "rsba/residuals.hpp"

#include "rsba/error.hpp"

#include <cmath>
#include <string>

namespace rsba {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Gsba: return "gsba";
    case Method::Dm: return "dm";
    case Method::Nm: return "nm";
    case Method::Nw: return "nw";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "gsba") return Method::Gsba;
  if (name == "dm") return Method::Dm;
  if (name == "nm") return Method::Nm;
  if (name == "nw") return Method::Nw;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

Observation make_observation(std::size_t cam_id, std::size_t point_id, const Vec2& m,
                             const RsCamera& cam) {
  Observation obs;
  obs.cam_id = cam_id;
  obs.point_id = point_id;
  obs.m = m;
  obs.q = normalize_measurement(m, cam);
  return obs;
}

Vec2 error_gs(const RsCamera& cam, const Vec3& P, const Observation& obs) {
  return obs.q - project_gs(cam, P).q;
}

Vec2 error_nm(const RsCamera& cam, const Vec3& P, const Observation& obs) {
  return obs.q - project_rs_normalized(cam, P, obs.q.y()).q;
}

Vec2 error_dm(const RsCamera& cam, const Vec3& P, const Observation& obs) {
  if (!obs.m) {
    throw Error(ErrorCode::MissingPixelMeasurement, "DM residual needs the pixel measurement");
  }
  const Vec2& m = *obs.m;
  const Projection proj = project_rs_normalized(cam, P, m.y());
  return m - Vec2(cam.fx * proj.q.x() + cam.cx, cam.fy * proj.q.y() + cam.cy);
}

Mat23 projection_derivative(const Vec3& pc) {
  const double iz = 1.0 / pc.z();
  Mat23 g;
  g << iz, 0.0, -pc.x() * iz * iz,
       0.0, iz, -pc.y() * iz * iz;
  return g;
}

WeightContext weight_C(const RsCamera& cam, const Vec3& P, double r) {
  const Vec3 rp = cam.R0 * P;
  const Projection proj = project_rs_normalized(cam, P, r);
  const Vec3 delta = cam.omega.cross(rp) + cam.d;
  const Vec2 gd = projection_derivative(proj.pc) * delta;
  WeightContext ctx;
  ctx.C << 1.0, -gd.x(),
           0.0, 1.0 - gd.y();
  ctx.W = weight_W(cam);
  ctx.pc = proj.pc;
  return ctx;
}

Mat2 weight_W(const RsCamera& cam) {
  Mat2 W = Mat2::Zero();
  W(0, 0) = 1.0 / cam.fx;
  W(1, 1) = 1.0 / cam.fy;
  return W;
}

namespace {

void require_invertible(const Mat2& C) {
  if (std::abs(C(1, 1)) < kDegenerateThreshold) {
    throw Error(ErrorCode::DegenerateCovariance,
                "C[1][1] = " + std::to_string(C(1, 1)) + " (planar degeneracy)");
  }
}

}  // namespace

Mat2 residual_covariance(const Mat2& C, const Mat2& W, const Mat2& Sigma) {
  require_invertible(C);
  const Mat2 S = C * W * Sigma * W.transpose() * C.transpose();
  return 0.5 * (S + S.transpose());
}

Mat2 inverse_sqrt_factor(const Mat2& Sigma) {
  // Sigma^-1 = L L^T  =>  F = L^T satisfies F^T F = Sigma^-1.
  const Mat2 info = Sigma.inverse();
  const double l00 = std::sqrt(info(0, 0));
  const double l10 = info(1, 0) / l00;
  const double l11 = std::sqrt(info(1, 1) - l10 * l10);
  Mat2 F;
  F << l00, l10,
       0.0, l11;
  return F;
}

Vec2 whiten(const Vec2& e, const Mat2& C, const Mat2& W, const Mat2& Sigma) {
  require_invertible(C);
  // C is upper triangular with unit leading entry.
  const double f2 = e.y() / C(1, 1);
  const Vec2 ce(e.x() - C(0, 1) * f2, f2);
  const Vec2 we(ce.x() / W(0, 0), ce.y() / W(1, 1));
  return inverse_sqrt_factor(Sigma) * we;
}

Vec2 error_nw(const RsCamera& cam, const Vec3& P, const Observation& obs, const NoisePrior& prior) {
  const Vec2 e = error_nm(cam, P, obs);
  const WeightContext ctx = weight_C(cam, P, obs.q.y());
  return whiten(e, ctx.C, ctx.W, prior.Sigma);
}

double clamp_c11(double c11) {
  if (std::abs(c11) >= kDegenerateThreshold) return c11;
  return c11 < 0.0 ? -kDegenerateThreshold : kDegenerateThreshold;
}

}  // namespace rsba
