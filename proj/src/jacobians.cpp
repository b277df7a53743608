#include "rsba/jacobians.hpp"

#include "rsba/error.hpp"

#include <cmath>
#include <string>

namespace rsba {

Mat23& ObservationJacobian::block(int k) {
  switch (k) {
    case 0: return J_p;
    case 1: return J_xi;
    case 2: return J_t;
    case 3: return J_omega;
    default: return J_d;
  }
}

const Mat23& ObservationJacobian::block(int k) const {
  return const_cast<ObservationJacobian*>(this)->block(k);
}

namespace {

using Mat33 = Mat3;

// dPc/dx and ddelta/dx for the five blocks, in the order P, xi, t, omega, d.
struct Chain {
  Mat33 dpc[5];
  Mat33 ddelta[5];
};

Chain camera_point_chain(const RsCamera& cam, const Vec3& rp, double r) {
  Chain c;
  const Mat33 Ow = skew(cam.omega);
  const Mat33 Q = skew(rp);
  const Mat33 A = Mat33::Identity() + r * Ow;
  c.dpc[0] = A * cam.R0;
  c.dpc[1] = -A * Q;
  c.dpc[2] = Mat33::Identity();
  c.dpc[3] = -r * Q;
  c.dpc[4] = r * Mat33::Identity();
  c.ddelta[0] = Ow * cam.R0;
  c.ddelta[1] = -Ow * Q;
  c.ddelta[2] = Mat33::Zero();
  c.ddelta[3] = -Q;
  c.ddelta[4] = Mat33::Identity();
  return c;
}

double guarded_c11(double c11, DegeneracyPolicy policy) {
  if (std::abs(c11) >= kDegenerateThreshold) return c11;
  if (policy == DegeneracyPolicy::Throw) {
    throw Error(ErrorCode::DegenerateCovariance,
                "C[1][1] = " + std::to_string(c11) + " (planar degeneracy)");
  }
  return clamp_c11(c11);
}

Linearization linearize_nw(const RsCamera& cam, const Vec3& P, const Observation& obs,
                           const NoisePrior& prior, DegeneracyPolicy policy, bool with_jacobian) {
  const double r = obs.q.y();
  const Vec3 rp = cam.R0 * P;
  const Projection proj = project_rs_normalized(cam, P, r);
  const Vec3& pc = proj.pc;
  const Vec2 e = obs.q - proj.q;
  const Mat23 gamma = projection_derivative(pc);
  const Vec3 delta = cam.omega.cross(rp) + cam.d;
  const Vec2 gd = gamma * delta;
  const double alpha = gd.x();
  const double c11 = guarded_c11(1.0 - gd.y(), policy);

  const double f2 = e.y() / c11;
  const Vec2 f(e.x() + alpha * f2, f2);
  const Mat2 F = inverse_sqrt_factor(prior.Sigma);
  const Vec2 scale(cam.fx, cam.fy);

  Linearization out;
  out.residual = F * f.cwiseProduct(scale);
  if (!with_jacobian) return out;

  const Chain ch = camera_point_chain(cam, rp, r);
  const double iz = 1.0 / pc.z();
  const double iz2 = iz * iz;
  const double iz3 = iz2 * iz;
  Mat33 H1 = Mat33::Zero();
  H1(0, 2) = H1(2, 0) = -iz2;
  H1(2, 2) = 2.0 * pc.x() * iz3;
  Mat33 H2 = Mat33::Zero();
  H2(1, 2) = H2(2, 1) = -iz2;
  H2(2, 2) = 2.0 * pc.y() * iz3;
  const Eigen::RowVector3d dH1 = delta.transpose() * H1;
  const Eigen::RowVector3d dH2 = delta.transpose() * H2;

  Mat2 Cinv;
  Cinv << 1.0, alpha / c11,
          0.0, 1.0 / c11;
  const double ic2 = 1.0 / (c11 * c11);
  const Mat2 FWi = F * scale.asDiagonal();

  for (int k = 0; k < 5; ++k) {
    const Mat23 de = -gamma * ch.dpc[k];
    // alpha = gamma_1 delta, beta = gamma_2 delta.
    const Eigen::RowVector3d da = gamma.row(0) * ch.ddelta[k] + dH1 * ch.dpc[k];
    const Eigen::RowVector3d db = gamma.row(1) * ch.ddelta[k] + dH2 * ch.dpc[k];
    Mat23 df = Cinv * de;
    df.row(0) += e.y() * (c11 * da + alpha * db) * ic2;
    df.row(1) += e.y() * db * ic2;
    out.jacobian.block(k) = FWi * df;
  }
  return out;
}

Linearization linearize_unweighted(Method method, const RsCamera& cam, const Vec3& P,
                                   const Observation& obs, bool with_jacobian) {
  Linearization out;
  double r = 0.0;
  Projection proj;
  Vec2 scale(1.0, 1.0);
  switch (method) {
    case Method::Gsba:
      proj = project_gs(cam, P);
      out.residual = obs.q - proj.q;
      break;
    case Method::Nm:
      r = obs.q.y();
      proj = project_rs_normalized(cam, P, r);
      out.residual = obs.q - proj.q;
      break;
    case Method::Dm:
      if (!obs.m) {
        throw Error(ErrorCode::MissingPixelMeasurement, "DM residual needs the pixel measurement");
      }
      r = obs.m->y();
      proj = project_rs_normalized(cam, P, r);
      scale = Vec2(cam.fx, cam.fy);
      out.residual = *obs.m - Vec2(cam.fx * proj.q.x() + cam.cx, cam.fy * proj.q.y() + cam.cy);
      break;
    case Method::Nw:
      break;
  }
  if (!with_jacobian) return out;

  const Mat23 g = -(scale.asDiagonal() * projection_derivative(proj.pc));
  const Vec3 rp = cam.R0 * P;
  if (method == Method::Gsba) {
    out.jacobian.J_p = g * cam.R0;
    out.jacobian.J_xi = -g * skew(rp);
    out.jacobian.J_t = g;
    return out;
  }
  const Chain ch = camera_point_chain(cam, rp, r);
  for (int k = 0; k < 5; ++k) out.jacobian.block(k) = g * ch.dpc[k];
  return out;
}

}  // namespace

ObservationJacobian jac_observation(const RsCamera& cam, const Vec3& P, const Observation& obs,
                                    const NoisePrior& prior, DegeneracyPolicy policy) {
  return linearize_nw(cam, P, obs, prior, policy, true).jacobian;
}

ObservationJacobian jac_finite_difference(const ResidualFunction& residual, const RsCamera& cam,
                                          const Vec3& P, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  ObservationJacobian J;
  const double inv = 0.5 / h;
  for (int i = 0; i < 3; ++i) {
    const Vec3 ei = Vec3::Unit(i);
    {
      J.J_p.col(i) = (residual(cam, P + h * ei) - residual(cam, P - h * ei)) * inv;
    }
    {
      RsCamera a = cam;
      RsCamera b = cam;
      a.R0 = so3_exp(h * ei) * cam.R0;
      b.R0 = so3_exp(-h * ei) * cam.R0;
      J.J_xi.col(i) = (residual(a, P) - residual(b, P)) * inv;
    }
    {
      RsCamera a = cam;
      RsCamera b = cam;
      a.t0 += h * ei;
      b.t0 -= h * ei;
      J.J_t.col(i) = (residual(a, P) - residual(b, P)) * inv;
    }
    {
      RsCamera a = cam;
      RsCamera b = cam;
      a.omega += h * ei;
      b.omega -= h * ei;
      J.J_omega.col(i) = (residual(a, P) - residual(b, P)) * inv;
    }
    {
      RsCamera a = cam;
      RsCamera b = cam;
      a.d += h * ei;
      b.d -= h * ei;
      J.J_d.col(i) = (residual(a, P) - residual(b, P)) * inv;
    }
  }
  return J;
}

ObservationJacobian jac_finite_difference(const RsCamera& cam, const Vec3& P,
                                          const Observation& obs, const NoisePrior& prior,
                                          double h) {
  return jac_finite_difference(
      [&](const RsCamera& c, const Vec3& p) { return error_nw(c, p, obs, prior); }, cam, P, h);
}

Vec2 evaluate_residual(Method method, const RsCamera& cam, const Vec3& P, const Observation& obs,
                       const NoisePrior& prior, DegeneracyPolicy policy) {
  if (method == Method::Nw) return linearize_nw(cam, P, obs, prior, policy, false).residual;
  return linearize_unweighted(method, cam, P, obs, false).residual;
}

Linearization linearize(Method method, const RsCamera& cam, const Vec3& P, const Observation& obs,
                        const NoisePrior& prior, DegeneracyPolicy policy) {
  if (method == Method::Nw) return linearize_nw(cam, P, obs, prior, policy, true);
  return linearize_unweighted(method, cam, P, obs, true);
}

}  // namespace rsba
