#include "rsba/geometry.hpp"

#include "rsba/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace rsba {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleNearPi: return "AngleNearPi";
    case ErrorCode::DepthZero: return "DepthZero";
    case ErrorCode::CheiralityViolation: return "CheiralityViolation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MissingPixelMeasurement: return "MissingPixelMeasurement";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InitializationInfeasible: return "InitializationInfeasible";
    case ErrorCode::GenerationFailure: return "GenerationFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroTranslation: return "ZeroTranslation";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat3 so3_exp(const Vec3& xi) {
  const double theta2 = xi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 K = skew(xi);
  double a;
  double b;
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * K + b * K * K;
}

Vec3 so3_log(const Mat3& R) {
  const Vec3 axis_sin = 0.5 * vee(R - R.transpose());  // sin(theta) * axis
  const double s = axis_sin.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (M_PI - theta < 1e-9) {
    throw Error(ErrorCode::AngleNearPi, "rotation angle within 1e-9 of pi");
  }
  if (theta < 1e-8) {
    return (1.0 + theta * theta / 6.0) * axis_sin;
  }
  if (theta > M_PI - 1e-3) {
    // Axis from the symmetric part: a a^T = ((R + R^T)/2 - c I) / (1 - c).
    const Mat3 B = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
    Eigen::Index k;
    B.diagonal().maxCoeff(&k);
    Vec3 a = B.col(k) / std::sqrt(B(k, k));
    if (a.dot(axis_sin) < 0.0) a = -a;
    return theta * a;
  }
  return theta / s * axis_sin;
}

Vec2 perspective_divide(const Vec3& p) {
  if (std::abs(p.z()) < 1e-12) {
    throw Error(ErrorCode::DepthZero, "perspective division with |Z| < 1e-12");
  }
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

Vec2 normalize_measurement(const Vec2& m, const RsCamera& cam) {
  return Vec2((m.x() - cam.cx) / cam.fx, (m.y() - cam.cy) / cam.fy);
}

Vec2 denormalize_measurement(const Vec2& q, const RsCamera& cam) {
  return Vec2(cam.fx * q.x() + cam.cx, cam.fy * q.y() + cam.cy);
}

RowPose rs_pose_at_row(const RsCamera& cam, double r) {
  return {(Mat3::Identity() + r * skew(cam.omega)) * cam.R0, cam.t0 + r * cam.d};
}

namespace {

Projection checked_projection(const Vec3& pc) {
  if (!(pc.z() > kMinDepth)) {
    throw Error(ErrorCode::CheiralityViolation, "point depth " + std::to_string(pc.z()) + " <= 1e-9");
  }
  return {Vec2(pc.x() / pc.z(), pc.y() / pc.z()), pc};
}

}  // namespace

Projection project_rs_normalized(const RsCamera& cam, const Vec3& P, double r) {
  // (I + r[w]x) R0 P + t0 + r d, without forming the row rotation.
  const Vec3 rp = cam.R0 * P;
  return checked_projection(rp + r * cam.omega.cross(rp) + cam.t0 + r * cam.d);
}

Projection project_gs(const RsCamera& cam, const Vec3& P) {
  return checked_projection(cam.R0 * P + cam.t0);
}

DcProjection project_dc(const RsCamera& cam, const Vec3& P) {
  const Vec3 pg = cam.R0 * P + cam.t0;
  // Pc(r) = pg + r * delta is affine in r.
  const Vec3 delta = cam.omega.cross(cam.R0 * P) + cam.d;
  Projection proj = checked_projection(pg);
  double r = proj.q.y();
  DcProjection out;
  for (int k = 1; k <= kDcMaxIterations; ++k) {
    proj = checked_projection(pg + r * delta);
    const double next = proj.q.y();
    const double step = std::abs(next - r);
    r = next;
    out.iterations = k;
    out.last_step = step;
    if (step < kDcTolerance) {
      // One more evaluation so that q and pc correspond to the returned row.
      proj = checked_projection(pg + r * delta);
      out.q = Vec2(proj.q.x(), r);
      out.pc = proj.pc;
      return out;
    }
  }
  throw Error(ErrorCode::NoConvergence, "camera-based row did not converge in 50 iterations");
}

void set_rotation_vector(RsCamera& cam, const Vec3& xi) {
  cam.xi = xi;
  cam.R0 = so3_exp(xi);
}

void set_rotation(RsCamera& cam, const Mat3& R) {
  try {
    set_rotation_vector(cam, so3_log(R));
  } catch (const Error&) {
    cam.R0 = R;
    cam.xi = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  }
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

RsCamera to_direct_convention(const RsCamera& cam) {
  const double r_top = -cam.cy / cam.fy;  // normalized row of pixel row 0
  RsCamera out = cam;
  set_rotation(out, so3_exp(r_top * cam.omega) * cam.R0);
  out.t0 = cam.t0 + r_top * cam.d;
  out.omega = cam.omega / cam.fy;
  out.d = cam.d / cam.fy;
  return out;
}

RsCamera from_direct_convention(const RsCamera& cam) {
  const double r_top = -cam.cy / cam.fy;
  RsCamera out = cam;
  out.omega = cam.omega * cam.fy;
  out.d = cam.d * cam.fy;
  set_rotation(out, so3_exp(-r_top * out.omega) * cam.R0);
  out.t0 = cam.t0 - r_top * out.d;
  return out;
}

}  // namespace rsba
