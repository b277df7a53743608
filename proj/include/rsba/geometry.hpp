#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <utility>

namespace rsba {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Rolling-shutter camera with constant-velocity instantaneous motion.
///
/// The pose at row `r` is ((I + [omega]x r) R0, t0 + d r). In the normalized
/// convention (the default everywhere in the library) r is the normalized row
/// coordinate (v - cy) / fy, so r = 0 at the optical-center row and omega, d
/// are per normalized-row unit. The direct convention used by the DM-RSBA
/// baseline measures r in pixel rows from the first image row instead; see
/// to_direct_convention().
struct RsCamera {
  Mat3 R0 = Mat3::Identity();
  Vec3 xi = Vec3::Zero();  // rotation vector of R0 when set through set_rotation()
  Vec3 t0 = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 d = Vec3::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

Mat3 skew(const Vec3& v);
Vec3 vee(const Mat3& m);

/// Rodrigues exponential. Uses Taylor coefficients below ||xi|| = 1e-8.
Mat3 so3_exp(const Vec3& xi);

/// Inverse of so3_exp on rotations with angle strictly below pi.
/// Throws AngleNearPi when the angle is within 1e-9 of pi.
Vec3 so3_log(const Mat3& R);

/// [X/Z, Y/Z]; throws DepthZero when |Z| < 1e-12.
Vec2 perspective_divide(const Vec3& p);

Vec2 normalize_measurement(const Vec2& m, const RsCamera& cam);
Vec2 denormalize_measurement(const Vec2& q, const RsCamera& cam);

struct RowPose {
  Mat3 R;  // first-order, not orthonormal
  Vec3 t;
};

/// ((I + [omega]x r) R0, t0 + d r), kept first order.
RowPose rs_pose_at_row(const RsCamera& cam, double r);

constexpr double kMinDepth = 1e-9;

struct Projection {
  Vec2 q;
  Vec3 pc;  // camera-frame point at the row used
};

/// Projection with the pose at row r. Throws CheiralityViolation when Zc <= 1e-9.
Projection project_rs_normalized(const RsCamera& cam, const Vec3& P, double r);

/// Global-shutter projection with the reference pose.
Projection project_gs(const RsCamera& cam, const Vec3& P);

struct DcProjection {
  Vec2 q;
  Vec3 pc;
  int iterations = 0;
  double last_step = 0.0;
};

constexpr int kDcMaxIterations = 50;
constexpr double kDcTolerance = 1e-12;

/// Camera-based projection: solves r* = Pi_y(R(r*) P + t(r*)) by fixed-point
/// iteration from the global-shutter row. Throws NoConvergence after 50
/// iterations and CheiralityViolation for points behind the camera.
DcProjection project_dc(const RsCamera& cam, const Vec3& P);

/// Pose at the first image row with velocities per pixel row. The rotation is
/// re-expressed with the exact exponential so that it stays in SO(3).
RsCamera to_direct_convention(const RsCamera& cam);
RsCamera from_direct_convention(const RsCamera& cam);

/// R0 = so3_exp(xi) with xi = so3_log(R). Keeping R0 an exact image of xi
/// makes the rotation-vector serialization lossless.
void set_rotation(RsCamera& cam, const Mat3& R);
void set_rotation_vector(RsCamera& cam, const Vec3& xi);

/// Projects a matrix onto SO(3) (nearest rotation in Frobenius norm).
Mat3 nearest_rotation(const Mat3& m);

}  // namespace rsba
