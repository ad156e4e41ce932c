#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "overlap_reg/error.hpp"
#include "overlap_reg/parallel.hpp"
#include "overlap_reg/point_cloud.hpp"

namespace overlap_reg {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

// Orthonormality drift of a candidate rotation: elementwise max of |R^T R - I|
// combined with |det(R) - 1|.
inline double rotation_drift(const Eigen::Matrix3d& r) {
  const Eigen::Matrix3d gram = r.transpose() * r - Eigen::Matrix3d::Identity();
  return std::max(gram.cwiseAbs().maxCoeff(), std::abs(r.determinant() - 1.0));
}

// Rigid body transform {R, t}: maps z to R*z + t. Construction enforces the
// rotation invariant: drift up to 1e-9 passes through untouched, drift up to
// 1e-3 is repaired by projecting onto SO(3) (polar factor via SVD), anything
// worse is rejected. This keeps long compose chains from decaying.
class RigidTransform {
 public:
  static constexpr double kAcceptDrift = 1e-9;
  static constexpr double kRepairDrift = 1e-3;

  RigidTransform()
      : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !translation_.allFinite()) {
      fail(ErrorCode::invalid_argument, "rigid transform: non-finite entries");
    }
    const double drift = rotation_drift(rotation_);
    if (drift <= kAcceptDrift) return;
    if (drift > kRepairDrift) {
      fail(ErrorCode::invalid_argument,
           "rigid transform: rotation drift " + std::to_string(drift) +
               " exceeds repair limit");
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d fixed = svd.matrixU() * svd.matrixV().transpose();
    if (fixed.determinant() < 0.0) {
      fail(ErrorCode::invalid_argument, "rigid transform: reflection, not a rotation");
    }
    rotation_ = fixed;
  }

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform from_angle_axis(double angle_rad, const Eigen::Vector3d& axis,
                                        const Eigen::Vector3d& translation =
                                            Eigen::Vector3d::Zero()) {
    return RigidTransform(
        Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(), translation);
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    return RigidTransform(rotation_.transpose(), -(rotation_.transpose() * translation_));
  }

  // Bit-exact equality; used by reproducibility checks.
  bool operator==(const RigidTransform& other) const {
    return (rotation_.array() == other.rotation_.array()).all() &&
           (translation_.array() == other.translation_.array()).all();
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// Composition: (a * b)(z) == a(b(z)).
inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation() * b.rotation(),
                        a.rotation() * b.translation() + a.translation());
}

// Applies T to every point; output order matches input order. Work is split
// across the worker budget for large clouds.
inline PointCloud transform_cloud(const RigidTransform& t, const PointCloud& c) {
  PointCloud out;
  out.points.resize(c.points.size());
  out.intensity = c.intensity;
  parallel_for(c.points.size(), [&](std::size_t i) { out.points[i] = t.apply(c.points[i]); });
  return out;
}

// Rotation/translation distance between two poses. Used both as the ICP/EOE
// convergence measure and as a coarse pose metric.
struct PoseError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
  bool gimbal_lock = false;  // set by pose_error_euler only

  bool within(double rot_deg, double trans_m) const {
    return rotation_deg <= rot_deg && translation_m <= trans_m;
  }
};

// Rotation angle (via the trace formula on Ra^T Rb) plus translation distance.
// Symmetric in its arguments for the rotation component.
inline PoseError transform_delta(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d rel = a.rotation().transpose() * b.rotation();
  const double cos_angle = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  PoseError e;
  e.rotation_deg = rad_to_deg(std::acos(cos_angle));
  e.translation_m = (a.translation() - b.translation()).norm();
  return e;
}

// Intrinsic Z-Y-X (yaw, pitch, roll) Euler angles of a rotation matrix,
// R = Rz(yaw) * Ry(pitch) * Rx(roll). Near pitch = +-pi/2 the standard
// degenerate branch fixes roll = 0; *gimbal reports when that branch ran.
inline Eigen::Vector3d euler_zyx(const Eigen::Matrix3d& r, bool* gimbal = nullptr) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const bool locked = std::abs(std::abs(pitch) - kPi / 2.0) < 1e-6;
  if (gimbal != nullptr) *gimbal = locked;
  if (locked) {
    return {std::atan2(-r(0, 1), r(1, 1)), pitch, 0.0};
  }
  return {std::atan2(r(1, 0), r(0, 0)), pitch, std::atan2(r(2, 1), r(2, 2))};
}

// The paper-style rotation metric: mean absolute Z-Y-X Euler angle of the
// relative rotation R_gt^T * R_est, in degrees; translation is the Euclidean
// distance between the translation vectors.
inline PoseError pose_error_euler(const RigidTransform& estimate, const RigidTransform& truth) {
  const Eigen::Matrix3d rel = truth.rotation().transpose() * estimate.rotation();
  PoseError e;
  const Eigen::Vector3d angles = euler_zyx(rel, &e.gimbal_lock);
  e.rotation_deg = rad_to_deg(angles.cwiseAbs().sum() / 3.0);
  e.translation_m = (estimate.translation() - truth.translation()).norm();
  return e;
}

}  // namespace overlap_reg
