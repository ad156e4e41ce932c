#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "overlap_reg/correspondence.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// Weighted closed-form rigid alignment: returns the transform minimizing
//   sum_i w_i * |R * src_i + t - dst_i|^2
// via weighted centroids and the quaternion eigen-decomposition of the 4x4
// cross-covariance form. Zero-weight pairs are skipped outright, so removing
// them cannot change the result.
//
// Degenerate inputs fail loudly: fewer than 3 positive-weight pairs, or a
// weighted source configuration whose covariance is (near-)rank-deficient.
// If the cross-covariance vanishes exactly - every target collapsed onto one
// point - rotation is unobservable and the weighted centroid alignment with
// R = I is returned instead.
inline RigidTransform weighted_horn(const PointCloud& source, const PointCloud& target,
                                    const CorrespondenceSet& pairs) {
  double weight_sum = 0.0;
  Eigen::Vector3d src_centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_centroid = Eigen::Vector3d::Zero();
  std::size_t effective = 0;
  for (const Correspondence& p : pairs) {
    if (p.weight <= 0.0) continue;
    ++effective;
    weight_sum += p.weight;
    src_centroid += p.weight * source.points[p.source_index];
    dst_centroid += p.weight * target.points[p.target_index];
  }
  if (effective < 3) {
    fail(ErrorCode::degenerate_correspondences,
         "degenerate correspondences: " + std::to_string(effective) +
             " positively weighted pairs (need >= 3)");
  }
  src_centroid /= weight_sum;
  dst_centroid /= weight_sum;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d src_cov = Eigen::Matrix3d::Zero();
  for (const Correspondence& p : pairs) {
    if (p.weight <= 0.0) continue;
    const Eigen::Vector3d s = source.points[p.source_index] - src_centroid;
    const Eigen::Vector3d d = target.points[p.target_index] - dst_centroid;
    cross += p.weight * (s * d.transpose());
    src_cov += p.weight * (s * s.transpose());
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> cov_eig(src_cov);
  const double ev_min = cov_eig.eigenvalues()(0);
  const double ev_max = cov_eig.eigenvalues()(2);
  if (!(ev_min >= 1e-12 * ev_max) || !(ev_max > 0.0)) {
    fail(ErrorCode::rank_deficient, "rank-deficient weighted source configuration");
  }

  if (cross.isZero(0.0)) {
    // All targets coincide: rotation carries no information.
    return RigidTransform(Eigen::Matrix3d::Identity(), dst_centroid - src_centroid);
  }

  const double sxx = cross(0, 0), sxy = cross(0, 1), sxz = cross(0, 2);
  const double syx = cross(1, 0), syy = cross(1, 1), syz = cross(1, 2);
  const double szx = cross(2, 0), szy = cross(2, 1), szz = cross(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue
  Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
  quat.normalize();
  const Eigen::Matrix3d rotation = quat.toRotationMatrix();
  if (rotation.determinant() < 0.0) {
    fail(ErrorCode::reflection_detected, "rotation solve produced a reflection");
  }
  return RigidTransform(rotation, dst_centroid - rotation * src_centroid);
}

// Value of the weighted alignment objective at T.
inline double alignment_objective(const PointCloud& source, const PointCloud& target,
                                  const CorrespondenceSet& pairs, const RigidTransform& t) {
  double obj = 0.0;
  for (const Correspondence& p : pairs) {
    if (p.weight <= 0.0) continue;
    obj += p.weight *
           (t.apply(source.points[p.source_index]) - target.points[p.target_index]).squaredNorm();
  }
  return obj;
}

}  // namespace overlap_reg
