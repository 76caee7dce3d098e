#pragma once

#include <Eigen/Dense>

namespace specvs {

/// ZYZ Euler angles: R = exp(alpha*hat(ez)) * exp(beta*hat(ey)) * exp(gamma*hat(ez)).
/// alpha, gamma in [0, 2*pi), beta in [0, pi]. At beta in {0, pi} the pair
/// (alpha, gamma) is degenerate; matrix_to_zyz resolves it with gamma = 0.
struct EulerZyz {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Rigid transform H = (R, T): p -> R*p + T, translation in meters.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  static RigidTransform identity() { return RigidTransform{}; }
};

/// compose(h2, h1): the transform that applies h1 first, then h2.
RigidTransform compose(const RigidTransform& h2, const RigidTransform& h1);
RigidTransform inverse(const RigidTransform& h);

/// Skew matrix S with S*v = eta x v.
Eigen::Matrix3d hat(const Eigen::Vector3d& eta);

/// Rodrigues exponential; exp_so3(0) = I.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega);

/// Inverse of exp_so3; returns axis*angle with angle in [0, pi].
Eigen::Vector3d log_so3(const Eigen::Matrix3d& r);

Eigen::Matrix3d zyz_to_matrix(const EulerZyz& e);
EulerZyz matrix_to_zyz(const Eigen::Matrix3d& r);

bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

/// Nearest rotation matrix in the Frobenius sense (SVD projection).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

/// Angle of a^T * b, the geodesic distance on SO(3), in radians.
double geodesic_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Unit quaternion (w, x, y, z) with w >= 0.
Eigen::Vector4d quaternion_wxyz(const Eigen::Matrix3d& r);

}  // namespace specvs
