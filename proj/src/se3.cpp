#include "specvs/se3.hpp"

#include <cmath>

#include "specvs/errors.hpp"

namespace specvs {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

double wrap_2pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}
}  // namespace

RigidTransform compose(const RigidTransform& h2, const RigidTransform& h1) {
  RigidTransform out;
  out.rotation = h2.rotation * h1.rotation;
  out.translation = h2.rotation * h1.translation + h2.translation;
  return out;
}

RigidTransform inverse(const RigidTransform& h) {
  RigidTransform out;
  out.rotation = h.rotation.transpose();
  out.translation = -(out.rotation * h.translation);
  return out;
}

Eigen::Matrix3d hat(const Eigen::Vector3d& eta) {
  Eigen::Matrix3d s;
  s << 0.0, -eta.z(), eta.y(),
       eta.z(), 0.0, -eta.x(),
       -eta.y(), eta.x(), 0.0;
  return s;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  const Eigen::Matrix3d s = hat(omega);
  if (angle < 1e-10) {
    return Eigen::Matrix3d::Identity() + s + 0.5 * s * s;
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Eigen::Matrix3d::Identity() + a * s + b * s * s;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double angle = std::acos(c);
  if (angle < 1e-10) {
    // First-order: R ~ I + hat(w).
    return 0.5 * Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0),
                                 r(1, 0) - r(0, 1));
  }
  if (angle > M_PI - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from R + I.
    Eigen::Matrix3d q = 0.5 * (r + Eigen::Matrix3d::Identity());
    int k = 0;
    q.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = q.col(k) / std::sqrt(q(k, k));
    return angle * axis.normalized();
  }
  Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return (angle / (2.0 * std::sin(angle))) * w;
}

Eigen::Matrix3d zyz_to_matrix(const EulerZyz& e) {
  return exp_so3(e.alpha * Eigen::Vector3d::UnitZ()) *
         exp_so3(e.beta * Eigen::Vector3d::UnitY()) *
         exp_so3(e.gamma * Eigen::Vector3d::UnitZ());
}

EulerZyz matrix_to_zyz(const Eigen::Matrix3d& r) {
  if (!is_rotation(r, 1e-6)) {
    throw ValidationError("matrix_to_zyz: input is not a rotation matrix");
  }
  EulerZyz e;
  const double sb = std::hypot(r(0, 2), r(1, 2));
  e.beta = std::atan2(sb, r(2, 2));
  if (sb > 1e-9) {
    e.alpha = wrap_2pi(std::atan2(r(1, 2), r(0, 2)));
    e.gamma = wrap_2pi(std::atan2(r(2, 1), -r(2, 0)));
  } else if (r(2, 2) > 0.0) {
    // beta = 0: R = Rz(alpha + gamma); convention gamma = 0.
    e.beta = 0.0;
    e.alpha = wrap_2pi(std::atan2(r(1, 0), r(0, 0)));
    e.gamma = 0.0;
  } else {
    // beta = pi: R = Rz(alpha - gamma) * Ry(pi); convention gamma = 0.
    e.beta = M_PI;
    e.alpha = wrap_2pi(std::atan2(-r(1, 0), -r(0, 0)));
    e.gamma = 0.0;
  }
  return e;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  return ortho <= tol && r.determinant() > 0.0;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

double geodesic_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(0.5 * ((a.transpose() * b).trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

Eigen::Vector4d quaternion_wxyz(const Eigen::Matrix3d& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0) {
    q.coeffs() *= -1.0;
  }
  return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
}

}  // namespace specvs
