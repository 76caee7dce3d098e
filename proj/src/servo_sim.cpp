#include <cmath>
#include <random>

#include "specvs/errors.hpp"
#include "specvs/servo.hpp"

namespace specvs {

SimulatedArm SimulatedArm::make_default() {
  // Generic anthropomorphic 7R chain, desk scale: shoulder (z-y-z),
  // elbow (y), wrist (z-y-z), links along +z. Limits are symmetric.
  SimulatedArm arm;
  auto add = [&arm](const Eigen::Vector3d& offset, const Eigen::Vector3d& axis,
                    double limit) {
    Joint j;
    j.offset = offset;
    j.axis = axis;
    j.q_min = -limit;
    j.q_max = limit;
    arm.joints.push_back(j);
  };
  add({0.0, 0.0, 0.16}, Eigen::Vector3d::UnitZ(), 2.96);
  add({0.0, 0.0, 0.18}, Eigen::Vector3d::UnitY(), 2.50);
  add({0.0, 0.0, 0.18}, Eigen::Vector3d::UnitZ(), 2.96);
  add({0.0, 0.0, 0.22}, Eigen::Vector3d::UnitY(), 2.50);
  add({0.0, 0.0, 0.18}, Eigen::Vector3d::UnitZ(), 2.96);
  add({0.0, 0.0, 0.20}, Eigen::Vector3d::UnitY(), 2.50);
  add({0.0, 0.0, 0.08}, Eigen::Vector3d::UnitZ(), 3.05);
  arm.q = Eigen::VectorXd::Zero(7);
  arm.camera_mount.translation = Eigen::Vector3d(0.0, 0.05, 0.06);
  return arm;
}

RigidTransform SimulatedArm::camera_pose() const {
  RigidTransform pose;
  for (int i = 0; i < joint_count(); ++i) {
    RigidTransform link;
    link.translation = joints[i].offset;
    link.rotation = exp_so3(q[i] * joints[i].axis);
    pose = compose(pose, link);
  }
  return compose(pose, camera_mount);
}

Eigen::MatrixXd SimulatedArm::camera_jacobian() const {
  const int n = joint_count();
  Eigen::MatrixXd jac(6, n);
  // World-frame joint origins and axes along the chain.
  RigidTransform chain;
  std::vector<Eigen::Vector3d> origins(n), axes(n);
  for (int i = 0; i < n; ++i) {
    chain.translation += chain.rotation * joints[i].offset;
    origins[i] = chain.translation;
    axes[i] = chain.rotation * joints[i].axis;
    chain.rotation = chain.rotation * exp_so3(q[i] * joints[i].axis);
  }
  const RigidTransform cam = camera_pose();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d w = axes[i];
    const Eigen::Vector3d v = w.cross(cam.translation - origins[i]);
    jac.block<3, 1>(0, i) = cam.rotation.transpose() * v;
    jac.block<3, 1>(3, i) = cam.rotation.transpose() * w;
  }
  return jac;
}

bool SimulatedArm::solve_ik(const RigidTransform& camera_target, int max_iters,
                            double tol) {
  for (int it = 0; it < max_iters; ++it) {
    const RigidTransform cur = camera_pose();
    const RigidTransform err = compose(inverse(cur), camera_target);
    Eigen::Matrix<double, 6, 1> twist;
    twist.head<3>() = err.translation;
    twist.tail<3>() = log_so3(err.rotation);
    if (twist.norm() < tol) {
      return true;
    }
    q += jacobian_pinv(camera_jacobian()) * (0.5 * twist);
    // Keep the iterate inside the joint range so the solution is usable.
    for (int i = 0; i < joint_count(); ++i) {
      q[i] = std::clamp(q[i], joints[i].q_min + 0.05, joints[i].q_max - 0.05);
    }
  }
  return false;
}

namespace {

// Back-face culling from the camera position, expressed in the camera frame.
// Points outside the working volume (when given) are dropped, like a real
// sensor's bounded field of view.
PointCloud capture_view(const PointCloud& scene, const RigidTransform& camera_pose,
                        double noise_sigma, std::mt19937_64& rng,
                        const GridSpec* frustum = nullptr) {
  const PointCloud visible = partial_view(scene, camera_pose.translation);
  PointCloud out;
  out.points.reserve(visible.size());
  out.normals.reserve(visible.size());
  const Eigen::Matrix3d rt = camera_pose.rotation.transpose();
  std::normal_distribution<double> gauss(0.0, noise_sigma);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    Eigen::Vector3d p = rt * (visible.points[i] - camera_pose.translation);
    if (noise_sigma > 0.0) {
      p += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }
    if (frustum != nullptr) {
      const Eigen::Vector3d lo = frustum->origin;
      const Eigen::Vector3d hi = frustum->box_max();
      if ((p.array() < lo.array()).any() || (p.array() >= hi.array()).any()) {
        continue;
      }
    }
    out.points.push_back(p);
    out.normals.push_back(rt * visible.normals[i]);
  }
  return out;
}

}  // namespace

ServoSimResult run_servo_sim(const PointCloud& scene, const RigidTransform& goal_pose,
                             const RigidTransform& start_pose, SimulatedArm* arm,
                             const ControllerConfig& cfg, double noise_sigma,
                             std::uint64_t noise_seed) {
  cfg.validate();
  validate_cloud(scene);
  if (scene.empty()) {
    throw ValidationError("run_servo_sim: scene is empty");
  }
  std::mt19937_64 rng(noise_seed);

  ServoSimResult result;
  const PointCloud reference = capture_view(scene, goal_pose, noise_sigma, rng);
  if (reference.empty()) {
    result.status = ServoStatus::EmptyView;
    result.message = "sensor returned an empty view at the goal pose";
    return result;
  }

  // The lattice is camera-attached; pad it for the commanded displacement.
  const double displacement =
      (start_pose.translation - goal_pose.translation).norm() +
      0.5 * geodesic_angle(start_pose.rotation, goal_pose.rotation);
  const int pad = std::max(
      cfg.grid_pad_cells,
      static_cast<int>(std::ceil((displacement + 0.05) / cfg.resolution)));
  const GridSpec grid =
      fit_grid({&reference}, cfg.resolution, cfg.min_grid_dim, pad);
  const ReferenceFeatures ref = make_reference_features(reference, grid, cfg);

  RigidTransform pose = start_pose;
  if (arm != nullptr) {
    if (!arm->solve_ik(start_pose)) {
      throw ValidationError("run_servo_sim: start pose is not reachable");
    }
    pose = arm->camera_pose();
  }

  ControllerConfig step_cfg = cfg;
  step_cfg.polish_iters = 0;
  double den_t = -1.0, den_r = -1.0;
  int polish_remaining = -1;  // -1 until the convergence rule fires

  for (int tick = 1; tick <= cfg.max_iters + std::max(0, cfg.polish_iters);
       ++tick) {
    const PointCloud obs = capture_view(scene, pose, noise_sigma, rng, &grid);
    if (obs.empty()) {
      result.status = ServoStatus::EmptyView;
      result.message = "sensor returned an empty view at tick " + std::to_string(tick);
      break;
    }

    ServoState fresh;  // identity estimate: measure the raw residual
    ServoState s;
    try {
      s = servo_step(fresh, ref, obs, step_cfg);
    } catch (const ValidationError& e) {
      result.status = ServoStatus::Diverged;
      result.message = std::string("tick ") + std::to_string(tick) + ": " + e.what();
      break;
    }

    ServoSimRecord rec;
    rec.tick = tick;
    rec.jt = s.jt;
    rec.jr = s.jr;
    rec.grad_t_norm = s.grad_t.norm();
    rec.grad_cr_norm = s.grad_r.norm();
    rec.camera_pose = pose;
    result.trajectory.push_back(rec);
    result.ticks = tick;

    // Convergence per the combined-gradient rule, same normalization as the
    // registration loop. After it fires, a short refinement phase keeps
    // servoing on the raw rotation gradient with fractional peaks, which
    // trims the terminal rotation residual the damped channel cannot see.
    if (polish_remaining < 0) {
      bool reached;
      if (!cfg.iter1_normalized_norms) {
        reached = rec.grad_t_norm + rec.grad_cr_norm < cfg.epsilon_g;
      } else {
        if (den_t < 0.0) {
          den_t = std::max(rec.grad_t_norm, cfg.resolution);
          den_r = std::max(rec.grad_cr_norm, 1e-6);
        }
        reached = rec.grad_t_norm / den_t + rec.grad_cr_norm / den_r < cfg.epsilon_g;
      }
      if (reached) {
        result.converged = true;
        result.status = ServoStatus::Converged;
        if (cfg.polish_iters <= 0 || tick == 1) break;
        polish_remaining = cfg.polish_iters;
        step_cfg.subvoxel_peak = true;
        step_cfg.gradient_degree_damping = 0.0;
        step_cfg.damping_anneal_iters = 0;
        step_cfg.lambda_t = cfg.polish_lambda_t;
        step_cfg.lambda_r = cfg.polish_lambda_r;
      }
    } else if (--polish_remaining <= 0) {
      break;
    }

    // The one-step state from the identity is exactly the camera-frame
    // correction transform; s.h.translation already folds the rotation
    // about the reference centroid into a plain twist.
    const Eigen::Vector3d v =
        (Eigen::Matrix3d::Identity() - s.h.rotation) * ref.center + s.h.translation;
    if (arm == nullptr) {
      RigidTransform delta;
      delta.rotation = s.h.rotation;
      delta.translation = v;
      pose = compose(pose, delta);
    } else {
      Eigen::Matrix<double, 6, 1> twist;
      twist.head<3>() = v;
      twist.tail<3>() = cfg.lambda_r * s.grad_r;
      const Eigen::VectorXd qdot = jacobian_pinv(arm->camera_jacobian()) * twist;
      arm->q += qdot;
      for (int i = 0; i < arm->joint_count(); ++i) {
        if (arm->q[i] < arm->joints[i].q_min || arm->q[i] > arm->joints[i].q_max) {
          result.status = ServoStatus::JointLimit;
          result.message = "joint " + std::to_string(i) + " limit violated at tick " +
                           std::to_string(tick);
          result.final_pose = arm->camera_pose();
          return result;
        }
      }
      pose = arm->camera_pose();
    }
  }

  if (!result.converged && result.status == ServoStatus::MaxIterations) {
    result.message = "convergence threshold not reached in " +
                     std::to_string(cfg.max_iters) + " ticks";
  }
  result.final_pose = pose;
  result.pose_error_m = (pose.translation - goal_pose.translation).norm();
  result.pose_error_rad = geodesic_angle(pose.rotation, goal_pose.rotation);
  return result;
}

}  // namespace specvs
