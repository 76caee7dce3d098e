#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specvs/cloud.hpp"
#include "specvs/egi.hpp"
#include "specvs/fourier.hpp"
#include "specvs/se3.hpp"
#include "specvs/sphere_harmonics.hpp"
#include "specvs/voxel_grid.hpp"

namespace specvs {

struct ControllerConfig {
  double lambda_t = 0.5;   // translation gain, in (0, 1)
  double lambda_r = 0.1;   // rotation gain, in (0, 1)
  double epsilon_g = 1e-3; // combined gradient-norm tolerance
  int max_iters = 300;
  double resolution = 0.008;  // voxel edge, meters
  int bandwidth = 16;
  int l_max = -1;  // -1: bandwidth - 1

  /// Convergence test normalizes each channel norm by its iteration-1 value
  /// instead of the default raw sum. The raw sum is meaningful here
  /// because grad_r is an angular step in radians and grad_t is in meters.
  bool iter1_normalized_norms = false;
  /// Degree damping exponent p for the rotation ascent direction: degree l
  /// is weighted by (1 + l(l+1))^-p. The derivative blocks grow like l, so
  /// the raw gradient is dominated by the highest degrees and its basin of
  /// attraction shrinks to the top degree's lobe width; damping restores the
  /// low-degree basin without moving the stationary points of full-view
  /// correlation. 0 disables.
  double gradient_degree_damping = 0.5;
  /// Optional coarse-to-fine schedule: the damping exponent decays by
  /// exp(-k/tau) with the iteration count k, approaching the raw gradient.
  /// Useful when the final accuracy matters more than the capture range;
  /// must be slower than the damped phase's own convergence. 0 (default)
  /// keeps the exponent fixed.
  int damping_anneal_iters = 0;
  /// Partial-view handling for the rotation channel: the reference EGI is
  /// masked each iteration by the dilated support of the observed EGI before
  /// projection, so back-face culling affects both sides of the correlation
  /// equally instead of biasing the low degrees. Full views see an almost
  /// all-ones mask. Masking radius in grid nodes; 0 disables.
  int support_mask_dilation = 2;
  /// Fractional peak interpolation in phase correlation.
  bool subvoxel_peak = false;
  /// Extra refinement iterations after the convergence test fires, run with
  /// subvoxel_peak on and the polish gains below. 0 disables.
  int polish_iters = 40;
  double polish_lambda_t = 0.5;
  double polish_lambda_r = 0.4;

  VoxelMode voxel_mode = VoxelMode::Occupancy;
  int min_grid_dim = 64;
  int grid_pad_cells = 12;
  int reorthonormalize_every = 100;
  int divergence_window = 25;

  int effective_l_max() const { return l_max < 0 ? bandwidth - 1 : l_max; }
  void validate() const;
};

/// Spectral features of the reference cloud, computed once per alignment.
/// SH coefficients are normalized to unit L2 norm so the correlation is a
/// scale-free coefficient and the gradient an angular step, independent of
/// the point count.
struct ReferenceFeatures {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // rotation center
  VoxelGrid grid;
  SpectralVolume spectrum;
  Egi egi;
  ShCoefficients sh;
  std::shared_ptr<const RealShBasis> basis;
  /// Pseudo-inverse of the correlation curvature 4pi*<u_k F, u_n F>; maps
  /// the raw correlation gradient to an angular step so that near the
  /// optimum one update contracts the residual rotation by (1 - lambda_r).
  Eigen::Matrix3d gradient_metric_pinv = Eigen::Matrix3d::Identity();
};

ReferenceFeatures make_reference_features(const PointCloud& reference,
                                          const GridSpec& grid,
                                          const ControllerConfig& cfg);

/// Controller state. h maps the reference onto the target: rotation about
/// the reference centroid, then translation. Recorded costs are normalized:
/// jt is the grid mismatch cost divided by the cell count, jr the EGI
/// mismatch divided by the product of the histogram totals.
struct ServoState {
  RigidTransform h;
  int iteration = 0;
  Eigen::Vector3d grad_t = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad_r = Eigen::Vector3d::Zero();
  std::array<int, 3> peak_index = {0, 0, 0};
  double peak_value = 0.0;
  double jt = 0.0;
  double jr = 0.0;
};

/// One decoupled update: counter-transform the target by h^-1, measure the
/// translation gradient (phase correlation) and rotation gradient (correlation
/// form at identity), then compose the gains into h.
ServoState servo_step(const ServoState& state, const ReferenceFeatures& ref,
                      const PointCloud& target, const ControllerConfig& cfg);

struct IterationRecord {
  int iter = 0;
  double jt = 0.0;
  double jr = 0.0;
  double grad_t_norm = 0.0;
  double grad_cr_norm = 0.0;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector4d q = Eigen::Vector4d(1, 0, 0, 0);  // (w, x, y, z)
};

struct Trace {
  std::vector<IterationRecord> rows;
};

/// CSV with mandatory header
/// iter,Jt,Jr,grad_t_norm,grad_cr_norm,tx,ty,tz,qw,qx,qy,qz
void write_trace_csv(const Trace& trace, std::ostream& os);

enum class ServoStatus { Converged, MaxIterations, Diverged, EmptyView, JointLimit };

const char* to_string(ServoStatus status);

struct AlignmentResult {
  RigidTransform h;
  ServoStatus status = ServoStatus::MaxIterations;
  std::string message;
  bool converged = false;
  int iterations = 0;  // iteration at which the convergence test fired
  double final_jt = 0.0;
  double final_jr = 0.0;
  Eigen::Vector3d final_grad_t = Eigen::Vector3d::Zero();
  Eigen::Vector3d final_grad_r = Eigen::Vector3d::Zero();
  std::array<int, 3> final_peak_index = {0, 0, 0};
  Trace trace;
  GridSpec grid;
  double ms_per_iteration = 0.0;
};

/// Iterates servo_step from the identity until the combined gradient norm
/// drops below epsilon_g or max_iters is reached, then optionally polishes.
AlignmentResult run_alignment(const PointCloud& reference, const PointCloud& target,
                              const ControllerConfig& cfg);

/// Moore-Penrose pseudo-inverse; singular values below 1e-8 * sigma_max are
/// treated as zero.
Eigen::MatrixXd jacobian_pinv(const Eigen::MatrixXd& j);

/// Fixed 7-revolute-joint chain with a camera on the flange. Joint offsets
/// and axes are documented constants; kinematics only, no dynamics.
struct SimulatedArm {
  struct Joint {
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();  // link translation before the joint
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    double q_min = -2.96;
    double q_max = 2.96;
  };
  std::vector<Joint> joints;
  Eigen::VectorXd q;
  RigidTransform camera_mount;

  static SimulatedArm make_default();

  int joint_count() const { return static_cast<int>(joints.size()); }
  RigidTransform camera_pose() const;
  /// 6 x n Jacobian mapping joint rates to the camera twist (v, w) expressed
  /// in the camera frame.
  Eigen::MatrixXd camera_jacobian() const;
  /// Damped least-squares placement of the camera at the requested pose.
  bool solve_ik(const RigidTransform& camera_target, int max_iters = 800,
                double tol = 1e-10);
};

struct ServoSimRecord {
  int tick = 0;
  double jt = 0.0;
  double jr = 0.0;
  double grad_t_norm = 0.0;
  double grad_cr_norm = 0.0;
  RigidTransform camera_pose;
};

struct ServoSimResult {
  std::vector<ServoSimRecord> trajectory;
  ServoStatus status = ServoStatus::MaxIterations;
  std::string message;
  bool converged = false;
  int ticks = 0;
  RigidTransform final_pose;
  double pose_error_m = 0.0;
  double pose_error_rad = 0.0;
};

/// Closed loop: the virtual depth sensor renders a back-face-culled view of
/// the scene from the current camera pose, one servo step produces the
/// camera twist, and either the free-flying camera (arm == nullptr) or the
/// arm via jacobian_pinv integrates it. The reference view is captured at
/// goal_pose before the loop starts.
ServoSimResult run_servo_sim(const PointCloud& scene, const RigidTransform& goal_pose,
                             const RigidTransform& start_pose, SimulatedArm* arm,
                             const ControllerConfig& cfg, double noise_sigma = 0.0,
                             std::uint64_t noise_seed = 0);

}  // namespace specvs
