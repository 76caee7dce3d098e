#include "specvs/servo.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "specvs/errors.hpp"

namespace specvs {

void ControllerConfig::validate() const {
  if (!(lambda_t > 0.0 && lambda_t < 1.0)) {
    throw ValidationError("lambda_t must be in (0, 1)");
  }
  if (!(lambda_r > 0.0 && lambda_r < 1.0)) {
    throw ValidationError("lambda_r must be in (0, 1)");
  }
  if (!(epsilon_g > 0.0)) {
    throw ValidationError("epsilon_g must be > 0");
  }
  if (max_iters < 1) {
    throw ValidationError("max_iters must be >= 1");
  }
  if (resolution <= 0.0) {
    throw ValidationError("resolution must be > 0");
  }
  if (effective_l_max() > bandwidth * 2 - 1) {
    throw ValidationError("l_max exceeds what the sphere grid can represent");
  }
}

namespace {

double damping_exponent(const ControllerConfig& cfg, int iteration) {
  if (cfg.damping_anneal_iters <= 0) return cfg.gradient_degree_damping;
  return cfg.gradient_degree_damping *
         std::exp(-static_cast<double>(iteration) / cfg.damping_anneal_iters);
}

double degree_weight(int l, double exponent) {
  if (exponent == 0.0) return 1.0;
  return std::pow(1.0 + static_cast<double>(l) * (l + 1.0), -exponent);
}

// Binary dilation of the observed histogram's support on the sphere grid:
// full theta neighbourhood rows with circular phi wrap. The pole-adjacent
// rows keep their own support only (no wrap across the pole).
std::vector<char> dilated_support(const Egi& egi, int radius) {
  const int two_b = 2 * egi.grid.bandwidth;
  std::vector<char> base(egi.counts.size());
  for (std::size_t i = 0; i < egi.counts.size(); ++i) base[i] = egi.counts[i] > 0;
  std::vector<char> out(egi.counts.size(), 0);
  for (int j = 0; j < two_b; ++j) {
    for (int k = 0; k < two_b; ++k) {
      bool any = false;
      for (int dj = -radius; dj <= radius && !any; ++dj) {
        const int jj = j + dj;
        if (jj < 0 || jj >= two_b) continue;
        for (int dk = -radius; dk <= radius && !any; ++dk) {
          const int kk = ((k + dk) % two_b + two_b) % two_b;
          any = base[static_cast<std::size_t>(jj) * two_b + kk] != 0;
        }
      }
      out[static_cast<std::size_t>(j) * two_b + k] = any;
    }
  }
  return out;
}

Eigen::Matrix3d damped_metric_pinv(const ShCoefficients& sh, const RealShBasis& basis,
                                   double exponent) {
  // Correlation curvature at the aligned state. Directions the EGI observes
  // weakly (near-symmetry axes) are truncated rather than inverted,
  // otherwise they amplify histogram rebinning noise.
  Eigen::Matrix3d metric;
  for (int k = 0; k < 3; ++k) {
    for (int n = k; n < 3; ++n) {
      double acc = 0.0;
      for (int l = 0; l <= basis.l_max(); ++l) {
        acc += degree_weight(l, exponent) *
               (basis.generator(l, k) * sh.degrees[l])
                   .dot(basis.generator(l, n) * sh.degrees[l]);
      }
      metric(k, n) = acc;
      metric(n, k) = acc;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(metric);
  Eigen::Vector3d inv = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    if (eig.eigenvalues()[i] > 1e-3 * eig.eigenvalues()[2]) {
      inv[i] = 1.0 / eig.eigenvalues()[i];
    }
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

ReferenceFeatures make_reference_features(const PointCloud& reference,
                                          const GridSpec& grid,
                                          const ControllerConfig& cfg) {
  validate_cloud(reference);
  if (reference.empty()) {
    throw ValidationError("reference cloud is empty");
  }
  ReferenceFeatures ref;
  ref.center = centroid(reference);
  ref.grid = voxelize(reference, grid, cfg.voxel_mode);
  ref.spectrum = dft3(ref.grid);
  ref.egi = build_egi(reference, cfg.bandwidth);
  ref.basis = std::make_shared<RealShBasis>(cfg.bandwidth, cfg.effective_l_max());
  ShCoefficients raw = sh_forward(ref.egi, *ref.basis);
  const double norm = std::sqrt(raw.squared_norm());
  ref.sh = raw.scaled(norm > 0.0 ? 1.0 / norm : 1.0);

  ref.gradient_metric_pinv =
      damped_metric_pinv(ref.sh, *ref.basis, cfg.gradient_degree_damping);
  return ref;
}

ServoState servo_step(const ServoState& state, const ReferenceFeatures& ref,
                      const PointCloud& target, const ControllerConfig& cfg) {
  if (target.empty()) {
    throw ValidationError("servo_step: current cloud is empty");
  }

  // Counter-transform the observation by the current estimate; at the true
  // transform this reproduces the reference cloud.
  RigidTransform inv;
  inv.rotation = state.h.rotation.transpose();
  inv.translation = -(inv.rotation * state.h.translation);
  const PointCloud current = apply_transform(target, inv, ref.center);

  const VoxelGrid g_grid = voxelize(current, ref.grid.spec, cfg.voxel_mode);
  const SpectralVolume g_spec = dft3(g_grid);
  const TranslationEstimate est =
      phase_correlate(ref.spectrum, g_spec, cfg.subvoxel_peak);

  const Egi g_egi = build_egi(current, cfg.bandwidth);
  ShCoefficients g_raw = sh_forward(g_egi, *ref.basis);
  const double g_norm = std::sqrt(g_raw.squared_norm());
  const ShCoefficients g_sh = g_raw.scaled(g_norm > 0.0 ? 1.0 / g_norm : 1.0);

  // Mask-matched reference: restrict the reference histogram to the dilated
  // support of the observation so a partial view compares against the part
  // of the model it can actually see.
  ShCoefficients f_sh;
  if (cfg.support_mask_dilation > 0) {
    const std::vector<char> mask = dilated_support(g_egi, cfg.support_mask_dilation);
    std::vector<double> masked(ref.egi.counts.size());
    for (std::size_t i = 0; i < masked.size(); ++i) {
      masked[i] = mask[i] ? static_cast<double>(ref.egi.counts[i]) : 0.0;
    }
    ShCoefficients f_raw = sh_forward_samples(masked, *ref.basis);
    const double f_norm = std::sqrt(f_raw.squared_norm());
    f_sh = f_raw.scaled(f_norm > 0.0 ? 1.0 / f_norm : 1.0);
  } else {
    f_sh = ref.sh;
  }

  // Degree-damped correlation gradient mapped through the curvature metric:
  // unit-norm coefficients plus the metric make grad_r an angular step in
  // radians, so lambda_r acts as a dimensionless step fraction.
  const double exponent = damping_exponent(cfg, state.iteration);
  Eigen::Vector3d ascent = Eigen::Vector3d::Zero();
  for (int l = 0; l <= ref.basis->l_max(); ++l) {
    const double w = degree_weight(l, exponent);
    for (int k = 0; k < 3; ++k) {
      ascent[k] += w * g_sh.degrees[l].dot(ref.basis->generator(l, k) * f_sh.degrees[l]);
    }
  }
  const Eigen::Vector3d grad_r =
      damped_metric_pinv(f_sh, *ref.basis, exponent) * ascent;

  ServoState next;
  next.iteration = state.iteration + 1;
  next.grad_t = est.grad_t;
  next.grad_r = grad_r;
  next.peak_index = est.peak_index;
  next.peak_value = est.peak_value;

  // Body-frame composition H <- H o dH with dH = rotate about the center,
  // then translate. The measured increments live in the counter-transformed
  // frame, so the translation maps through the current rotation.
  const Eigen::Matrix3d dr = exp_so3(cfg.lambda_r * grad_r);
  next.h.rotation = state.h.rotation * dr;
  next.h.translation =
      state.h.translation + cfg.lambda_t * (state.h.rotation * est.grad_t);

  next.jt = translation_cost(ref.grid, g_grid, Eigen::Vector3d::Zero()) /
            static_cast<double>(ref.grid.spec.cell_count());
  next.jr = rotation_cost(ref.egi, g_egi, Eigen::Matrix3d::Identity()) /
            (static_cast<double>(ref.egi.total()) * static_cast<double>(g_egi.total()));
  return next;
}

void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << "iter,Jt,Jr,grad_t_norm,grad_cr_norm,tx,ty,tz,qw,qx,qy,qz\n";
  for (const auto& r : trace.rows) {
    os << r.iter << ',' << r.jt << ',' << r.jr << ',' << r.grad_t_norm << ','
       << r.grad_cr_norm << ',' << r.t.x() << ',' << r.t.y() << ',' << r.t.z()
       << ',' << r.q[0] << ',' << r.q[1] << ',' << r.q[2] << ',' << r.q[3] << '\n';
  }
}

const char* to_string(ServoStatus status) {
  switch (status) {
    case ServoStatus::Converged: return "converged";
    case ServoStatus::MaxIterations: return "max-iterations";
    case ServoStatus::Diverged: return "diverged";
    case ServoStatus::EmptyView: return "empty-view";
    case ServoStatus::JointLimit: return "joint-limit";
  }
  return "unknown";
}

namespace {

IterationRecord make_record(const ServoState& s) {
  IterationRecord r;
  r.iter = s.iteration;
  r.jt = s.jt;
  r.jr = s.jr;
  r.grad_t_norm = s.grad_t.norm();
  r.grad_cr_norm = s.grad_r.norm();
  r.t = s.h.translation;
  r.q = quaternion_wxyz(s.h.rotation);
  return r;
}

// Channel norms for the convergence test. The default raw sum adds meters and
// radians; the optional mode divides each norm by its iteration-1 value
// (floored to an absolute scale) instead.
struct ConvergenceTest {
  const ControllerConfig& cfg;
  double den_t = -1.0;
  double den_r = -1.0;

  bool reached(const ServoState& s) {
    const double nt = s.grad_t.norm();
    const double nr = s.grad_r.norm();
    if (!cfg.iter1_normalized_norms) {
      return nt + nr < cfg.epsilon_g;
    }
    if (den_t < 0.0) {
      den_t = std::max(nt, cfg.resolution);
      den_r = std::max(nr, 1e-6);
    }
    return nt / den_t + nr / den_r < cfg.epsilon_g;
  }
};

}  // namespace

AlignmentResult run_alignment(const PointCloud& reference, const PointCloud& target,
                              const ControllerConfig& cfg) {
  cfg.validate();
  validate_cloud(reference);
  validate_cloud(target);
  if (reference.empty() || target.empty()) {
    throw ValidationError("run_alignment: clouds must be nonempty");
  }

  AlignmentResult result;
  result.grid = fit_grid({&reference, &target}, cfg.resolution, cfg.min_grid_dim,
                         cfg.grid_pad_cells);
  const ReferenceFeatures ref = make_reference_features(reference, result.grid, cfg);

  ServoState state;
  ConvergenceTest test{cfg};
  int rising = 0;
  double prev_cost = std::numeric_limits<double>::infinity();

  const auto t0 = std::chrono::steady_clock::now();
  while (state.iteration < cfg.max_iters) {
    state = servo_step(state, ref, target, cfg);
    result.trace.rows.push_back(make_record(state));

    if (test.reached(state)) {
      result.converged = true;
      result.status = ServoStatus::Converged;
      break;
    }
    const double cost = state.jt + state.jr;
    rising = cost > prev_cost ? rising + 1 : 0;
    prev_cost = cost;
    if (rising >= cfg.divergence_window) {
      result.status = ServoStatus::Diverged;
      result.message = "cost increased for " + std::to_string(rising) +
                       " consecutive iterations at iteration " +
                       std::to_string(state.iteration);
      break;
    }
    if (cfg.reorthonormalize_every > 0 &&
        state.iteration % cfg.reorthonormalize_every == 0) {
      state.h.rotation = nearest_rotation(state.h.rotation);
    }
  }
  result.iterations = state.iteration;
  if (!result.converged && result.status == ServoStatus::MaxIterations) {
    result.message = "convergence threshold not reached in " +
                     std::to_string(cfg.max_iters) + " iterations";
  }

  // Refinement pass, run after the convergence test so the reported exit
  // criterion stays the plain combined-norm rule. Two stages with fractional peak
  // interpolation: first the damped gradient, whose smooth landscape settles
  // precisely on full views, then the raw gradient, whose optimum is free of
  // the low-degree bias partial views put on the damped direction. The
  // monitoring costs arbitrate which stage's endpoint is returned.
  if (result.converged && cfg.polish_iters > 0) {
    ControllerConfig polish = cfg;
    polish.subvoxel_peak = true;
    polish.lambda_t = cfg.polish_lambda_t;
    polish.lambda_r = cfg.polish_lambda_r;
    polish.damping_anneal_iters = 0;

    auto refine = [&](ServoState s, double damping) {
      ControllerConfig stage = polish;
      stage.gradient_degree_damping = damping;
      for (int i = 0; i < cfg.polish_iters; ++i) {
        s = servo_step(s, ref, target, stage);
        result.trace.rows.push_back(make_record(s));
        if (s.grad_t.norm() < 0.02 * cfg.resolution && s.grad_r.norm() < 1e-7) {
          break;
        }
      }
      return s;
    };
    const ServoState damped = refine(state, cfg.gradient_degree_damping);
    const ServoState raw = refine(damped, 0.0);
    const bool damped_won = damped.jt + damped.jr <= raw.jt + raw.jr;
    state = damped_won ? damped : raw;

    // Rotation stationarity: with the translation frozen the rotation
    // ascent contracts into a small limit cycle around a zero of its
    // measured gradient (histogram rebinning makes the field piecewise
    // smooth, so the last iterate dithers). The best visited iterate is the
    // state the gradient-vanishing convergence mode reports.
    ControllerConfig settle = polish;
    settle.gradient_degree_damping = damped_won ? cfg.gradient_degree_damping : 0.0;
    settle.lambda_t = 0.0;
    ServoState best = state;
    for (int i = 0; i < 3 * cfg.polish_iters; ++i) {
      state = servo_step(state, ref, target, settle);
      result.trace.rows.push_back(make_record(state));
      if (state.grad_r.norm() < best.grad_r.norm()) best = state;
      if (best.grad_r.norm() < 2e-5) break;
    }
    state = best;
    state.h.rotation = nearest_rotation(state.h.rotation);
  }
  const auto t1 = std::chrono::steady_clock::now();

  result.h = state.h;
  result.final_jt = state.jt;
  result.final_jr = state.jr;
  result.final_grad_t = state.grad_t;
  result.final_grad_r = state.grad_r;
  result.final_peak_index = state.peak_index;
  if (!result.trace.rows.empty()) {
    result.ms_per_iteration =
        std::chrono::duration<double, std::milli>(t1 - t0).count() /
        static_cast<double>(result.trace.rows.size());
  }
  return result;
}

Eigen::MatrixXd jacobian_pinv(const Eigen::MatrixXd& j) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-8 * (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::VectorXd inv(sv.size());
  for (int i = 0; i < sv.size(); ++i) {
    inv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace specvs
