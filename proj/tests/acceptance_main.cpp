// Acceptance suite: registration experiments on synthetic scenes, the
// closed-loop positioning simulation, the spectral property checks and an
// informational timing report. Prints one PASS/FAIL line per criterion and
// exits with the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <vector>

#include "specvs/errors.hpp"
#include "specvs/servo.hpp"
#include "test_models.hpp"

using namespace specvs;
using namespace specvs::testmodels;

namespace {

int failures = 0;

void report(int number, const char* name, bool pass, const std::string& detail) {
  std::printf("[%d] %-28s %s  (%s)\n", number, name, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Eigen::Vector3d random_axis(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector3d axis(u(rng), u(rng), u(rng));
  while (axis.norm() < 1e-3) axis = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return axis.normalized();
}

struct TrialResult {
  AlignmentResult res;
  double dt_axis_max = 0.0;   // max per-axis translation error, meters
  double drot_rad = 0.0;      // geodesic rotation error
  double seconds = 0.0;
};

TrialResult run_trial(const PointCloud& model, const PointCloud& target,
                      const RigidTransform& truth, const ControllerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult out{run_alignment(model, target, cfg), 0.0, 0.0, 0.0};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.dt_axis_max = (out.res.h.translation - truth.translation).cwiseAbs().maxCoeff();
  out.drot_rad = geodesic_angle(out.res.h.rotation, truth.rotation);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 1: full model vs rigidly transformed copy, 20 seeded trials.
// Criterion 3 reuses the converged states (gradient-vanishing checks).

struct C1Outcome {
  int converged_and_accurate = 0;
  int trials = 0;
  double median_jt = 0.0, median_jr = 0.0;
  double max_seconds = 0.0;
  bool grids_ok = true;
  bool gradients_vanish = true;
  double worst_grad_r = 0.0;
  bool all_peaks_zero = true;
};

C1Outcome run_c1() {
  ControllerConfig cfg;
  cfg.max_iters = 500;
  cfg.polish_iters = 60;
  cfg.epsilon_g = 2.5e-3;  // just above the rotation channel's rebinning floor

  const PointCloud model = make_scan_model(5000, 11);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  C1Outcome out;
  std::vector<double> jts, jrs;
  const double tiers[4] = {15.0, 30.0, 45.0, 60.0};
  for (int trial = 0; trial < 20; ++trial) {
    const double deg = tiers[trial / 5];
    RigidTransform truth;
    truth.rotation = exp_so3((deg * M_PI / 180.0) * random_axis(rng));
    truth.translation =
        10.0 * cfg.resolution * Eigen::Vector3d(u(rng), u(rng), u(rng));
    const PointCloud target = apply_transform(model, truth, centroid(model));

    const TrialResult t = run_trial(model, target, truth, cfg);
    ++out.trials;
    out.max_seconds = std::max(out.max_seconds, t.seconds);
    jts.push_back(t.res.final_jt);
    jrs.push_back(t.res.final_jr);
    out.grids_ok = out.grids_ok && t.res.grid.nx == 64 && t.res.grid.ny == 64 &&
                   t.res.grid.nz == 64 && t.res.grid.resolution == 0.008;

    const bool pass = t.res.converged && t.dt_axis_max <= 0.008 &&
                      t.drot_rad < 5.0 * M_PI / 180.0;
    out.converged_and_accurate += pass;
    if (pass) {
      out.all_peaks_zero =
          out.all_peaks_zero && t.res.final_peak_index == std::array<int, 3>{0, 0, 0} &&
          t.res.final_grad_t.norm() <= cfg.resolution;
      out.worst_grad_r = std::max(out.worst_grad_r, t.res.final_grad_r.norm());
      out.gradients_vanish =
          out.gradients_vanish && t.res.final_grad_r.norm() <= 1e-4;
    }
  }
  out.median_jt = median(jts);
  out.median_jr = median(jrs);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 2: full model vs back-face-culled partial view.

void run_c2() {
  ControllerConfig cfg;
  cfg.max_iters = 500;
  cfg.polish_iters = 60;
  cfg.epsilon_g = 5e-3;  // partial views flicker the peak cell

  const PointCloud model = make_knobbed_ball(2500, 21);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 60.0);

  int converged = 0, trials = 0;
  std::vector<double> jts, jrs, dts, drs;
  for (int trial = 0; trial < 20; ++trial) {
    RigidTransform truth;
    truth.rotation = exp_so3((angle(rng) * M_PI / 180.0) * random_axis(rng));
    truth.translation =
        10.0 * cfg.resolution * Eigen::Vector3d(u(rng), u(rng), u(rng));
    const PointCloud moved = apply_transform(model, truth, centroid(model));

    PointCloud target;
    for (int tries = 0; tries < 200; ++tries) {
      const PointCloud vis =
          partial_view(moved, centroid(moved) + 0.6 * random_axis(rng));
      if (static_cast<double>(vis.size()) >= 0.40 * moved.size()) {
        target = vis;
        break;
      }
    }
    if (target.empty()) continue;

    const TrialResult t = run_trial(model, target, truth, cfg);
    ++trials;
    converged += t.res.converged;
    jts.push_back(t.res.final_jt);
    jrs.push_back(t.res.final_jr);
    dts.push_back(t.dt_axis_max);
    drs.push_back(t.drot_rad);
  }
  const double rate = static_cast<double>(converged) / trials;
  const double med_jt = median(jts), med_jr = median(jrs);
  const double med_dt = median(dts), med_dr = median(drs);
  const bool pass = rate >= 0.80 && med_jt <= 5e-4 && med_jr <= 1e-1 &&
                    med_dt <= 1.5 * cfg.resolution && med_dr < 8.0 * M_PI / 180.0;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "convergence %.0f%%, median Jt=%.2e Jr=%.2e, median pose err "
                "%.1f mm / %.2f deg over %d trials",
                100.0 * rate, med_jt, med_jr, 1000.0 * med_dt,
                med_dr * 180.0 / M_PI, trials);
  report(2, "C-2 partial views", pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 3: gradient vanishing at C-1 convergence + clutter smoke test.

void run_c3(const C1Outcome& c1) {
  ControllerConfig cfg;
  cfg.max_iters = 500;
  cfg.polish_iters = 60;
  // The distractor normals hold the scene's rotation-gradient floor near
  // 1.3e-2; the smoke test's tolerance sits above that.
  cfg.epsilon_g = 2e-2;

  const PointCloud model = make_scan_model(3000, 31);
  RigidTransform truth;
  truth.rotation = exp_so3((25.0 * M_PI / 180.0) *
                           Eigen::Vector3d(0.3, -0.6, 0.74).normalized());
  truth.translation = Eigen::Vector3d(0.04, -0.03, 0.05);
  const PointCloud placed = apply_transform(model, truth, centroid(model));
  const PointCloud scene = make_clutter_scene(placed, 31);

  bool smoke = false;
  std::string smoke_note = "clutter run failed";
  try {
    const AlignmentResult res = run_alignment(model, scene, cfg);
    smoke = res.converged;
    smoke_note = std::string("clutter smoke ") + to_string(res.status) + " in " +
                 std::to_string(res.iterations) + " iterations";
  } catch (const std::exception& e) {
    smoke_note = e.what();
  }

  const bool pass = c1.all_peaks_zero && c1.gradients_vanish && smoke;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "peak at zero: %s, worst |grad_Cr|=%.2e (<=1e-4), %s",
                c1.all_peaks_zero ? "yes" : "no", c1.worst_grad_r,
                smoke_note.c_str());
  report(3, "C-3 gradient vanishing", pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 4: closed-loop positioning simulation.

void run_c4() {
  ControllerConfig cfg;
  cfg.resolution = 0.01;
  cfg.max_iters = 300;
  cfg.polish_iters = 40;
  cfg.subvoxel_peak = true;
  cfg.epsilon_g = 5e-3;

  const PointCloud model0 = make_scan_model(2200, 31);
  RigidTransform place;
  place.translation = Eigen::Vector3d(0.45, 0.0, 0.20) - centroid(model0);
  const PointCloud model = apply_transform(model0, place);
  const PointCloud scene = make_clutter_scene(model, 31);

  RigidTransform goal;
  goal.rotation = exp_so3(Eigen::Vector3d(0.2, 0.9, -0.1));
  goal.translation = centroid(scene) + Eigen::Vector3d(0.0, 0.10, 0.38);
  RigidTransform start = goal;
  start.translation += Eigen::Vector3d(0.05, 0.03, -0.04);  // 7.1 cm
  start.rotation = goal.rotation * exp_so3(Eigen::Vector3d(0.1, 0.15, 0.25));  // 18 deg

  const ServoSimResult fly = run_servo_sim(scene, goal, start, nullptr, cfg);
  bool decreasing = false;
  if (fly.trajectory.size() > 10) {
    const auto& tr = fly.trajectory;
    const std::size_t burn = 5;
    const double j_burn = tr[burn].jt + tr[burn].jr;
    const double j_end = tr.back().jt + tr.back().jr;
    decreasing = j_end < j_burn;
  }
  const bool fly_ok = fly.converged && fly.pose_error_m <= 0.008 &&
                      fly.pose_error_rad < 5.0 * M_PI / 180.0 && decreasing;

  SimulatedArm arm = SimulatedArm::make_default();
  arm.q << 0.0, 0.6, 0.0, -1.6, 0.0, 1.0, 0.0;
  const ServoSimResult armed = run_servo_sim(scene, goal, start, &arm, cfg);
  const bool arm_ok = armed.converged && armed.pose_error_m <= 0.008 &&
                      armed.pose_error_rad < 5.0 * M_PI / 180.0;

  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "free-fly %s %.1f mm / %.2f deg in %d ticks (cost decreasing: %s); "
                "arm %s %.1f mm / %.2f deg in %d ticks",
                to_string(fly.status), 1000.0 * fly.pose_error_m,
                fly.pose_error_rad * 180.0 / M_PI, fly.ticks,
                decreasing ? "yes" : "no", to_string(armed.status),
                1000.0 * armed.pose_error_m, armed.pose_error_rad * 180.0 / M_PI,
                armed.ticks);
  report(4, "servo-sim positioning", fly_ok && arm_ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 5: spectral property suite at the stated tolerances.

ShCoefficients random_coeffs(int l_max, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ShCoefficients c;
  for (int l = 0; l <= l_max; ++l) {
    Eigen::VectorXd v(2 * l + 1);
    for (int i = 0; i < v.size(); ++i) v[i] = g(rng);
    c.degrees.push_back(v);
  }
  return c;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  while (q.norm() < 1e-6) q = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

void run_c5() {
  std::mt19937_64 rng(55);
  std::vector<std::string> fails;
  auto check = [&fails](bool ok, const char* label) {
    if (!ok) fails.emplace_back(label);
  };

  {  // DFT vs brute force on an 8^3 grid, 1e-9
    GridSpec spec(0.008, Eigen::Vector3d::Zero(), 8, 8, 8);
    VoxelGrid g;
    g.spec = spec;
    g.values.assign(spec.cell_count(), 0.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : g.values) v = u(rng) < 0.2 ? 1.0 : 0.0;
    const SpectralVolume f = dft3(g);
    double max_err = 0.0;
    for (int uu = 0; uu < 8; ++uu) {
      for (int vv = 0; vv < 8; ++vv) {
        for (int ww = 0; ww < 8; ++ww) {
          std::complex<double> acc(0.0, 0.0);
          for (int x = 0; x < 8; ++x)
            for (int y = 0; y < 8; ++y)
              for (int z = 0; z < 8; ++z) {
                const double ph = -2.0 * M_PI * (uu * x + vv * y + ww * z) / 8.0;
                acc += g.at(x, y, z) * std::complex<double>(std::cos(ph), std::sin(ph));
              }
          max_err = std::max(max_err, std::abs(f.at(uu, vv, ww) - acc));
        }
      }
    }
    check(max_err < 1e-9 * std::max(1.0, g.sum()), "dft brute force");

    // shift theorem, 1e-6 relative
    const std::array<int, 3> s = {3, -2, 1};
    const SpectralVolume fs = dft3(shift_grid(g, s));
    double ramp_err = 0.0;
    for (int uu = 0; uu < 8; ++uu)
      for (int vv = 0; vv < 8; ++vv)
        for (int ww = 0; ww < 8; ++ww) {
          const double ph = -2.0 * M_PI * (uu * s[0] + vv * s[1] + ww * s[2]) / 8.0;
          const std::complex<double> ramp(std::cos(ph), std::sin(ph));
          ramp_err = std::max(ramp_err, std::abs(fs.at(uu, vv, ww) - f.at(uu, vv, ww) * ramp));
        }
    check(ramp_err < 1e-6 * std::max(1.0, g.sum()), "shift theorem");

    // Parseval, 1e-6 relative
    double spatial = 0.0, spectral = 0.0;
    for (double v : g.values) spatial += v * v;
    for (const auto& c : f.coeffs) spectral += std::norm(c);
    spectral /= static_cast<double>(spec.cell_count());
    check(std::abs(spatial - spectral) < 1e-6 * spatial, "parseval");
  }

  {  // exact integer-shift recovery for |s| < dim/4 on a 16^3 grid
    GridSpec spec(0.008, Eigen::Vector3d::Zero(), 16, 16, 16);
    VoxelGrid g;
    g.spec = spec;
    g.values.assign(spec.cell_count(), 0.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : g.values) v = u(rng) < 0.12 ? 1.0 : 0.0;
    const SpectralVolume f = dft3(g);
    bool all_exact = true;
    for (int sx = -3; sx <= 3 && all_exact; ++sx)
      for (int sy = -3; sy <= 3 && all_exact; ++sy)
        for (int sz = -3; sz <= 3 && all_exact; ++sz) {
          const TranslationEstimate est = phase_correlate(f, dft3(shift_grid(g, {sx, sy, sz})));
          all_exact = (est.grad_t - 0.008 * Eigen::Vector3d(sx, sy, sz)).norm() < 1e-12;
        }
    check(all_exact, "integer shift recovery");
  }

  {  // SH machinery at B = 8
    const RealShBasis basis(8);
    const ShCoefficients truth = random_coeffs(7, rng);
    const std::vector<double> samples = sh_synthesize(truth, basis);
    const ShCoefficients back = sh_forward_samples(samples, basis);
    double rt_err = 0.0;
    for (int l = 0; l <= 7; ++l) {
      rt_err = std::max(rt_err, (back.degrees[l] - truth.degrees[l]).cwiseAbs().maxCoeff());
    }
    check(rt_err < 1e-8, "sh round trip");

    double ortho_err = 0.0;
    for (int l = 0; l <= 7; ++l) {
      const Eigen::MatrixXd gram = basis.node_values(l) *
                                   basis.node_weights().asDiagonal() *
                                   basis.node_values(l).transpose();
      ortho_err = std::max(ortho_err,
                           (gram - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1))
                               .cwiseAbs()
                               .maxCoeff());
    }
    check(ortho_err < 1e-8, "basis orthogonality");

    const Eigen::Matrix3d r1 = random_rotation(rng);
    const Eigen::Matrix3d r2 = random_rotation(rng);
    const WignerBlocks u1 = wigner_u(r1, 7, basis);
    const WignerBlocks u2 = wigner_u(r2, 7, basis);
    const WignerBlocks u12 = wigner_u(r1 * r2, 7, basis);
    const WignerBlocks ui = wigner_u(Eigen::Matrix3d::Identity(), 7, basis);
    double werr = 0.0;
    for (int l = 0; l <= 7; ++l) {
      werr = std::max(werr, (u12.blocks[l] - u1.blocks[l] * u2.blocks[l]).cwiseAbs().maxCoeff());
      werr = std::max(werr, (u1.blocks[l] * u1.blocks[l].transpose() -
                             Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1))
                                .cwiseAbs()
                                .maxCoeff());
      werr = std::max(werr, (ui.blocks[l] - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1))
                                .cwiseAbs()
                                .maxCoeff());
    }
    check(werr < 1e-8, "wigner identity/orthogonality/homomorphism");

    // derivative blocks vs central differences, 1e-4 relative
    const double eps = 1e-5;
    double fd_err = 0.0, fd_scale = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e[axis] = 1.0;
      const WignerBlocks plus = wigner_u(exp_so3(eps * e), 7, basis);
      const WignerBlocks minus = wigner_u(exp_so3(-eps * e), 7, basis);
      const auto analytic = wigner_u_derivative(axis, 7, basis);
      for (int l = 0; l <= 7; ++l) {
        const Eigen::MatrixXd fd = (plus.blocks[l] - minus.blocks[l]) / (2.0 * eps);
        fd_err = std::max(fd_err, (fd - analytic[l]).cwiseAbs().maxCoeff());
        fd_scale = std::max(fd_scale, analytic[l].cwiseAbs().maxCoeff());
      }
    }
    check(fd_err < 1e-4 * fd_scale, "generator central differences");

    // analytic correlation gradient vs central differences, 100 draws, 1e-5
    bool grad_ok = true;
    for (int draw = 0; draw < 100 && grad_ok; ++draw) {
      const ShCoefficients f = random_coeffs(7, rng);
      const ShCoefficients gg = random_coeffs(7, rng);
      const Eigen::Matrix3d r = random_rotation(rng);
      const Eigen::Vector3d grad = so3_correlation_gradient(f, gg, r, basis);
      Eigen::Vector3d fd;
      for (int axis = 0; axis < 3; ++axis) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[axis] = 1.0;
        const double p = so3_correlation(f, gg, r * exp_so3(1e-6 * e), basis);
        const double m = so3_correlation(f, gg, r * exp_so3(-1e-6 * e), basis);
        fd[axis] = (p - m) / 2e-6;
      }
      if (fd.norm() > 1e-8) grad_ok = (grad - fd).norm() < 1e-5 * fd.norm();
    }
    check(grad_ok, "correlation gradient vs finite differences");

    // self-correlation maximal at identity over 1000 rotations
    const ShCoefficients f = random_coeffs(7, rng);
    const double self = so3_correlation(f, f, Eigen::Matrix3d::Identity(), basis);
    bool max_ok = true;
    for (int draw = 0; draw < 1000 && max_ok; ++draw) {
      max_ok = so3_correlation(f, f, random_rotation(rng), basis) <= self + 1e-9;
    }
    check(max_ok, "self-correlation maximal");
  }

  {  // Penrose conditions
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd j(6, 7);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 7; ++c) j(r, c) = g(rng);
    const Eigen::MatrixXd p = jacobian_pinv(j);
    const bool penrose = (j * p * j - j).cwiseAbs().maxCoeff() < 1e-8 &&
                         (p * j * p - p).cwiseAbs().maxCoeff() < 1e-8 &&
                         ((j * p) - (j * p).transpose()).cwiseAbs().maxCoeff() < 1e-8 &&
                         ((p * j) - (p * j).transpose()).cwiseAbs().maxCoeff() < 1e-8;
    check(penrose, "pseudo-inverse penrose conditions");
  }

  std::string detail = "all property checks at stated tolerances";
  if (!fails.empty()) {
    detail = "failed:";
    for (const auto& f : fails) detail += " " + f;
  }
  report(5, "property suite", fails.empty(), detail);
}

// ---------------------------------------------------------------------------
// Criterion 6: per-iteration speed (informational).

void run_c6() {
  ControllerConfig cfg;
  const PointCloud model = make_scan_model(5000, 11);
  RigidTransform offset;
  offset.rotation = exp_so3(Eigen::Vector3d(0.2, -0.3, 0.4));
  offset.translation = Eigen::Vector3d(0.03, 0.02, -0.025);
  const PointCloud target = apply_transform(model, offset, centroid(model));

  const GridSpec grid = fit_grid({&model, &target}, cfg.resolution,
                                 cfg.min_grid_dim, cfg.grid_pad_cells);
  const ReferenceFeatures ref = make_reference_features(model, grid, cfg);
  ServoState state;
  const auto t0 = std::chrono::steady_clock::now();
  const int iters = 30;
  for (int i = 0; i < iters; ++i) state = servo_step(state, ref, target, cfg);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count() /
                    iters;
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "%.1f ms/iteration at 64^3, B=16 (informational target 100 ms)%s",
                ms, ms > 100.0 ? " -- WARNING over target" : "");
  report(6, "per-iteration speed", true, detail);
}

}  // namespace

int main() {
  std::printf("specvs acceptance suite\n");

  const C1Outcome c1 = run_c1();
  {
    const double rate = static_cast<double>(c1.converged_and_accurate) / c1.trials;
    const bool pass = rate >= 0.90 && c1.median_jt <= 1e-4 && c1.median_jr <= 5e-2 &&
                      c1.max_seconds <= 60.0 && c1.grids_ok;
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "%d/%d trials converged within 8 mm per axis / 5 deg, median "
                  "Jt=%.2e Jr=%.2e, slowest trial %.1f s, 64^3 @ 8 mm grid: %s",
                  c1.converged_and_accurate, c1.trials, c1.median_jt, c1.median_jr,
                  c1.max_seconds, c1.grids_ok ? "yes" : "no");
    report(1, "C-1 full-model registration", pass, detail);
  }
  run_c2();
  run_c3(c1);
  run_c4();
  run_c5();
  run_c6();

  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "OK" : "FAILURE",
              failures);
  return failures;
}
