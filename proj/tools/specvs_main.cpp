// specvs command-line tool: synthetic scene generation, one-shot cloud
// registration, closed-loop servo simulation, feature dumps and benchmarks.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "specvs/cloud.hpp"
#include "specvs/errors.hpp"
#include "specvs/run_config.hpp"
#include "specvs/servo.hpp"

using nlohmann::json;
using namespace specvs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 2;
constexpr int kExitValidation = 3;
constexpr int kExitIo = 4;

Eigen::Vector3d parse_vec3(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(text.substr(pos, comma - pos), &used));
      if (used != comma - pos) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(what + ": expected comma-separated numbers, got `" + text + "`");
    }
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  if (vals.size() != 3) {
    throw ValidationError(what + ": expected 3 components, got " +
                          std::to_string(vals.size()));
  }
  return Eigen::Vector3d(vals[0], vals[1], vals[2]);
}

// Pose syntax: "x,y,z,rx,ry,rz" with a rotation vector in radians.
RigidTransform parse_pose(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(text.substr(pos, comma - pos), &used));
      if (used != comma - pos) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(what + ": expected `x,y,z,rx,ry,rz`, got `" + text + "`");
    }
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  if (vals.size() != 6) {
    throw ValidationError(what + ": expected 6 components, got " +
                          std::to_string(vals.size()));
  }
  RigidTransform pose;
  pose.translation = Eigen::Vector3d(vals[0], vals[1], vals[2]);
  pose.rotation = exp_so3(Eigen::Vector3d(vals[3], vals[4], vals[5]));
  return pose;
}

json transform_json(const AlignmentResult& res) {
  json j;
  j["rotation"] = std::vector<double>{
      res.h.rotation(0, 0), res.h.rotation(0, 1), res.h.rotation(0, 2),
      res.h.rotation(1, 0), res.h.rotation(1, 1), res.h.rotation(1, 2),
      res.h.rotation(2, 0), res.h.rotation(2, 1), res.h.rotation(2, 2)};
  const Eigen::Vector4d q = quaternion_wxyz(res.h.rotation);
  j["quaternion"] = std::vector<double>{q[0], q[1], q[2], q[3]};
  j["translation"] = std::vector<double>{res.h.translation.x(), res.h.translation.y(),
                                         res.h.translation.z()};
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["Jt"] = res.final_jt;
  j["Jr"] = res.final_jr;
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

void add_controller_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--lambda-t", cfg.controller.lambda_t, "translation gain in (0,1)");
  cmd->add_option("--lambda-r", cfg.controller.lambda_r, "rotation gain in (0,1)");
  cmd->add_option("--epsilon-g", cfg.controller.epsilon_g, "convergence tolerance");
  cmd->add_option("--max-iters", cfg.controller.max_iters, "iteration cap");
  cmd->add_option("--resolution", cfg.controller.resolution, "voxel edge in meters");
  cmd->add_option("--bandwidth", cfg.controller.bandwidth, "EGI bandwidth B");
  cmd->add_option("--l-max", cfg.controller.l_max, "max SH degree (-1: B-1)");
  cmd->add_flag("--normalized-norms", cfg.controller.iter1_normalized_norms,
                "normalize convergence-test norms by their iteration-1 values");
  cmd->add_option("--degree-damping", cfg.controller.gradient_degree_damping,
                  "degree damping exponent for the rotation ascent (0 disables)");
  cmd->add_option("--damping-anneal", cfg.controller.damping_anneal_iters,
                  "iterations for the damping exponent to decay by 1/e (0: fixed)");
  cmd->add_option("--polish-iters", cfg.controller.polish_iters,
                  "post-convergence refinement iterations (0 disables)");
  cmd->add_option("--pad-cells", cfg.controller.grid_pad_cells, "grid padding in cells");
  cmd->add_option("--min-grid-dim", cfg.controller.min_grid_dim, "minimum grid dimension");
}

PointCloud make_bench_model(std::uint64_t seed) {
  ShapeSpec box;
  box.kind = ShapeKind::Box;
  box.size = Eigen::Vector3d(0.07, 0.05, 0.04);
  PointCloud model = generate_shape(box, 1100, seed);

  ShapeSpec cyl;
  cyl.kind = ShapeKind::Cylinder;
  cyl.radius = 0.016;
  cyl.height = 0.055;
  PointCloud tube = generate_shape(cyl, 800, seed + 1);
  RigidTransform tilt;
  tilt.rotation = exp_so3(Eigen::Vector3d(0.7, 0.25, 0.0));
  tilt.translation = Eigen::Vector3d(0.032, 0.018, 0.026);
  model = merge_clouds(model, apply_transform(tube, tilt));

  ShapeSpec ball;
  ball.kind = ShapeKind::Sphere;
  ball.radius = 0.018;
  ball.center = Eigen::Vector3d(-0.028, 0.024, -0.012);
  return merge_clouds(model, generate_shape(ball, 600, seed + 2));
}

int cmd_gen(const std::string& shape, double radius, const std::string& size,
            double height, const std::string& center, int n, std::uint64_t seed,
            const std::string& out) {
  ShapeSpec spec;
  if (shape == "sphere") spec.kind = ShapeKind::Sphere;
  else if (shape == "box") spec.kind = ShapeKind::Box;
  else if (shape == "cylinder") spec.kind = ShapeKind::Cylinder;
  else throw ValidationError("unknown shape `" + shape + "` (sphere|box|cylinder)");
  spec.radius = radius;
  spec.height = height;
  if (!size.empty()) spec.size = parse_vec3(size, "--size");
  if (!center.empty()) spec.center = parse_vec3(center, "--center");

  const PointCloud cloud = generate_shape(spec, n, seed);
  save_cloud(cloud, out);
  std::cout << "wrote " << cloud.size() << " points to " << out << "\n";
  return kExitOk;
}

int cmd_register(const RunConfig& cfg) {
  const PointCloud reference = load_cloud(cfg.reference_path);
  const PointCloud target = load_cloud(cfg.target_path);

  ensure_dir(cfg.output_dir);
  const AlignmentResult res = run_alignment(reference, target, cfg.controller);

  const std::string dir = cfg.output_dir + "/";
  write_file(dir + "transform.json", transform_json(res).dump(2) + "\n");
  {
    std::ofstream trace(dir + "trace.csv");
    if (!trace) throw IoError("cannot write: " + dir + "trace.csv");
    write_trace_csv(res.trace, trace);
  }
  cfg.save(dir + "resolved.config");

  std::ostringstream summary;
  summary << "status: " << to_string(res.status) << "\n"
          << "converged: " << (res.converged ? "true" : "false") << "\n"
          << "iterations: " << res.iterations << "\n"
          << "trace_rows: " << res.trace.rows.size() << "\n"
          << "final_Jt: " << res.final_jt << "\n"
          << "final_Jr: " << res.final_jr << "\n"
          << "final_grad_t_norm_m: " << res.final_grad_t.norm() << "\n"
          << "final_grad_cr_norm: " << res.final_grad_r.norm() << "\n"
          << "grid: " << res.grid.nx << "x" << res.grid.ny << "x" << res.grid.nz
          << " @ " << res.grid.resolution << " m\n"
          << "ms_per_iteration: " << res.ms_per_iteration << "\n";
  if (!res.message.empty()) summary << "message: " << res.message << "\n";
  write_file(dir + "summary.txt", summary.str());

  std::cout << summary.str();
  return res.converged ? kExitOk : kExitNotConverged;
}

int cmd_servo(const RunConfig& cfg, const std::string& goal_text,
              const std::string& start_text, bool use_arm) {
  const PointCloud scene = load_cloud(cfg.scene_path);
  const RigidTransform goal = parse_pose(goal_text, "--goal");
  const RigidTransform start = parse_pose(start_text, "--start");

  ensure_dir(cfg.output_dir);
  SimulatedArm arm = SimulatedArm::make_default();
  const ServoSimResult res = run_servo_sim(scene, goal, start, use_arm ? &arm : nullptr,
                                           cfg.controller, cfg.noise_sigma, cfg.seed);

  const std::string dir = cfg.output_dir + "/";
  {
    Trace trace;
    for (const auto& rec : res.trajectory) {
      IterationRecord row;
      row.iter = rec.tick;
      row.jt = rec.jt;
      row.jr = rec.jr;
      row.grad_t_norm = rec.grad_t_norm;
      row.grad_cr_norm = rec.grad_cr_norm;
      row.t = rec.camera_pose.translation;
      row.q = quaternion_wxyz(rec.camera_pose.rotation);
      trace.rows.push_back(row);
    }
    std::ofstream f(dir + "trace.csv");
    if (!f) throw IoError("cannot write: " + dir + "trace.csv");
    write_trace_csv(trace, f);
  }
  {
    std::ofstream f(dir + "trajectory.csv");
    if (!f) throw IoError("cannot write: " + dir + "trajectory.csv");
    f << "tick,x,y,z,qw,qx,qy,qz,pose_err_m,pose_err_deg\n";
    for (const auto& rec : res.trajectory) {
      const Eigen::Vector4d q = quaternion_wxyz(rec.camera_pose.rotation);
      f << rec.tick << ',' << rec.camera_pose.translation.x() << ','
        << rec.camera_pose.translation.y() << ',' << rec.camera_pose.translation.z()
        << ',' << q[0] << ',' << q[1] << ',' << q[2] << ',' << q[3] << ','
        << (rec.camera_pose.translation - goal.translation).norm() << ','
        << geodesic_angle(rec.camera_pose.rotation, goal.rotation) * 180.0 / M_PI
        << '\n';
    }
  }
  cfg.save(dir + "resolved.config");

  std::ostringstream summary;
  summary << "status: " << to_string(res.status) << "\n"
          << "converged: " << (res.converged ? "true" : "false") << "\n"
          << "ticks: " << res.ticks << "\n"
          << "final_pose_error_m: " << res.pose_error_m << "\n"
          << "final_pose_error_deg: " << res.pose_error_rad * 180.0 / M_PI << "\n";
  if (!res.message.empty()) summary << "message: " << res.message << "\n";
  write_file(dir + "summary.txt", summary.str());

  std::cout << summary.str();
  return res.converged ? kExitOk : kExitNotConverged;
}

int cmd_dump(const std::string& cloud_path, const std::string& what,
             const RunConfig& cfg) {
  const PointCloud cloud = load_cloud(cloud_path);
  if (what == "voxels") {
    const GridSpec spec = fit_grid({&cloud}, cfg.controller.resolution,
                                   cfg.controller.min_grid_dim,
                                   cfg.controller.grid_pad_cells);
    dump_voxels(voxelize(cloud, spec, cfg.controller.voxel_mode), std::cout);
  } else if (what == "egi") {
    dump_egi(build_egi(cloud, cfg.controller.bandwidth), std::cout);
  } else if (what == "sh") {
    const RealShBasis basis(cfg.controller.bandwidth, cfg.controller.effective_l_max());
    dump_sh(sh_forward(build_egi(cloud, cfg.controller.bandwidth), basis), std::cout);
  } else {
    throw ValidationError("unknown dump kind `" + what + "` (voxels|egi|sh)");
  }
  return kExitOk;
}

int cmd_bench(int n, std::uint64_t seed, const RunConfig& cfg) {
  if (n < 1) throw ValidationError("--n must be >= 1");
  const ControllerConfig& cc = cfg.controller;
  cc.validate();

  const PointCloud model = make_bench_model(seed);
  RigidTransform offset;
  offset.rotation = exp_so3(Eigen::Vector3d(0.2, -0.3, 0.4));
  offset.translation = Eigen::Vector3d(0.03, 0.02, -0.025);
  const PointCloud target = apply_transform(model, offset, centroid(model));

  const GridSpec grid = fit_grid({&model, &target}, cc.resolution, cc.min_grid_dim,
                                 cc.grid_pad_cells);
  const ReferenceFeatures ref = make_reference_features(model, grid, cc);

  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t) {
    return std::chrono::duration<double, std::milli>(clock::now() - t).count();
  };

  std::vector<double> total_ms;
  double voxel_ms = 0, fft_ms = 0, sh_ms = 0, grad_ms = 0;
  ServoState state;
  for (int i = 0; i < n; ++i) {
    RigidTransform inv = inverse(state.h);
    const auto t_all = clock::now();
    const PointCloud current = apply_transform(target, inv, ref.center);

    auto t0 = clock::now();
    const VoxelGrid g_grid = voxelize(current, grid, cc.voxel_mode);
    const Egi g_egi = build_egi(current, cc.bandwidth);
    voxel_ms += ms_since(t0);

    t0 = clock::now();
    const SpectralVolume g_spec = dft3(g_grid);
    const TranslationEstimate est = phase_correlate(ref.spectrum, g_spec);
    fft_ms += ms_since(t0);

    t0 = clock::now();
    ShCoefficients g_raw = sh_forward(g_egi, *ref.basis);
    const double g_norm = std::sqrt(g_raw.squared_norm());
    const ShCoefficients g_sh = g_raw.scaled(g_norm > 0.0 ? 1.0 / g_norm : 1.0);
    sh_ms += ms_since(t0);

    t0 = clock::now();
    Eigen::Vector3d ascent = Eigen::Vector3d::Zero();
    for (int l = 0; l <= ref.basis->l_max(); ++l) {
      const double w = std::pow(1.0 + static_cast<double>(l) * (l + 1.0),
                                -cc.gradient_degree_damping);
      for (int k = 0; k < 3; ++k) {
        ascent[k] += w * g_sh.degrees[l].dot(ref.basis->generator(l, k) * ref.sh.degrees[l]);
      }
    }
    const Eigen::Vector3d grad_r = ref.gradient_metric_pinv * ascent;
    grad_ms += ms_since(t0);

    state.h.rotation = state.h.rotation * exp_so3(cc.lambda_r * grad_r);
    state.h.translation += cc.lambda_t * est.grad_t;
    total_ms.push_back(ms_since(t_all));
  }

  std::vector<double> sorted = total_ms;
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  const double median = sorted[sorted.size() / 2];

  std::cout << "iterations: " << n << "\n"
            << "grid: " << grid.nx << "x" << grid.ny << "x" << grid.nz << " @ "
            << grid.resolution << " m\n"
            << "bandwidth: " << cc.bandwidth << ", l_max: " << cc.effective_l_max()
            << "\n"
            << "mean_ms_per_iteration: " << mean << "\n"
            << "median_ms_per_iteration: " << median << "\n"
            << "stage_voxelize_egi_ms: " << voxel_ms / n << "\n"
            << "stage_fft_ms: " << fft_ms / n << "\n"
            << "stage_sh_ms: " << sh_ms / n << "\n"
            << "stage_gradient_ms: " << grad_ms / n << "\n";
  if (mean > 100.0) {
    std::cout << "warning: mean iteration time exceeds the 100 ms desk-scale target\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"direct 3D visual servoing in the spectral domain"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  // Config file values act as defaults; explicit flags override them. Scan
  // for --config before the real parse so the loaded values are in place.
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg(argv[i]);
    if (arg == "--config" && i + 1 < argc) {
      config_path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      config_path = std::string(arg.substr(9));
    }
  }
  if (!config_path.empty()) {
    try {
      cfg = RunConfig::load(config_path);
    } catch (const IoError& e) {
      std::cerr << "io error: " << e.what() << "\n";
      return kExitIo;
    } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    }
  }

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic cloud file");
  std::string gen_shape = "sphere", gen_size, gen_center, gen_out;
  double gen_radius = 0.05, gen_height = 0.1;
  int gen_n = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--shape", gen_shape, "sphere|box|cylinder")->required();
  gen->add_option("--n", gen_n, "sample count")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output cloud file")->required();
  gen->add_option("--radius", gen_radius, "sphere/cylinder radius (m)");
  gen->add_option("--size", gen_size, "box size sx,sy,sz (m)");
  gen->add_option("--height", gen_height, "cylinder height (m)");
  gen->add_option("--center", gen_center, "shape center x,y,z (m)");

  // register
  auto* reg = app.add_subcommand("register", "align a reference cloud onto a target");
  reg->add_option("--reference", cfg.reference_path, "reference cloud file");
  reg->add_option("--target", cfg.target_path, "target cloud file");
  reg->add_option("--out", cfg.output_dir, "output directory");
  reg->add_option("--config", config_path, "run configuration file");
  add_controller_flags(reg, cfg);

  // servo
  auto* servo = app.add_subcommand("servo", "closed-loop positioning simulation");
  std::string servo_goal, servo_start;
  bool servo_arm = false;
  servo->add_option("--scene", cfg.scene_path, "scene cloud file");
  servo->add_option("--goal", servo_goal, "goal camera pose x,y,z,rx,ry,rz");
  servo->add_option("--start", servo_start, "start camera pose x,y,z,rx,ry,rz");
  servo->add_option("--out", cfg.output_dir, "output directory");
  servo->add_option("--config", config_path, "run configuration file");
  servo->add_flag("--arm", servo_arm, "drive the simulated 7-joint arm");
  servo->add_option("--noise-sigma", cfg.noise_sigma, "sensor position noise (m)");
  servo->add_option("--seed", cfg.seed, "noise seed");
  add_controller_flags(servo, cfg);

  // dump
  auto* dump = app.add_subcommand("dump", "print voxel/EGI/SH features of a cloud");
  std::string dump_cloud, dump_what;
  dump->add_option("--cloud", dump_cloud, "cloud file")->required();
  dump->add_option("--what", dump_what, "voxels|egi|sh")->required();
  add_controller_flags(dump, cfg);

  // bench
  auto* bench = app.add_subcommand("bench", "time the per-iteration pipeline");
  int bench_n = 50;
  std::uint64_t bench_seed = 1;
  bench->add_option("--n", bench_n, "iterations to time");
  bench->add_option("--seed", bench_seed, "model seed");
  bench->add_option("--config", config_path, "run configuration file");
  add_controller_flags(bench, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(gen_shape, gen_radius, gen_size, gen_height, gen_center,
                     gen_n, gen_seed, gen_out);
    }
    if (reg->parsed()) {
      if (cfg.reference_path.empty() || cfg.target_path.empty()) {
        throw ValidationError("register needs --reference and --target");
      }
      cfg.experiment = "C1";
      return cmd_register(cfg);
    }
    if (servo->parsed()) {
      if (cfg.scene_path.empty() || servo_goal.empty() || servo_start.empty()) {
        throw ValidationError("servo needs --scene, --goal and --start");
      }
      cfg.experiment = "servo";
      return cmd_servo(cfg, servo_goal, servo_start, servo_arm);
    }
    if (dump->parsed()) {
      return cmd_dump(dump_cloud, dump_what, cfg);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_n, bench_seed, cfg);
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
