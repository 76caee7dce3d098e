#include "specvs/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "specvs/errors.hpp"

namespace specvs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  for (char& c : s) {
    if (c == ',') c = '.';
  }
  return s;
}

double to_double(const std::string& v, const std::string& key) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ValidationError("config key " + key + ": bad number `" + v + "`");
  }
  return out;
}

long long to_int(const std::string& v, const std::string& key) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ValidationError("config key " + key + ": bad integer `" + v + "`");
  }
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key " + key + ": bad boolean `" + v + "`");
}

}  // namespace

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "# specvs run configuration\n";
  os << "experiment=" << experiment << '\n';
  os << "reference=" << reference_path << '\n';
  os << "target=" << target_path << '\n';
  os << "scene=" << scene_path << '\n';
  os << "output_dir=" << output_dir << '\n';
  os << "seed=" << seed << '\n';
  os << "noise_sigma=" << fmt(noise_sigma) << '\n';
  os << "lambda_t=" << fmt(controller.lambda_t) << '\n';
  os << "lambda_r=" << fmt(controller.lambda_r) << '\n';
  os << "epsilon_g=" << fmt(controller.epsilon_g) << '\n';
  os << "max_iters=" << controller.max_iters << '\n';
  os << "resolution=" << fmt(controller.resolution) << '\n';
  os << "bandwidth=" << controller.bandwidth << '\n';
  os << "l_max=" << controller.l_max << '\n';
  os << "iter1_normalized_norms=" << (controller.iter1_normalized_norms ? "true" : "false") << '\n';
  os << "gradient_degree_damping=" << fmt(controller.gradient_degree_damping) << '\n';
  os << "damping_anneal_iters=" << controller.damping_anneal_iters << '\n';
  os << "support_mask_dilation=" << controller.support_mask_dilation << '\n';
  os << "subvoxel_peak=" << (controller.subvoxel_peak ? "true" : "false") << '\n';
  os << "polish_iters=" << controller.polish_iters << '\n';
  os << "polish_lambda_t=" << fmt(controller.polish_lambda_t) << '\n';
  os << "polish_lambda_r=" << fmt(controller.polish_lambda_r) << '\n';
  os << "voxel_mode=" << (controller.voxel_mode == VoxelMode::Occupancy ? "occupancy" : "count") << '\n';
  os << "min_grid_dim=" << controller.min_grid_dim << '\n';
  os << "grid_pad_cells=" << controller.grid_pad_cells << '\n';
  return os.str();
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& where) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(where + ":" + std::to_string(line_no) +
                            ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key == "experiment") cfg.experiment = val;
    else if (key == "reference") cfg.reference_path = val;
    else if (key == "target") cfg.target_path = val;
    else if (key == "scene") cfg.scene_path = val;
    else if (key == "output_dir") cfg.output_dir = val;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(val, key));
    else if (key == "noise_sigma") cfg.noise_sigma = to_double(val, key);
    else if (key == "lambda_t") cfg.controller.lambda_t = to_double(val, key);
    else if (key == "lambda_r") cfg.controller.lambda_r = to_double(val, key);
    else if (key == "epsilon_g") cfg.controller.epsilon_g = to_double(val, key);
    else if (key == "max_iters") cfg.controller.max_iters = static_cast<int>(to_int(val, key));
    else if (key == "resolution") cfg.controller.resolution = to_double(val, key);
    else if (key == "bandwidth") cfg.controller.bandwidth = static_cast<int>(to_int(val, key));
    else if (key == "l_max") cfg.controller.l_max = static_cast<int>(to_int(val, key));
    else if (key == "iter1_normalized_norms") cfg.controller.iter1_normalized_norms = to_bool(val, key);
    else if (key == "gradient_degree_damping") cfg.controller.gradient_degree_damping = to_double(val, key);
    else if (key == "damping_anneal_iters") cfg.controller.damping_anneal_iters = static_cast<int>(to_int(val, key));
    else if (key == "support_mask_dilation") cfg.controller.support_mask_dilation = static_cast<int>(to_int(val, key));
    else if (key == "subvoxel_peak") cfg.controller.subvoxel_peak = to_bool(val, key);
    else if (key == "polish_iters") cfg.controller.polish_iters = static_cast<int>(to_int(val, key));
    else if (key == "polish_lambda_t") cfg.controller.polish_lambda_t = to_double(val, key);
    else if (key == "polish_lambda_r") cfg.controller.polish_lambda_r = to_double(val, key);
    else if (key == "voxel_mode") {
      if (val == "occupancy") cfg.controller.voxel_mode = VoxelMode::Occupancy;
      else if (val == "count") cfg.controller.voxel_mode = VoxelMode::Count;
      else throw ValidationError("config key voxel_mode: expected occupancy|count");
    }
    else if (key == "min_grid_dim") cfg.controller.min_grid_dim = static_cast<int>(to_int(val, key));
    else if (key == "grid_pad_cells") cfg.controller.grid_pad_cells = static_cast<int>(to_int(val, key));
    else {
      throw ValidationError(where + ":" + std::to_string(line_no) +
                            ": unknown config key `" + key + "`");
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write config file: " + path);
  }
  out << to_text();
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

bool RunConfig::operator==(const RunConfig& other) const {
  return to_text() == other.to_text();
}

}  // namespace specvs
