#pragma once

#include <cstdint>
#include <string>

#include "specvs/servo.hpp"

namespace specvs {

/// One run's full configuration: controller parameters plus paths, seed,
/// sensor noise and the experiment tag. Serializes to a flat `key=value`
/// text file with `#` comments; load(save(x)) == x.
struct RunConfig {
  ControllerConfig controller;
  std::string reference_path;
  std::string target_path;
  std::string scene_path;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  std::string experiment = "C1";  // C1 | C2 | C3 | servo

  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_text() const;
  static RunConfig from_text(const std::string& text, const std::string& where);

  bool operator==(const RunConfig& other) const;
};

}  // namespace specvs
