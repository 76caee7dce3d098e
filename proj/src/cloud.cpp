#include "specvs/cloud.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "specvs/errors.hpp"

namespace specvs {

void validate_cloud(const PointCloud& cloud) {
  if (cloud.points.size() != cloud.normals.size()) {
    throw ValidationError("cloud has " + std::to_string(cloud.points.size()) +
                          " points but " + std::to_string(cloud.normals.size()) +
                          " normals");
  }
  for (std::size_t i = 0; i < cloud.normals.size(); ++i) {
    const double n = cloud.normals[i].norm();
    if (std::abs(n - 1.0) > 1e-6) {
      throw ValidationError("normal " + std::to_string(i) +
                            " is not unit length (|n| = " + std::to_string(n) + ")");
    }
  }
}

Eigen::Vector3d centroid(const PointCloud& cloud) {
  if (cloud.empty()) {
    throw ValidationError("centroid of an empty cloud");
  }
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& h,
                           const Eigen::Vector3d& center) {
  PointCloud out;
  out.points.reserve(cloud.size());
  out.normals.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.points.push_back(h.rotation * (cloud.points[i] - center) + center +
                         h.translation);
    out.normals.push_back(h.rotation * cloud.normals[i]);
  }
  return out;
}

PointCloud merge_clouds(const PointCloud& a, const PointCloud& b) {
  PointCloud out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  out.normals.insert(out.normals.end(), b.normals.begin(), b.normals.end());
  return out;
}

namespace {

PointCloud sample_sphere(double radius, const Eigen::Vector3d& center, int n,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
    while (d.norm() < 1e-12) d = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    d.normalize();
    out.points.push_back(center + radius * d);
    out.normals.push_back(d);
  }
  return out;
}

PointCloud sample_box(const Eigen::Vector3d& size, const Eigen::Vector3d& center,
                      int n, std::mt19937_64& rng) {
  // Faces weighted by area; each face sampled uniformly.
  const std::array<double, 3> half = {size.x() / 2, size.y() / 2, size.z() / 2};
  const std::array<double, 6> areas = {
      size.y() * size.z(), size.y() * size.z(), size.x() * size.z(),
      size.x() * size.z(), size.x() * size.y(), size.x() * size.y()};
  std::discrete_distribution<int> face(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int f = face(rng);
    const int axis = f / 2;
    const double sign = (f % 2 == 0) ? 1.0 : -1.0;
    Eigen::Vector3d p;
    p[axis] = sign * half[axis];
    p[(axis + 1) % 3] = u(rng) * half[(axis + 1) % 3];
    p[(axis + 2) % 3] = u(rng) * half[(axis + 2) % 3];
    Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
    nrm[axis] = sign;
    out.points.push_back(center + p);
    out.normals.push_back(nrm);
  }
  return out;
}

PointCloud sample_cylinder(double radius, double height,
                           const Eigen::Vector3d& center, int n,
                           std::mt19937_64& rng) {
  // Axis along z. Lateral surface plus both caps, area weighted.
  const double lateral = 2.0 * M_PI * radius * height;
  const double cap = M_PI * radius * radius;
  std::discrete_distribution<int> part({lateral, cap, cap});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int which = part(rng);
    const double phi = 2.0 * M_PI * u01(rng);
    if (which == 0) {
      const double z = (u01(rng) - 0.5) * height;
      Eigen::Vector3d nrm(std::cos(phi), std::sin(phi), 0.0);
      out.points.push_back(center + Eigen::Vector3d(radius * nrm.x(),
                                                    radius * nrm.y(), z));
      out.normals.push_back(nrm);
    } else {
      const double sign = (which == 1) ? 1.0 : -1.0;
      const double rr = radius * std::sqrt(u01(rng));
      out.points.push_back(center + Eigen::Vector3d(rr * std::cos(phi),
                                                    rr * std::sin(phi),
                                                    sign * height / 2));
      out.normals.push_back(Eigen::Vector3d(0.0, 0.0, sign));
    }
  }
  return out;
}

}  // namespace

PointCloud generate_shape(const ShapeSpec& spec, int sample_count,
                          std::uint64_t seed) {
  if (sample_count < 1) {
    throw ValidationError("sample_count must be >= 1");
  }
  std::mt19937_64 rng(seed);
  switch (spec.kind) {
    case ShapeKind::Sphere:
      if (spec.radius <= 0.0) throw ValidationError("sphere radius must be > 0");
      return sample_sphere(spec.radius, spec.center, sample_count, rng);
    case ShapeKind::Box:
      if (spec.size.minCoeff() <= 0.0) throw ValidationError("box size must be > 0");
      return sample_box(spec.size, spec.center, sample_count, rng);
    case ShapeKind::Cylinder:
      if (spec.radius <= 0.0 || spec.height <= 0.0) {
        throw ValidationError("cylinder radius and height must be > 0");
      }
      return sample_cylinder(spec.radius, spec.height, spec.center, sample_count, rng);
  }
  throw ValidationError("unknown shape kind");
}

PointCloud partial_view(const PointCloud& cloud, const Eigen::Vector3d& viewpoint) {
  if (cloud.empty()) {
    throw ValidationError("partial_view of an empty cloud");
  }
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.normals[i].dot(viewpoint - cloud.points[i]) > 0.0) {
      out.points.push_back(cloud.points[i]);
      out.normals.push_back(cloud.normals[i]);
    }
  }
  return out;
}

namespace {

// Locale-independent float parsing; returns false on any trailing garbage.
bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf, len);
  // snprintf honors the global locale's decimal separator; keep the file
  // format locale-free.
  for (char& c : s) {
    if (c == ',') c = '.';
  }
  return s;
}

}  // namespace

PointCloud load_cloud(const std::string& path, bool renormalize) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open cloud file: " + path);
  }
  PointCloud out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
    while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
      sv.remove_suffix(1);
    if (sv.empty() || sv.front() == '#') continue;

    std::array<double, 6> vals{};
    std::size_t field = 0;
    std::size_t pos = 0;
    while (pos < sv.size()) {
      std::size_t end = sv.find(' ', pos);
      if (end == std::string_view::npos) end = sv.size();
      if (end > pos) {
        if (field >= 6 || !parse_double(sv.substr(pos, end - pos), vals[field])) {
          throw IoError(path + ":" + std::to_string(line_no) +
                        ": expected 6 numeric fields `x y z nx ny nz`");
        }
        ++field;
      }
      pos = end + 1;
    }
    if (field != 6) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected 6 fields, got " +
                    std::to_string(field));
    }
    Eigen::Vector3d n(vals[3], vals[4], vals[5]);
    const double nn = n.norm();
    if (std::abs(nn - 1.0) > 1e-6) {
      if (!renormalize || nn < 1e-12) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": normal is not unit length (|n| = " +
                              std::to_string(nn) + ")");
      }
      n /= nn;
    }
    out.points.emplace_back(vals[0], vals[1], vals[2]);
    out.normals.push_back(n);
  }
  return out;
}

void save_cloud(const PointCloud& cloud, const std::string& path) {
  validate_cloud(cloud);
  std::ofstream outf(path);
  if (!outf) {
    throw IoError("cannot write cloud file: " + path);
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto& n = cloud.normals[i];
    outf << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
         << format_double(p.z()) << ' ' << format_double(n.x()) << ' '
         << format_double(n.y()) << ' ' << format_double(n.z()) << '\n';
  }
  if (!outf) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace specvs
