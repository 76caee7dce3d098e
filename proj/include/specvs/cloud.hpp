#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specvs/se3.hpp"

namespace specvs {

/// Ordered set of 3D points (meters) with unit surface normals.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Throws ValidationError if sizes mismatch or any normal deviates from unit
/// length by more than 1e-6.
void validate_cloud(const PointCloud& cloud);

Eigen::Vector3d centroid(const PointCloud& cloud);

/// p -> R*(p - center) + center + T; normals rotate with the cloud.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& h,
                           const Eigen::Vector3d& center = Eigen::Vector3d::Zero());

PointCloud merge_clouds(const PointCloud& a, const PointCloud& b);

enum class ShapeKind { Sphere, Box, Cylinder };

/// Geometry of a synthetic shape. radius applies to sphere/cylinder, size to
/// box (full edge lengths), height to cylinder.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  double radius = 0.05;
  Eigen::Vector3d size = Eigen::Vector3d(0.1, 0.1, 0.1);
  double height = 0.1;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// Uniform surface sampling with analytic outward normals. Deterministic for
/// a given seed. Throws ValidationError for nonpositive dimensions or
/// sample_count < 1.
PointCloud generate_shape(const ShapeSpec& spec, int sample_count,
                          std::uint64_t seed);

/// Back-face culling: keeps exactly the points with n . (viewpoint - p) > 0.
/// The result may be empty.
PointCloud partial_view(const PointCloud& cloud, const Eigen::Vector3d& viewpoint);

/// ASCII cloud file: one `x y z nx ny nz` record per line, '#' comments.
/// Malformed lines raise IoError naming the line; non-unit normals raise
/// ValidationError unless renormalize is set.
PointCloud load_cloud(const std::string& path, bool renormalize = false);
void save_cloud(const PointCloud& cloud, const std::string& path);

}  // namespace specvs
