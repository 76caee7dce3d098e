#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "specvs/cloud.hpp"

namespace specvs {

/// Fixed lattice shared by the grids being correlated. Dims are powers of two.
struct GridSpec {
  double resolution = 0.008;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  int nx = 64;
  int ny = 64;
  int nz = 64;

  GridSpec() = default;
  GridSpec(double r, const Eigen::Vector3d& o, int m, int n, int l);

  std::size_t cell_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  Eigen::Vector3d box_max() const {
    return origin + resolution * Eigen::Vector3d(nx, ny, nz);
  }
  bool operator==(const GridSpec& other) const;
};

enum class VoxelMode {
  Occupancy,  // cell = 1 iff at least one point maps there
  Count       // cell = number of points in the cell
};

struct VoxelGrid {
  GridSpec spec;
  std::vector<double> values;  // row-major (i, j, k) -> (i*ny + j)*nz + k

  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(i) * spec.ny + j) * spec.nz + k];
  }
  double& at(int i, int j, int k) {
    return values[(static_cast<std::size_t>(i) * spec.ny + j) * spec.nz + k];
  }
  double sum() const;
};

/// Floor division of (p - origin) by the resolution. Throws ValidationError
/// naming the axis when p is outside the grid box.
std::array<int, 3> voxel_index(const Eigen::Vector3d& p, const GridSpec& spec);

VoxelGrid voxelize(const PointCloud& cloud, const GridSpec& spec,
                   VoxelMode mode = VoxelMode::Occupancy);

/// Circular shift: out[x] = in[x - s] (content moves by +s cells).
VoxelGrid shift_grid(const VoxelGrid& grid, const std::array<int, 3>& s);

/// Smallest power-of-two lattice (at least min_dim per axis) containing every
/// listed cloud with pad_cells of clearance on each side, centered on the
/// union bounding box.
GridSpec fit_grid(const std::vector<const PointCloud*>& clouds, double resolution,
                  int min_dim = 64, int pad_cells = 12);

/// Text header `M N L r ox oy oz`, then nonzero cells as `i j k value` lines.
void dump_voxels(const VoxelGrid& grid, std::ostream& os);

}  // namespace specvs
