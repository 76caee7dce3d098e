#include "specvs/voxel_grid.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "specvs/errors.hpp"

namespace specvs {

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int next_power_of_two(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

GridSpec::GridSpec(double r, const Eigen::Vector3d& o, int m, int n, int l)
    : resolution(r), origin(o), nx(m), ny(n), nz(l) {
  if (resolution <= 0.0) {
    throw ValidationError("grid resolution must be > 0");
  }
  if (!power_of_two(nx) || !power_of_two(ny) || !power_of_two(nz)) {
    throw ValidationError("grid dims must be powers of two, got " +
                          std::to_string(nx) + "x" + std::to_string(ny) + "x" +
                          std::to_string(nz));
  }
}

bool GridSpec::operator==(const GridSpec& other) const {
  return resolution == other.resolution && origin == other.origin &&
         nx == other.nx && ny == other.ny && nz == other.nz;
}

double VoxelGrid::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

std::array<int, 3> voxel_index(const Eigen::Vector3d& p, const GridSpec& spec) {
  std::array<int, 3> idx{};
  const std::array<int, 3> dims = {spec.nx, spec.ny, spec.nz};
  static const char* axis_names[3] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    const double cell = std::floor((p[a] - spec.origin[a]) / spec.resolution);
    if (cell < 0.0 || cell >= static_cast<double>(dims[a])) {
      throw ValidationError(std::string("point outside grid box on axis ") +
                            axis_names[a] + ": coordinate " + std::to_string(p[a]) +
                            " not in [" + std::to_string(spec.origin[a]) + ", " +
                            std::to_string(spec.origin[a] +
                                           spec.resolution * dims[a]) +
                            ")");
    }
    idx[a] = static_cast<int>(cell);
  }
  return idx;
}

VoxelGrid voxelize(const PointCloud& cloud, const GridSpec& spec, VoxelMode mode) {
  VoxelGrid grid;
  grid.spec = spec;
  grid.values.assign(spec.cell_count(), 0.0);
  for (const auto& p : cloud.points) {
    const auto [i, j, k] = voxel_index(p, spec);
    if (mode == VoxelMode::Occupancy) {
      grid.at(i, j, k) = 1.0;
    } else {
      grid.at(i, j, k) += 1.0;
    }
  }
  return grid;
}

VoxelGrid shift_grid(const VoxelGrid& grid, const std::array<int, 3>& s) {
  const auto& sp = grid.spec;
  VoxelGrid out;
  out.spec = sp;
  out.values.assign(sp.cell_count(), 0.0);
  auto mod = [](int v, int n) { return ((v % n) + n) % n; };
  for (int i = 0; i < sp.nx; ++i) {
    for (int j = 0; j < sp.ny; ++j) {
      for (int k = 0; k < sp.nz; ++k) {
        out.at(i, j, k) =
            grid.at(mod(i - s[0], sp.nx), mod(j - s[1], sp.ny), mod(k - s[2], sp.nz));
      }
    }
  }
  return out;
}

GridSpec fit_grid(const std::vector<const PointCloud*>& clouds, double resolution,
                  int min_dim, int pad_cells) {
  if (resolution <= 0.0) {
    throw ValidationError("grid resolution must be > 0");
  }
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(std::numeric_limits<double>::lowest());
  std::size_t total = 0;
  for (const PointCloud* c : clouds) {
    for (const auto& p : c->points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
      ++total;
    }
  }
  if (total == 0) {
    throw ValidationError("fit_grid: no points");
  }
  GridSpec spec;
  spec.resolution = resolution;
  int dims[3];
  for (int a = 0; a < 3; ++a) {
    const int needed =
        static_cast<int>(std::ceil((hi[a] - lo[a]) / resolution)) + 2 * pad_cells + 1;
    dims[a] = next_power_of_two(std::max(needed, min_dim));
  }
  spec.nx = dims[0];
  spec.ny = dims[1];
  spec.nz = dims[2];
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  spec.origin = center - 0.5 * resolution * Eigen::Vector3d(dims[0], dims[1], dims[2]);
  return spec;
}

void dump_voxels(const VoxelGrid& grid, std::ostream& os) {
  const auto& sp = grid.spec;
  os << sp.nx << ' ' << sp.ny << ' ' << sp.nz << ' ' << sp.resolution << ' '
     << sp.origin.x() << ' ' << sp.origin.y() << ' ' << sp.origin.z() << '\n';
  for (int i = 0; i < sp.nx; ++i) {
    for (int j = 0; j < sp.ny; ++j) {
      for (int k = 0; k < sp.nz; ++k) {
        const double v = grid.at(i, j, k);
        if (v != 0.0) {
          os << i << ' ' << j << ' ' << k << ' ' << v << '\n';
        }
      }
    }
  }
}

}  // namespace specvs
