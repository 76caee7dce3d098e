#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "specvs/cloud.hpp"

namespace specvs {

/// Equiangular discretization of the unit sphere for bandwidth B:
/// theta_j = pi*(2j+1)/(4B), phi_k = pi*k/B, j,k in [0, 2B).
struct SphereGrid {
  int bandwidth = 16;
  std::vector<double> theta_nodes;
  std::vector<double> phi_nodes;

  static SphereGrid make(int bandwidth);
  int node_count() const { return 4 * bandwidth * bandwidth; }
};

/// Extended Gaussian Image: 2B x 2B histogram of normal directions,
/// row-major (theta row j, phi column k), integer counts.
struct Egi {
  SphereGrid grid;
  std::vector<long> counts;

  long at(int j, int k) const {
    return counts[static_cast<std::size_t>(j) * 2 * grid.bandwidth + k];
  }
  long& at(int j, int k) {
    return counts[static_cast<std::size_t>(j) * 2 * grid.bandwidth + k];
  }
  long total() const;
};

/// theta in [0, pi], phi in [0, 2*pi); full-quadrant arctangents.
/// Throws ValidationError for a near-zero vector.
std::pair<double, double> cartesian_to_spherical(const Eigen::Vector3d& n);

/// Nearest (j, k) node; phi distance is taken modulo 2*pi, ties break toward
/// the lower index.
std::pair<int, int> nearest_node(const SphereGrid& grid, double theta, double phi);

Egi build_egi(const PointCloud& cloud, int bandwidth);

/// `B` header line, then the 2B x 2B count matrix, one theta row per line.
void dump_egi(const Egi& egi, std::ostream& os);

}  // namespace specvs
