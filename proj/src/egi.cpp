#include "specvs/egi.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "specvs/errors.hpp"

namespace specvs {

namespace {
bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }
}

SphereGrid SphereGrid::make(int bandwidth) {
  if (!power_of_two(bandwidth)) {
    throw ValidationError("bandwidth must be a positive power of two, got " +
                          std::to_string(bandwidth));
  }
  SphereGrid g;
  g.bandwidth = bandwidth;
  g.theta_nodes.resize(2 * bandwidth);
  g.phi_nodes.resize(2 * bandwidth);
  for (int j = 0; j < 2 * bandwidth; ++j) {
    g.theta_nodes[j] = M_PI * (2 * j + 1) / (4.0 * bandwidth);
  }
  for (int k = 0; k < 2 * bandwidth; ++k) {
    g.phi_nodes[k] = M_PI * k / bandwidth;
  }
  return g;
}

long Egi::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

std::pair<double, double> cartesian_to_spherical(const Eigen::Vector3d& n) {
  const double norm = n.norm();
  if (norm < 1e-12) {
    throw ValidationError("cartesian_to_spherical: zero vector");
  }
  const double theta = std::atan2(std::hypot(n.x(), n.y()), n.z());
  double phi = std::atan2(n.y(), n.x());
  if (phi < 0.0) phi += 2.0 * M_PI;
  if (phi >= 2.0 * M_PI) phi = 0.0;
  return {theta, phi};
}

std::pair<int, int> nearest_node(const SphereGrid& grid, double theta, double phi) {
  const int two_b = 2 * grid.bandwidth;
  // theta_j = pi*(2j+1)/(4B): uniform with spacing pi/(2B), offset pi/(4B).
  const double tj = theta * (2.0 * grid.bandwidth) / M_PI - 0.5;
  // ceil(x - 0.5) rounds to nearest with ties toward the lower index.
  int j = static_cast<int>(std::ceil(tj - 0.5));
  j = std::max(0, std::min(two_b - 1, j));
  const double pk = phi * grid.bandwidth / M_PI;
  int k = static_cast<int>(std::ceil(pk - 0.5));
  if (k >= two_b) k -= two_b;  // wrap-around: phi close to 2*pi maps to node 0
  if (k < 0) k += two_b;
  return {j, k};
}

Egi build_egi(const PointCloud& cloud, int bandwidth) {
  if (cloud.empty()) {
    throw ValidationError("build_egi: empty cloud");
  }
  Egi egi;
  egi.grid = SphereGrid::make(bandwidth);
  egi.counts.assign(egi.grid.node_count(), 0);
  for (const auto& n : cloud.normals) {
    const auto [theta, phi] = cartesian_to_spherical(n);
    const auto [j, k] = nearest_node(egi.grid, theta, phi);
    ++egi.at(j, k);
  }
  return egi;
}

void dump_egi(const Egi& egi, std::ostream& os) {
  const int two_b = 2 * egi.grid.bandwidth;
  os << egi.grid.bandwidth << '\n';
  for (int j = 0; j < two_b; ++j) {
    for (int k = 0; k < two_b; ++k) {
      if (k) os << ' ';
      os << egi.at(j, k);
    }
    os << '\n';
  }
}

}  // namespace specvs
