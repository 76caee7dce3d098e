#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "specvs/egi.hpp"
#include "specvs/se3.hpp"

namespace specvs {

/// Real spherical-harmonic coefficients, one (2l+1)-vector per degree l.
/// Index within a degree is m + l for m in [-l, l].
struct ShCoefficients {
  std::vector<Eigen::VectorXd> degrees;

  int degree_count() const { return static_cast<int>(degrees.size()); }
  double squared_norm() const;
  ShCoefficients scaled(double factor) const;
};

/// Per-degree rotation operators U^l(R) acting on real coefficients.
struct WignerBlocks {
  std::vector<Eigen::MatrixXd> blocks;
};

/// Precomputed real spherical-harmonic machinery for one bandwidth:
/// basis values at the equiangular grid nodes, quadrature weights exact for
/// band-limited products, the complex-to-real change of basis T^l, and the
/// so(3) generator images u^l(e_k).
///
/// Built once and shared read-only; all queries are const.
class RealShBasis {
 public:
  explicit RealShBasis(int bandwidth, int l_max = -1);

  int bandwidth() const { return bandwidth_; }
  int l_max() const { return l_max_; }
  const SphereGrid& grid() const { return grid_; }

  /// (2l+1) x node_count real basis values S^l at the grid nodes.
  const Eigen::MatrixXd& node_values(int l) const { return node_values_[l]; }

  /// Quadrature weights per node; sums to 4*pi.
  const Eigen::VectorXd& node_weights() const { return weights_; }

  /// Complex-to-real change of basis T^l, rows indexed by the real basis.
  const Eigen::MatrixXcd& change_of_basis(int l) const { return tmat_[l]; }

  /// Derivative block u^l(e_axis) of the rotation operator at identity;
  /// skew-symmetric, axis in {0, 1, 2} for {x, y, z}.
  const Eigen::MatrixXd& generator(int l, int axis) const {
    return generators_[l][axis];
  }

  /// S^l evaluated at an arbitrary direction.
  Eigen::VectorXd evaluate_degree(int l, double theta, double phi) const;

  /// Complex Wigner-D matrix for the ZYZ angles at degree l.
  Eigen::MatrixXcd wigner_d_complex(int l, const EulerZyz& e) const;

 private:
  int bandwidth_;
  int l_max_;
  SphereGrid grid_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::MatrixXd> node_values_;
  std::vector<Eigen::MatrixXcd> tmat_;
  std::vector<Eigen::MatrixXcd> jy_vectors_;  // eigenvectors of J_y per degree
  std::vector<Eigen::VectorXd> jy_values_;
  std::vector<std::array<Eigen::MatrixXd, 3>> generators_;
};

/// Quadrature projection of the EGI onto the real basis. Exact to roundoff
/// for band-limited inputs with degrees <= bandwidth - 1.
ShCoefficients sh_forward(const Egi& egi, const RealShBasis& basis);

/// Same projection for arbitrary node samples (row-major, 2B x 2B).
ShCoefficients sh_forward_samples(const std::vector<double>& samples,
                                  const RealShBasis& basis);

/// Pointwise synthesis at the grid nodes.
std::vector<double> sh_synthesize(const ShCoefficients& coeffs,
                                  const RealShBasis& basis);

/// Real rotation operators U^l(R) = conj(T^l) D^l(R) (T^l)^T for l <= l_max.
/// Rejects non-rotation input.
WignerBlocks wigner_u(const Eigen::Matrix3d& rotation, int l_max,
                      const RealShBasis& basis);

/// Analytic derivative blocks u^l(e_axis) for l in [0, l_max].
std::vector<Eigen::MatrixXd> wigner_u_derivative(int axis, int l_max,
                                                 const RealShBasis& basis);

/// (1/4pi) * sum_l g_l^T U^l(R) f_l.
double so3_correlation(const ShCoefficients& f, const ShCoefficients& g,
                       const Eigen::Matrix3d& rotation, const RealShBasis& basis);
double so3_correlation(const ShCoefficients& f, const ShCoefficients& g,
                       const WignerBlocks& u);

/// Component k: (1/4pi) * sum_l g_l^T U^l(R) u^l(e_k) f_l.
Eigen::Vector3d so3_correlation_gradient(const ShCoefficients& f,
                                         const ShCoefficients& g,
                                         const Eigen::Matrix3d& rotation,
                                         const RealShBasis& basis);

/// 0.5 * sum over nodes of (g - f(R^T node))^2 with nearest-node resampling.
double rotation_cost(const Egi& f, const Egi& g, const Eigen::Matrix3d& rotation);

/// One `l m value` line per coefficient.
void dump_sh(const ShCoefficients& coeffs, std::ostream& os);

}  // namespace specvs
