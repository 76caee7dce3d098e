#include "specvs/sphere_harmonics.hpp"

#include <cmath>
#include <ostream>

#include "specvs/errors.hpp"

namespace specvs {

namespace {

using Complex = std::complex<double>;
constexpr Complex kI(0.0, 1.0);
constexpr double kFourPi = 4.0 * M_PI;

// Normalized associated Legendre values Pbar_l^m(cos theta) with the
// Condon-Shortley phase, so that Y_l^m = Pbar_l^m(cos theta) * exp(i m phi).
// out(l, m) is filled for 0 <= m <= l <= l_max.
void legendre_table(int l_max, double x, Eigen::MatrixXd& out) {
  out.setZero(l_max + 1, l_max + 1);
  const double sx = std::sqrt(std::max(0.0, 1.0 - x * x));
  double pmm = 1.0 / std::sqrt(kFourPi);  // Pbar_0^0
  for (int m = 0; m <= l_max; ++m) {
    out(m, m) = pmm;
    if (m + 1 <= l_max) {
      out(m + 1, m) = x * std::sqrt(2.0 * m + 3.0) * pmm;
    }
    for (int l = m + 2; l <= l_max; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - m * m) /
                                 (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      out(l, m) = a * (x * out(l - 1, m) - b * out(l - 2, m));
    }
    // Pbar_{m+1}^{m+1} = -sqrt((2m+3)/(2m+2)) * sqrt(1-x^2) * Pbar_m^m
    pmm *= -std::sqrt((2.0 * m + 3.0) / (2.0 * m + 2.0)) * sx;
  }
}

// Plain Legendre polynomials P_0..P_n at x.
void legendre_plain(int n, double x, Eigen::VectorXd& out) {
  out.resize(n + 1);
  out[0] = 1.0;
  if (n >= 1) out[1] = x;
  for (int k = 2; k <= n; ++k) {
    out[k] = ((2.0 * k - 1.0) * x * out[k - 1] - (k - 1.0) * out[k - 2]) / k;
  }
}

Eigen::MatrixXcd make_tmat(int l) {
  const int n = 2 * l + 1;
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(n, n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  t(l, l) = 1.0;  // m = 0 row
  for (int m = 1; m <= l; ++m) {
    const double cs = (m % 2 == 0) ? 1.0 : -1.0;  // (-1)^m
    // cosine-type row (+m): ((-1)^m Y^m + Y^{-m}) / sqrt(2)
    t(l + m, l + m) = cs * inv_sqrt2;
    t(l + m, l - m) = inv_sqrt2;
    // sine-type row (-m): ((-1)^m Y^m - Y^{-m}) / (i sqrt(2))
    t(l - m, l + m) = -kI * cs * inv_sqrt2;
    t(l - m, l - m) = kI * inv_sqrt2;
  }
  return t;
}

// Angular-momentum generators in the complex |l m> basis (index m + l):
// J_z = diag(m); J_x, J_y built from the raising/lowering operators.
// Rotations act as D(R) = exp(-i alpha J_z) exp(-i beta J_y) exp(-i gamma J_z).
Eigen::MatrixXcd make_jaxis(int l, int axis) {
  const int n = 2 * l + 1;
  Eigen::MatrixXcd jplus = Eigen::MatrixXcd::Zero(n, n);
  for (int m = -l; m < l; ++m) {
    jplus(l + m + 1, l + m) =
        std::sqrt(static_cast<double>(l) * (l + 1) - static_cast<double>(m) * (m + 1));
  }
  const Eigen::MatrixXcd jminus = jplus.adjoint();
  switch (axis) {
    case 0:
      return (jplus + jminus) / 2.0;
    case 1:
      return (jplus - jminus) / (2.0 * kI);
    default: {
      Eigen::MatrixXcd jz = Eigen::MatrixXcd::Zero(n, n);
      for (int m = -l; m <= l; ++m) jz(l + m, l + m) = m;
      return jz;
    }
  }
}

void check_imaginary_residue(const Eigen::MatrixXcd& m, const char* what) {
  const double residue = m.imag().cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.real().cwiseAbs().maxCoeff());
  if (residue > 1e-9 * scale) {
    throw ValidationError(std::string(what) +
                          ": imaginary residue too large (" + std::to_string(residue) + ")");
  }
}

}  // namespace

double ShCoefficients::squared_norm() const {
  double s = 0.0;
  for (const auto& d : degrees) s += d.squaredNorm();
  return s;
}

ShCoefficients ShCoefficients::scaled(double factor) const {
  ShCoefficients out;
  out.degrees.reserve(degrees.size());
  for (const auto& d : degrees) out.degrees.push_back(factor * d);
  return out;
}

RealShBasis::RealShBasis(int bandwidth, int l_max)
    : bandwidth_(bandwidth),
      l_max_(l_max < 0 ? bandwidth - 1 : l_max),
      grid_(SphereGrid::make(bandwidth)) {
  if (l_max_ < 0 || l_max_ > 31) {
    throw ValidationError("l_max must be in [0, 31], got " + std::to_string(l_max_));
  }
  const int two_b = 2 * bandwidth_;
  const int nodes = grid_.node_count();

  // Theta quadrature weights: solve the Legendre moment conditions
  // sum_j w_j P_n(cos theta_j) = 2*delta_{n0} for n < 2B, which makes the
  // combined weights exact for all products of harmonics below the bandwidth.
  Eigen::MatrixXd vander(two_b, two_b);
  Eigen::VectorXd pn;
  for (int j = 0; j < two_b; ++j) {
    legendre_plain(two_b - 1, std::cos(grid_.theta_nodes[j]), pn);
    for (int n = 0; n < two_b; ++n) vander(n, j) = pn[n];
  }
  Eigen::VectorXd moments = Eigen::VectorXd::Zero(two_b);
  moments[0] = 2.0;
  const Eigen::VectorXd theta_w = vander.colPivHouseholderQr().solve(moments);

  weights_.resize(nodes);
  for (int j = 0; j < two_b; ++j) {
    for (int k = 0; k < two_b; ++k) {
      weights_[j * two_b + k] = theta_w[j] * (M_PI / bandwidth_);
    }
  }

  // Complex harmonics at the nodes, converted through T^l and checked real.
  std::vector<Eigen::MatrixXd> ptab(two_b);
  for (int j = 0; j < two_b; ++j) {
    legendre_table(l_max_, std::cos(grid_.theta_nodes[j]), ptab[j]);
  }
  tmat_.reserve(l_max_ + 1);
  node_values_.reserve(l_max_ + 1);
  for (int l = 0; l <= l_max_; ++l) {
    tmat_.push_back(make_tmat(l));
    Eigen::MatrixXcd y(2 * l + 1, nodes);
    for (int j = 0; j < two_b; ++j) {
      for (int k = 0; k < two_b; ++k) {
        const double phi = grid_.phi_nodes[k];
        const int node = j * two_b + k;
        for (int m = 0; m <= l; ++m) {
          const Complex e = std::exp(kI * (static_cast<double>(m) * phi));
          const double p = ptab[j](l, m);
          y(l + m, node) = p * e;
          if (m > 0) {
            const double cs = (m % 2 == 0) ? 1.0 : -1.0;
            y(l - m, node) = cs * p * std::conj(e);
          }
        }
      }
    }
    Eigen::MatrixXcd s = tmat_[l] * y;
    check_imaginary_residue(s, "real basis construction");
    node_values_.push_back(s.real());
  }

  // J_y eigendecomposition per degree: d^l(beta) = W exp(-i beta Lambda) W^+.
  jy_vectors_.reserve(l_max_ + 1);
  jy_values_.reserve(l_max_ + 1);
  generators_.reserve(l_max_ + 1);
  for (int l = 0; l <= l_max_; ++l) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(make_jaxis(l, 1));
    jy_vectors_.push_back(eig.eigenvectors());
    jy_values_.push_back(eig.eigenvalues());

    std::array<Eigen::MatrixXd, 3> gen;
    for (int axis = 0; axis < 3; ++axis) {
      const Eigen::MatrixXcd u =
          tmat_[l].conjugate() * (-kI * make_jaxis(l, axis)) * tmat_[l].transpose();
      check_imaginary_residue(u, "generator construction");
      gen[axis] = u.real();
    }
    generators_.push_back(std::move(gen));
  }
}

Eigen::VectorXd RealShBasis::evaluate_degree(int l, double theta, double phi) const {
  if (l < 0 || l > l_max_) {
    throw ValidationError("evaluate_degree: degree out of range");
  }
  Eigen::MatrixXd ptab;
  legendre_table(l, std::cos(theta), ptab);
  Eigen::VectorXcd y(2 * l + 1);
  for (int m = 0; m <= l; ++m) {
    const Complex e = std::exp(kI * (static_cast<double>(m) * phi));
    y(l + m) = ptab(l, m) * e;
    if (m > 0) {
      const double cs = (m % 2 == 0) ? 1.0 : -1.0;
      y(l - m) = cs * ptab(l, m) * std::conj(e);
    }
  }
  const Eigen::VectorXcd s = tmat_[l] * y;
  return s.real();
}

Eigen::MatrixXcd RealShBasis::wigner_d_complex(int l, const EulerZyz& e) const {
  const int n = 2 * l + 1;
  const Eigen::MatrixXcd& w = jy_vectors_[l];
  const Eigen::VectorXd& lam = jy_values_[l];
  Eigen::VectorXcd phase(n);
  for (int i = 0; i < n; ++i) phase[i] = std::exp(-kI * (e.beta * lam[i]));
  Eigen::MatrixXcd d = w * phase.asDiagonal() * w.adjoint();
  for (int mp = -l; mp <= l; ++mp) {
    for (int m = -l; m <= l; ++m) {
      d(l + mp, l + m) *= std::exp(-kI * (e.alpha * mp + e.gamma * m));
    }
  }
  return d;
}

ShCoefficients sh_forward_samples(const std::vector<double>& samples,
                                  const RealShBasis& basis) {
  if (static_cast<int>(samples.size()) != basis.grid().node_count()) {
    throw ValidationError("sh_forward: sample count does not match grid");
  }
  Eigen::VectorXd weighted(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    weighted[i] = samples[i] * basis.node_weights()[i];
  }
  ShCoefficients out;
  out.degrees.reserve(basis.l_max() + 1);
  for (int l = 0; l <= basis.l_max(); ++l) {
    out.degrees.push_back(basis.node_values(l) * weighted);
  }
  return out;
}

ShCoefficients sh_forward(const Egi& egi, const RealShBasis& basis) {
  if (egi.grid.bandwidth != basis.bandwidth()) {
    throw ValidationError("sh_forward: EGI bandwidth " +
                          std::to_string(egi.grid.bandwidth) +
                          " does not match basis bandwidth " +
                          std::to_string(basis.bandwidth()));
  }
  std::vector<double> samples(egi.counts.begin(), egi.counts.end());
  return sh_forward_samples(samples, basis);
}

std::vector<double> sh_synthesize(const ShCoefficients& coeffs,
                                  const RealShBasis& basis) {
  if (coeffs.degree_count() > basis.l_max() + 1) {
    throw ValidationError("sh_synthesize: coefficients exceed basis degrees");
  }
  const int nodes = basis.grid().node_count();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(nodes);
  for (int l = 0; l < coeffs.degree_count(); ++l) {
    acc += basis.node_values(l).transpose() * coeffs.degrees[l];
  }
  return std::vector<double>(acc.data(), acc.data() + nodes);
}

WignerBlocks wigner_u(const Eigen::Matrix3d& rotation, int l_max,
                      const RealShBasis& basis) {
  if (!is_rotation(rotation, 1e-6)) {
    throw ValidationError("wigner_u: input is not a rotation matrix");
  }
  if (l_max > basis.l_max()) {
    throw ValidationError("wigner_u: l_max exceeds basis degrees");
  }
  const EulerZyz e = matrix_to_zyz(rotation);
  WignerBlocks out;
  out.blocks.reserve(l_max + 1);
  for (int l = 0; l <= l_max; ++l) {
    const Eigen::MatrixXcd d = basis.wigner_d_complex(l, e);
    const Eigen::MatrixXcd u = basis.change_of_basis(l).conjugate() * d *
                               basis.change_of_basis(l).transpose();
    check_imaginary_residue(u, "wigner_u");
    out.blocks.push_back(u.real());
  }
  return out;
}

std::vector<Eigen::MatrixXd> wigner_u_derivative(int axis, int l_max,
                                                 const RealShBasis& basis) {
  if (axis < 0 || axis > 2) {
    throw ValidationError("wigner_u_derivative: axis must be 0, 1 or 2");
  }
  if (l_max > basis.l_max()) {
    throw ValidationError("wigner_u_derivative: l_max exceeds basis degrees");
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(l_max + 1);
  for (int l = 0; l <= l_max; ++l) out.push_back(basis.generator(l, axis));
  return out;
}

namespace {

void check_degrees(const ShCoefficients& f, const ShCoefficients& g) {
  if (f.degree_count() != g.degree_count()) {
    throw ValidationError("coefficient degree mismatch: " +
                          std::to_string(f.degree_count()) + " vs " +
                          std::to_string(g.degree_count()));
  }
}

}  // namespace

double so3_correlation(const ShCoefficients& f, const ShCoefficients& g,
                       const WignerBlocks& u) {
  check_degrees(f, g);
  double acc = 0.0;
  for (int l = 0; l < f.degree_count(); ++l) {
    acc += g.degrees[l].dot(u.blocks[l] * f.degrees[l]);
  }
  return acc / kFourPi;
}

double so3_correlation(const ShCoefficients& f, const ShCoefficients& g,
                       const Eigen::Matrix3d& rotation, const RealShBasis& basis) {
  check_degrees(f, g);
  const WignerBlocks u = wigner_u(rotation, f.degree_count() - 1, basis);
  return so3_correlation(f, g, u);
}

Eigen::Vector3d so3_correlation_gradient(const ShCoefficients& f,
                                         const ShCoefficients& g,
                                         const Eigen::Matrix3d& rotation,
                                         const RealShBasis& basis) {
  check_degrees(f, g);
  const int l_max = f.degree_count() - 1;
  const bool at_identity =
      (rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-14;
  WignerBlocks u;
  if (!at_identity) u = wigner_u(rotation, l_max, basis);

  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  for (int l = 0; l <= l_max; ++l) {
    for (int axis = 0; axis < 3; ++axis) {
      const Eigen::VectorXd df = basis.generator(l, axis) * f.degrees[l];
      grad[axis] += at_identity ? g.degrees[l].dot(df)
                                : g.degrees[l].dot(u.blocks[l] * df);
    }
  }
  return grad / kFourPi;
}

double rotation_cost(const Egi& f, const Egi& g, const Eigen::Matrix3d& rotation) {
  if (f.grid.bandwidth != g.grid.bandwidth) {
    throw ValidationError("rotation_cost: bandwidth mismatch");
  }
  const Eigen::Matrix3d rt = rotation.transpose();
  const int two_b = 2 * f.grid.bandwidth;
  double cost = 0.0;
  for (int j = 0; j < two_b; ++j) {
    const double st = std::sin(f.grid.theta_nodes[j]);
    const double ct = std::cos(f.grid.theta_nodes[j]);
    for (int k = 0; k < two_b; ++k) {
      const double phi = f.grid.phi_nodes[k];
      const Eigen::Vector3d dir(st * std::cos(phi), st * std::sin(phi), ct);
      const auto [theta_r, phi_r] = cartesian_to_spherical(rt * dir);
      const auto [jj, kk] = nearest_node(f.grid, theta_r, phi_r);
      const double d = static_cast<double>(g.at(j, k)) - static_cast<double>(f.at(jj, kk));
      cost += d * d;
    }
  }
  return 0.5 * cost;
}

void dump_sh(const ShCoefficients& coeffs, std::ostream& os) {
  for (int l = 0; l < coeffs.degree_count(); ++l) {
    for (int m = -l; m <= l; ++m) {
      os << l << ' ' << m << ' ' << coeffs.degrees[l][m + l] << '\n';
    }
  }
}

}  // namespace specvs
