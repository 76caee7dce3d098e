#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "specvs/voxel_grid.hpp"

namespace specvs {

/// 3D Fourier coefficients of a voxel grid, row-major (u, v, w) layout
/// matching the source grid's (i, j, k) layout.
struct SpectralVolume {
  GridSpec spec;
  std::vector<std::complex<double>> coeffs;

  const std::complex<double>& at(int u, int v, int w) const {
    return coeffs[(static_cast<std::size_t>(u) * spec.ny + v) * spec.nz + w];
  }
};

/// Forward DFT with kernel exp(-i*2*pi*(u*x/M + v*y/N + w*z/L)).
SpectralVolume dft3(const VoxelGrid& grid);

struct TranslationEstimate {
  /// Displacement of the observed grid relative to the reference grid, in
  /// meters: observed(x) ~ reference(x - grad_t / r). Wrap-aware decoding,
  /// so each component lies in (-r*dim/2, r*dim/2].
  Eigen::Vector3d grad_t = Eigen::Vector3d::Zero();
  /// Correlation peak height, normalized so identical grids give ~1.
  double peak_value = 0.0;
  std::array<int, 3> peak_index = {0, 0, 0};
};

/// Normalized cross-power spectrum of (reference, observed), inverse
/// transformed; the argmax is the relative shift. Spectrum entries with
/// magnitude below 1e-12 are zeroed. Throws ValidationError when both grids
/// are empty. With subvoxel_refine, a 3-point fit around the peak adds a
/// fractional offset per axis.
TranslationEstimate phase_correlate(const SpectralVolume& reference,
                                    const SpectralVolume& observed,
                                    bool subvoxel_refine = false);

/// 0.5 * sum over cells of (observed(x) - reference(x - round(T/r)))^2,
/// with circular indexing. Zero when the rounded shift realigns the grids.
double translation_cost(const VoxelGrid& reference, const VoxelGrid& observed,
                        const Eigen::Vector3d& shift);

}  // namespace specvs
