#include "specvs/fourier.hpp"

#include <cmath>
#include <mutex>

#include <fftw3.h>

#include "specvs/errors.hpp"

namespace specvs {

namespace {

// The FFTW planner is not thread-safe; plan creation/destruction is locked,
// execution is not.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void run_fft(std::vector<std::complex<double>>& data, const GridSpec& spec,
             int direction) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_3d(spec.nx, spec.ny, spec.nz, ptr, ptr, direction,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
}

int wrap_decode(int index, int dim) {
  return index > dim / 2 ? index - dim : index;
}

// Fractional peak offset from the peak sample and its two circular
// neighbours along one axis (parabolic vertex), clamped to half a cell.
double fractional_offset(double prev, double peak, double next) {
  const double denom = prev - 2.0 * peak + next;
  if (std::abs(denom) < 1e-300) return 0.0;
  const double d = 0.5 * (prev - next) / denom;
  return std::clamp(d, -0.5, 0.5);
}

}  // namespace

SpectralVolume dft3(const VoxelGrid& grid) {
  SpectralVolume out;
  out.spec = grid.spec;
  out.coeffs.assign(grid.values.begin(), grid.values.end());
  run_fft(out.coeffs, out.spec, FFTW_FORWARD);
  return out;
}

TranslationEstimate phase_correlate(const SpectralVolume& reference,
                                    const SpectralVolume& observed,
                                    bool subvoxel_refine) {
  if (!(reference.spec == observed.spec)) {
    throw ValidationError("phase_correlate: grids use different lattices");
  }
  const GridSpec& spec = reference.spec;
  const std::size_t n = spec.cell_count();
  if (std::abs(reference.coeffs[0]) < 1e-12 && std::abs(observed.coeffs[0]) < 1e-12) {
    throw ValidationError("phase_correlate: both grids are empty");
  }

  std::vector<std::complex<double>> cross(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::complex<double> c = reference.coeffs[i] * std::conj(observed.coeffs[i]);
    const double mag = std::abs(c);
    cross[i] = mag < 1e-12 ? std::complex<double>(0.0, 0.0) : c / mag;
  }
  run_fft(cross, spec, FFTW_BACKWARD);

  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = cross[i].real();
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  const int pk = static_cast<int>(best % spec.nz);
  const int pj = static_cast<int>((best / spec.nz) % spec.ny);
  const int pi = static_cast<int>(best / (static_cast<std::size_t>(spec.nz) * spec.ny));

  TranslationEstimate est;
  est.peak_index = {pi, pj, pk};
  est.peak_value = best_val / static_cast<double>(n);

  // The correlation of reference with conj(observed) peaks at minus the
  // displacement of the observed grid, hence the sign flip.
  Eigen::Vector3d cells(-wrap_decode(pi, spec.nx), -wrap_decode(pj, spec.ny),
                        -wrap_decode(pk, spec.nz));

  if (subvoxel_refine) {
    const std::array<int, 3> dims = {spec.nx, spec.ny, spec.nz};
    const std::array<int, 3> peak = {pi, pj, pk};
    auto delta_at = [&](int i, int j, int k) {
      return cross[(static_cast<std::size_t>(i) * spec.ny + j) * spec.nz + k].real();
    };
    for (int a = 0; a < 3; ++a) {
      std::array<int, 3> lo = peak, hi = peak;
      lo[a] = (peak[a] + dims[a] - 1) % dims[a];
      hi[a] = (peak[a] + 1) % dims[a];
      const double frac = fractional_offset(delta_at(lo[0], lo[1], lo[2]),
                                            best_val,
                                            delta_at(hi[0], hi[1], hi[2]));
      cells[a] -= frac;
    }
  }
  est.grad_t = spec.resolution * cells;
  return est;
}

double translation_cost(const VoxelGrid& reference, const VoxelGrid& observed,
                        const Eigen::Vector3d& shift) {
  if (!(reference.spec == observed.spec)) {
    throw ValidationError("translation_cost: grids use different lattices");
  }
  const GridSpec& sp = reference.spec;
  const std::array<int, 3> s = {
      static_cast<int>(std::lround(shift.x() / sp.resolution)),
      static_cast<int>(std::lround(shift.y() / sp.resolution)),
      static_cast<int>(std::lround(shift.z() / sp.resolution))};
  auto mod = [](int v, int n) { return ((v % n) + n) % n; };
  double cost = 0.0;
  for (int i = 0; i < sp.nx; ++i) {
    for (int j = 0; j < sp.ny; ++j) {
      for (int k = 0; k < sp.nz; ++k) {
        const double f =
            reference.at(mod(i - s[0], sp.nx), mod(j - s[1], sp.ny), mod(k - s[2], sp.nz));
        const double d = observed.at(i, j, k) - f;
        cost += d * d;
      }
    }
  }
  return 0.5 * cost;
}

}  // namespace specvs
