#pragma once

#include "backaction/fock.hpp"
#include "backaction/hamiltonian.hpp"

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

namespace backaction {

/// Probe and lattice geometry. Lengths in lattice spacings a, wavenumbers in 1/a.
/// Sites sit at r_j = (0, site_origin + j) along y; the probe comes in along x.
struct ScatteringConfig {
  double coupling = 0.1;             // g
  double k0 = std::numbers::pi;      // probe wavenumber
  double wannier_width = 0.0;        // sigma of |w(r)|^2 ~ exp(-r^2/sigma^2); 0 = point atoms
  int quadrature_points = 4096;      // midpoint grid on [-pi, pi]
  double site_origin = 0.0;

  void validate() const;
};

/// k(theta) = k0 (1 - cos theta, -sin theta)
std::array<double, 2> momentum_transfer(double theta, double k0);

/// Fourier transform of the Gaussian Wannier density, exp(-sigma^2 |k|^2 / 4).
double form_factor(double theta, const ScatteringConfig& config);

/// Precomputed scattering tables over one Fock basis. Immutable after build.
///
/// Everything that depends on a state only through |f_u(theta)|^2 is stored per
/// equivalence class and evaluated through the pair-correlation signature:
///
///   |f_u(theta)|^2 = I(theta)^2 [ g_0 + sum_{d>0} 2 g_d cos(d k0 sin theta) ].
///
/// cumulative(d, k) holds the running midpoint integral of the d-th term, so the
/// scattering CDF of any state is a weighted sum of M tables.
class ScatteringKernel {
public:
  /// Throws UnphysicalCouplingError naming the worst class if g is too large.
  static ScatteringKernel build(std::shared_ptr<const FockBasis> basis, const ScatteringConfig& config);

  const ScatteringConfig& config() const noexcept { return config_; }
  const FockBasis& basis() const noexcept { return *basis_; }
  const std::shared_ptr<const FockBasis>& basis_ptr() const noexcept { return basis_; }
  const EquivalenceClasses& classes() const noexcept { return classes_; }

  /// g^2 / (2 pi)
  double prefactor() const noexcept { return prefactor_; }

  std::size_t grid_size() const noexcept { return grid_.size(); }
  double grid_step() const noexcept { return step_; }
  double grid_angle(std::size_t k) const { return grid_[k]; }
  double grid_form_factor(std::size_t k) const { return form_[k]; }

  /// A_u for basis state u.
  double nonscatter_amplitude(std::size_t u) const { return class_amplitude_[classes_.class_of[u]]; }
  double class_nonscatter_amplitude(std::size_t c) const { return class_amplitude_[c]; }
  /// Integral of |f_c(theta)|^2 over the grid.
  double class_scatter_integral(std::size_t c) const { return class_integral_[c]; }
  /// |f_c(theta_k)|^2 on grid point k from the signature.
  double class_intensity(std::size_t c, std::size_t k) const;

  double cumulative(std::size_t d, std::size_t k) const { return cumulative_[d][k]; }
  /// Signature integral for an arbitrary occupation vector on this lattice.
  double scatter_integral(const PairCorrelationSignature& sig) const;

  /// f(theta) = I(theta) sum_j n_j exp(i r_j . k(theta)), evaluated directly.
  std::complex<double> structure_factor(std::span<const int> occupations, double theta) const;

  /// Probability mass of each class, sum_{u in c} |psi_u|^2.
  std::vector<double> class_weights(const ManyBodyState& state) const;

private:
  ScatteringKernel() = default;

  ScatteringConfig config_;
  std::shared_ptr<const FockBasis> basis_;
  EquivalenceClasses classes_;
  double prefactor_ = 0.0;
  double step_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> form_;
  std::vector<std::vector<double>> weight_;      // [d][k]: I^2 * (1 or 2 cos(d phi_k))
  std::vector<std::vector<double>> cumulative_;  // [d][k], k = 0..N_theta
  std::vector<double> class_integral_;
  std::vector<double> class_amplitude_;
};

/// A for a single configuration; throws UnphysicalCouplingError on a negative radicand.
double nonscatter_amplitude(const OccupationVector& n, const ScatteringKernel& kernel);

/// P(theta) = g^2/(2 pi) sum_u |psi_u|^2 |f_u(theta)|^2, computed directly from
/// the complex structure factors.
double angular_density(const ManyBodyState& state, const ScatteringKernel& kernel, double theta);
std::vector<double> angular_density(const ManyBodyState& state, const ScatteringKernel& kernel,
                                    std::span<const double> thetas);

/// Midpoint-rule integral of P(theta) over the kernel grid.
double total_scatter_probability(const ManyBodyState& state, const ScatteringKernel& kernel);
/// P^NS = sum_u |psi_u A_u|^2
double nonscatter_probability(const ManyBodyState& state, const ScatteringKernel& kernel);

/// psi_u -> f_u(theta) psi_u, renormalized. The real envelope I(theta) is a
/// global factor and drops out. Throws ZeroNormError if detection at theta was
/// impossible.
ManyBodyState project_scatter(const ManyBodyState& state, double theta, const ScatteringKernel& kernel);
/// psi_u -> A_u psi_u, renormalized.
ManyBodyState project_nonscatter(const ManyBodyState& state, const ScatteringKernel& kernel);

/// class_id,nonscatter_amplitude,scatter_integral
void write_kernel_csv(std::ostream& os, const ScatteringKernel& kernel);
/// theta,density
void write_curve_csv(std::ostream& os, std::span<const double> thetas, std::span<const double> values);

} // namespace backaction
