#pragma once

#include "backaction/fock.hpp"
#include "backaction/krylov.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace backaction {

/// 1D Bose-Hubbard model. Energies in units of the hopping J (default 1),
/// times in hbar/J.
struct BoseHubbardParams {
  int site_count = 3;
  int atom_count = 3;
  double hopping = 1.0;      // J; zero switches hopping off entirely
  double interaction = 0.0;  // U, i.e. U/J for J = 1
  bool open_boundary = true;

  void validate() const;
};

/// Complex amplitudes psi_u over a FockBasis.
class ManyBodyState {
public:
  ManyBodyState() = default;
  explicit ManyBodyState(Eigen::VectorXcd amplitudes) : psi_(std::move(amplitudes)) {}

  static ManyBodyState basis_state(std::size_t dimension, std::size_t index);

  std::size_t size() const noexcept { return static_cast<std::size_t>(psi_.size()); }
  const Eigen::VectorXcd& amplitudes() const noexcept { return psi_; }
  Eigen::VectorXcd& amplitudes() noexcept { return psi_; }
  std::complex<double> operator[](std::size_t u) const { return psi_(static_cast<Eigen::Index>(u)); }

  double norm() const { return psi_.norm(); }
  /// Throws ZeroNormError on a vanishing state.
  void normalize();
  /// <this|other>
  std::complex<double> overlap(const ManyBodyState& other) const { return psi_.dot(other.psi_); }
  /// Rotates the global phase so the largest-modulus amplitude is real positive.
  void fix_phase();

private:
  Eigen::VectorXcd psi_;
};

struct DenseSpectrum {
  Eigen::VectorXd energies;  // ascending
  Eigen::MatrixXd vectors;   // columns
};

struct HamiltonianOptions {
  /// Dimensions up to this size also carry a full eigendecomposition.
  std::size_t dense_limit = 2000;
};

class HamiltonianOperator {
public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const BoseHubbardParams& params() const noexcept { return params_; }
  const FockBasis& basis() const noexcept { return *basis_; }
  const std::shared_ptr<const FockBasis>& basis_ptr() const noexcept { return basis_; }
  const Matrix& matrix() const noexcept { return matrix_; }
  /// Present only for dimensions within the dense limit.
  const DenseSpectrum* dense_spectrum() const noexcept {
    return spectrum_ ? &*spectrum_ : nullptr;
  }

  double element(std::size_t row, std::size_t col) const {
    return matrix_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }
  void apply(const Eigen::Ref<const Eigen::VectorXd>& in, Eigen::VectorXd& out) const;
  void apply(const Eigen::Ref<const Eigen::VectorXcd>& in, Eigen::VectorXcd& out) const;
  double expectation(const ManyBodyState& state) const;

  friend HamiltonianOperator build_hamiltonian(const BoseHubbardParams&,
                                               std::shared_ptr<const FockBasis>,
                                               const HamiltonianOptions&);

private:
  BoseHubbardParams params_;
  std::shared_ptr<const FockBasis> basis_;
  Matrix matrix_;
  std::optional<DenseSpectrum> spectrum_;
};

/// H = -J sum_j (b+_j b_{j+1} + h.c.) + U/2 sum_j n_j (n_j - 1).
/// Throws BasisMismatchError when the basis does not match (M, N).
HamiltonianOperator build_hamiltonian(const BoseHubbardParams& params,
                                      std::shared_ptr<const FockBasis> basis,
                                      const HamiltonianOptions& options = {});

struct EigensolverOptions {
  krylov::LanczosOptions lanczos{};
  bool force_iterative = false;
  double degeneracy_gap = 1e-12;
};

struct GroundState {
  ManyBodyState state;
  double energy = 0.0;
  double residual = 0.0;
  bool degenerate = false;
  std::string method;  // "dense" or "lanczos"
};

GroundState ground_state(const HamiltonianOperator& hamiltonian, const EigensolverOptions& options = {});

struct EvolveOptions {
  krylov::ExpOptions krylov{};
  bool force_krylov = false;
};

/// exp(-i H dt) psi. Uses the dense spectrum when present, Krylov otherwise.
ManyBodyState evolve(const ManyBodyState& state, const HamiltonianOperator& hamiltonian, double dt,
                     const EvolveOptions& options = {});

/// Fixed-step propagator. The dense path caches the full unitary for dt.
class Propagator {
public:
  Propagator(const HamiltonianOperator& hamiltonian, double dt, EvolveOptions options = {});

  double dt() const noexcept { return dt_; }
  ManyBodyState apply(const ManyBodyState& state) const;

private:
  const HamiltonianOperator* hamiltonian_;
  double dt_;
  EvolveOptions options_;
  std::optional<Eigen::MatrixXcd> unitary_;
};

/// basis_index,occupation,re,im
void write_state_csv(std::ostream& os, const FockBasis& basis, const ManyBodyState& state);
/// index,energy
void write_spectrum_csv(std::ostream& os, const DenseSpectrum& spectrum);

/// Reads basis_index,re,im rows (header and '#' comments skipped) and normalizes.
ManyBodyState read_state_csv(std::istream& is, std::size_t dimension);

} // namespace backaction
