#include "backaction/hamiltonian.hpp"

#include "backaction/errors.hpp"

#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace backaction {

void BoseHubbardParams::validate() const {
  if (site_count < 1)
    throw ConfigError("site count M must be >= 1");
  if (atom_count < 1)
    throw ConfigError("atom count N must be >= 1");
  if (!(hopping >= 0.0) || !std::isfinite(hopping))
    throw ConfigError("hopping J must be finite and >= 0");
  if (!(interaction >= 0.0) || !std::isfinite(interaction))
    throw ConfigError("interaction U must be finite and >= 0");
}

ManyBodyState ManyBodyState::basis_state(std::size_t dimension, std::size_t index) {
  if (index >= dimension)
    throw ConfigError("basis index out of range");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dimension));
  psi(static_cast<Eigen::Index>(index)) = 1.0;
  return ManyBodyState(std::move(psi));
}

void ManyBodyState::normalize() {
  const double n = psi_.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw ZeroNormError("cannot normalize a state with zero norm");
  psi_ /= n;
}

void ManyBodyState::fix_phase() {
  if (psi_.size() == 0)
    return;
  Eigen::Index best = 0;
  psi_.cwiseAbs2().maxCoeff(&best);
  const std::complex<double> a = psi_(best);
  if (std::abs(a) == 0.0)
    return;
  psi_ *= std::conj(a) / std::abs(a);
  psi_(best) = std::abs(psi_(best));
}

void HamiltonianOperator::apply(const Eigen::Ref<const Eigen::VectorXd>& in,
                                Eigen::VectorXd& out) const {
  out.noalias() = matrix_ * in;
}

void HamiltonianOperator::apply(const Eigen::Ref<const Eigen::VectorXcd>& in,
                                Eigen::VectorXcd& out) const {
  const Eigen::VectorXd re = matrix_ * in.real();
  const Eigen::VectorXd im = matrix_ * in.imag();
  out.resize(in.size());
  out.real() = re;
  out.imag() = im;
}

double HamiltonianOperator::expectation(const ManyBodyState& state) const {
  Eigen::VectorXcd h;
  apply(state.amplitudes(), h);
  return state.amplitudes().dot(h).real();
}

HamiltonianOperator build_hamiltonian(const BoseHubbardParams& params,
                                      std::shared_ptr<const FockBasis> basis,
                                      const HamiltonianOptions& options) {
  params.validate();
  if (!basis)
    throw BasisMismatchError("Hamiltonian needs a basis");
  if (basis->site_count() != params.site_count || basis->atom_count() != params.atom_count) {
    std::ostringstream msg;
    msg << "basis (M=" << basis->site_count() << ", N=" << basis->atom_count()
        << ") does not match parameters (M=" << params.site_count << ", N=" << params.atom_count
        << ")";
    throw BasisMismatchError(msg.str());
  }

  const std::size_t dim = basis->size();
  const int m = params.site_count;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(dim * static_cast<std::size_t>(2 * m + 1));

  std::vector<std::pair<int, int>> bonds;
  for (int j = 0; j + 1 < m; ++j)
    bonds.emplace_back(j, j + 1);
  if (!params.open_boundary && m > 2)
    bonds.emplace_back(m - 1, 0);

  std::vector<int> moved(static_cast<std::size_t>(m));
  for (std::size_t u = 0; u < dim; ++u) {
    const auto n = basis->occupations(u);
    double diag = 0.0;
    for (int v : n)
      diag += 0.5 * params.interaction * v * (v - 1);
    if (diag != 0.0)
      triplets.emplace_back(static_cast<int>(u), static_cast<int>(u), diag);
    if (params.hopping == 0.0)
      continue;
    // Each bond contributes b+_a b_b and b+_b b_a acting on |n>.
    for (auto [a, b] : bonds) {
      for (auto [to, from] : {std::pair{a, b}, std::pair{b, a}}) {
        if (n[static_cast<std::size_t>(from)] == 0)
          continue;
        std::copy(n.begin(), n.end(), moved.begin());
        const double amp =
            -params.hopping * std::sqrt(static_cast<double>(moved[static_cast<std::size_t>(from)]) *
                                        (moved[static_cast<std::size_t>(to)] + 1));
        --moved[static_cast<std::size_t>(from)];
        ++moved[static_cast<std::size_t>(to)];
        triplets.emplace_back(static_cast<int>(basis->index(moved)), static_cast<int>(u), amp);
      }
    }
  }

  HamiltonianOperator h;
  h.params_ = params;
  h.basis_ = std::move(basis);
  h.matrix_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  h.matrix_.setFromTriplets(triplets.begin(), triplets.end());
  h.matrix_.makeCompressed();

  if (dim <= options.dense_limit) {
    const Eigen::MatrixXd dense = Eigen::MatrixXd(h.matrix_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    if (eig.info() != Eigen::Success)
      throw ConvergenceError("dense eigendecomposition failed");
    h.spectrum_ = DenseSpectrum{eig.eigenvalues(), eig.eigenvectors()};
  }
  return h;
}

GroundState ground_state(const HamiltonianOperator& hamiltonian, const EigensolverOptions& options) {
  GroundState out;
  const auto* spectrum = hamiltonian.dense_spectrum();
  if (spectrum && !options.force_iterative) {
    out.method = "dense";
    out.energy = spectrum->energies(0);
    out.state = ManyBodyState(spectrum->vectors.col(0).cast<std::complex<double>>());
    out.degenerate = spectrum->energies.size() > 1 &&
                     spectrum->energies(1) - spectrum->energies(0) < options.degeneracy_gap;
  } else {
    out.method = "lanczos";
    // Non-positive hopping makes the ground state positive, so the uniform
    // vector always has weight on it.
    const Eigen::VectorXd start =
        Eigen::VectorXd::Ones(static_cast<Eigen::Index>(hamiltonian.dimension()));
    const auto result = krylov::lanczos_lowest(
        [&](const auto& in, Eigen::VectorXd& y) { hamiltonian.apply(in, y); }, start,
        options.lanczos);
    out.energy = result.value;
    out.state = ManyBodyState(result.vector.cast<std::complex<double>>());
    out.degenerate = std::isfinite(result.ritz_gap) && result.ritz_gap < options.degeneracy_gap;
  }
  out.state.normalize();
  out.state.fix_phase();

  Eigen::VectorXcd h;
  hamiltonian.apply(out.state.amplitudes(), h);
  out.residual = (h - out.energy * out.state.amplitudes()).norm();
  if (out.degenerate)
    std::cerr << "warning: ground state is degenerate to within " << options.degeneracy_gap
              << "; returning the lowest eigenvector found\n";
  return out;
}

namespace {

Eigen::VectorXcd dense_evolve(const DenseSpectrum& spec, const Eigen::VectorXcd& psi, double dt) {
  Eigen::VectorXcd c = spec.vectors.transpose().cast<std::complex<double>>() * psi;
  for (Eigen::Index k = 0; k < c.size(); ++k)
    c(k) *= std::exp(std::complex<double>(0.0, -spec.energies(k) * dt));
  return spec.vectors.cast<std::complex<double>>() * c;
}

} // namespace

ManyBodyState evolve(const ManyBodyState& state, const HamiltonianOperator& hamiltonian, double dt,
                     const EvolveOptions& options) {
  if (!(dt >= 0.0) || !std::isfinite(dt))
    throw ConfigError("evolution time must be finite and >= 0");
  if (state.size() != hamiltonian.dimension())
    throw BasisMismatchError("state and Hamiltonian dimensions differ");
  if (dt == 0.0)
    return state;
  const auto* spectrum = hamiltonian.dense_spectrum();
  if (spectrum && !options.force_krylov)
    return ManyBodyState(dense_evolve(*spectrum, state.amplitudes(), dt));
  return ManyBodyState(krylov::expm_multiply(
      [&](const auto& in, Eigen::VectorXcd& out) { hamiltonian.apply(in, out); },
      state.amplitudes(), dt, options.krylov));
}

Propagator::Propagator(const HamiltonianOperator& hamiltonian, double dt, EvolveOptions options)
    : hamiltonian_(&hamiltonian), dt_(dt), options_(options) {
  if (!(dt >= 0.0) || !std::isfinite(dt))
    throw ConfigError("evolution time must be finite and >= 0");
  const auto* spectrum = hamiltonian.dense_spectrum();
  if (dt > 0.0 && spectrum && !options.force_krylov) {
    const Eigen::Index dim = spectrum->energies.size();
    Eigen::VectorXcd phases(dim);
    for (Eigen::Index k = 0; k < dim; ++k)
      phases(k) = std::exp(std::complex<double>(0.0, -spectrum->energies(k) * dt));
    const Eigen::MatrixXcd v = spectrum->vectors.cast<std::complex<double>>();
    unitary_ = v * phases.asDiagonal() * v.transpose();
  }
}

ManyBodyState Propagator::apply(const ManyBodyState& state) const {
  if (dt_ == 0.0)
    return state;
  if (unitary_) {
    if (state.size() != static_cast<std::size_t>(unitary_->rows()))
      throw BasisMismatchError("state and propagator dimensions differ");
    return ManyBodyState(*unitary_ * state.amplitudes());
  }
  return evolve(state, *hamiltonian_, dt_, options_);
}

void write_state_csv(std::ostream& os, const FockBasis& basis, const ManyBodyState& state) {
  os << "basis_index,occupation,re,im\n";
  os << std::setprecision(17);
  for (std::size_t u = 0; u < state.size(); ++u)
    os << u << ',' << basis.state(u).to_string() << ',' << state[u].real() << ','
       << state[u].imag() << '\n';
}

void write_spectrum_csv(std::ostream& os, const DenseSpectrum& spectrum) {
  os << "index,energy\n" << std::setprecision(17);
  for (Eigen::Index k = 0; k < spectrum.energies.size(); ++k)
    os << k << ',' << spectrum.energies(k) << '\n';
}

ManyBodyState read_state_csv(std::istream& is, std::size_t dimension) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dimension));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#')
      continue;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');)
      fields.push_back(f);
    if (fields.size() < 3)
      throw ConfigError("amplitude file line " + std::to_string(line_no) +
                        ": expected basis_index,re,im");
    std::size_t index = 0;
    double re = 0.0;
    double im = 0.0;
    try {
      std::size_t pos = 0;
      index = std::stoull(fields[0], &pos);
      if (pos != fields[0].size())
        throw std::invalid_argument("trailing characters");
      re = std::stod(fields[fields.size() - 2]);
      im = std::stod(fields[fields.size() - 1]);
    } catch (const std::exception&) {
      if (line_no == 1)
        continue;  // header
      throw ConfigError("amplitude file line " + std::to_string(line_no) + ": malformed number");
    }
    if (index >= dimension)
      throw ConfigError("amplitude file line " + std::to_string(line_no) +
                        ": basis index out of range");
    psi(static_cast<Eigen::Index>(index)) = {re, im};
  }
  ManyBodyState state(std::move(psi));
  try {
    state.normalize();
  } catch (const ZeroNormError&) {
    throw ConfigError("amplitude file describes a zero state");
  }
  return state;
}

} // namespace backaction
