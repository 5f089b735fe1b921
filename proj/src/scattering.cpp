#include "backaction/scattering.hpp"

#include "backaction/errors.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace backaction {

using std::numbers::pi;

void ScatteringConfig::validate() const {
  if (!(coupling >= 0.0) || !std::isfinite(coupling))
    throw ConfigError("coupling g must be >= 0");
  if (!(k0 > 0.0) || !std::isfinite(k0))
    throw ConfigError("probe wavenumber k0 must be > 0");
  if (!(wannier_width >= 0.0) || !std::isfinite(wannier_width))
    throw ConfigError("Wannier width must be >= 0");
  if (quadrature_points < 64 || quadrature_points % 2 != 0)
    throw ConfigError("quadrature points must be even and >= 64");
  if (!std::isfinite(site_origin))
    throw ConfigError("site origin must be finite");
}

std::array<double, 2> momentum_transfer(double theta, double k0) {
  return {k0 * (1.0 - std::cos(theta)), -k0 * std::sin(theta)};
}

double form_factor(double theta, const ScatteringConfig& config) {
  if (config.wannier_width == 0.0)
    return 1.0;
  // |k|^2 = 2 k0^2 (1 - cos theta)
  const double k2 = 2.0 * config.k0 * config.k0 * (1.0 - std::cos(theta));
  return std::exp(-config.wannier_width * config.wannier_width * k2 / 4.0);
}

namespace {

/// Site phases exp(i (origin + j) phi), phi = -k0 sin theta.
void site_phases(const ScatteringConfig& config, double theta, std::span<double> re,
                 std::span<double> im) {
  const double phi = -config.k0 * std::sin(theta);
  for (std::size_t j = 0; j < re.size(); ++j) {
    const double arg = (config.site_origin + static_cast<double>(j)) * phi;
    re[j] = std::cos(arg);
    im[j] = std::sin(arg);
  }
}

std::string describe_class(const FockBasis& basis, const EquivalenceClasses& classes, std::size_t c) {
  std::ostringstream os;
  os << "class " << c << " (" << basis.state(classes.members[c].front()) << ", "
     << classes.members[c].size() << " member" << (classes.members[c].size() == 1 ? "" : "s")
     << ")";
  return os.str();
}

} // namespace

ScatteringKernel ScatteringKernel::build(std::shared_ptr<const FockBasis> basis,
                                         const ScatteringConfig& config) {
  config.validate();
  if (!basis)
    throw BasisMismatchError("scattering kernel needs a basis");
  ScatteringKernel kern;
  kern.config_ = config;
  kern.basis_ = std::move(basis);
  kern.classes_ = equivalence_classes(*kern.basis_);
  kern.prefactor_ = config.coupling * config.coupling / (2.0 * pi);

  const auto n_theta = static_cast<std::size_t>(config.quadrature_points);
  const auto sites = static_cast<std::size_t>(kern.basis_->site_count());
  kern.step_ = 2.0 * pi / static_cast<double>(n_theta);
  kern.grid_.resize(n_theta);
  kern.form_.resize(n_theta);
  for (std::size_t k = 0; k < n_theta; ++k) {
    kern.grid_[k] = -pi + (static_cast<double>(k) + 0.5) * kern.step_;
    kern.form_[k] = form_factor(kern.grid_[k], config);
  }

  kern.weight_.assign(sites, std::vector<double>(n_theta));
  kern.cumulative_.assign(sites, std::vector<double>(n_theta + 1, 0.0));
  for (std::size_t d = 0; d < sites; ++d) {
    long double acc = 0.0L;
    for (std::size_t k = 0; k < n_theta; ++k) {
      const double envelope = kern.form_[k] * kern.form_[k];
      const double phi = -config.k0 * std::sin(kern.grid_[k]);
      const double w = d == 0 ? envelope : 2.0 * envelope * std::cos(static_cast<double>(d) * phi);
      kern.weight_[d][k] = w;
      acc += static_cast<long double>(w) * kern.step_;
      kern.cumulative_[d][k + 1] = static_cast<double>(acc);
    }
  }

  const std::size_t n_classes = kern.classes_.size();
  kern.class_integral_.resize(n_classes);
  kern.class_amplitude_.resize(n_classes);
  double worst = 1.0;
  std::size_t worst_class = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    kern.class_integral_[c] = kern.scatter_integral(kern.classes_.signatures[c]);
    const double radicand = 1.0 - kern.prefactor_ * kern.class_integral_[c];
    if (radicand < worst) {
      worst = radicand;
      worst_class = c;
    }
    kern.class_amplitude_[c] = std::sqrt(std::max(radicand, 0.0));
  }
  if (worst < 0.0) {
    std::ostringstream msg;
    msg << "coupling g=" << config.coupling << " is too large for the single-scattering model: "
        << describe_class(*kern.basis_, kern.classes_, worst_class)
        << " has non-scattering probability " << worst;
    throw UnphysicalCouplingError(msg.str());
  }
  return kern;
}

double ScatteringKernel::scatter_integral(const PairCorrelationSignature& sig) const {
  if (sig.g.size() != cumulative_.size())
    throw BasisMismatchError("signature length does not match the lattice");
  const std::size_t end = grid_.size();
  double total = 0.0;
  for (std::size_t d = 0; d < sig.g.size(); ++d)
    total += static_cast<double>(sig.g[d]) * cumulative_[d][end];
  return total;
}

double ScatteringKernel::class_intensity(std::size_t c, std::size_t k) const {
  const auto& g = classes_.signatures[c].g;
  double total = 0.0;
  for (std::size_t d = 0; d < g.size(); ++d)
    total += static_cast<double>(g[d]) * weight_[d][k];
  return total;
}

std::complex<double> ScatteringKernel::structure_factor(std::span<const int> occupations,
                                                        double theta) const {
  std::vector<double> re(occupations.size());
  std::vector<double> im(occupations.size());
  site_phases(config_, theta, re, im);
  std::complex<double> f = 0.0;
  for (std::size_t j = 0; j < occupations.size(); ++j)
    f += static_cast<double>(occupations[j]) * std::complex<double>(re[j], im[j]);
  return form_factor(theta, config_) * f;
}

std::vector<double> ScatteringKernel::class_weights(const ManyBodyState& state) const {
  if (state.size() != basis_->size())
    throw BasisMismatchError("state dimension does not match the scattering kernel");
  std::vector<double> w(classes_.size(), 0.0);
  const auto& psi = state.amplitudes();
  for (std::size_t u = 0; u < state.size(); ++u)
    w[classes_.class_of[u]] += std::norm(psi(static_cast<Eigen::Index>(u)));
  return w;
}

double nonscatter_amplitude(const OccupationVector& n, const ScatteringKernel& kernel) {
  const double radicand = 1.0 - kernel.prefactor() * kernel.scatter_integral(signature(n));
  if (radicand < 0.0) {
    std::ostringstream msg;
    msg << "coupling g=" << kernel.config().coupling << " is too large for " << n
        << ": non-scattering probability " << radicand;
    throw UnphysicalCouplingError(msg.str());
  }
  return std::sqrt(radicand);
}

namespace {

void check_state(const ManyBodyState& state, const ScatteringKernel& kernel) {
  if (state.size() != kernel.basis().size())
    throw BasisMismatchError("state dimension does not match the scattering kernel");
}

/// sum_u p_u |sum_j n_j e^{i (o + j) phi}|^2 for one angle.
double weighted_structure_sum(const FockBasis& basis, std::span<const double> probs,
                              std::span<const double> re, std::span<const double> im) {
  const std::size_t sites = re.size();
  double acc = 0.0;
  for (std::size_t u = 0; u < probs.size(); ++u) {
    if (probs[u] == 0.0)
      continue;
    const auto n = basis.occupations(u);
    double fr = 0.0;
    double fi = 0.0;
    for (std::size_t j = 0; j < sites; ++j) {
      fr += n[j] * re[j];
      fi += n[j] * im[j];
    }
    acc += probs[u] * (fr * fr + fi * fi);
  }
  return acc;
}

std::vector<double> probabilities(const ManyBodyState& state) {
  std::vector<double> p(state.size());
  for (std::size_t u = 0; u < p.size(); ++u)
    p[u] = std::norm(state[u]);
  return p;
}

} // namespace

double angular_density(const ManyBodyState& state, const ScatteringKernel& kernel, double theta) {
  const double v = theta;
  return angular_density(state, kernel, std::span<const double>(&v, 1)).front();
}

std::vector<double> angular_density(const ManyBodyState& state, const ScatteringKernel& kernel,
                                    std::span<const double> thetas) {
  check_state(state, kernel);
  const auto sites = static_cast<std::size_t>(kernel.basis().site_count());
  const auto probs = probabilities(state);
  std::vector<double> re(sites);
  std::vector<double> im(sites);
  std::vector<double> out(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    site_phases(kernel.config(), thetas[i], re, im);
    const double ff = form_factor(thetas[i], kernel.config());
    out[i] = kernel.prefactor() * ff * ff * weighted_structure_sum(kernel.basis(), probs, re, im);
  }
  return out;
}

double total_scatter_probability(const ManyBodyState& state, const ScatteringKernel& kernel) {
  check_state(state, kernel);
  const auto sites = static_cast<std::size_t>(kernel.basis().site_count());
  const auto probs = probabilities(state);
  std::vector<double> re(sites);
  std::vector<double> im(sites);
  // The density is even in theta (real occupations, even envelope): integrate
  // one half of the symmetric midpoint grid and double it.
  const std::size_t half = kernel.grid_size() / 2;
  double total = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    site_phases(kernel.config(), kernel.grid_angle(k), re, im);
    const double ff = kernel.grid_form_factor(k);
    total += ff * ff * weighted_structure_sum(kernel.basis(), probs, re, im);
  }
  return 2.0 * kernel.grid_step() * kernel.prefactor() * total;
}

double nonscatter_probability(const ManyBodyState& state, const ScatteringKernel& kernel) {
  check_state(state, kernel);
  double p = 0.0;
  for (std::size_t u = 0; u < state.size(); ++u) {
    const double a = kernel.nonscatter_amplitude(u);
    p += std::norm(state[u]) * a * a;
  }
  return p;
}

ManyBodyState project_scatter(const ManyBodyState& state, double theta, const ScatteringKernel& kernel) {
  check_state(state, kernel);
  const auto& basis = kernel.basis();
  const auto sites = static_cast<std::size_t>(basis.site_count());
  std::vector<double> re(sites);
  std::vector<double> im(sites);
  site_phases(kernel.config(), theta, re, im);

  Eigen::VectorXcd out(state.amplitudes().size());
  const auto& psi = state.amplitudes();
  for (std::size_t u = 0; u < state.size(); ++u) {
    const auto e = static_cast<Eigen::Index>(u);
    if (psi(e) == 0.0) {
      out(e) = 0.0;
      continue;
    }
    const auto n = basis.occupations(u);
    double fr = 0.0;
    double fi = 0.0;
    for (std::size_t j = 0; j < sites; ++j) {
      fr += n[j] * re[j];
      fi += n[j] * im[j];
    }
    out(e) = std::complex<double>(fr, fi) * psi(e);
  }
  // |f| <= N; anything this far below it is cancellation noise.
  const double scale = static_cast<double>(basis.atom_count());
  if (!(out.norm() > 1e-12 * scale)) {
    std::ostringstream msg;
    msg << "scattering at theta=" << theta << " has zero probability from this state";
    throw ZeroNormError(msg.str());
  }
  ManyBodyState result(std::move(out));
  result.normalize();
  return result;
}

ManyBodyState project_nonscatter(const ManyBodyState& state, const ScatteringKernel& kernel) {
  check_state(state, kernel);
  Eigen::VectorXcd out = state.amplitudes();
  for (std::size_t u = 0; u < state.size(); ++u)
    out(static_cast<Eigen::Index>(u)) *= kernel.nonscatter_amplitude(u);
  if (!(out.norm() > 1e-300))
    throw ZeroNormError("non-scattering projection annihilated the state");
  ManyBodyState result(std::move(out));
  result.normalize();
  return result;
}

void write_kernel_csv(std::ostream& os, const ScatteringKernel& kernel) {
  os << "class_id,nonscatter_amplitude,scatter_integral\n" << std::setprecision(17);
  for (std::size_t c = 0; c < kernel.classes().size(); ++c)
    os << c << ',' << kernel.class_nonscatter_amplitude(c) << ','
       << kernel.class_scatter_integral(c) << '\n';
}

void write_curve_csv(std::ostream& os, std::span<const double> thetas, std::span<const double> values) {
  os << "theta,density\n" << std::setprecision(17);
  for (std::size_t i = 0; i < thetas.size(); ++i)
    os << thetas[i] << ',' << values[i] << '\n';
}

} // namespace backaction
