#include "backaction/jump.hpp"

#include "backaction/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace backaction {

void TrajectoryConfig::validate() const {
  if (event_count < 1)
    throw ConfigError("event count m must be >= 1");
  if (!(dt >= 0.0) || !std::isfinite(dt))
    throw ConfigError("dt must be finite and >= 0");
}

std::size_t Trajectory::scatter_count() const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const EventRecord& e) {
    return e.kind == EventKind::scatter;
  }));
}

DetectionDistribution::DetectionDistribution(const ManyBodyState& state, const ScatteringKernel& kernel)
    : kernel_(&kernel) {
  const auto weights = kernel.class_weights(state);
  const auto& classes = kernel.classes();
  const auto sites = static_cast<std::size_t>(kernel.basis().site_count());
  weighted_signature_.assign(sites, 0.0);
  nonscatter_ = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double w = weights[c];
    if (w == 0.0)
      continue;
    const double a = kernel.class_nonscatter_amplitude(c);
    nonscatter_ += w * a * a;
    const auto& g = classes.signatures[c].g;
    for (std::size_t d = 0; d < sites; ++d)
      weighted_signature_[d] += w * static_cast<double>(g[d]);
  }
  total_ = cumulative(kernel.grid_size());
}

double DetectionDistribution::cumulative(std::size_t k) const {
  double f = 0.0;
  for (std::size_t d = 0; d < weighted_signature_.size(); ++d)
    f += weighted_signature_[d] * kernel_->cumulative(d, k);
  return f;
}

EventOutcome DetectionDistribution::sample(double v) const {
  const double scatter = 1.0 - nonscatter_;
  if (v < nonscatter_ || !(scatter > 0.0) || !(total_ > 0.0))
    return {EventKind::nonscatter, 0.0};
  const double r = std::clamp((v - nonscatter_) / scatter, 0.0, 1.0);
  const double target = r * total_;

  // Largest edge k in [0, N) with F(k) <= target.
  std::size_t lo = 0;
  std::size_t hi = kernel_->grid_size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (cumulative(mid) <= target)
      lo = mid;
    else
      hi = mid;
  }
  const double left = cumulative(lo);
  const double mass = cumulative(lo + 1) - left;
  const double frac = mass > 0.0 ? std::clamp((target - left) / mass, 0.0, 1.0) : 0.5;
  const double theta = -std::numbers::pi + (static_cast<double>(lo) + frac) * kernel_->grid_step();
  return {EventKind::scatter, std::clamp(theta, -std::numbers::pi, std::numbers::pi)};
}

EventOutcome sample_event(const ManyBodyState& state, const ScatteringKernel& kernel, Xoshiro256& rng) {
  return DetectionDistribution(state, kernel).sample(rng.uniform());
}

namespace {

std::vector<double> probabilities(const ManyBodyState& state) {
  std::vector<double> p(state.size());
  for (std::size_t u = 0; u < p.size(); ++u)
    p[u] = std::norm(state[u]);
  return p;
}

} // namespace

Trajectory run_trajectory(const ManyBodyState& initial, const Propagator& propagator,
                          const ScatteringKernel& kernel, const TrajectoryConfig& config) {
  config.validate();
  if (initial.size() != kernel.basis().size())
    throw BasisMismatchError("initial state does not match the scattering kernel basis");
  if (propagator.dt() != config.dt)
    throw ConfigError("propagator time step differs from the trajectory dt");

  Trajectory traj;
  traj.seed = config.rng_seed;
  traj.events.reserve(config.event_count);
  if (config.record_overlaps)
    traj.overlaps.reserve(config.event_count);
  if (config.snapshot_stride > 0)
    traj.snapshots.push_back({0, probabilities(initial)});

  Xoshiro256 rng(config.rng_seed);
  ManyBodyState state = initial;
  for (std::size_t i = 1; i <= config.event_count; ++i) {
    try {
      const EventOutcome outcome = sample_event(state, kernel, rng);
      state = outcome.kind == EventKind::scatter ? project_scatter(state, outcome.theta, kernel)
                                                 : project_nonscatter(state, kernel);
      if (config.dt > 0.0) {
        state = propagator.apply(state);
        // Keep round-off from accumulating over long runs.
        state.normalize();
      }
      traj.events.push_back({i, outcome.kind, outcome.theta, static_cast<double>(i) * config.dt});
    } catch (const TrajectoryError&) {
      throw;
    } catch (const NumericalError& e) {
      throw TrajectoryError(i, e.what());
    }
    if (config.record_overlaps)
      traj.overlaps.push_back(std::min(1.0, std::norm(initial.overlap(state))));
    if (config.snapshot_stride > 0 && i % config.snapshot_stride == 0)
      traj.snapshots.push_back({i, probabilities(state)});
  }
  traj.class_weights_final = kernel.class_weights(state);
  traj.final_state = std::move(state);
  return traj;
}

Trajectory run_trajectory(const ManyBodyState& initial, const HamiltonianOperator& hamiltonian,
                          const ScatteringKernel& kernel, const TrajectoryConfig& config) {
  config.validate();
  if (hamiltonian.basis_ptr() != kernel.basis_ptr() &&
      (hamiltonian.basis().site_count() != kernel.basis().site_count() ||
       hamiltonian.basis().atom_count() != kernel.basis().atom_count()))
    throw BasisMismatchError("Hamiltonian and scattering kernel use different bases");
  const Propagator propagator(hamiltonian, config.dt);
  return run_trajectory(initial, propagator, kernel, config);
}

void write_events_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "index,time,kind,theta\n" << std::setprecision(17);
  for (const auto& e : trajectory.events)
    os << e.index << ',' << e.time << ',' << (e.kind == EventKind::scatter ? "scatter" : "nonscatter")
       << ',' << e.theta << '\n';
}

void write_overlaps_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "index,overlap\n" << std::setprecision(17);
  for (std::size_t i = 0; i < trajectory.overlaps.size(); ++i)
    os << i + 1 << ',' << trajectory.overlaps[i] << '\n';
}

void write_snapshots_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "event_index,basis_index,probability\n" << std::setprecision(17);
  for (const auto& snap : trajectory.snapshots)
    for (std::size_t u = 0; u < snap.probabilities.size(); ++u)
      os << snap.event_index << ',' << u << ',' << snap.probabilities[u] << '\n';
}

} // namespace backaction
