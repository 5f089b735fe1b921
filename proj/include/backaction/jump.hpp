#pragma once

#include "backaction/hamiltonian.hpp"
#include "backaction/rng.hpp"
#include "backaction/scattering.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace backaction {

struct TrajectoryConfig {
  std::size_t event_count = 1000;  // m
  double dt = 0.0;                 // hbar/J between events
  std::uint64_t rng_seed = 1;
  std::size_t snapshot_stride = 0;  // 0 disables coefficient snapshots
  bool record_overlaps = true;

  void validate() const;
};

enum class EventKind { scatter, nonscatter };

struct EventOutcome {
  EventKind kind = EventKind::nonscatter;
  double theta = 0.0;  // 0 for non-scattering detections
};

struct EventRecord {
  std::size_t index = 0;  // 1-based
  EventKind kind = EventKind::nonscatter;
  double theta = 0.0;
  double time = 0.0;  // index * dt
};

struct Snapshot {
  std::size_t event_index = 0;  // 0 is the initial state
  std::vector<double> probabilities;
};

struct Trajectory {
  std::vector<EventRecord> events;
  std::vector<double> overlaps;  // |<Psi_0|Psi_m>|^2 after event m
  std::vector<Snapshot> snapshots;
  ManyBodyState final_state;
  std::vector<double> class_weights_final;
  std::uint64_t seed = 0;

  std::size_t scatter_count() const;
};

/// Detection statistics of one state: non-scattering probability and the
/// scattering CDF over the kernel grid, collapsed onto the class-weighted
/// pair-correlation signature.
class DetectionDistribution {
public:
  DetectionDistribution(const ManyBodyState& state, const ScatteringKernel& kernel);

  double nonscatter_probability() const noexcept { return nonscatter_; }
  double scatter_probability() const noexcept { return kernel_->prefactor() * total_; }
  /// Unnormalized CDF at grid edge k (0..N_theta), in units of the prefactor.
  double cumulative(std::size_t k) const;

  /// Maps one uniform v in [0,1) to an outcome: v < P^NS is a non-scattering
  /// detection, otherwise the remaining range is fed through the inverse CDF
  /// with linear interpolation inside a grid cell.
  EventOutcome sample(double v) const;

private:
  const ScatteringKernel* kernel_;
  std::vector<double> weighted_signature_;
  double nonscatter_ = 1.0;
  double total_ = 0.0;
};

EventOutcome sample_event(const ManyBodyState& state, const ScatteringKernel& kernel, Xoshiro256& rng);

/// Quantum-jump loop: sample, project, normalize, evolve by dt; m times.
Trajectory run_trajectory(const ManyBodyState& initial, const Propagator& propagator,
                          const ScatteringKernel& kernel, const TrajectoryConfig& config);
Trajectory run_trajectory(const ManyBodyState& initial, const HamiltonianOperator& hamiltonian,
                          const ScatteringKernel& kernel, const TrajectoryConfig& config);

/// index,time,kind,theta
void write_events_csv(std::ostream& os, const Trajectory& trajectory);
/// index,overlap
void write_overlaps_csv(std::ostream& os, const Trajectory& trajectory);
/// event_index,basis_index,probability
void write_snapshots_csv(std::ostream& os, const Trajectory& trajectory);

} // namespace backaction
