#pragma once

#include "backaction/hamiltonian.hpp"
#include "backaction/jump.hpp"
#include "backaction/scattering.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace backaction {

struct EnsembleConfig {
  std::size_t run_count = 1;  // n
  TrajectoryConfig trajectory{};
  std::size_t bin_count = 600;
  std::uint64_t master_seed = 1;
  std::size_t worker_count = 1;

  void validate() const;
};

/// Detection counts in uniform bins over [-pi, pi] plus a non-scattering tally.
class AngularHistogram {
public:
  explicit AngularHistogram(std::size_t bin_count = 600);

  std::size_t bin_count() const noexcept { return counts_.size(); }
  double bin_width() const noexcept;
  double bin_center(std::size_t b) const;
  double bin_edge(std::size_t b) const;
  std::vector<double> centers() const;
  std::size_t bin_of(double theta) const;

  void add(const EventRecord& event);
  void add_scatter(double theta);
  void add_nonscatter(std::uint64_t count = 1);
  void merge(const AngularHistogram& other);

  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::uint64_t nonscatter_count() const noexcept { return nonscatter_; }
  std::uint64_t scatter_count() const noexcept { return scatter_; }
  std::uint64_t total_events() const noexcept { return scatter_ + nonscatter_; }

  /// Conditional-on-scattering density per bin (integrates to 1); zeros if empty.
  std::vector<double> density() const;

private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t nonscatter_ = 0;
  std::uint64_t scatter_ = 0;
};

struct RunFailure {
  std::size_t run_index = 0;
  std::string message;
};

struct EnsembleResult {
  AngularHistogram histogram;
  AngularHistogram first_events;  // event 1 of every run
  AngularHistogram last_events;   // event m of every run
  std::vector<std::uint64_t> seeds;
  /// Per run; empty for failed runs.
  std::vector<std::vector<double>> final_class_weights;
  std::vector<RunFailure> failures;

  std::size_t completed_runs() const noexcept { return seeds.size() - failures.size(); }
};

/// n independent trajectories with seeds derive_seed(master_seed, i). Failed
/// runs are excluded from every tally and listed in `failures`. The result does
/// not depend on worker_count.
EnsembleResult run_ensemble(const ManyBodyState& initial, const Propagator& propagator,
                            const ScatteringKernel& kernel, const EnsembleConfig& config);
EnsembleResult run_ensemble(const ManyBodyState& initial, const HamiltonianOperator& hamiltonian,
                            const ScatteringKernel& kernel, const EnsembleConfig& config);

/// P_0(theta) of the initial state, unconditional.
std::vector<double> predicted_initial_distribution(const ManyBodyState& initial,
                                                   const ScatteringKernel& kernel,
                                                   std::span<const double> thetas);

struct DistributionComparison {
  std::vector<double> centers;
  std::vector<double> predicted;  // P_0 / (1 - P^NS), conditional on scattering
  std::vector<double> measured;   // histogram density, conditional on scattering
  std::vector<double> z_scores;   // (count - expected) / sqrt(expected)
  double l1 = 0.0;                // integral |measured - predicted| dtheta
  double l2 = 0.0;                // sqrt(integral (measured - predicted)^2 dtheta)
};

DistributionComparison compare_to_prediction(const AngularHistogram& histogram,
                                             const ManyBodyState& initial,
                                             const ScatteringKernel& kernel);

/// Integral L1 distance between two histograms' conditional densities.
double histogram_l1(const AngularHistogram& a, const AngularHistogram& b);

struct ClassFrequency {
  std::size_t class_id = 0;
  std::string representative;
  double predicted = 0.0;  // sum_{u in class} |<n_u|Psi_0>|^2
  std::size_t count = 0;   // runs ending dominated by this class
  double frequency = 0.0;
  double sigma = 0.0;      // binomial sigma at the predicted weight
  double z = 0.0;
};

struct EndStateStatistics {
  std::vector<ClassFrequency> classes;
  std::size_t runs = 0;
  std::size_t unconverged = 0;  // runs whose dominant class holds < threshold
};

/// Frequency with which runs end dominated by each class, against the Born
/// weights of the initial state. Runs with empty weight vectors are skipped.
EndStateStatistics end_state_statistics(std::span<const std::vector<double>> final_class_weights,
                                        const ManyBodyState& initial, const ScatteringKernel& kernel,
                                        double convergence_threshold = 0.99);

struct ScalingPoint {
  std::size_t events_per_run = 0;  // m
  std::size_t runs = 0;            // n
  double l1 = 0.0;
  double l2 = 0.0;
};

struct ScalingStudy {
  std::vector<ScalingPoint> points;
  double slope = 0.0;  // d log(l2) / d log(mn)
  double intercept = 0.0;
};

/// Runs one ensemble per (m, n) pair at dt = 0 and fits log L2 against log mn.
ScalingStudy error_scaling_study(std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                 const ManyBodyState& initial, const HamiltonianOperator& hamiltonian,
                                 const ScatteringKernel& kernel, const EnsembleConfig& base);

struct EvolutionSetup {
  std::string label;
  const ManyBodyState* initial = nullptr;
  const HamiltonianOperator* hamiltonian = nullptr;
};

struct EvolutionCase {
  double dt = 0.0;
  std::size_t events_per_run = 1000;
  std::size_t runs = 1000;
};

struct EvolutionRow {
  EvolutionCase setting;
  AngularHistogram histogram_a;
  AngularHistogram histogram_b;
  double d_between = 0.0;     // L1(hist_A, hist_B)
  double d_fidelity_a = 0.0;  // L1(hist_A, pred_A)
  double d_fidelity_b = 0.0;
  std::size_t failures = 0;
};

struct EvolutionStudy {
  std::vector<double> centers;
  std::vector<double> predicted_a;  // conditional densities
  std::vector<double> predicted_b;
  std::vector<EvolutionRow> rows;
};

/// Summed histograms of two initial states for each dt, each evolving under its
/// own Hamiltonian.
EvolutionStudy evolution_degradation_study(std::span<const EvolutionCase> cases, const EvolutionSetup& a,
                                           const EvolutionSetup& b, const ScatteringKernel& kernel,
                                           const EnsembleConfig& base);

/// bin_lo,bin_hi,center,count,measured_density,predicted_density
void write_histogram_csv(std::ostream& os, const AngularHistogram& histogram,
                         const DistributionComparison& comparison);
/// class_id,representative,predicted,count,frequency,sigma,z
void write_end_states_csv(std::ostream& os, const EndStateStatistics& stats);

} // namespace backaction
