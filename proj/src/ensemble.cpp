#include "backaction/ensemble.hpp"

#include "backaction/errors.hpp"
#include "backaction/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <thread>

namespace backaction {

using std::numbers::pi;

void EnsembleConfig::validate() const {
  if (run_count < 1)
    throw ConfigError("run count n must be >= 1");
  if (bin_count < 1)
    throw ConfigError("bin count must be >= 1");
  if (worker_count < 1)
    throw ConfigError("worker count must be >= 1");
  trajectory.validate();
}

AngularHistogram::AngularHistogram(std::size_t bin_count) : counts_(bin_count, 0) {
  if (bin_count < 1)
    throw ConfigError("bin count must be >= 1");
}

double AngularHistogram::bin_width() const noexcept {
  return 2.0 * pi / static_cast<double>(counts_.size());
}

double AngularHistogram::bin_edge(std::size_t b) const {
  return -pi + static_cast<double>(b) * bin_width();
}

double AngularHistogram::bin_center(std::size_t b) const {
  return -pi + (static_cast<double>(b) + 0.5) * bin_width();
}

std::vector<double> AngularHistogram::centers() const {
  std::vector<double> c(counts_.size());
  for (std::size_t b = 0; b < c.size(); ++b)
    c[b] = bin_center(b);
  return c;
}

std::size_t AngularHistogram::bin_of(double theta) const {
  const double x = std::floor((theta + pi) / bin_width());
  if (!(x > 0.0))
    return 0;
  return std::min(static_cast<std::size_t>(x), counts_.size() - 1);
}

void AngularHistogram::add(const EventRecord& event) {
  if (event.kind == EventKind::scatter)
    add_scatter(event.theta);
  else
    add_nonscatter();
}

void AngularHistogram::add_scatter(double theta) {
  ++counts_[bin_of(theta)];
  ++scatter_;
}

void AngularHistogram::add_nonscatter(std::uint64_t count) { nonscatter_ += count; }

void AngularHistogram::merge(const AngularHistogram& other) {
  if (other.counts_.size() != counts_.size())
    throw ConfigError("cannot merge histograms with different binning");
  for (std::size_t b = 0; b < counts_.size(); ++b)
    counts_[b] += other.counts_[b];
  nonscatter_ += other.nonscatter_;
  scatter_ += other.scatter_;
}

std::vector<double> AngularHistogram::density() const {
  std::vector<double> d(counts_.size(), 0.0);
  if (scatter_ == 0)
    return d;
  const double norm = static_cast<double>(scatter_) * bin_width();
  for (std::size_t b = 0; b < d.size(); ++b)
    d[b] = static_cast<double>(counts_[b]) / norm;
  return d;
}

EnsembleResult run_ensemble(const ManyBodyState& initial, const Propagator& propagator,
                            const ScatteringKernel& kernel, const EnsembleConfig& config) {
  config.validate();
  const std::size_t n = config.run_count;

  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i)
    seeds[i] = derive_seed(config.master_seed, i);

  std::vector<std::optional<EventRecord>> first(n);
  std::vector<std::optional<EventRecord>> last(n);
  std::vector<std::vector<double>> weights(n);
  std::vector<std::optional<std::string>> errors(n);

  const std::size_t workers = std::min(config.worker_count, n);
  std::vector<AngularHistogram> partial(workers, AngularHistogram(config.bin_count));
  std::atomic<std::size_t> next{0};

  auto work = [&](std::size_t w) {
    TrajectoryConfig tc = config.trajectory;
    tc.record_overlaps = false;
    tc.snapshot_stride = 0;
    for (std::size_t i = next++; i < n; i = next++) {
      tc.rng_seed = seeds[i];
      try {
        const Trajectory traj = run_trajectory(initial, propagator, kernel, tc);
        for (const auto& e : traj.events)
          partial[w].add(e);
        first[i] = traj.events.front();
        last[i] = traj.events.back();
        weights[i] = traj.class_weights_final;
      } catch (const NumericalError& e) {
        errors[i] = e.what();
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(work, w);
  }

  EnsembleResult result{AngularHistogram(config.bin_count), AngularHistogram(config.bin_count),
                        AngularHistogram(config.bin_count), std::move(seeds), std::move(weights), {}};
  for (const auto& h : partial)
    result.histogram.merge(h);
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      result.failures.push_back({i, *errors[i]});
      continue;
    }
    result.first_events.add(*first[i]);
    result.last_events.add(*last[i]);
  }
  return result;
}

EnsembleResult run_ensemble(const ManyBodyState& initial, const HamiltonianOperator& hamiltonian,
                            const ScatteringKernel& kernel, const EnsembleConfig& config) {
  config.validate();
  const Propagator propagator(hamiltonian, config.trajectory.dt);
  return run_ensemble(initial, propagator, kernel, config);
}

std::vector<double> predicted_initial_distribution(const ManyBodyState& initial,
                                                   const ScatteringKernel& kernel,
                                                   std::span<const double> thetas) {
  return angular_density(initial, kernel, thetas);
}

DistributionComparison compare_to_prediction(const AngularHistogram& histogram,
                                             const ManyBodyState& initial,
                                             const ScatteringKernel& kernel) {
  DistributionComparison cmp;
  cmp.centers = histogram.centers();
  cmp.predicted = predicted_initial_distribution(initial, kernel, cmp.centers);
  const double scatter = total_scatter_probability(initial, kernel);
  for (double& p : cmp.predicted)
    p = scatter > 0.0 ? p / scatter : 0.0;
  cmp.measured = histogram.density();

  const double width = histogram.bin_width();
  const auto total = static_cast<double>(histogram.scatter_count());
  cmp.z_scores.resize(cmp.centers.size());
  double l1 = 0.0;
  double l2 = 0.0;
  for (std::size_t b = 0; b < cmp.centers.size(); ++b) {
    const double diff = cmp.measured[b] - cmp.predicted[b];
    l1 += std::abs(diff) * width;
    l2 += diff * diff * width;
    const double expected = total * cmp.predicted[b] * width;
    cmp.z_scores[b] = expected > 0.0
                          ? (static_cast<double>(histogram.counts()[b]) - expected) / std::sqrt(expected)
                          : 0.0;
  }
  cmp.l1 = l1;
  cmp.l2 = std::sqrt(l2);
  return cmp;
}

double histogram_l1(const AngularHistogram& a, const AngularHistogram& b) {
  if (a.bin_count() != b.bin_count())
    throw ConfigError("histograms have different binning");
  const auto da = a.density();
  const auto db = b.density();
  double l1 = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i)
    l1 += std::abs(da[i] - db[i]);
  return l1 * a.bin_width();
}

EndStateStatistics end_state_statistics(std::span<const std::vector<double>> final_class_weights,
                                        const ManyBodyState& initial, const ScatteringKernel& kernel,
                                        double convergence_threshold) {
  const auto predicted = kernel.class_weights(initial);
  const auto& classes = kernel.classes();
  EndStateStatistics out;
  std::vector<std::size_t> counts(classes.size(), 0);
  for (const auto& w : final_class_weights) {
    if (w.empty())
      continue;
    if (w.size() != classes.size())
      throw BasisMismatchError("class weight vector does not match the kernel");
    ++out.runs;
    const auto it = std::max_element(w.begin(), w.end());
    ++counts[static_cast<std::size_t>(it - w.begin())];
    if (*it < convergence_threshold)
      ++out.unconverged;
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    ClassFrequency f;
    f.class_id = c;
    f.representative = kernel.basis().state(classes.members[c].front()).to_string();
    f.predicted = predicted[c];
    f.count = counts[c];
    f.frequency = out.runs ? static_cast<double>(counts[c]) / static_cast<double>(out.runs) : 0.0;
    f.sigma = stats::binomial_sigma(f.predicted, out.runs);
    f.z = f.sigma > 0.0 ? (f.frequency - f.predicted) / f.sigma : 0.0;
    out.classes.push_back(std::move(f));
  }
  return out;
}

ScalingStudy error_scaling_study(std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                 const ManyBodyState& initial, const HamiltonianOperator& hamiltonian,
                                 const ScatteringKernel& kernel, const EnsembleConfig& base) {
  if (pairs.size() < 2)
    throw ConfigError("scaling study needs at least two (m, n) pairs");
  const Propagator frozen(hamiltonian, 0.0);
  ScalingStudy study;
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EnsembleConfig cfg = base;
    cfg.trajectory.dt = 0.0;
    cfg.trajectory.event_count = pairs[i].first;
    cfg.run_count = pairs[i].second;
    cfg.master_seed = derive_seed(base.master_seed, 0x5CA1E000ULL + i);
    const auto res = run_ensemble(initial, frozen, kernel, cfg);
    const auto cmp = compare_to_prediction(res.histogram, initial, kernel);
    study.points.push_back({pairs[i].first, pairs[i].second, cmp.l1, cmp.l2});
    x.push_back(std::log(static_cast<double>(pairs[i].first) * static_cast<double>(pairs[i].second)));
    y.push_back(std::log(cmp.l2));
  }
  const auto fit = stats::fit_line(x, y);
  study.slope = fit.slope;
  study.intercept = fit.intercept;
  return study;
}

EvolutionStudy evolution_degradation_study(std::span<const EvolutionCase> cases, const EvolutionSetup& a,
                                           const EvolutionSetup& b, const ScatteringKernel& kernel,
                                           const EnsembleConfig& base) {
  if (!a.initial || !a.hamiltonian || !b.initial || !b.hamiltonian)
    throw ConfigError("evolution study needs two initial states with their Hamiltonians");
  EvolutionStudy study;
  const AngularHistogram binning(base.bin_count);
  study.centers = binning.centers();
  auto conditional = [&](const ManyBodyState& s) {
    auto curve = predicted_initial_distribution(s, kernel, study.centers);
    const double total = total_scatter_probability(s, kernel);
    for (double& p : curve)
      p /= total;
    return curve;
  };
  study.predicted_a = conditional(*a.initial);
  study.predicted_b = conditional(*b.initial);

  for (std::size_t i = 0; i < cases.size(); ++i) {
    EnsembleConfig cfg = base;
    cfg.trajectory.dt = cases[i].dt;
    cfg.trajectory.event_count = cases[i].events_per_run;
    cfg.run_count = cases[i].runs;
    cfg.master_seed = derive_seed(base.master_seed, 0xE7000000ULL + i);
    const auto res_a = run_ensemble(*a.initial, *a.hamiltonian, kernel, cfg);
    const auto res_b = run_ensemble(*b.initial, *b.hamiltonian, kernel, cfg);
    EvolutionRow row{cases[i], res_a.histogram, res_b.histogram};
    row.d_between = histogram_l1(res_a.histogram, res_b.histogram);
    row.d_fidelity_a = compare_to_prediction(res_a.histogram, *a.initial, kernel).l1;
    row.d_fidelity_b = compare_to_prediction(res_b.histogram, *b.initial, kernel).l1;
    row.failures = res_a.failures.size() + res_b.failures.size();
    study.rows.push_back(std::move(row));
  }
  return study;
}

void write_histogram_csv(std::ostream& os, const AngularHistogram& histogram,
                         const DistributionComparison& comparison) {
  os << "bin_lo,bin_hi,center,count,measured_density,predicted_density\n" << std::setprecision(17);
  for (std::size_t b = 0; b < histogram.bin_count(); ++b)
    os << histogram.bin_edge(b) << ',' << histogram.bin_edge(b + 1) << ',' << histogram.bin_center(b)
       << ',' << histogram.counts()[b] << ',' << comparison.measured[b] << ','
       << comparison.predicted[b] << '\n';
}

void write_end_states_csv(std::ostream& os, const EndStateStatistics& stats) {
  os << "class_id,representative,predicted,count,frequency,sigma,z\n" << std::setprecision(17);
  for (const auto& c : stats.classes)
    os << c.class_id << ',' << c.representative << ',' << c.predicted << ',' << c.count << ','
       << c.frequency << ',' << c.sigma << ',' << c.z << '\n';
}

} // namespace backaction
