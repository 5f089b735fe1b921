#include <doctest.h>

#include "backaction/errors.hpp"
#include "backaction/jump.hpp"
#include "backaction/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace backaction;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

ScatteringKernel kernel_for(std::shared_ptr<const FockBasis> basis, double g, double sigma = 0.0) {
  ScatteringConfig c;
  c.coupling = g;
  c.wannier_width = sigma;
  return ScatteringKernel::build(std::move(basis), c);
}

ManyBodyState fock_state(const FockBasis& basis, const OccupationVector& n) {
  return ManyBodyState::basis_state(basis.size(), basis.index(n));
}

HamiltonianOperator chain(int m, int n, double u) {
  BoseHubbardParams p;
  p.site_count = m;
  p.atom_count = n;
  p.interaction = u;
  return build_hamiltonian(p, enumerate_basis(m, n));
}

// Bin probabilities of the conditional scattering density, by integrating the
// directly evaluated P(theta) with a fine midpoint rule inside each bin.
std::vector<double> bin_probabilities(const ManyBodyState& s, const ScatteringKernel& k, std::size_t bins) {
  const int sub = 16;
  std::vector<double> p(bins, 0.0);
  double total = 0.0;
  const double w = 2.0 * kPi / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    for (int i = 0; i < sub; ++i) {
      const double theta = -kPi + w * (static_cast<double>(b) + (i + 0.5) / sub);
      p[b] += angular_density(s, k, theta) * w / sub;
    }
    total += p[b];
  }
  for (auto& x : p)
    x /= total;
  return p;
}

} // namespace

TEST_CASE("xoshiro256** matches the reference sequence") {
  auto r = Xoshiro256::from_state(1, 2, 3, 4);
  CHECK(r() == 11520u);
  CHECK(r() == 0u);
  CHECK(r() == 1509978240u);
  CHECK(r() == 1215971899390074240u);
  Xoshiro256 a(42), b(42);
  for (int i = 0; i < 100; ++i)
    CHECK(a() == b());
  CHECK(Xoshiro256(42)() != Xoshiro256(43)());
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("zero coupling never scatters") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.0);
  const auto h = chain(3, 3, 0.05);
  const auto gs = ground_state(h);
  TrajectoryConfig cfg;
  cfg.event_count = 500;
  cfg.dt = 0.01;
  const auto t = run_trajectory(gs.state, h, k, cfg);
  CHECK(t.scatter_count() == 0);
  CHECK(t.events.size() == 500);
}

TEST_CASE("all atoms on one site: scattering probability and uniform angles") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.1);
  const auto s = fock_state(*basis, OccupationVector{3, 0, 0});
  const DetectionDistribution dist(s, k);
  CHECK(dist.scatter_probability() == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(dist.nonscatter_probability() == doctest::Approx(0.91).epsilon(1e-12));

  Xoshiro256 rng(2024);
  const std::size_t draws = 100000;
  std::size_t scatters = 0;
  for (std::size_t i = 0; i < draws; ++i)
    scatters += sample_event(s, k, rng).kind == EventKind::scatter;
  const double sigma = stats::binomial_sigma(0.09, draws);
  CHECK(std::abs(static_cast<double>(scatters) / draws - 0.09) < 4.0 * sigma);

  // Conditional angles only: feed v uniformly over the scattering range.
  std::vector<std::uint64_t> counts(600, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    const double v = 0.91 + 0.09 * rng.uniform();
    const auto out = dist.sample(v);
    REQUIRE(out.kind == EventKind::scatter);
    const auto b = std::min<std::size_t>(599, static_cast<std::size_t>((out.theta + kPi) / (2 * kPi) * 600));
    ++counts[b];
  }
  const std::vector<double> uniform(600, 1.0 / 600);
  const auto chi = stats::chi_square_goodness_of_fit(counts, uniform);
  CHECK(chi.p_value > 0.001);
}

TEST_CASE("inverse-CDF sampling reproduces the density of a superposition") {
  const auto h = chain(4, 4, 0.3);
  const auto k = kernel_for(h.basis_ptr(), 0.2, 0.1);
  const auto gs = ground_state(h);
  const DetectionDistribution dist(gs.state, k);
  CHECK(dist.scatter_probability() == doctest::Approx(total_scatter_probability(gs.state, k)).epsilon(1e-9));
  CHECK(dist.nonscatter_probability() + dist.scatter_probability() == doctest::Approx(1.0).epsilon(1e-9));

  const std::size_t bins = 120;
  const auto p = bin_probabilities(gs.state, k, bins);
  std::vector<std::uint64_t> counts(bins, 0);
  Xoshiro256 rng(7);
  const double pns = dist.nonscatter_probability();
  for (int i = 0; i < 200000; ++i) {
    const auto out = dist.sample(pns + (1.0 - pns) * rng.uniform());
    const auto b = std::min<std::size_t>(bins - 1, static_cast<std::size_t>((out.theta + kPi) / (2 * kPi) * bins));
    ++counts[b];
  }
  CHECK(stats::chi_square_goodness_of_fit(counts, p).p_value > 0.001);

  // Edges of the unit interval map to the ends of the angle range.
  CHECK(dist.sample(pns).theta == doctest::Approx(-kPi).epsilon(1e-3));
  CHECK(dist.sample(std::nextafter(1.0, 0.0)).theta == doctest::Approx(kPi).epsilon(1e-3));
  CHECK(dist.sample(0.0).kind == EventKind::nonscatter);
}

TEST_CASE("identical seeds give identical trajectories") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  TrajectoryConfig cfg;
  cfg.event_count = 300;
  cfg.dt = 0.05;
  cfg.rng_seed = 99;
  const auto a = run_trajectory(gs.state, h, k, cfg);
  const auto b = run_trajectory(gs.state, h, k, cfg);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].kind == b.events[i].kind);
    CHECK(a.events[i].theta == b.events[i].theta);
  }
  CHECK(a.final_state.amplitudes() == b.final_state.amplitudes());
  cfg.rng_seed = 100;
  const auto c = run_trajectory(gs.state, h, k, cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.events.size(); ++i)
    differs |= a.events[i].theta != c.events[i].theta;
  CHECK(differs);
}

TEST_CASE("a Fock state is a fixed point at dt = 0") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.3);
  const auto h = chain(3, 3, 0.05);
  const auto s = fock_state(*basis, OccupationVector{2, 1, 0});
  TrajectoryConfig cfg;
  cfg.event_count = 400;
  const auto t = run_trajectory(s, h, k, cfg);
  CHECK(t.scatter_count() > 0);
  CHECK(std::abs(std::abs(s.overlap(t.final_state)) - 1.0) < 1e-12);
  for (double o : t.overlaps)
    CHECK(o == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& e : t.events)
    CHECK(e.time == 0.0);
}

TEST_CASE("norm and class support are preserved at dt = 0") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.2);
  const auto h = chain(3, 3, 0.05);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size()));
  v(static_cast<Eigen::Index>(basis->index(OccupationVector{2, 0, 1}))) = cd(0.6, 0.1);
  v(static_cast<Eigen::Index>(basis->index(OccupationVector{1, 0, 2}))) = cd(-0.3, 0.7);
  ManyBodyState s(v);
  s.normalize();
  TrajectoryConfig cfg;
  cfg.event_count = 500;
  cfg.snapshot_stride = 50;
  cfg.rng_seed = 5;
  const auto t = run_trajectory(s, h, k, cfg);
  CHECK(std::abs(t.final_state.norm() - 1.0) < 1e-12);
  const auto c = k.classes().class_of[basis->index(OccupationVector{2, 0, 1})];
  CHECK(t.class_weights_final[c] == doctest::Approx(1.0).epsilon(1e-12));

  REQUIRE(t.snapshots.size() == 11);
  for (std::size_t i = 0; i < t.snapshots.size(); ++i) {
    CHECK(t.snapshots[i].event_index == 50 * i);
    double total = 0.0;
    for (std::size_t u = 0; u < basis->size(); ++u) {
      total += t.snapshots[i].probabilities[u];
      if (k.classes().class_of[u] != c)
        CHECK(t.snapshots[i].probabilities[u] == 0.0);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("norm stays one under evolution between events") {
  const auto h = chain(4, 4, 0.5);
  const auto k = kernel_for(h.basis_ptr(), 0.2);
  const auto gs = ground_state(h);
  TrajectoryConfig cfg;
  cfg.event_count = 200;
  cfg.dt = 0.1;
  const auto t = run_trajectory(gs.state, h, k, cfg);
  CHECK(std::abs(t.final_state.norm() - 1.0) < 1e-12);
  CHECK(t.events.back().time == doctest::Approx(20.0));
  for (double o : t.overlaps) {
    CHECK(o >= 0.0);
    CHECK(o <= 1.0 + 1e-12);
  }
}

TEST_CASE("superposition of classes concentrates onto one class") {
  // Weakly interacting ground state, no evolution between events.
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  TrajectoryConfig cfg;
  cfg.event_count = 1000;
  std::size_t concentrated = 0;
  const std::size_t runs = 200;
  for (std::size_t r = 0; r < runs; ++r) {
    cfg.rng_seed = derive_seed(11, r);
    const auto t = run_trajectory(gs.state, h, k, cfg);
    const double top = *std::max_element(t.class_weights_final.begin(), t.class_weights_final.end());
    concentrated += top > 0.99;
  }
  CHECK(concentrated >= runs * 9 / 10);
}

TEST_CASE("scatter events move the overlap more than non-scatter events") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  TrajectoryConfig cfg;
  cfg.event_count = 1000;
  cfg.rng_seed = 3;
  const auto t = run_trajectory(gs.state, h, k, cfg);
  std::vector<double> quiet, jumps;
  double previous = 1.0;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const double change = std::abs(t.overlaps[i] - previous);
    (t.events[i].kind == EventKind::scatter ? jumps : quiet).push_back(change);
    previous = t.overlaps[i];
  }
  REQUIRE(!jumps.empty());
  REQUIRE(!quiet.empty());
  std::nth_element(quiet.begin(), quiet.begin() + quiet.size() / 2, quiet.end());
  const double median_quiet = quiet[quiet.size() / 2];
  std::sort(jumps.begin(), jumps.end());
  // The first scatter event of a run always changes the state visibly.
  CHECK(jumps.back() > median_quiet);
}

TEST_CASE("numerical failures carry the event index") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.1);
  const auto h = chain(3, 3, 0.05);
  const ManyBodyState zero(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size())));
  TrajectoryConfig cfg;
  cfg.event_count = 10;
  try {
    (void)run_trajectory(zero, h, k, cfg);
    FAIL("expected a trajectory error");
  } catch (const TrajectoryError& e) {
    CHECK(e.event_index() == 1);
    CHECK(std::string(e.what()).find("event 1") != std::string::npos);
  }
}

TEST_CASE("configuration and basis checks") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.1);
  const auto other = chain(4, 3, 0.05);
  const auto s = ManyBodyState::basis_state(other.dimension(), 0);
  TrajectoryConfig cfg;
  CHECK_THROWS_AS(run_trajectory(s, other, k, cfg), ConfigError);
  cfg.event_count = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.event_count = 1;
  cfg.dt = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("trajectory CSV output") {
  const auto basis = enumerate_basis(3, 3);
  const auto k = kernel_for(basis, 0.3);
  const auto h = chain(3, 3, 0.05);
  TrajectoryConfig cfg;
  cfg.event_count = 3;
  cfg.dt = 0.5;
  cfg.snapshot_stride = 2;
  const auto t = run_trajectory(fock_state(*basis, OccupationVector{1, 1, 1}), h, k, cfg);
  std::ostringstream ev, ov, sn;
  write_events_csv(ev, t);
  write_overlaps_csv(ov, t);
  write_snapshots_csv(sn, t);
  std::istringstream lines(ev.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "index,time,kind,theta");
  int rows = 0;
  while (std::getline(lines, line))
    ++rows;
  CHECK(rows == 3);
  CHECK(ov.str().rfind("index,overlap\n", 0) == 0);
  CHECK(sn.str().rfind("event_index,basis_index,probability\n", 0) == 0);
  // Snapshots at events 0 and 2, one row per basis state.
  const auto snap = sn.str();
  CHECK(std::count(snap.begin(), snap.end(), '\n') == 1 + 2 * 10);
}
