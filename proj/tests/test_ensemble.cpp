#include <doctest.h>

#include "backaction/ensemble.hpp"
#include "backaction/errors.hpp"
#include "backaction/stats.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

using namespace backaction;

namespace {

constexpr double kPi = std::numbers::pi;

ScatteringKernel kernel_for(std::shared_ptr<const FockBasis> basis, double g, double sigma = 0.0) {
  ScatteringConfig c;
  c.coupling = g;
  c.wannier_width = sigma;
  return ScatteringKernel::build(std::move(basis), c);
}

HamiltonianOperator chain(int m, int n, double u) {
  BoseHubbardParams p;
  p.site_count = m;
  p.atom_count = n;
  p.interaction = u;
  return build_hamiltonian(p, enumerate_basis(m, n));
}

EnsembleConfig config(std::size_t runs, std::size_t events, double dt = 0.0, std::uint64_t seed = 1) {
  EnsembleConfig c;
  c.run_count = runs;
  c.trajectory.event_count = events;
  c.trajectory.dt = dt;
  c.trajectory.record_overlaps = false;
  c.master_seed = seed;
  return c;
}

bool same_counts(const AngularHistogram& a, const AngularHistogram& b) {
  return std::equal(a.counts().begin(), a.counts().end(), b.counts().begin(), b.counts().end()) &&
         a.nonscatter_count() == b.nonscatter_count();
}

} // namespace

TEST_CASE("histogram binning") {
  AngularHistogram h(4);
  CHECK(h.bin_width() == doctest::Approx(kPi / 2));
  CHECK(h.bin_of(-kPi) == 0);
  CHECK(h.bin_of(kPi) == 3);
  CHECK(h.bin_of(-1e-12) == 1);
  CHECK(h.bin_of(0.0) == 2);
  CHECK(h.bin_center(0) == doctest::Approx(-3 * kPi / 4));
  h.add_scatter(0.1);
  h.add_scatter(0.2);
  h.add_nonscatter(5);
  CHECK(h.scatter_count() == 2);
  CHECK(h.total_events() == 7);
  const auto d = h.density();
  CHECK(d[2] * h.bin_width() == doctest::Approx(1.0));
  AngularHistogram other(4);
  other.add_scatter(-3.0);
  h.merge(other);
  CHECK(h.counts()[0] == 1);
  CHECK_THROWS_AS(h.merge(AngularHistogram(5)), ConfigError);
}

TEST_CASE("a single run reproduces the trajectory") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.2);
  const auto gs = ground_state(h);
  const auto cfg = config(1, 500, 0.05, 17);
  const auto res = run_ensemble(gs.state, h, k, cfg);

  TrajectoryConfig tc = cfg.trajectory;
  tc.rng_seed = derive_seed(17, 0);
  const auto t = run_trajectory(gs.state, h, k, tc);
  AngularHistogram expected(cfg.bin_count);
  for (const auto& e : t.events)
    expected.add(e);
  CHECK(same_counts(res.histogram, expected));
  CHECK(res.seeds == std::vector<std::uint64_t>{tc.rng_seed});
  CHECK(res.final_class_weights.front() == t.class_weights_final);
}

TEST_CASE("zero coupling gives an empty angular histogram") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.0);
  const auto res = run_ensemble(ground_state(h).state, h, k, config(20, 50, 0.1));
  CHECK(res.histogram.scatter_count() == 0);
  CHECK(res.histogram.nonscatter_count() == 1000);
}

TEST_CASE("event totals are conserved and independent of the worker count") {
  const auto h = chain(4, 4, 0.1);
  const auto k = kernel_for(h.basis_ptr(), 0.2);
  const auto gs = ground_state(h);
  auto cfg = config(37, 40, 0.05, 5);
  const auto one = run_ensemble(gs.state, h, k, cfg);
  cfg.worker_count = 3;
  const auto three = run_ensemble(gs.state, h, k, cfg);

  CHECK(one.histogram.total_events() == 37 * 40);
  const auto binned = std::accumulate(one.histogram.counts().begin(), one.histogram.counts().end(), std::uint64_t{0});
  CHECK(binned == one.histogram.scatter_count());
  CHECK(one.first_events.total_events() == 37);
  CHECK(one.last_events.total_events() == 37);
  CHECK(same_counts(one.histogram, three.histogram));
  CHECK(same_counts(one.first_events, three.first_events));
  CHECK(one.final_class_weights == three.final_class_weights);
  CHECK(one.seeds == three.seeds);
}

TEST_CASE("failed runs are excluded and listed") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const ManyBodyState zero(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(h.dimension())));
  auto cfg = config(4, 10);
  cfg.worker_count = 2;
  const auto res = run_ensemble(zero, h, k, cfg);
  CHECK(res.failures.size() == 4);
  CHECK(res.completed_runs() == 0);
  CHECK(res.histogram.total_events() == 0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(res.failures[i].run_index == i);
    CHECK(res.failures[i].message.find("event 1") != std::string::npos);
    CHECK(res.final_class_weights[i].empty());
  }
}

TEST_CASE("ensemble configuration checks") {
  auto cfg = config(0, 10);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = config(1, 10);
  cfg.bin_count = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = config(1, 10);
  cfg.worker_count = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("predicted distribution integrates to the total scattering probability") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  const AngularHistogram bins(600);
  const auto curve = predicted_initial_distribution(gs.state, k, bins.centers());
  double sum = 0.0;
  for (double p : curve)
    sum += p * bins.bin_width();
  CHECK(std::abs(sum - total_scatter_probability(gs.state, k)) < 1e-3);
  for (double p : curve)
    CHECK(p >= 0.0);
}

TEST_CASE("superfluid and Mott predictions differ at nine sites") {
  const auto sf = chain(9, 9, 0.1);
  const auto mott = chain(9, 9, 10.0);
  const auto k = kernel_for(sf.basis_ptr(), 0.1);
  const AngularHistogram bins(600);
  auto conditional = [&](const ManyBodyState& s) {
    auto c = predicted_initial_distribution(s, k, bins.centers());
    const double t = total_scatter_probability(s, k);
    for (double& p : c)
      p /= t;
    return c;
  };
  const auto a = conditional(ground_state(sf).state);
  const auto b = conditional(ground_state(mott).state);
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    l1 += std::abs(a[i] - b[i]) * bins.bin_width();
  CHECK(l1 > 0.1);
}

TEST_CASE("a Fock initial state always ends in its own class") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto s = ManyBodyState::basis_state(h.dimension(), h.basis().index(OccupationVector{2, 0, 1}));
  const auto res = run_ensemble(s, h, k, config(50, 100));
  const auto st = end_state_statistics(res.final_class_weights, s, k);
  CHECK(st.runs == 50);
  const auto c = k.classes().class_of[h.basis().index(OccupationVector{2, 0, 1})];
  CHECK(st.classes[c].frequency == 1.0);
  CHECK(st.classes[c].predicted == doctest::Approx(1.0));
}

TEST_CASE("end-state frequencies follow Born weights") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(h.dimension()));
  v(static_cast<Eigen::Index>(h.basis().index(OccupationVector{2, 0, 1}))) = 1.0;
  v(static_cast<Eigen::Index>(h.basis().index(OccupationVector{3, 0, 0}))) = 1.0;
  ManyBodyState s(v);
  s.normalize();
  const auto res = run_ensemble(s, h, k, config(400, 1000, 0.0, 23));
  const auto st = end_state_statistics(res.final_class_weights, s, k);
  // A handful of runs may not yet have separated the two classes.
  CHECK(st.unconverged <= 8);
  const auto c300 = k.classes().class_of[h.basis().index(OccupationVector{3, 0, 0})];
  const auto c201 = k.classes().class_of[h.basis().index(OccupationVector{2, 0, 1})];
  CHECK(st.classes[c300].predicted == doctest::Approx(0.5));
  CHECK(std::abs(st.classes[c300].frequency - 0.5) < 3 * stats::binomial_sigma(0.5, 400));
  CHECK(st.classes[c300].count + st.classes[c201].count == 400);

  std::ostringstream os;
  write_end_states_csv(os, st);
  CHECK(os.str().rfind("class_id,representative,predicted,count,frequency,sigma,z\n", 0) == 0);
}

TEST_CASE("at dt = 0 the error depends on the product of events and runs") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  // Average over a few seeds so the ratio is not a single noisy draw.
  double wide = 0.0;
  double deep = 0.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    wide += compare_to_prediction(run_ensemble(gs.state, h, k, config(10000, 10, 0.0, seed)).histogram,
                                  gs.state, k).l2;
    deep += compare_to_prediction(run_ensemble(gs.state, h, k, config(10, 10000, 0.0, seed + 100)).histogram,
                                  gs.state, k).l2;
  }
  const double ratio = wide / deep;
  CHECK(ratio >= 0.7);
  CHECK(ratio <= 1.4);
}

TEST_CASE("doubling the number of runs roughly halves the squared error") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  double small = 0.0;
  double large = 0.0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const double a = compare_to_prediction(run_ensemble(gs.state, h, k, config(500, 20, 0.0, seed)).histogram,
                                           gs.state, k).l2;
    const double b = compare_to_prediction(
                         run_ensemble(gs.state, h, k, config(1000, 20, 0.0, seed + 50)).histogram, gs.state, k)
                         .l2;
    small += a * a;
    large += b * b;
  }
  const double ratio = small / large;
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.7);
}

TEST_CASE("scaling study fits a power law") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{100, 100}, {100, 1000}, {1000, 1000}};
  const auto study = error_scaling_study(pairs, gs.state, h, k, config(1, 1));
  REQUIRE(study.points.size() == 3);
  CHECK(study.points[2].l2 < study.points[0].l2);
  CHECK(study.slope < 0.0);
  const std::vector<std::pair<std::size_t, std::size_t>> one{{10, 10}};
  CHECK_THROWS_AS(error_scaling_study(one, gs.state, h, k, config(1, 1)), ConfigError);
}

TEST_CASE("evolution study structure") {
  const auto ha = chain(3, 3, 0.05);
  const auto hb = chain(3, 3, 10.0);
  const auto k = kernel_for(ha.basis_ptr(), 0.1);
  const auto a = ground_state(ha).state;
  const auto b = ground_state(hb).state;
  const std::vector<EvolutionCase> cases{{0.0, 100, 50}, {0.1, 100, 50}};
  const auto study = evolution_degradation_study(cases, {"A", &a, &ha}, {"B", &b, &hb}, k, config(1, 1));
  REQUIRE(study.rows.size() == 2);
  CHECK(study.centers.size() == 600);
  for (const auto& row : study.rows) {
    CHECK(row.histogram_a.total_events() == 5000);
    CHECK(row.d_between >= 0.0);
    CHECK(row.d_between <= 2.0 + 1e-12);
    CHECK(row.failures == 0);
  }
  double integral = 0.0;
  for (double p : study.predicted_a)
    integral += p * 2 * kPi / 600;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("comparison against the prediction") {
  const auto h = chain(3, 3, 0.05);
  const auto k = kernel_for(h.basis_ptr(), 0.1);
  const auto gs = ground_state(h);
  const auto res = run_ensemble(gs.state, h, k, config(200, 200, 0.0, 9));
  const auto cmp = compare_to_prediction(res.histogram, gs.state, k);
  CHECK(cmp.centers.size() == 600);
  CHECK(cmp.l1 > 0.0);
  CHECK(cmp.l1 <= 2.0);
  // Self-distance is zero.
  CHECK(histogram_l1(res.histogram, res.histogram) == 0.0);

  std::ostringstream os;
  write_histogram_csv(os, res.histogram, cmp);
  CHECK(os.str().find("bin_lo,bin_hi,center,count,measured_density,predicted_density\n") != std::string::npos);
}

TEST_CASE("chi-square helpers") {
  CHECK(stats::chi_square_survival(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::chi_square_survival(18.307038053275146, 10) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::chi_square_survival(0.0, 3) == 1.0);

  const std::vector<std::uint64_t> a{10, 20, 30, 0};
  const std::vector<std::uint64_t> b{20, 40, 60, 0};
  const auto same = stats::chi_square_homogeneity(a, b);
  CHECK(same.statistic == doctest::Approx(0.0));
  CHECK(same.dof == 2);
  CHECK(same.p_value == doctest::Approx(1.0));

  // Hand-computed 2x2 table: expected 15 each, statistic 4 * 25/15.
  const std::vector<std::uint64_t> x{10, 20};
  const std::vector<std::uint64_t> y{20, 10};
  CHECK(stats::chi_square_homogeneity(x, y).statistic == doctest::Approx(100.0 / 15.0));

  const std::vector<std::uint64_t> obs{12, 8};
  const std::vector<double> p{0.5, 0.5};
  const auto gof = stats::chi_square_goodness_of_fit(obs, p);
  CHECK(gof.statistic == doctest::Approx(0.8));
  CHECK(gof.dof == 1);

  const std::vector<double> xs{0, 1, 2, 3};
  const std::vector<double> ys{1, 3, 5, 7};
  const auto fit = stats::fit_line(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(stats::binomial_sigma(0.5, 100) == doctest::Approx(0.05));
}
