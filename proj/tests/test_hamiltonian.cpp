#include <doctest.h>

#include "backaction/errors.hpp"
#include "backaction/hamiltonian.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

using namespace backaction;
using cd = std::complex<double>;

namespace {

std::shared_ptr<const FockBasis> basis33() { return enumerate_basis(3, 3); }

HamiltonianOperator make_h(int m, int n, double u, double j = 1.0, HamiltonianOptions opt = {}) {
  BoseHubbardParams p;
  p.site_count = m;
  p.atom_count = n;
  p.interaction = u;
  p.hopping = j;
  return build_hamiltonian(p, enumerate_basis(m, n), opt);
}

// Dense H from second-quantized operators acting on occupation vectors,
// indexed through an ordinary map rather than the basis ranking.
Eigen::MatrixXd oracle_hamiltonian(const FockBasis& basis, double j, double u) {
  std::map<std::vector<int>, Eigen::Index> index;
  for (std::size_t s = 0; s < basis.size(); ++s) {
    const auto occ = basis.occupations(s);
    index[std::vector<int>(occ.begin(), occ.end())] = static_cast<Eigen::Index>(s);
  }
  const auto dim = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& [occ, col] : index) {
    for (int v : occ)
      h(col, col) += 0.5 * u * v * (v - 1);
    for (std::size_t a = 0; a + 1 < occ.size(); ++a) {
      // b+_a b_{a+1} and b+_{a+1} b_a
      for (auto [create, destroy] : {std::pair{a, a + 1}, std::pair{a + 1, a}}) {
        if (occ[destroy] == 0)
          continue;
        auto out = occ;
        double amp = std::sqrt(static_cast<double>(out[destroy]));
        --out[destroy];
        amp *= std::sqrt(static_cast<double>(out[create] + 1));
        ++out[create];
        h(index.at(out), col) += -j * amp;
      }
    }
  }
  return h;
}

ManyBodyState random_state(std::size_t dim, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v)
    x = cd(normal(gen), normal(gen));
  ManyBodyState s(v);
  s.normalize();
  return s;
}

} // namespace

TEST_CASE("matrix elements") {
  const auto basis = basis33();
  BoseHubbardParams p;
  p.interaction = 0.7;
  const auto h = build_hamiltonian(p, basis);
  const auto i201 = basis->index(OccupationVector{2, 0, 1});
  const auto i111 = basis->index(OccupationVector{1, 1, 1});
  const auto i300 = basis->index(OccupationVector{3, 0, 0});
  const auto i210 = basis->index(OccupationVector{2, 1, 0});
  CHECK(h.element(i201, i111) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  CHECK(h.element(i111, i201) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  CHECK(h.element(i201, i201) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(h.element(i300, i300) == doctest::Approx(3.0 * 0.7).epsilon(1e-15));
  CHECK(h.element(i300, i210) == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-15));
  CHECK(h.element(i300, i111) == 0.0);
}

TEST_CASE("matches the second-quantized oracle") {
  for (auto [m, n] : {std::pair{3, 3}, std::pair{4, 3}, std::pair{5, 2}, std::pair{2, 6}}) {
    const auto h = make_h(m, n, 1.3, 0.8);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(h.matrix());
    CHECK((dense - oracle_hamiltonian(h.basis(), 0.8, 1.3)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("hermiticity and sparsity") {
  const auto h = make_h(6, 5, 2.5);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(h.matrix());
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index r = 0; r < h.matrix().outerSize(); ++r)
    CHECK(h.matrix().innerVector(r).nonZeros() <= 2 * (6 - 1) + 1);
}

TEST_CASE("basis and parameter validation") {
  BoseHubbardParams p;
  p.site_count = 4;
  CHECK_THROWS_AS(build_hamiltonian(p, basis33()), BasisMismatchError);
  p.site_count = 3;
  p.interaction = -1.0;
  CHECK_THROWS_AS(build_hamiltonian(p, basis33()), ConfigError);
  p.interaction = 1.0;
  p.hopping = -1.0;
  CHECK_THROWS_AS(build_hamiltonian(p, basis33()), ConfigError);
}

TEST_CASE("non-interacting ground energy is N times the lowest chain mode") {
  const auto gs = ground_state(make_h(3, 3, 0.0));
  CHECK(gs.energy == doctest::Approx(-3.0 * std::sqrt(2.0)).epsilon(1e-13));
  CHECK(gs.residual < 1e-12);
  CHECK_FALSE(gs.degenerate);
}

TEST_CASE("ground state without hopping is the unit-filled Mott state") {
  const auto h = make_h(3, 3, 1.0, 0.0);
  const auto gs = ground_state(h);
  const auto i111 = h.basis().index(OccupationVector{1, 1, 1});
  CHECK(gs.energy == doctest::Approx(0.0));
  CHECK(std::abs(gs.state[i111] - cd(1.0, 0.0)) < 1e-14);
}

TEST_CASE("deep Mott regime concentrates on 111") {
  const auto h = make_h(3, 3, 1000.0);
  const auto gs = ground_state(h);
  const auto i111 = h.basis().index(OccupationVector{1, 1, 1});
  CHECK(gs.state[i111].real() > 0.999);
  CHECK(gs.state[i111].imag() == 0.0);

  // Dense-diagonalization oracle straight from the matrix.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(h.matrix()));
  CHECK(std::abs(eig.eigenvectors().col(0)(static_cast<Eigen::Index>(i111))) ==
        doctest::Approx(gs.state[i111].real()).epsilon(1e-12));
}

TEST_CASE("dense and Lanczos ground states agree") {
  for (double u : {0.05, 0.1, 1.0, 10.0}) {
    const auto h = make_h(3, 3, u);
    const auto dense = ground_state(h);
    EigensolverOptions opt;
    opt.force_iterative = true;
    const auto lanczos = ground_state(h, opt);
    CHECK(dense.method == "dense");
    CHECK(lanczos.method == "lanczos");
    CHECK(std::abs(dense.energy - lanczos.energy) < 1e-10);
    CHECK(std::abs(std::abs(dense.state.overlap(lanczos.state)) - 1.0) < 1e-10);
    // Same phase convention on both paths.
    CHECK((dense.state.amplitudes() - lanczos.state.amplitudes()).norm() < 1e-8);
  }
}

TEST_CASE("nine-site ground states converge") {
  for (double u : {0.1, 10.0}) {
    const auto h = make_h(9, 9, u);
    REQUIRE(h.dense_spectrum() == nullptr);
    const auto gs = ground_state(h);
    CHECK(gs.method == "lanczos");
    CHECK(gs.residual <= 1e-8);
    CHECK(std::abs(gs.state.norm() - 1.0) < 1e-12);
    // Positive ground state of a stoquastic Hamiltonian.
    CHECK(gs.state.amplitudes().real().minCoeff() > -1e-10);
  }
}

TEST_CASE("evolve: zero time is the identity") {
  std::mt19937_64 gen(1);
  const auto h = make_h(3, 3, 0.05);
  const auto s = random_state(h.dimension(), gen);
  CHECK((evolve(s, h, 0.0).amplitudes() - s.amplitudes()).norm() == 0.0);
  CHECK_THROWS_AS(evolve(s, h, -1.0), ConfigError);
}

TEST_CASE("evolve: eigenstates only acquire a phase") {
  const auto h = make_h(3, 3, 0.05);
  const auto gs = ground_state(h);
  for (double t : {0.3, 10.0}) {
    const auto out = evolve(gs.state, h, t);
    CHECK(std::abs(std::abs(gs.state.overlap(out)) - 1.0) < 1e-10);
    const cd expected = std::exp(cd(0.0, -gs.energy * t));
    CHECK(std::abs(gs.state.overlap(out) - expected) < 1e-10);
  }
}

TEST_CASE("evolve: dense and Krylov paths agree with a matrix-exponential oracle") {
  std::mt19937_64 gen(2);
  for (auto [m, n] : {std::pair{3, 3}, std::pair{5, 4}}) {
    const auto h = make_h(m, n, 0.7);
    const auto s = random_state(h.dimension(), gen);
    const Eigen::MatrixXcd hd = Eigen::MatrixXd(h.matrix()).cast<cd>();
    for (double t : {0.001, 0.5, 3.0}) {
      const Eigen::MatrixXcd u = (cd(0.0, -t) * hd).exp();
      const Eigen::VectorXcd expected = u * s.amplitudes();
      const auto dense = evolve(s, h, t);
      EvolveOptions opt;
      opt.force_krylov = true;
      const auto kry = evolve(s, h, t, opt);
      CHECK((dense.amplitudes() - expected).norm() < 1e-10);
      CHECK((kry.amplitudes() - expected).norm() < 1e-9);
      CHECK(std::abs(kry.norm() - 1.0) < 1e-10);
      const Propagator prop(h, t);
      CHECK((prop.apply(s).amplitudes() - expected).norm() < 1e-10);
    }
  }
}

TEST_CASE("evolve: norm, energy conservation and composition on the sparse path") {
  std::mt19937_64 gen(3);
  const auto h = make_h(9, 9, 0.1);
  const auto s = random_state(h.dimension(), gen);
  const double e0 = h.expectation(s);
  const auto a = evolve(s, h, 0.4);
  CHECK(std::abs(a.norm() - 1.0) < 1e-10);
  CHECK(std::abs(h.expectation(a) - e0) <= 1e-9 * std::abs(e0));
  const auto b = evolve(evolve(s, h, 0.15), h, 0.25);
  CHECK((a.amplitudes() - b.amplitudes()).norm() < 1e-9);
}

TEST_CASE("state CSV round trip") {
  const auto h = make_h(3, 3, 0.05);
  const auto gs = ground_state(h);
  std::stringstream ss;
  write_state_csv(ss, h.basis(), gs.state);
  const auto back = read_state_csv(ss, h.dimension());
  CHECK((back.amplitudes() - gs.state.amplitudes()).norm() < 1e-15);

  std::stringstream bad("basis_index,re,im\n12,1,0\n");
  CHECK_THROWS_AS(read_state_csv(bad, h.dimension()), ConfigError);
  std::stringstream zero("0,0,0\n");
  CHECK_THROWS_AS(read_state_csv(zero, h.dimension()), ConfigError);
}
