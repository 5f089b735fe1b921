#pragma once

// Lanczos eigensolver and Lanczos-based exp(-i H t) v for real symmetric
// operators given as a matvec callable. Both keep the full Krylov basis and
// reorthogonalize twice per step; the subspaces used here stay small (<= a few
// hundred vectors) so the memory cost is modest even for 10^5-dimensional spaces.

#include "backaction/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

namespace backaction::krylov {

struct LanczosOptions {
  int max_subspace = 120;
  int max_restarts = 60;
  double tolerance = 1e-10;  // on ||H x - E x||
};

struct LanczosResult {
  Eigen::VectorXd vector;
  double value = 0.0;
  double residual = 0.0;
  // Distance to the next Ritz value in the final subspace, NaN when unavailable.
  double ritz_gap = std::numeric_limits<double>::quiet_NaN();
  int matvecs = 0;
  int restarts = 0;
};

/// Lowest eigenpair of a real symmetric operator, explicit restart from the
/// current Ritz vector. `matvec(x, y)` must write y = H x.
template <typename MatVec>
LanczosResult lanczos_lowest(MatVec&& matvec, Eigen::VectorXd start, const LanczosOptions& opt = {}) {
  const Eigen::Index dim = start.size();
  if (dim == 0)
    throw ConvergenceError("Lanczos: empty space");
  LanczosResult out;
  const double start_norm = start.norm();
  if (!(start_norm > 0.0))
    throw ConvergenceError("Lanczos: zero start vector");
  Eigen::VectorXd x = start / start_norm;
  const Eigen::Index kmax = std::min<Eigen::Index>(opt.max_subspace, dim);

  Eigen::MatrixXd basis(dim, kmax);
  Eigen::VectorXd w(dim);
  Eigen::VectorXd r(dim);

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    out.restarts = restart;
    std::vector<double> alpha;
    std::vector<double> beta;
    basis.col(0) = x;
    Eigen::Index k = 0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    for (;;) {
      matvec(basis.col(k), w);
      ++out.matvecs;
      alpha.push_back(basis.col(k).dot(w));
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index i = 0; i <= k; ++i)
          w -= basis.col(i).dot(w) * basis.col(i);
      const double b = w.norm();
      ++k;
      const bool full = k == kmax;
      const bool breakdown = b <= 1e-13 * std::max(1.0, std::abs(alpha.front()));
      if (full || breakdown || k % 8 == 0) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
          t(i, i) = alpha[static_cast<std::size_t>(i)];
          if (i + 1 < k)
            t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        tri.compute(t);
        const double estimate = b * std::abs(tri.eigenvectors()(k - 1, 0));
        if (full || breakdown || estimate < 0.1 * opt.tolerance)
          break;
      }
      beta.push_back(b);
      basis.col(k) = w / b;
    }

    x = basis.leftCols(k) * tri.eigenvectors().col(0);
    x.normalize();
    const double value = tri.eigenvalues()(0);
    matvec(x, r);
    ++out.matvecs;
    // Rayleigh quotient of the normalized Ritz vector is at least as accurate.
    const double rayleigh = x.dot(r);
    r -= rayleigh * x;
    out.vector = x;
    out.value = rayleigh;
    out.residual = r.norm();
    out.ritz_gap = k > 1 ? tri.eigenvalues()(1) - value : std::numeric_limits<double>::quiet_NaN();
    if (out.residual <= opt.tolerance)
      return out;
  }
  throw ConvergenceError("Lanczos did not reach residual " + std::to_string(opt.tolerance) +
                         " (last " + std::to_string(out.residual) + ") after " +
                         std::to_string(opt.max_restarts) + " restarts");
}

struct ExpOptions {
  int subspace = 30;
  double tolerance = 1e-10;  // total error budget over the full time step
  int max_substeps = 1'000'000;
};

/// w = exp(-i H t) v with adaptive substepping driven by the a-posteriori
/// estimate beta_0 * beta_m * |e_m^T exp(-i T tau) e_1|.
template <typename MatVec>
Eigen::VectorXcd expm_multiply(MatVec&& matvec, const Eigen::VectorXcd& v, double t,
                               const ExpOptions& opt = {}) {
  using cd = std::complex<double>;
  const Eigen::Index dim = v.size();
  Eigen::VectorXcd w = v;
  if (t == 0.0 || dim == 0)
    return w;
  const Eigen::Index kmax = std::min<Eigen::Index>(opt.subspace, dim);
  Eigen::MatrixXcd basis(dim, kmax);
  Eigen::VectorXcd work(dim);

  double done = 0.0;
  double tau = t;
  int substeps = 0;
  while (done < t) {
    if (++substeps > opt.max_substeps)
      throw ConvergenceError("Krylov propagator exceeded the substep limit");
    const double beta0 = w.norm();
    if (beta0 == 0.0)
      return w;
    basis.col(0) = w / beta0;
    std::vector<double> alpha;
    std::vector<double> beta;
    Eigen::Index k = 0;
    double tail = 0.0;  // beta_m, zero on happy breakdown
    for (;;) {
      matvec(basis.col(k), work);
      alpha.push_back(basis.col(k).dot(work).real());
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index i = 0; i <= k; ++i)
          work -= basis.col(i).dot(work) * basis.col(i);
      const double b = work.norm();
      ++k;
      if (b <= 1e-13 * std::max(1.0, std::abs(alpha.front()))) {
        tail = 0.0;
        break;
      }
      if (k == kmax) {
        tail = b;
        break;
      }
      beta.push_back(b);
      basis.col(k) = work / b;
    }
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      tri(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < k)
        tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tri);
    const Eigen::MatrixXd& q = eig.eigenvectors();
    const Eigen::VectorXd& lambda = eig.eigenvalues();

    Eigen::VectorXcd y(k);
    for (;;) {
      tau = std::min(tau, t - done);
      Eigen::VectorXcd phased(k);
      for (Eigen::Index i = 0; i < k; ++i)
        phased(i) = std::exp(cd(0.0, -lambda(i) * tau)) * q(0, i);
      y = q.cast<cd>() * phased;
      const double err = beta0 * tail * std::abs(y(k - 1));
      if (err <= opt.tolerance * tau / t)
        break;
      tau *= 0.5;
      if (++substeps > opt.max_substeps)
        throw ConvergenceError("Krylov propagator step size collapsed");
    }
    w = beta0 * (basis.leftCols(k) * y);
    done += tau;
    if (t - done <= 1e-15 * t)
      done = t;
    tau *= 1.5;
  }
  return w;
}

} // namespace backaction::krylov
