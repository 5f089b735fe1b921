#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace backaction::stats {

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Upper tail of the chi-square distribution.
double chi_square_survival(double statistic, double dof);

/// Two-sample homogeneity test on binned counts. Bins empty in both samples are
/// dropped; the two totals may differ.
ChiSquareResult chi_square_homogeneity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

/// Goodness of fit of observed counts against expected bin probabilities.
ChiSquareResult chi_square_goodness_of_fit(std::span<const std::uint64_t> observed,
                                           std::span<const double> probabilities);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Standard deviation of a binomial frequency.
double binomial_sigma(double p, std::size_t trials);

} // namespace backaction::stats
