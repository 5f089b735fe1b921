#include "backaction/stats.hpp"

#include "backaction/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

namespace backaction::stats {

double chi_square_survival(double statistic, double dof) {
  if (dof <= 0.0)
    return 1.0;
  if (statistic <= 0.0)
    return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

ChiSquareResult chi_square_homogeneity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size())
    throw ConfigError("chi-square homogeneity needs equal bin counts");
  double total_a = 0.0;
  double total_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total_a += static_cast<double>(a[i]);
    total_b += static_cast<double>(b[i]);
  }
  ChiSquareResult out;
  if (total_a == 0.0 || total_b == 0.0)
    return out;
  const double ka = std::sqrt(total_b / total_a);
  const double kb = std::sqrt(total_a / total_b);
  std::size_t used = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    if (x + y == 0.0)
      continue;
    ++used;
    const double diff = ka * x - kb * y;
    out.statistic += diff * diff / (x + y);
  }
  out.dof = used > 0 ? used - 1 : 0;
  out.p_value = chi_square_survival(out.statistic, static_cast<double>(out.dof));
  return out;
}

ChiSquareResult chi_square_goodness_of_fit(std::span<const std::uint64_t> observed,
                                           std::span<const double> probabilities) {
  if (observed.size() != probabilities.size())
    throw ConfigError("chi-square goodness of fit needs equal bin counts");
  double total = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    total += static_cast<double>(observed[i]);
    norm += probabilities[i];
  }
  ChiSquareResult out;
  std::size_t used = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = total * probabilities[i] / norm;
    if (expected <= 0.0)
      continue;
    ++used;
    const double diff = static_cast<double>(observed[i]) - expected;
    out.statistic += diff * diff / expected;
  }
  out.dof = used > 0 ? used - 1 : 0;
  out.p_value = chi_square_survival(out.statistic, static_cast<double>(out.dof));
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0)
    throw ConfigError("line fit needs distinct x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double binomial_sigma(double p, std::size_t trials) {
  if (trials == 0)
    return 0.0;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

} // namespace backaction::stats
