#include "lhf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lhf/errors.hpp"
#include "lhf/history.hpp"

namespace lhf {

namespace {

void check_returns(std::span<const double> returns, double r_max) {
  if (returns.empty()) throw InputError("metric needs at least one episodic return");
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw InputError("r_max must be positive, got " + format_real(r_max));
  for (std::size_t k = 0; k < returns.size(); ++k)
    if (!(returns[k] >= 0.0 && returns[k] <= r_max))
      throw DataError("episodic return " + format_real(returns[k]) + " at episode " + std::to_string(k) +
                      " lies outside [0, r_max = " + format_real(r_max) + "]");
}

double improvement_unchecked(std::span<const double> returns, double r_max) {
  double sum = 0.0;
  for (const double r : returns) sum += r;
  const double mean = sum / static_cast<double>(returns.size());
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  // Summation rounding can push a bound-attaining mean a few ulps past r_max.
  return std::clamp((mean + (*hi - *lo)) / (2.0 * r_max), 0.0, 1.0);
}

double stability_unchecked(std::span<const double> returns, double r_max) {
  double drop_sum = 0.0;
  std::size_t drops = 0;
  for (std::size_t k = 1; k < returns.size(); ++k) {
    const double diff = returns[k] - returns[k - 1];
    if (diff < 0.0) {
      drop_sum += diff;
      ++drops;
    }
  }
  const double mean_drop = drops == 0 ? 0.0 : drop_sum / static_cast<double>(drops);
  return std::clamp(1.0 + mean_drop / r_max, 0.0, 1.0);
}

}  // namespace

double improvement(std::span<const double> returns, double r_max) {
  check_returns(returns, r_max);
  return improvement_unchecked(returns, r_max);
}

double stability(std::span<const double> returns, double r_max) {
  check_returns(returns, r_max);
  return stability_unchecked(returns, r_max);
}

HistoryScore score(std::span<const double> returns, double r_max, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be non-negative, got " + format_real(lambda));
  check_returns(returns, r_max);
  HistoryScore s;
  s.lambda = lambda;
  s.improvement = improvement_unchecked(returns, r_max);
  s.stability = stability_unchecked(returns, r_max);
  s.unified = s.improvement + lambda * s.stability;
  return s;
}

double unified_metric(std::span<const double> returns, double r_max, double lambda) {
  return score(returns, r_max, lambda).unified;
}

double relative_enhancement(double mean_lhf, double mean_baseline) {
  if (mean_baseline == 0.0) throw InputError("relative enhancement is undefined for a zero baseline");
  return (mean_lhf - mean_baseline) / mean_baseline;
}

}  // namespace lhf
