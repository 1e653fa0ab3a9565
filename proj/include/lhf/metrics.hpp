#pragma once

#include <span>

namespace lhf {

/// Scores of one learning history against its environment's R_max.
struct HistoryScore {
  double improvement = 0.0;
  double stability = 0.0;
  double unified = 0.0;
  double lambda = 0.0;
};

/// (mean + (max - min)) / (2 r_max): rewards both the level reached and the
/// progress made across the history.
///
/// Throws InputError for an empty list or r_max <= 0, and DataError for a
/// return outside [0, r_max] (stale R_max or a corrupted dataset).
[[nodiscard]] double improvement(std::span<const double> returns, double r_max);

/// 1 + mean(negative consecutive differences) / r_max. Differences equal to
/// zero are not degradations; with no negative differences the mean is taken
/// as 0 and stability is 1. Same errors as improvement().
[[nodiscard]] double stability(std::span<const double> returns, double r_max);

/// improvement + lambda * stability. Throws InputError for lambda < 0.
[[nodiscard]] double unified_metric(std::span<const double> returns, double r_max, double lambda);

/// All three scores in one pass over the checks.
[[nodiscard]] HistoryScore score(std::span<const double> returns, double r_max, double lambda);

/// (mean_lhf - mean_baseline) / mean_baseline. Throws InputError when the
/// baseline is zero.
[[nodiscard]] double relative_enhancement(double mean_lhf, double mean_baseline);

}  // namespace lhf
