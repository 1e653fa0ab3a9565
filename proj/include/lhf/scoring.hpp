#pragma once

#include <string_view>
#include <vector>

#include "lhf/history.hpp"
#include "lhf/metrics.hpp"

namespace lhf {

/// Where the per-environment normalizer comes from. Analytic uses the
/// dataset's r_max table; Empirical uses the largest episodic return observed
/// in each environment (for datasets whose metadata cannot be trusted).
enum class RmaxSource { Analytic, Empirical };

[[nodiscard]] std::string_view to_string(RmaxSource s) noexcept;
[[nodiscard]] RmaxSource parse_rmax_source(std::string_view name);

/// Largest episodic return per environment. Throws DataError for an
/// environment where every return is 0.
[[nodiscard]] std::vector<double> empirical_r_max(const HistoryDataset& d);

[[nodiscard]] std::vector<double> resolve_r_max(const HistoryDataset& d, RmaxSource source);

/// scores[i][l] for every history of the dataset.
[[nodiscard]] std::vector<std::vector<HistoryScore>> score_dataset(const HistoryDataset& d, double lambda,
                                                                   RmaxSource source = RmaxSource::Analytic);

}  // namespace lhf
