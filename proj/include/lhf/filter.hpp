#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lhf/history.hpp"
#include "lhf/rng.hpp"
#include "lhf/scoring.hpp"

namespace lhf {

enum class Strategy { Linear, Softmax };

[[nodiscard]] std::string_view to_string(Strategy s) noexcept;
[[nodiscard]] Strategy parse_strategy(std::string_view name);

struct FilterConfig {
  double lambda = 1.0;
  Strategy strategy = Strategy::Linear;
  /// Softmax temperature; ignored by the linear strategy.
  double alpha = 1.0;
  std::uint64_t seed = 0;
  RmaxSource rmax = RmaxSource::Analytic;
};

/// Throws InputError for lambda < 0 or a non-positive alpha under softmax.
void validate(const FilterConfig& cfg);

/// Retention probabilities of one environment's histories.
struct RetentionProfile {
  int env_index = 0;
  std::vector<double> us;
  std::vector<double> probs;
  /// All unified metrics were equal, so every history is kept with P = 1.
  bool degenerate = false;
};

/// Min-max normalization (U - min U) / (max U - min U). The maximum maps to
/// exactly 1 and the minimum to exactly 0; when all values are equal every
/// probability is 1.
[[nodiscard]] std::vector<double> linear_probabilities(std::span<const double> us);

/// Min-max normalization of softmax(U / alpha). The softmax denominator
/// cancels under min-max normalization, so this evaluates
///   (e^{(U-Umax)/a} - e^{(Umin-Umax)/a}) / (1 - e^{(Umin-Umax)/a})
/// with max-shifted exponents (expm1 near the flat limit). Endpoints and the
/// all-equal case behave as in linear_probabilities.
[[nodiscard]] std::vector<double> softmax_probabilities(std::span<const double> us, double alpha);

[[nodiscard]] std::vector<double> retention_probabilities(std::span<const double> us, const FilterConfig& cfg);

/// Acceptance trace of one environment.
struct Selection {
  /// Input positions in acceptance order; its size equals the input count.
  std::vector<std::size_t> accepted;
  std::size_t sweeps = 0;
};

/// The resampling loop: sweep positions 0..n-1 in order, accept position l
/// when v <= probs[l] for a fresh v ~ U(0, 1], and stop as soon as n
/// positions have been accepted (repeats allowed). Throws InputError for an
/// empty list, a probability outside [0, 1] or all-zero probabilities, and
/// InvariantError if a full sweep accepts nothing although some probability
/// is 1.
[[nodiscard]] Selection select_histories(std::span<const double> probs, CounterRng& rng);

/// select_histories applied to the histories themselves.
[[nodiscard]] std::vector<LearningHistory> filter_environment(std::span<const LearningHistory> histories,
                                                              std::span<const double> probs, CounterRng& rng);

/// Per-environment stream key, so environments can be filtered in any order.
[[nodiscard]] std::uint64_t filter_stream_key(std::uint64_t seed, std::size_t env_index) noexcept;

struct EnvFilterReport {
  RetentionProfile profile;
  Selection selection;
  /// multiplicity[l]: copies of input history l in the output.
  std::vector<std::size_t> multiplicity;
  double mean_u_before = 0.0;
  double mean_u_after = 0.0;
};

struct FilterResult {
  HistoryDataset dataset;
  std::vector<EnvFilterReport> envs;
  double mean_u_before = 0.0;
  double mean_u_after = 0.0;

  /// Retention histograms, duplicate counts and mean U before/after, plus the
  /// rules applied to degenerate environments.
  [[nodiscard]] nlohmann::json report(const FilterConfig& cfg) const;
};

/// Filters every environment independently (in parallel) and returns a
/// dataset of identical shape. Output history k of environment i copies input
/// history accepted[k] and records it as origin_index.
[[nodiscard]] FilterResult filter_dataset(const HistoryDataset& d, const FilterConfig& cfg);

}  // namespace lhf
