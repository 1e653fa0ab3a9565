#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lhf/env.hpp"

namespace lhf {

/// Which agent produced a history.
enum class SourceKind { Learner, Random };

[[nodiscard]] std::string_view to_string(SourceKind k) noexcept;
[[nodiscard]] SourceKind parse_source_kind(std::string_view name);

/// State as recorded in a transition: the cell plus problem-specific flags
/// (DarkKeyToDoor: key_found, goal_reached_once).
struct ObservedState {
  Cell cell{};
  std::array<std::uint8_t, 2> flags{};
  std::uint8_t flag_count = 0;

  friend bool operator==(const ObservedState&, const ObservedState&) = default;
};

[[nodiscard]] ObservedState observe(const EnvSpec& spec, const EnvState& state) noexcept;

/// (s_t, a_t, r_t): the state the action was taken in, the raw action index,
/// the reward it earned and whether it closed the episode.
struct Transition {
  ObservedState state;
  std::int32_t episode = 0;
  std::uint8_t action = 0;
  bool done = false;
  double reward = 0.0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// One source-agent run in one environment, in training order.
struct LearningHistory {
  int env_index = 0;
  int history_index = 0;
  EnvSpec spec;
  SourceKind source_kind = SourceKind::Learner;
  /// Set on filtered datasets: the history_index of the entry this one copies.
  std::optional<int> origin_index;
  std::vector<Transition> transitions;

  friend bool operator==(const LearningHistory&, const LearningHistory&) = default;
};

/// Histories grouped by environment: envs[i][l] is the l-th history of
/// environment i, and r_max[i] its analytic maximum episodic return.
struct HistoryDataset {
  Problem problem = Problem::Darkroom;
  std::vector<std::vector<LearningHistory>> envs;
  std::vector<double> r_max;
  /// Collection plan the dataset came from (free-form JSON object).
  nlohmann::json plan = nlohmann::json::object();
  /// One entry per transform applied since collection, oldest first.
  std::vector<nlohmann::json> transforms;

  [[nodiscard]] std::size_t history_count() const noexcept;
  [[nodiscard]] std::size_t transition_count() const noexcept;

  friend bool operator==(const HistoryDataset&, const HistoryDataset&) = default;
};

inline constexpr std::string_view kFormatTag = "lhf-history-v1";

/// Undiscounted per-episode reward sums in chronological order.
/// Throws InputError for an empty history.
[[nodiscard]] std::vector<double> episodic_returns(const LearningHistory& h);

[[nodiscard]] std::size_t episode_count(const LearningHistory& h);

/// Throws InvariantError unless transitions form whole episodes with a
/// consecutive episode counter and replaying the actions through env::step
/// reproduces every recorded state, reward and done flag exactly.
void check_replay(const LearningHistory& h);

/// Throws InvariantError on any dataset-level violation: spec mismatch within
/// an environment, r_max != max_return(spec), index mismatch, ragged shape
/// without a transform that declares it, or a failed replay.
void check_dataset(const HistoryDataset& d);

/// Keeps the chronological first floor(fraction * episodes) episodes of every
/// history. Throws InputError unless 0 < fraction <= 1 and every history
/// keeps at least one episode.
[[nodiscard]] HistoryDataset truncate_first_fraction(const HistoryDataset& d, double fraction);

/// Alternative reading of "the first half of learning histories": keeps the
/// first floor(fraction * N_l) whole histories of every environment.
[[nodiscard]] HistoryDataset keep_first_histories(const HistoryDataset& d, double fraction);

/// Writes DIR/manifest.json and DIR/env_<i>/history_<l>.jsonl. The manifest
/// is written last through a temporary file and a rename.
void write_dataset(const HistoryDataset& d, const std::filesystem::path& dir);

/// Loads and fully checks a dataset. Throws VersionError for a wrong format
/// tag, FormatError (with file and line) for malformed records and
/// InvariantError for well-formed content that breaks a dataset invariant.
[[nodiscard]] HistoryDataset read_dataset(const std::filesystem::path& dir);

/// One JSONL transition record without the trailing newline.
[[nodiscard]] std::string format_transition(const Transition& t);

/// Shortest round-trip decimal form of a double, always with a '.' or an
/// exponent so readers see a float.
[[nodiscard]] std::string format_real(double v);

}  // namespace lhf
