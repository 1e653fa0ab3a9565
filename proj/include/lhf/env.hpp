#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lhf {

enum class Problem { Darkroom, DarkroomPermuted, DarkroomLarge, DarkKeyToDoor };

/// Full: the published sizes. Desk: 5x5 grids with horizon 10 for every
/// problem, for fast experiments.
enum class Scale { Full, Desk };

/// Canonical actions. For DarkroomPermuted the agent's raw action index is
/// first mapped through the task's permutation.
enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr int kNumActions = 5;

/// Grid coordinate. Row 0 is the top row; Up decreases row, Left decreases col.
struct Cell {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

[[nodiscard]] constexpr int manhattan(Cell a, Cell b) noexcept {
  return (a.row > b.row ? a.row - b.row : b.row - a.row) + (a.col > b.col ? a.col - b.col : b.col - a.col);
}

using ActionPermutation = std::array<int, kNumActions>;

/// One task instance. `goal` is the door for DarkKeyToDoor.
struct EnvSpec {
  Problem problem = Problem::Darkroom;
  int grid_side = 9;
  int horizon = 20;
  Cell start{};
  Cell goal{};
  std::optional<Cell> key;                      // DarkKeyToDoor only
  std::optional<ActionPermutation> action_perm;  // DarkroomPermuted only

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

struct EnvState {
  Cell position{};
  int step_count = 0;
  bool key_found = false;
  bool goal_reached_once = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

struct TaskSplit {
  std::vector<EnvSpec> pretrain;
  std::vector<EnvSpec> test;
};

[[nodiscard]] std::string_view to_string(Problem p) noexcept;
[[nodiscard]] std::string_view to_string(Scale s) noexcept;
/// Accepts the CLI names: darkroom | darkroom-permuted | darkroom-large | dark-key-to-door.
[[nodiscard]] Problem parse_problem(std::string_view name);
/// Accepts full | desk.
[[nodiscard]] Scale parse_scale(std::string_view name);

/// Throws ConfigError unless the spec is structurally valid: positive sizes,
/// start/goal/key on the grid, key present iff DarkKeyToDoor, permutation
/// present iff DarkroomPermuted and bijective on {0..4}.
void validate(const EnvSpec& spec);

/// Grid side, horizon and start cell for a problem at a scale. `goal`, `key`
/// and `action_perm` are left for the caller (or are the fixed corner goal
/// for DarkroomPermuted).
[[nodiscard]] EnvSpec base_spec(Problem problem, Scale scale);

[[nodiscard]] EnvState reset(const EnvSpec& spec);

/// Applies one raw action. Movement is clipped at the walls. Darkroom-family
/// reward is 1 whenever the post-step position is the goal. DarkKeyToDoor pays
/// 1 once on the first visit to the key and 1 once on the first visit to the
/// door after the key. Throws InputError for an action outside [0, 5) and
/// ProtocolError when the episode is already over.
[[nodiscard]] StepResult step(const EnvSpec& spec, const EnvState& state, int action);

/// Largest episodic return any action sequence can collect.
[[nodiscard]] double max_return(const EnvSpec& spec);

/// Every task of a problem in canonical order: goals row-major, permutations
/// lexicographic, (key, door) pairs key-major.
[[nodiscard]] std::vector<EnvSpec> enumerate_tasks(Problem problem, Scale scale = Scale::Full);

/// Number of pretraining tasks: round(fraction * total) with fraction 90%
/// (95% for DarkKeyToDoor).
[[nodiscard]] std::size_t pretrain_count(Problem problem, Scale scale = Scale::Full);

/// Seeded random partition of enumerate_tasks(). Each side keeps canonical order.
[[nodiscard]] TaskSplit split_tasks(Problem problem, std::uint64_t seed, Scale scale = Scale::Full);

/// Canonical JSON record of a spec. Parsing validates.
[[nodiscard]] nlohmann::json to_json(const EnvSpec& spec);
[[nodiscard]] EnvSpec spec_from_json(const nlohmann::json& j);

}  // namespace lhf
