#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "lhf/env.hpp"
#include "lhf/history.hpp"
#include "lhf/rng.hpp"

namespace lhf {

enum class AgentKind { TabularQ, Random };

[[nodiscard]] std::string_view to_string(AgentKind k) noexcept;
[[nodiscard]] AgentKind parse_agent_kind(std::string_view name);

/// Source agent hyperparameters. Epsilon decays linearly from epsilon_start to
/// epsilon_end over epsilon_decay_steps transitions; 0 means "half of the
/// history".
struct SourceAgentConfig {
  AgentKind kind = AgentKind::TabularQ;
  double learning_rate = 0.5;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_decay_steps = 0;
  double discount = 0.9;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on out-of-range hyperparameters.
void validate(const SourceAgentConfig& cfg);

/// Which slice of the task split the environments come from.
enum class SplitPart { Pretrain, Test };

struct CollectionPlan {
  Problem problem = Problem::Darkroom;
  Scale scale = Scale::Full;
  int n_histories_per_env = 100;
  int transitions_per_history = 1000;
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;
  /// Seed of split_tasks(); kept apart from `seed` so resampling histories
  /// never moves tasks between pretraining and test.
  std::uint64_t split_seed = 0;
  SplitPart split = SplitPart::Pretrain;
  /// Use only the first max_envs environments of the split; 0 keeps all.
  int max_envs = 0;
  /// Template for the learner agents; `kind` and `seed` are set per history.
  SourceAgentConfig learner;
};

/// Throws InputError/ConfigError for an invalid plan, including a
/// transitions_per_history that is not a whole number of episodes.
void validate(const CollectionPlan& plan);

[[nodiscard]] nlohmann::json to_json(const CollectionPlan& plan);
[[nodiscard]] CollectionPlan plan_from_json(const nlohmann::json& j);

/// Runs one source agent online in `spec` for n_transitions steps and records
/// every transition in training order. TabularQ learns with epsilon-greedy
/// Q-learning (ties broken uniformly); Random acts uniformly and never
/// learns. All randomness comes from cfg.seed. Throws InputError when
/// n_transitions is not a positive multiple of the horizon.
[[nodiscard]] LearningHistory train_and_record(const EnvSpec& spec, const SourceAgentConfig& cfg,
                                               std::int64_t n_transitions);

/// Seed of the agent behind history (i, l).
[[nodiscard]] std::uint64_t history_seed(std::uint64_t plan_seed, std::size_t env_index, std::size_t history_index);

/// Which history slots of environment i hold random agents: exactly
/// floor(noise_fraction * N_l) of them, placed by a seeded shuffle.
[[nodiscard]] std::vector<bool> random_slots(const CollectionPlan& plan, std::size_t env_index);

/// Environments selected by the plan.
[[nodiscard]] std::vector<EnvSpec> plan_environments(const CollectionPlan& plan);

/// Collects N_l histories for every selected environment, in parallel across
/// (i, l) jobs; the result does not depend on the thread count.
[[nodiscard]] HistoryDataset collect_dataset(const CollectionPlan& plan);

}  // namespace lhf
