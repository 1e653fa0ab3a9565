#include "lhf/source.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lhf/errors.hpp"
#include "lhf/parallel.hpp"

namespace lhf {

namespace {

constexpr std::uint64_t kNoiseStreamTag = 0x6e6f697365ULL;  // "noise"

/// Tabular action values over (cell, key_found, goal_reached_once).
class QTable {
 public:
  explicit QTable(int grid_side) : side_(grid_side), values_(static_cast<std::size_t>(grid_side * grid_side * 4 * kNumActions), 0.0) {}

  [[nodiscard]] std::size_t row(const EnvState& s) const {
    const int flags = (s.key_found ? 2 : 0) + (s.goal_reached_once ? 1 : 0);
    return static_cast<std::size_t>(((s.position.row * side_ + s.position.col) * 4 + flags) * kNumActions);
  }

  double& at(const EnvState& s, int a) { return values_[row(s) + static_cast<std::size_t>(a)]; }

  [[nodiscard]] double max_value(const EnvState& s) const {
    const auto* q = &values_[row(s)];
    return *std::max_element(q, q + kNumActions);
  }

  int greedy(const EnvState& s, CounterRng& rng) const {
    const auto* q = &values_[row(s)];
    const double best = *std::max_element(q, q + kNumActions);
    std::array<int, kNumActions> ties{};
    int n = 0;
    for (int a = 0; a < kNumActions; ++a)
      if (q[a] == best) ties[static_cast<std::size_t>(n++)] = a;
    return ties[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
  }

 private:
  int side_;
  std::vector<double> values_;
};

}  // namespace

std::string_view to_string(AgentKind k) noexcept { return k == AgentKind::TabularQ ? "tabular_q" : "random"; }

AgentKind parse_agent_kind(std::string_view name) {
  if (name == "tabular_q") return AgentKind::TabularQ;
  if (name == "random") return AgentKind::Random;
  throw ConfigError("unknown agent kind '" + std::string(name) + "'");
}

void validate(const SourceAgentConfig& cfg) {
  const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(cfg.epsilon_start) || !unit(cfg.epsilon_end)) throw ConfigError("epsilon values must lie in [0, 1]");
  if (cfg.epsilon_end > cfg.epsilon_start) throw ConfigError("epsilon_end must not exceed epsilon_start");
  if (!unit(cfg.discount)) throw ConfigError("discount must lie in [0, 1]");
  if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0)) throw ConfigError("learning_rate must lie in (0, 1]");
  if (cfg.epsilon_decay_steps < 0) throw ConfigError("epsilon_decay_steps must be non-negative");
}

void validate(const CollectionPlan& plan) {
  if (plan.n_histories_per_env < 1) throw InputError("histories per environment must be at least 1");
  if (!(plan.noise_fraction >= 0.0 && plan.noise_fraction <= 1.0)) throw InputError("noise fraction must lie in [0, 1]");
  if (plan.max_envs < 0) throw InputError("max_envs must be non-negative");
  const int horizon = base_spec(plan.problem, plan.scale).horizon;
  if (plan.transitions_per_history <= 0 || plan.transitions_per_history % horizon != 0)
    throw InputError("transitions per history (" + std::to_string(plan.transitions_per_history) +
                     ") must be a positive multiple of the horizon (" + std::to_string(horizon) + ")");
  validate(plan.learner);
}

nlohmann::json to_json(const CollectionPlan& plan) {
  const auto& a = plan.learner;
  return {
      {"problem", std::string(to_string(plan.problem))},
      {"scale", std::string(to_string(plan.scale))},
      {"n_histories_per_env", plan.n_histories_per_env},
      {"transitions_per_history", plan.transitions_per_history},
      {"noise_fraction", plan.noise_fraction},
      {"seed", plan.seed},
      {"split_seed", plan.split_seed},
      {"split", plan.split == SplitPart::Pretrain ? "pretrain" : "test"},
      {"max_envs", plan.max_envs},
      {"learner",
       {{"learning_rate", a.learning_rate},
        {"epsilon_start", a.epsilon_start},
        {"epsilon_end", a.epsilon_end},
        {"epsilon_decay_steps", a.epsilon_decay_steps},
        {"discount", a.discount}}},
  };
}

CollectionPlan plan_from_json(const nlohmann::json& j) {
  try {
    CollectionPlan plan;
    plan.problem = parse_problem(j.at("problem").get<std::string>());
    plan.scale = parse_scale(j.at("scale").get<std::string>());
    plan.n_histories_per_env = j.at("n_histories_per_env").get<int>();
    plan.transitions_per_history = j.at("transitions_per_history").get<int>();
    plan.noise_fraction = j.at("noise_fraction").get<double>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.split_seed = j.at("split_seed").get<std::uint64_t>();
    plan.split = j.at("split").get<std::string>() == "test" ? SplitPart::Test : SplitPart::Pretrain;
    plan.max_envs = j.at("max_envs").get<int>();
    const auto& a = j.at("learner");
    plan.learner.learning_rate = a.at("learning_rate").get<double>();
    plan.learner.epsilon_start = a.at("epsilon_start").get<double>();
    plan.learner.epsilon_end = a.at("epsilon_end").get<double>();
    plan.learner.epsilon_decay_steps = a.at("epsilon_decay_steps").get<std::int64_t>();
    plan.learner.discount = a.at("discount").get<double>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("collection plan: ") + e.what());
  }
}

LearningHistory train_and_record(const EnvSpec& spec, const SourceAgentConfig& cfg, std::int64_t n_transitions) {
  validate(spec);
  validate(cfg);
  if (n_transitions <= 0 || n_transitions % spec.horizon != 0)
    throw InputError("n_transitions (" + std::to_string(n_transitions) + ") must be a positive multiple of the horizon (" +
                     std::to_string(spec.horizon) + ")");

  LearningHistory h;
  h.spec = spec;
  h.source_kind = cfg.kind == AgentKind::TabularQ ? SourceKind::Learner : SourceKind::Random;
  h.transitions.reserve(static_cast<std::size_t>(n_transitions));

  CounterRng rng(mix64(cfg.seed));
  QTable q(spec.grid_side);
  const double decay_steps =
      static_cast<double>(cfg.epsilon_decay_steps > 0 ? cfg.epsilon_decay_steps : std::max<std::int64_t>(1, n_transitions / 2));

  EnvState state = reset(spec);
  std::int32_t episode = 0;
  for (std::int64_t t = 0; t < n_transitions; ++t) {
    int action = 0;
    if (cfg.kind == AgentKind::Random) {
      action = static_cast<int>(rng.below(kNumActions));
    } else {
      const double progress = std::min(1.0, static_cast<double>(t) / decay_steps);
      const double epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * progress;
      action = rng.uniform() < epsilon ? static_cast<int>(rng.below(kNumActions)) : q.greedy(state, rng);
    }

    const StepResult r = step(spec, state, action);
    h.transitions.push_back({observe(spec, state), episode, static_cast<std::uint8_t>(action), r.done, r.reward});

    if (cfg.kind == AgentKind::TabularQ) {
      // The horizon is a time limit, not a terminal state, so the target
      // always bootstraps.
      double& value = q.at(state, action);
      value += cfg.learning_rate * (r.reward + cfg.discount * q.max_value(r.next) - value);
    }

    if (r.done) {
      state = reset(spec);
      ++episode;
    } else {
      state = r.next;
    }
  }
  return h;
}

std::uint64_t history_seed(std::uint64_t plan_seed, std::size_t env_index, std::size_t history_index) {
  return derive_seed(plan_seed, {env_index, history_index});
}

std::vector<bool> random_slots(const CollectionPlan& plan, std::size_t env_index) {
  const auto n = static_cast<std::size_t>(plan.n_histories_per_env);
  const auto n_random = static_cast<std::size_t>(std::floor(plan.noise_fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(derive_seed(plan.seed, {kNoiseStreamTag, env_index}));
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<bool> slots(n, false);
  for (std::size_t k = 0; k < n_random; ++k) slots[order[k]] = true;
  return slots;
}

std::vector<EnvSpec> plan_environments(const CollectionPlan& plan) {
  TaskSplit split = split_tasks(plan.problem, plan.split_seed, plan.scale);
  auto envs = plan.split == SplitPart::Pretrain ? std::move(split.pretrain) : std::move(split.test);
  if (plan.max_envs > 0 && static_cast<std::size_t>(plan.max_envs) < envs.size())
    envs.resize(static_cast<std::size_t>(plan.max_envs));
  return envs;
}

HistoryDataset collect_dataset(const CollectionPlan& plan) {
  validate(plan);
  const auto specs = plan_environments(plan);
  const auto n_l = static_cast<std::size_t>(plan.n_histories_per_env);

  HistoryDataset d;
  d.problem = plan.problem;
  d.plan = to_json(plan);
  d.envs.resize(specs.size());
  d.r_max.resize(specs.size());

  std::vector<std::vector<bool>> noise(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    d.envs[i].resize(n_l);
    d.r_max[i] = max_return(specs[i]);
    noise[i] = random_slots(plan, i);
  }

  parallel_for(specs.size() * n_l, [&](std::size_t job) {
    const std::size_t i = job / n_l;
    const std::size_t l = job % n_l;
    SourceAgentConfig cfg = plan.learner;
    cfg.kind = noise[i][l] ? AgentKind::Random : AgentKind::TabularQ;
    cfg.seed = history_seed(plan.seed, i, l);
    LearningHistory h = train_and_record(specs[i], cfg, plan.transitions_per_history);
    h.env_index = static_cast<int>(i);
    h.history_index = static_cast<int>(l);
    d.envs[i][l] = std::move(h);
  });
  return d;
}

}  // namespace lhf
