#include "lhf/env.hpp"

#include <algorithm>
#include <numeric>

#include "lhf/errors.hpp"
#include "lhf/rng.hpp"

namespace lhf {

namespace {

constexpr int kDeskSide = 5;
constexpr int kDeskHorizon = 10;

bool on_grid(Cell c, int side) { return c.row >= 0 && c.row < side && c.col >= 0 && c.col < side; }

Cell move(Cell c, Action a, int side) {
  switch (a) {
    case Action::Up: c.row = std::max(0, c.row - 1); break;
    case Action::Down: c.row = std::min(side - 1, c.row + 1); break;
    case Action::Left: c.col = std::max(0, c.col - 1); break;
    case Action::Right: c.col = std::min(side - 1, c.col + 1); break;
    case Action::Stay: break;
  }
  return c;
}

std::string cell_str(Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

nlohmann::json cell_json(Cell c) { return nlohmann::json::array({c.row, c.col}); }

Cell cell_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ConfigError(std::string("spec field '") + field + "' must be [row, col]");
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

std::string_view to_string(Problem p) noexcept {
  switch (p) {
    case Problem::Darkroom: return "darkroom";
    case Problem::DarkroomPermuted: return "darkroom-permuted";
    case Problem::DarkroomLarge: return "darkroom-large";
    case Problem::DarkKeyToDoor: return "dark-key-to-door";
  }
  return "unknown";
}

std::string_view to_string(Scale s) noexcept { return s == Scale::Full ? "full" : "desk"; }

Problem parse_problem(std::string_view name) {
  for (const auto p : {Problem::Darkroom, Problem::DarkroomPermuted, Problem::DarkroomLarge, Problem::DarkKeyToDoor})
    if (to_string(p) == name) return p;
  throw ConfigError("unknown problem '" + std::string(name) + "'");
}

Scale parse_scale(std::string_view name) {
  if (name == "full") return Scale::Full;
  if (name == "desk") return Scale::Desk;
  throw ConfigError("unknown scale '" + std::string(name) + "' (expected full or desk)");
}

void validate(const EnvSpec& spec) {
  if (spec.grid_side <= 0) throw ConfigError("grid_side must be positive");
  if (spec.horizon <= 0) throw ConfigError("horizon must be positive");
  if (!on_grid(spec.start, spec.grid_side)) throw ConfigError("start " + cell_str(spec.start) + " is off the grid");
  if (!on_grid(spec.goal, spec.grid_side)) throw ConfigError("goal " + cell_str(spec.goal) + " is off the grid");

  const bool wants_key = spec.problem == Problem::DarkKeyToDoor;
  if (wants_key != spec.key.has_value())
    throw ConfigError(wants_key ? "dark-key-to-door spec needs a key" : "only dark-key-to-door specs carry a key");
  if (spec.key && !on_grid(*spec.key, spec.grid_side))
    throw ConfigError("key " + cell_str(*spec.key) + " is off the grid");

  const bool wants_perm = spec.problem == Problem::DarkroomPermuted;
  if (wants_perm != spec.action_perm.has_value())
    throw ConfigError(wants_perm ? "darkroom-permuted spec needs an action permutation"
                                 : "only darkroom-permuted specs carry an action permutation");
  if (spec.action_perm) {
    std::array<bool, kNumActions> seen{};
    for (const int a : *spec.action_perm) {
      if (a < 0 || a >= kNumActions || seen[static_cast<std::size_t>(a)])
        throw ConfigError("action_perm is not a bijection on {0..4}");
      seen[static_cast<std::size_t>(a)] = true;
    }
  }
}

EnvSpec base_spec(Problem problem, Scale scale) {
  EnvSpec spec;
  spec.problem = problem;
  const bool desk = scale == Scale::Desk;
  switch (problem) {
    case Problem::Darkroom:
    case Problem::DarkKeyToDoor:
      spec.grid_side = desk ? kDeskSide : 9;
      spec.horizon = desk ? kDeskHorizon : 20;
      break;
    case Problem::DarkroomPermuted:
      spec.grid_side = desk ? kDeskSide : 9;
      spec.horizon = desk ? kDeskHorizon : 50;
      break;
    case Problem::DarkroomLarge:
      spec.grid_side = desk ? kDeskSide : 15;
      spec.horizon = desk ? kDeskHorizon : 50;
      break;
  }
  const int mid = spec.grid_side / 2;
  if (problem == Problem::DarkroomPermuted) {
    spec.start = {0, 0};
    spec.goal = {spec.grid_side - 1, spec.grid_side - 1};
    spec.action_perm = ActionPermutation{0, 1, 2, 3, 4};
  } else {
    spec.start = {mid, mid};
    spec.goal = {mid, mid};
  }
  if (problem == Problem::DarkKeyToDoor) spec.key = Cell{mid, mid};
  return spec;
}

EnvState reset(const EnvSpec& spec) {
  validate(spec);
  EnvState s;
  s.position = spec.start;
  return s;
}

StepResult step(const EnvSpec& spec, const EnvState& state, int action) {
  if (action < 0 || action >= kNumActions)
    throw InputError("action " + std::to_string(action) + " is outside [0, 5)");
  if (state.step_count >= spec.horizon)
    throw ProtocolError("step called after the episode ended (step_count " + std::to_string(state.step_count) + ")");

  const int canonical = spec.action_perm ? (*spec.action_perm)[static_cast<std::size_t>(action)] : action;

  StepResult out;
  out.next = state;
  out.next.position = move(state.position, static_cast<Action>(canonical), spec.grid_side);
  out.next.step_count = state.step_count + 1;
  out.done = out.next.step_count == spec.horizon;

  const Cell at = out.next.position;
  if (spec.problem == Problem::DarkKeyToDoor) {
    if (!out.next.key_found && at == *spec.key) {
      out.next.key_found = true;
      out.reward += 1.0;
    }
    if (out.next.key_found && !out.next.goal_reached_once && at == spec.goal) {
      out.next.goal_reached_once = true;
      out.reward += 1.0;
    }
  } else if (at == spec.goal) {
    out.reward = 1.0;
  }
  return out;
}

double max_return(const EnvSpec& spec) {
  const int horizon = spec.horizon;
  if (spec.problem == Problem::DarkKeyToDoor) {
    // Rewards are paid on post-step positions, so a key under the start cell
    // still costs one step.
    const int to_key = std::max(1, manhattan(spec.start, *spec.key));
    if (to_key > horizon) return 0.0;
    return to_key + manhattan(*spec.key, spec.goal) <= horizon ? 2.0 : 1.0;
  }
  // Every step that ends on the goal pays 1; the first such step is step
  // max(d, 1).
  const int first = std::max(1, manhattan(spec.start, spec.goal));
  return first > horizon ? 0.0 : static_cast<double>(horizon - first + 1);
}

std::vector<EnvSpec> enumerate_tasks(Problem problem, Scale scale) {
  const EnvSpec base = base_spec(problem, scale);
  const int side = base.grid_side;
  std::vector<EnvSpec> tasks;

  switch (problem) {
    case Problem::Darkroom:
    case Problem::DarkroomLarge:
      tasks.reserve(static_cast<std::size_t>(side * side));
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
          EnvSpec s = base;
          s.goal = {r, c};
          tasks.push_back(s);
        }
      break;
    case Problem::DarkroomPermuted: {
      ActionPermutation perm{};
      std::iota(perm.begin(), perm.end(), 0);
      do {
        EnvSpec s = base;
        s.action_perm = perm;
        tasks.push_back(s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case Problem::DarkKeyToDoor:
      tasks.reserve(static_cast<std::size_t>(side * side * side * side));
      for (int kr = 0; kr < side; ++kr)
        for (int kc = 0; kc < side; ++kc)
          for (int gr = 0; gr < side; ++gr)
            for (int gc = 0; gc < side; ++gc) {
              EnvSpec s = base;
              s.key = Cell{kr, kc};
              s.goal = {gr, gc};
              tasks.push_back(s);
            }
      break;
  }
  return tasks;
}

std::size_t pretrain_count(Problem problem, Scale scale) {
  const std::size_t total = enumerate_tasks(problem, scale).size();
  const std::size_t percent = problem == Problem::DarkKeyToDoor ? 95 : 90;
  return (total * percent + 50) / 100;
}

TaskSplit split_tasks(Problem problem, std::uint64_t seed, Scale scale) {
  const auto tasks = enumerate_tasks(problem, scale);
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(derive_seed(seed, {0x7370'6c69'74ULL, static_cast<std::uint64_t>(problem)}));
  shuffle(std::span<std::size_t>(order), rng);

  const std::size_t n_pretrain = pretrain_count(problem, scale);
  std::vector<std::size_t> pre(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pretrain));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_pretrain), order.end());
  std::sort(pre.begin(), pre.end());
  std::sort(test.begin(), test.end());

  TaskSplit split;
  split.pretrain.reserve(pre.size());
  split.test.reserve(test.size());
  for (const auto k : pre) split.pretrain.push_back(tasks[k]);
  for (const auto k : test) split.test.push_back(tasks[k]);
  return split;
}

nlohmann::json to_json(const EnvSpec& spec) {
  nlohmann::json j;
  j["problem"] = std::string(to_string(spec.problem));
  j["grid_side"] = spec.grid_side;
  j["horizon"] = spec.horizon;
  j["start"] = cell_json(spec.start);
  j["goal"] = cell_json(spec.goal);
  if (spec.key) j["key"] = cell_json(*spec.key);
  if (spec.action_perm) j["action_perm"] = *spec.action_perm;
  return j;
}

EnvSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  for (const char* field : {"problem", "grid_side", "horizon", "start", "goal"})
    if (!j.contains(field)) throw ConfigError(std::string("spec is missing field '") + field + "'");
  if (!j["problem"].is_string()) throw ConfigError("spec field 'problem' must be a string");
  if (!j["grid_side"].is_number_integer() || !j["horizon"].is_number_integer())
    throw ConfigError("spec fields 'grid_side' and 'horizon' must be integers");

  EnvSpec spec;
  spec.problem = parse_problem(j["problem"].get<std::string>());
  spec.grid_side = j["grid_side"].get<int>();
  spec.horizon = j["horizon"].get<int>();
  spec.start = cell_from_json(j["start"], "start");
  spec.goal = cell_from_json(j["goal"], "goal");
  if (j.contains("key")) spec.key = cell_from_json(j["key"], "key");
  if (j.contains("action_perm")) {
    const auto& p = j["action_perm"];
    if (!p.is_array() || p.size() != kNumActions)
      throw ConfigError("spec field 'action_perm' must hold 5 integers");
    ActionPermutation perm{};
    for (std::size_t k = 0; k < perm.size(); ++k) {
      if (!p[k].is_number_integer()) throw ConfigError("spec field 'action_perm' must hold 5 integers");
      perm[k] = p[k].get<int>();
    }
    spec.action_perm = perm;
  }
  validate(spec);
  return spec;
}

}  // namespace lhf
