#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lhf/env.hpp"
#include "lhf/history.hpp"
#include "lhf/source.hpp"

namespace lhf::test {

/// Records a history by playing `actions` from reset, episode after episode.
inline LearningHistory play(const EnvSpec& spec, std::span<const int> actions, int env_index = 0, int history_index = 0) {
  LearningHistory h;
  h.env_index = env_index;
  h.history_index = history_index;
  h.spec = spec;
  EnvState s = reset(spec);
  int episode = 0;
  for (const int a : actions) {
    const StepResult r = step(spec, s, a);
    h.transitions.push_back({observe(spec, s), episode, static_cast<std::uint8_t>(a), r.done, r.reward});
    if (r.done) {
      s = reset(spec);
      ++episode;
    } else {
      s = r.next;
    }
  }
  return h;
}

/// Desk Darkroom with the goal under the start cell: R_max = horizon = 10.
inline EnvSpec desk_goal_at_start() {
  EnvSpec spec = base_spec(Problem::Darkroom, Scale::Desk);
  spec.goal = spec.start;
  return spec;
}

/// Actions for one 10-step episode of desk_goal_at_start() returning exactly
/// k in [0, 10]: step off the goal, wait, step back on and stay.
inline std::vector<int> episode_with_return(int k) {
  const int up = static_cast<int>(Action::Up), down = static_cast<int>(Action::Down), stay = static_cast<int>(Action::Stay);
  if (k == 10) return std::vector<int>(10, stay);
  if (k == 0) {
    std::vector<int> a(10, stay);
    a[0] = up;
    return a;
  }
  // up, (9 - k) x stay, down, (k - 1) x stay
  std::vector<int> a{up};
  a.insert(a.end(), static_cast<std::size_t>(9 - k), stay);
  a.push_back(down);
  a.insert(a.end(), static_cast<std::size_t>(k - 1), stay);
  return a;
}

/// A history whose episodic returns are exactly `returns` (each in [0, 10]).
inline LearningHistory history_with_returns(std::span<const int> returns, int env_index = 0, int history_index = 0) {
  std::vector<int> actions;
  for (const int k : returns) {
    const auto ep = episode_with_return(k);
    actions.insert(actions.end(), ep.begin(), ep.end());
  }
  return play(desk_goal_at_start(), actions, env_index, history_index);
}

/// Dataset with one environment (desk_goal_at_start) from a list of return lists.
inline HistoryDataset dataset_with_returns(const std::vector<std::vector<int>>& per_history) {
  HistoryDataset d;
  d.problem = Problem::Darkroom;
  d.plan = {{"fixture", "returns"}};
  d.envs.emplace_back();
  for (std::size_t l = 0; l < per_history.size(); ++l)
    d.envs[0].push_back(history_with_returns(per_history[l], 0, static_cast<int>(l)));
  d.r_max.push_back(max_return(desk_goal_at_start()));
  return d;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lhf_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Relative path -> bytes for every file under dir, optionally skipping one name.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir, const std::string& skip = "") {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != skip)
      out[std::filesystem::relative(e.path(), dir).generic_string()] = slurp(e.path());
  return out;
}

inline CollectionPlan desk_plan(Problem problem, std::uint64_t seed, int envs, int histories, int transitions,
                                double noise) {
  CollectionPlan p;
  p.problem = problem;
  p.scale = Scale::Desk;
  p.seed = seed;
  p.max_envs = envs;
  p.n_histories_per_env = histories;
  p.transitions_per_history = transitions;
  p.noise_fraction = noise;
  return p;
}

}  // namespace lhf::test
