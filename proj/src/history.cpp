#include "lhf/history.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lhf/errors.hpp"

namespace lhf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Guards floor(fraction * n) against products like 0.29 * 100 = 28.999...
std::size_t floor_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InputError("fraction must lie in (0, 1], got " + format_real(fraction));
}

fs::path history_path(const fs::path& dir, std::size_t i, std::size_t l) {
  return dir / ("env_" + std::to_string(i)) / ("history_" + std::to_string(l) + ".jsonl");
}

void write_file_atomically(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

json header_json(const LearningHistory& h) {
  json j;
  j["env_index"] = h.env_index;
  j["history_index"] = h.history_index;
  j["spec"] = to_json(h.spec);
  j["source_kind"] = std::string(to_string(h.source_kind));
  if (h.origin_index) j["origin_history_index"] = *h.origin_index;
  return j;
}

const json& require(const json& obj, const char* field, const std::string& file, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw FormatError(file, line, std::string("missing field '") + field + "'");
  return *it;
}

int require_int(const json& obj, const char* field, const std::string& file, std::size_t line) {
  const auto& v = require(obj, field, file, line);
  if (!v.is_number_integer()) throw FormatError(file, line, std::string("field '") + field + "' must be an integer");
  return v.get<int>();
}

Transition parse_transition(const json& j, const EnvSpec& spec, const std::string& file, std::size_t line) {
  if (!j.is_object()) throw FormatError(file, line, "transition record must be a JSON object");
  Transition t;

  const auto& s = require(j, "s", file, line);
  const std::size_t flag_count = spec.problem == Problem::DarkKeyToDoor ? 2 : 0;
  if (!s.is_array() || s.size() != 2 + flag_count)
    throw FormatError(file, line, "field 's' must be [row, col" + std::string(flag_count ? ", key, door]" : "]"));
  for (const auto& v : s)
    if (!v.is_number_integer()) throw FormatError(file, line, "field 's' must hold integers");
  t.state.cell = {s[0].get<int>(), s[1].get<int>()};
  t.state.flag_count = static_cast<std::uint8_t>(flag_count);
  for (std::size_t k = 0; k < flag_count; ++k) {
    const int f = s[2 + k].get<int>();
    if (f != 0 && f != 1) throw FormatError(file, line, "state flags must be 0 or 1");
    t.state.flags[k] = static_cast<std::uint8_t>(f);
  }

  const int action = require_int(j, "a", file, line);
  if (action < 0 || action >= kNumActions) throw FormatError(file, line, "field 'a' must lie in [0, 5)");
  t.action = static_cast<std::uint8_t>(action);

  const auto& r = require(j, "r", file, line);
  if (!r.is_number()) throw FormatError(file, line, "field 'r' must be a number");
  t.reward = r.get<double>();

  const auto& done = require(j, "done", file, line);
  if (!done.is_boolean()) throw FormatError(file, line, "field 'done' must be a boolean");
  t.done = done.get<bool>();

  t.episode = require_int(j, "ep", file, line);
  return t;
}

LearningHistory read_history(const fs::path& path, std::size_t i, std::size_t l) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(file, 0, "history file is missing");

  LearningHistory h;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(file, line, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      if (!j.is_object()) throw FormatError(file, line, "header must be a JSON object");
      h.env_index = require_int(j, "env_index", file, line);
      h.history_index = require_int(j, "history_index", file, line);
      try {
        h.spec = spec_from_json(require(j, "spec", file, line));
      } catch (const ConfigError& e) {
        throw FormatError(file, line, std::string("bad spec: ") + e.what());
      }
      const auto& kind = require(j, "source_kind", file, line);
      if (!kind.is_string()) throw FormatError(file, line, "field 'source_kind' must be a string");
      try {
        h.source_kind = parse_source_kind(kind.get<std::string>());
      } catch (const Error& e) {
        throw FormatError(file, line, e.what());
      }
      if (j.contains("origin_history_index")) h.origin_index = require_int(j, "origin_history_index", file, line);
      if (h.env_index != static_cast<int>(i) || h.history_index != static_cast<int>(l))
        throw FormatError(file, line, "header indices do not match the file location");
      have_header = true;
      continue;
    }
    h.transitions.push_back(parse_transition(j, h.spec, file, line));
  }
  if (!have_header) throw FormatError(file, 1, "history file is empty");
  return h;
}

}  // namespace

std::string_view to_string(SourceKind k) noexcept { return k == SourceKind::Learner ? "learner" : "random"; }

SourceKind parse_source_kind(std::string_view name) {
  if (name == "learner") return SourceKind::Learner;
  if (name == "random") return SourceKind::Random;
  throw InputError("unknown source kind '" + std::string(name) + "'");
}

ObservedState observe(const EnvSpec& spec, const EnvState& state) noexcept {
  ObservedState o;
  o.cell = state.position;
  if (spec.problem == Problem::DarkKeyToDoor) {
    o.flag_count = 2;
    o.flags = {static_cast<std::uint8_t>(state.key_found), static_cast<std::uint8_t>(state.goal_reached_once)};
  }
  return o;
}

std::size_t HistoryDataset::history_count() const noexcept {
  std::size_t n = 0;
  for (const auto& env : envs) n += env.size();
  return n;
}

std::size_t HistoryDataset::transition_count() const noexcept {
  std::size_t n = 0;
  for (const auto& env : envs)
    for (const auto& h : env) n += h.transitions.size();
  return n;
}

std::vector<double> episodic_returns(const LearningHistory& h) {
  if (h.transitions.empty()) throw InputError("episodic_returns: history has no transitions");
  std::vector<double> returns;
  double sum = 0.0;
  for (const auto& t : h.transitions) {
    sum += t.reward;
    if (t.done) {
      returns.push_back(sum);
      sum = 0.0;
    }
  }
  if (!h.transitions.back().done) throw InputError("episodic_returns: history ends mid-episode");
  return returns;
}

std::size_t episode_count(const LearningHistory& h) {
  std::size_t n = 0;
  for (const auto& t : h.transitions) n += t.done ? 1 : 0;
  return n;
}

void check_replay(const LearningHistory& h) {
  const auto where = [&](std::size_t k) {
    return "history (" + std::to_string(h.env_index) + "," + std::to_string(h.history_index) + ") transition " +
           std::to_string(k) + ": ";
  };
  const auto horizon = static_cast<std::size_t>(h.spec.horizon);
  if (h.transitions.empty() || h.transitions.size() % horizon != 0)
    throw InvariantError(where(h.transitions.size()) + "history is not a whole number of episodes");

  EnvState state = reset(h.spec);
  for (std::size_t k = 0; k < h.transitions.size(); ++k) {
    const Transition& t = h.transitions[k];
    if (static_cast<std::size_t>(t.episode) != k / horizon) throw InvariantError(where(k) + "wrong episode index");
    if (!(t.state == observe(h.spec, state))) throw InvariantError(where(k) + "recorded state does not replay");
    const StepResult r = step(h.spec, state, t.action);
    if (r.reward != t.reward) throw InvariantError(where(k) + "recorded reward does not replay");
    if (r.done != t.done) throw InvariantError(where(k) + "done flag does not match the horizon");
    state = r.done ? reset(h.spec) : r.next;
  }
}

void check_dataset(const HistoryDataset& d) {
  if (d.envs.size() != d.r_max.size()) throw InvariantError("r_max table size does not match the environment count");
  bool ragged_allowed = false;
  for (const auto& t : d.transforms)
    if (t.is_object() && t.contains("rectangular") && t["rectangular"] == false) ragged_allowed = true;

  for (std::size_t i = 0; i < d.envs.size(); ++i) {
    const auto& env = d.envs[i];
    const std::string tag = "environment " + std::to_string(i) + ": ";
    if (env.empty()) throw InvariantError(tag + "no histories");
    if (!ragged_allowed && env.size() != d.envs.front().size())
      throw InvariantError(tag + "history count differs from environment 0 (dataset is not rectangular)");
    const EnvSpec& spec = env.front().spec;
    if (spec.problem != d.problem) throw InvariantError(tag + "spec problem differs from the dataset problem");
    if (d.r_max[i] != max_return(spec))
      throw InvariantError(tag + "r_max " + format_real(d.r_max[i]) + " != max_return(spec) " +
                           format_real(max_return(spec)));
    for (std::size_t l = 0; l < env.size(); ++l) {
      const auto& h = env[l];
      if (h.env_index != static_cast<int>(i) || h.history_index != static_cast<int>(l))
        throw InvariantError(tag + "history " + std::to_string(l) + " carries mismatched indices");
      if (!(h.spec == spec)) throw InvariantError(tag + "histories do not share one spec");
      check_replay(h);
    }
  }
}

HistoryDataset truncate_first_fraction(const HistoryDataset& d, double fraction) {
  check_fraction(fraction);
  HistoryDataset out = d;
  for (auto& env : out.envs)
    for (auto& h : env) {
      const std::size_t keep = floor_fraction(fraction, episode_count(h));
      if (keep == 0)
        throw InputError("fraction " + format_real(fraction) + " leaves history (" + std::to_string(h.env_index) +
                         "," + std::to_string(h.history_index) + ") with no episodes");
      h.transitions.resize(keep * static_cast<std::size_t>(h.spec.horizon));
    }
  out.transforms.push_back({{"op", "truncate_first_fraction"}, {"fraction", fraction}});
  return out;
}

HistoryDataset keep_first_histories(const HistoryDataset& d, double fraction) {
  check_fraction(fraction);
  HistoryDataset out = d;
  for (auto& env : out.envs) {
    const std::size_t keep = floor_fraction(fraction, env.size());
    if (keep == 0) throw InputError("fraction " + format_real(fraction) + " leaves an environment with no histories");
    env.resize(keep);
  }
  out.transforms.push_back({{"op", "keep_first_histories"}, {"fraction", fraction}});
  return out;
}

std::string format_real(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), end);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string format_transition(const Transition& t) {
  std::string s = "{\"s\":[";
  s += std::to_string(t.state.cell.row);
  s += ',';
  s += std::to_string(t.state.cell.col);
  for (std::size_t k = 0; k < t.state.flag_count; ++k) {
    s += ',';
    s += std::to_string(t.state.flags[k]);
  }
  s += "],\"a\":";
  s += std::to_string(t.action);
  s += ",\"r\":";
  s += format_real(t.reward);
  s += ",\"done\":";
  s += t.done ? "true" : "false";
  s += ",\"ep\":";
  s += std::to_string(t.episode);
  s += '}';
  return s;
}

void write_dataset(const HistoryDataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  json sizes = json::array();
  for (std::size_t i = 0; i < d.envs.size(); ++i) {
    const fs::path env_dir = dir / ("env_" + std::to_string(i));
    fs::create_directories(env_dir);
    for (std::size_t l = 0; l < d.envs[i].size(); ++l) {
      const auto& h = d.envs[i][l];
      std::string content = header_json(h).dump();
      content += '\n';
      for (const auto& t : h.transitions) {
        content += format_transition(t);
        content += '\n';
      }
      write_file_atomically(history_path(dir, i, l), content);
    }
    sizes.push_back(d.envs[i].size());
  }

  json manifest;
  manifest["format"] = std::string(kFormatTag);
  manifest["problem"] = std::string(to_string(d.problem));
  manifest["plan"] = d.plan;
  manifest["transforms"] = d.transforms;
  manifest["r_max"] = d.r_max;
  manifest["histories_per_env"] = sizes;
  write_file_atomically(dir / "manifest.json", manifest.dump(2) + "\n");
}

HistoryDataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const std::string mfile = manifest_path.string();
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw FormatError(mfile, 0, "manifest is missing");
  std::stringstream buffer;
  buffer << in.rdbuf();

  json m;
  try {
    m = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw FormatError(mfile, 0, std::string("malformed JSON: ") + e.what());
  }
  if (!m.is_object()) throw FormatError(mfile, 0, "manifest must be a JSON object");
  const auto& tag = require(m, "format", mfile, 0);
  if (!tag.is_string() || tag.get<std::string>() != kFormatTag)
    throw VersionError(mfile, 0, "unsupported format tag " + tag.dump() + " (expected \"" + std::string(kFormatTag) + "\")");

  HistoryDataset d;
  const auto& problem = require(m, "problem", mfile, 0);
  if (!problem.is_string()) throw FormatError(mfile, 0, "field 'problem' must be a string");
  try {
    d.problem = parse_problem(problem.get<std::string>());
  } catch (const ConfigError& e) {
    throw FormatError(mfile, 0, e.what());
  }
  d.plan = require(m, "plan", mfile, 0);
  const auto& transforms = require(m, "transforms", mfile, 0);
  if (!transforms.is_array()) throw FormatError(mfile, 0, "field 'transforms' must be an array");
  d.transforms.assign(transforms.begin(), transforms.end());

  const auto& r_max = require(m, "r_max", mfile, 0);
  const auto& sizes = require(m, "histories_per_env", mfile, 0);
  if (!r_max.is_array() || !sizes.is_array() || r_max.size() != sizes.size())
    throw FormatError(mfile, 0, "fields 'r_max' and 'histories_per_env' must be arrays of equal length");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!r_max[i].is_number()) throw FormatError(mfile, 0, "field 'r_max' must hold numbers");
    if (!sizes[i].is_number_unsigned()) throw FormatError(mfile, 0, "field 'histories_per_env' must hold counts");
    d.r_max.push_back(r_max[i].get<double>());
    std::vector<LearningHistory> env;
    const auto n = sizes[i].get<std::size_t>();
    env.reserve(n);
    for (std::size_t l = 0; l < n; ++l) env.push_back(read_history(history_path(dir, i, l), i, l));
    d.envs.push_back(std::move(env));
  }

  check_dataset(d);
  return d;
}

}  // namespace lhf
