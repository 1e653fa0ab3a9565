#include "lhf/filter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "lhf/errors.hpp"
#include "lhf/parallel.hpp"

namespace lhf {

namespace {

constexpr std::uint64_t kFilterStreamTag = 0x6c6866ULL;  // "lhf"

double mean(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Strategy s) noexcept { return s == Strategy::Linear ? "linear" : "softmax"; }

Strategy parse_strategy(std::string_view name) {
  if (name == "linear") return Strategy::Linear;
  if (name == "softmax") return Strategy::Softmax;
  throw InputError("unknown strategy '" + std::string(name) + "' (expected linear or softmax)");
}

void validate(const FilterConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw InputError("lambda must be non-negative");
  if (cfg.strategy == Strategy::Softmax && (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)))
    throw InputError("softmax temperature alpha must be positive");
}

std::vector<double> linear_probabilities(std::span<const double> us) {
  if (us.empty()) return {};
  const auto [lo, hi] = std::minmax_element(us.begin(), us.end());
  const double u_min = *lo;
  const double range = *hi - u_min;
  std::vector<double> probs(us.size(), 1.0);
  if (range == 0.0) return probs;
  for (std::size_t l = 0; l < us.size(); ++l) probs[l] = (us[l] - u_min) / range;
  return probs;
}

std::vector<double> softmax_probabilities(std::span<const double> us, double alpha) {
  if (!(alpha > 0.0)) throw InputError("softmax temperature alpha must be positive");
  if (us.empty()) return {};
  const auto [lo, hi] = std::minmax_element(us.begin(), us.end());
  const double u_min = *lo;
  const double u_max = *hi;
  std::vector<double> probs(us.size(), 1.0);
  if (u_min == u_max) return probs;

  const double floor_exp = (u_min - u_max) / alpha;  // < 0
  const double denom = -std::expm1(floor_exp);        // 1 - e^{floor_exp}
  const bool near_flat = floor_exp > -1.0;
  const double e_floor = std::exp(floor_exp);
  for (std::size_t l = 0; l < us.size(); ++l) {
    if (us[l] == u_max) continue;
    if (us[l] == u_min) {
      probs[l] = 0.0;
      continue;
    }
    const double shifted = (us[l] - u_max) / alpha;
    const double num = near_flat ? e_floor * std::expm1(shifted - floor_exp) : std::exp(shifted) - e_floor;
    probs[l] = std::clamp(num / denom, 0.0, 1.0);
  }
  return probs;
}

std::vector<double> retention_probabilities(std::span<const double> us, const FilterConfig& cfg) {
  return cfg.strategy == Strategy::Linear ? linear_probabilities(us) : softmax_probabilities(us, cfg.alpha);
}

Selection select_histories(std::span<const double> probs, CounterRng& rng) {
  const std::size_t n = probs.size();
  if (n == 0) throw InputError("cannot filter an environment without histories");
  double p_max = 0.0;
  for (const double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("retention probability " + format_real(p) + " outside [0, 1]");
    p_max = std::max(p_max, p);
  }
  if (p_max == 0.0) throw InputError("all retention probabilities are zero; the sweep cannot terminate");

  Selection sel;
  sel.accepted.reserve(n);
  while (sel.accepted.size() < n) {
    ++sel.sweeps;
    const std::size_t before = sel.accepted.size();
    for (std::size_t l = 0; l < n && sel.accepted.size() < n; ++l)
      if (rng.uniform_open_closed() <= probs[l]) sel.accepted.push_back(l);
    if (p_max == 1.0 && sel.accepted.size() == before)
      throw InvariantError("a full sweep accepted no history although one has retention probability 1");
  }
  if (p_max == 1.0 && sel.sweeps > n) throw InvariantError("sweep count exceeded the history count");
  return sel;
}

std::vector<LearningHistory> filter_environment(std::span<const LearningHistory> histories,
                                                std::span<const double> probs, CounterRng& rng) {
  if (histories.size() != probs.size()) throw InputError("one retention probability is needed per history");
  const Selection sel = select_histories(probs, rng);
  std::vector<LearningHistory> out;
  out.reserve(sel.accepted.size());
  for (const auto l : sel.accepted) out.push_back(histories[l]);
  return out;
}

std::uint64_t filter_stream_key(std::uint64_t seed, std::size_t env_index) noexcept {
  return derive_seed(seed, {kFilterStreamTag, env_index});
}

FilterResult filter_dataset(const HistoryDataset& d, const FilterConfig& cfg) {
  validate(cfg);
  const auto scores = score_dataset(d, cfg.lambda, cfg.rmax);

  FilterResult result;
  result.dataset = d;
  result.envs.resize(d.envs.size());

  parallel_for(d.envs.size(), [&](std::size_t i) {
    const auto& inputs = d.envs[i];
    EnvFilterReport& rep = result.envs[i];
    rep.profile.env_index = static_cast<int>(i);
    for (const auto& s : scores[i]) rep.profile.us.push_back(s.unified);
    rep.profile.probs = retention_probabilities(rep.profile.us, cfg);
    const auto [lo, hi] = std::minmax_element(rep.profile.us.begin(), rep.profile.us.end());
    rep.profile.degenerate = *lo == *hi;

    CounterRng rng(filter_stream_key(cfg.seed, i));
    rep.selection = select_histories(rep.profile.probs, rng);

    rep.multiplicity.assign(inputs.size(), 0);
    std::vector<LearningHistory> out;
    out.reserve(inputs.size());
    std::vector<double> kept_us;
    for (const auto l : rep.selection.accepted) {
      ++rep.multiplicity[l];
      kept_us.push_back(rep.profile.us[l]);
      LearningHistory h = inputs[l];
      h.origin_index = inputs[l].history_index;
      h.history_index = static_cast<int>(out.size());
      out.push_back(std::move(h));
    }
    if (out.size() != inputs.size()) throw InvariantError("filtered environment changed size");
    rep.mean_u_before = mean(rep.profile.us);
    rep.mean_u_after = mean(kept_us);
    result.dataset.envs[i] = std::move(out);
  });

  std::size_t count = 0;
  for (const auto& rep : result.envs) {
    const auto n = static_cast<double>(rep.profile.us.size());
    result.mean_u_before += rep.mean_u_before * n;
    result.mean_u_after += rep.mean_u_after * n;
    count += rep.profile.us.size();
  }
  if (count > 0) {
    result.mean_u_before /= static_cast<double>(count);
    result.mean_u_after /= static_cast<double>(count);
  }

  nlohmann::json entry = {{"op", "lhf"},
                          {"lambda", cfg.lambda},
                          {"strategy", std::string(to_string(cfg.strategy))},
                          {"seed", cfg.seed},
                          {"rmax", std::string(to_string(cfg.rmax))}};
  if (cfg.strategy == Strategy::Softmax) entry["alpha"] = cfg.alpha;
  result.dataset.transforms.push_back(std::move(entry));
  return result;
}

nlohmann::json FilterResult::report(const FilterConfig& cfg) const {
  nlohmann::json envs_json = nlohmann::json::array();
  for (const auto& rep : envs) {
    std::map<std::string, std::size_t> histogram;
    std::size_t distinct = 0;
    for (const auto m : rep.multiplicity) {
      ++histogram[std::to_string(m)];
      distinct += m > 0 ? 1 : 0;
    }
    envs_json.push_back({
        {"env_index", rep.profile.env_index},
        {"degenerate", rep.profile.degenerate},
        {"unified", rep.profile.us},
        {"probabilities", rep.profile.probs},
        {"multiplicity", rep.multiplicity},
        {"retention_histogram", histogram},
        {"distinct_retained", distinct},
        {"duplicates", rep.selection.accepted.size() - distinct},
        {"sweeps", rep.selection.sweeps},
        {"mean_u_before", rep.mean_u_before},
        {"mean_u_after", rep.mean_u_after},
    });
  }
  nlohmann::json config = {{"lambda", cfg.lambda},
                           {"strategy", std::string(to_string(cfg.strategy))},
                           {"seed", cfg.seed},
                           {"rmax", std::string(to_string(cfg.rmax))}};
  if (cfg.strategy == Strategy::Softmax) config["alpha"] = cfg.alpha;
  return {
      {"config", config},
      {"rules",
       {{"degenerate_environment", "all unified metrics equal: every retention probability is 1"},
        {"sweep_order", "ascending history index, no reshuffle between sweeps"},
        {"duplicates", "kept as distinct entries with origin_history_index"}}},
      {"mean_u_before", mean_u_before},
      {"mean_u_after", mean_u_after},
      {"environments", envs_json},
  };
}

}  // namespace lhf
