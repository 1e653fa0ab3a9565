#include "lhf/scoring.hpp"

#include <algorithm>
#include <string>

#include "lhf/errors.hpp"

namespace lhf {

std::string_view to_string(RmaxSource s) noexcept { return s == RmaxSource::Analytic ? "analytic" : "empirical"; }

RmaxSource parse_rmax_source(std::string_view name) {
  if (name == "analytic") return RmaxSource::Analytic;
  if (name == "empirical") return RmaxSource::Empirical;
  throw InputError("unknown r_max source '" + std::string(name) + "' (expected analytic or empirical)");
}

std::vector<double> empirical_r_max(const HistoryDataset& d) {
  std::vector<double> out;
  out.reserve(d.envs.size());
  for (std::size_t i = 0; i < d.envs.size(); ++i) {
    double best = 0.0;
    for (const auto& h : d.envs[i]) {
      const auto returns = episodic_returns(h);
      best = std::max(best, *std::max_element(returns.begin(), returns.end()));
    }
    if (!(best > 0.0))
      throw DataError("environment " + std::to_string(i) + ": every episodic return is 0, no empirical r_max");
    out.push_back(best);
  }
  return out;
}

std::vector<double> resolve_r_max(const HistoryDataset& d, RmaxSource source) {
  if (source == RmaxSource::Empirical) return empirical_r_max(d);
  if (d.r_max.size() != d.envs.size()) throw DataError("dataset lacks an r_max entry for every environment");
  return d.r_max;
}

std::vector<std::vector<HistoryScore>> score_dataset(const HistoryDataset& d, double lambda, RmaxSource source) {
  const auto r_max = resolve_r_max(d, source);
  std::vector<std::vector<HistoryScore>> scores(d.envs.size());
  for (std::size_t i = 0; i < d.envs.size(); ++i) {
    scores[i].reserve(d.envs[i].size());
    for (const auto& h : d.envs[i]) {
      const auto returns = episodic_returns(h);
      try {
        scores[i].push_back(score(returns, r_max[i], lambda));
      } catch (const DataError& e) {
        throw DataError("history (" + std::to_string(h.env_index) + "," + std::to_string(h.history_index) +
                        "): " + e.what());
      }
    }
  }
  return scores;
}

}  // namespace lhf
