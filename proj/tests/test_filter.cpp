#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>

#include "fixtures.hpp"
#include "lhf/errors.hpp"
#include "lhf/filter.hpp"
#include "lhf/scoring.hpp"
#include "lhf/source.hpp"
#include "oracles.hpp"

using namespace lhf;

namespace {

/// Softmax then min-max, evaluated literally in long double.
std::vector<double> softmax_reference(const std::vector<double>& us, double alpha) {
  std::vector<long double> soft(us.size());
  long double z = 0;
  for (std::size_t k = 0; k < us.size(); ++k) z += soft[k] = std::exp(static_cast<long double>(us[k]) / alpha);
  for (auto& s : soft) s /= z;
  const auto [lo, hi] = std::minmax_element(soft.begin(), soft.end());
  std::vector<double> out;
  for (const auto s : soft) out.push_back(static_cast<double>((s - *lo) / (*hi - *lo)));
  return out;
}

std::vector<double> random_us(CounterRng& rng, std::size_t n, double hi) {
  std::vector<double> us(n);
  for (auto& u : us) u = rng.uniform() * hi;
  return us;
}

}  // namespace

TEST_CASE("linear probabilities") {
  CHECK(linear_probabilities(std::vector<double>{0.3, 1.7}) == std::vector<double>{0.0, 1.0});
  CHECK(linear_probabilities(std::vector<double>{1, 1, 1}) == std::vector<double>{1, 1, 1});
  const auto p = linear_probabilities(std::vector<double>{0.2, 0.5, 0.8});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[2] == 1.0);
  CHECK(linear_probabilities(std::vector<double>{4.0}) == std::vector<double>{1.0});
}

TEST_CASE("softmax probabilities: endpoints, limits and the direct oracle") {
  CHECK(softmax_probabilities(std::vector<double>{0.0, 1.0}, 0.0625) == std::vector<double>{0.0, 1.0});
  CHECK(softmax_probabilities(std::vector<double>{2, 2}, 0.5) == std::vector<double>{1, 1});
  CHECK(softmax_probabilities(std::vector<double>{0.0, 0.5, 1.0}, 0.0625)[1] < 1e-3);

  CounterRng rng(5);
  for (int k = 0; k < 500; ++k) {
    const auto us = random_us(rng, 2 + rng.below(30), 2.0);
    // First-order expansion e^{U/a} ~ 1 + U/a: min-max of it is the linear rule.
    const auto big = softmax_probabilities(us, 1e6);
    const auto lin = linear_probabilities(us);
    for (std::size_t l = 0; l < us.size(); ++l) CHECK(big[l] == doctest::Approx(lin[l]).epsilon(1e-3));

    for (const double alpha : {0.0625, 0.125, 0.25, 0.5, 1.0}) {
      const auto got = softmax_probabilities(us, alpha);
      const auto ref = softmax_reference(us, alpha);
      for (std::size_t l = 0; l < us.size(); ++l) CHECK(got[l] == doctest::Approx(ref[l]).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS((void)softmax_probabilities(std::vector<double>{0, 1}, 0.0), InputError);
}

TEST_CASE("softmax is invariant to shifting every U") {
  CounterRng rng(8);
  for (int k = 0; k < 200; ++k) {
    const auto us = random_us(rng, 5, 2.0);
    auto shifted = us;
    for (auto& u : shifted) u += 700.0;  // would overflow e^{U/a} without the max-shift
    const auto a = softmax_probabilities(us, 0.25);
    const auto b = softmax_probabilities(shifted, 0.25);
    for (std::size_t l = 0; l < us.size(); ++l) CHECK(b[l] == doctest::Approx(a[l]).epsilon(1e-9));
  }
}

TEST_CASE("property: retention is monotone in U, strictly for softmax") {
  CounterRng rng(31);
  for (int k = 0; k < 1000; ++k) {
    const auto us = random_us(rng, 2 + rng.below(20), 3.0);
    const auto lin = linear_probabilities(us);
    const auto soft = softmax_probabilities(us, 0.5);
    for (std::size_t a = 0; a < us.size(); ++a)
      for (std::size_t b = 0; b < us.size(); ++b) {
        if (!(us[a] > us[b])) continue;
        CHECK(lin[a] >= lin[b]);
        CHECK(soft[a] > soft[b]);
      }
  }
}

TEST_CASE("select_histories edge cases") {
  CounterRng rng(1);
  SUBCASE("certain acceptance returns the input order") {
    const auto sel = select_histories(std::vector<double>{1, 1, 1, 1}, rng);
    CHECK(sel.accepted == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(sel.sweeps == 1);
  }
  SUBCASE("probs [1, 0] always give [h1, h1]") {
    for (int k = 0; k < 1000; ++k) {
      const auto sel = select_histories(std::vector<double>{1, 0}, rng);
      CHECK(sel.accepted == std::vector<std::size_t>{0, 0});
      CHECK(sel.sweeps == 2);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS((void)select_histories(std::vector<double>{}, rng), InputError);
    CHECK_THROWS_AS((void)select_histories(std::vector<double>{0, 0}, rng), InputError);
    CHECK_THROWS_AS((void)select_histories(std::vector<double>{1.5, 0}, rng), InputError);
    CHECK_THROWS_AS((void)select_histories(std::vector<double>{-0.1, 1}, rng), InputError);
  }
}

TEST_CASE("the sweep-chain oracle on hand-enumerable cases") {
  const auto a = oracle::sweep_sequence_distribution(std::vector<double>{1, 0});
  CHECK(a.size() == 1);
  CHECK(a.at({0, 0}) == 1.0);
  // [1, 0.5]: sweep 1 takes h1, then h2 with probability 1/2, else sweep 2 takes h1 again.
  const auto b = oracle::sweep_sequence_distribution(std::vector<double>{1, 0.5});
  CHECK(b.at({0, 1}) == doctest::Approx(0.5));
  CHECK(b.at({0, 0}) == doctest::Approx(0.5));
  const auto c = oracle::sweep_sequence_distribution(std::vector<double>{0.25, 0.5, 0});
  double total = 0.0;
  for (const auto& [seq, p] : c) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("probs [1, 0.5]: h2 is retained in half of the runs") {
  CounterRng rng(77);
  const std::vector<double> probs{1.0, 0.5};
  const double exact = oracle::sweep_multiplicity_distribution(probs).at({1, 1});
  int with_h2 = 0;
  constexpr int kRuns = 100000;
  for (int k = 0; k < kRuns; ++k) {
    const auto sel = select_histories(probs, rng);
    with_h2 += sel.accepted[1] == 1 ? 1 : 0;
  }
  CHECK(exact == doctest::Approx(0.5));
  CHECK(std::abs(static_cast<double>(with_h2) / kRuns - exact) < 0.01);
}

TEST_CASE("filter_environment copies the accepted histories") {
  const auto d = test::dataset_with_returns({{1, 2}, {3, 4}, {0, 0}});
  CounterRng rng(3);
  const auto out = filter_environment(d.envs[0], std::vector<double>{1, 0, 0}, rng);
  REQUIRE(out.size() == 3);
  for (const auto& h : out) CHECK(h == d.envs[0][0]);
  CHECK_THROWS_AS((void)filter_environment(d.envs[0], std::vector<double>{1, 0}, rng), InputError);
}

TEST_CASE("filter_dataset preserves shape and never keeps the argmin") {
  const HistoryDataset d = collect_dataset(test::desk_plan(Problem::Darkroom, 4, 5, 12, 100, 0.3));
  for (const auto strategy : {Strategy::Linear, Strategy::Softmax}) {
    FilterConfig cfg;
    cfg.strategy = strategy;
    cfg.alpha = 0.25;
    cfg.seed = 9;
    const FilterResult r = filter_dataset(d, cfg);
    check_dataset(r.dataset);
    REQUIRE(r.dataset.envs.size() == d.envs.size());
    CHECK(r.dataset.r_max == d.r_max);
    CHECK(r.dataset.plan == d.plan);
    REQUIRE(r.dataset.transforms.size() == 1);
    CHECK(r.dataset.transforms[0]["op"] == "lhf");
    for (std::size_t i = 0; i < d.envs.size(); ++i) {
      const auto& rep = r.envs[i];
      CHECK(r.dataset.envs[i].size() == d.envs[i].size());
      const auto [lo, hi] = std::minmax_element(rep.profile.us.begin(), rep.profile.us.end());
      if (*lo == *hi) continue;
      for (std::size_t l = 0; l < rep.profile.us.size(); ++l) {
        if (rep.profile.us[l] == *lo) CHECK(rep.multiplicity[l] == 0);
        if (rep.profile.us[l] == *hi) CHECK(rep.multiplicity[l] >= 1);
      }
      for (std::size_t k = 0; k < r.dataset.envs[i].size(); ++k) {
        const auto& h = r.dataset.envs[i][k];
        CHECK(h.history_index == static_cast<int>(k));
        REQUIRE(h.origin_index.has_value());
        CHECK(h.transitions == d.envs[i][static_cast<std::size_t>(*h.origin_index)].transitions);
      }
    }
  }
}

TEST_CASE("an environment with equal returns everywhere is kept as is") {
  const auto d = test::dataset_with_returns({{3, 3}, {3, 3}, {3, 3}});
  const FilterResult r = filter_dataset(d, FilterConfig{});
  CHECK(r.envs[0].profile.degenerate);
  CHECK(r.envs[0].profile.probs == std::vector<double>{1, 1, 1});
  for (std::size_t l = 0; l < 3; ++l) CHECK(r.dataset.envs[0][l].transitions == d.envs[0][l].transitions);
  CHECK(r.report(FilterConfig{})["environments"][0]["degenerate"] == true);
}

TEST_CASE("filtering is deterministic and independent of thread count and env order") {
  const HistoryDataset d = collect_dataset(test::desk_plan(Problem::DarkKeyToDoor, 2, 6, 10, 100, 0.2));
  FilterConfig cfg;
  cfg.seed = 123;
  ::setenv("LHF_THREADS", "1", 1);
  const FilterResult serial = filter_dataset(d, cfg);
  ::setenv("LHF_THREADS", "4", 1);
  const FilterResult parallel = filter_dataset(d, cfg);
  ::unsetenv("LHF_THREADS");
  CHECK(serial.dataset == parallel.dataset);

  // The stream of environment i depends only on (seed, i).
  const auto scores = score_dataset(d, cfg.lambda);
  for (std::size_t i = 0; i < d.envs.size(); ++i) {
    std::vector<double> us;
    for (const auto& s : scores[i]) us.push_back(s.unified);
    CounterRng rng(filter_stream_key(cfg.seed, i));
    CHECK(select_histories(linear_probabilities(us), rng).accepted == serial.envs[i].selection.accepted);
  }
}

TEST_CASE("filter report carries histograms and mean U") {
  const auto d = test::dataset_with_returns({{0, 0}, {2, 5, 3, 9}, {10, 10}, {5, 1}});
  FilterConfig cfg;
  cfg.seed = 4;
  const FilterResult r = filter_dataset(d, cfg);
  const auto rep = r.report(cfg);
  const auto& env = rep["environments"][0];
  std::size_t total = 0;
  for (const auto& [m, count] : env["retention_histogram"].items()) total += count.get<std::size_t>();
  CHECK(total == 4);
  CHECK(env["duplicates"].get<std::size_t>() + env["distinct_retained"].get<std::size_t>() == 4);
  CHECK(rep["mean_u_after"].get<double>() > rep["mean_u_before"].get<double>());
  CHECK(rep["config"]["strategy"] == "linear");
}

TEST_CASE("empirical r_max uses the largest observed return") {
  auto d = test::dataset_with_returns({{1, 4}, {2, 6}});
  CHECK(empirical_r_max(d) == std::vector<double>{6.0});
  FilterConfig cfg;
  cfg.rmax = RmaxSource::Empirical;
  CHECK(filter_dataset(d, cfg).envs[0].profile.us.size() == 2);
  const auto zero = test::dataset_with_returns({{0, 0}, {0}});
  CHECK_THROWS_AS((void)empirical_r_max(zero), DataError);
}

TEST_CASE("stale r_max metadata surfaces as a data error") {
  auto d = test::dataset_with_returns({{1, 4}, {2, 6}});
  d.r_max[0] = 5.0;
  CHECK_THROWS_AS((void)filter_dataset(d, FilterConfig{}), DataError);
}

TEST_CASE("invalid filter configuration") {
  FilterConfig cfg;
  cfg.lambda = -1;
  CHECK_THROWS_AS(validate(cfg), InputError);
  cfg = {};
  cfg.strategy = Strategy::Softmax;
  cfg.alpha = 0;
  CHECK_THROWS_AS(validate(cfg), InputError);
  CHECK_THROWS_AS((void)parse_strategy("cubic"), InputError);
}
