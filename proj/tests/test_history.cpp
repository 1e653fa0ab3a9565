#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "lhf/errors.hpp"
#include "lhf/history.hpp"
#include "lhf/source.hpp"

using namespace lhf;
namespace fs = std::filesystem;

namespace {

/// Per-episode sums grouped by the recorded episode field.
std::map<int, double> returns_by_episode(const LearningHistory& h) {
  std::map<int, double> out;
  for (const auto& t : h.transitions) out[t.episode] += t.reward;
  return out;
}

void replace_line(const fs::path& file, std::size_t line_no, const std::string& text) {
  std::ifstream in(file);
  std::vector<std::string> lines;
  for (std::string s; std::getline(in, s);) lines.push_back(s);
  in.close();
  lines.at(line_no - 1) = text;
  std::ofstream out(file, std::ios::trunc);
  for (const auto& s : lines) out << s << '\n';
}

HistoryDataset small_dataset(Problem problem, std::uint64_t seed = 1) {
  return collect_dataset(test::desk_plan(problem, seed, 3, 4, 60, 0.25));
}

}  // namespace

TEST_CASE("the return fixture produces the requested returns") {
  for (int k = 0; k <= 10; ++k) {
    const std::vector<int> want{k};
    CHECK(episodic_returns(test::history_with_returns(want)) == std::vector<double>{static_cast<double>(k)});
  }
}

TEST_CASE("episodic returns agree with grouping by the episode field") {
  for (const auto problem : {Problem::Darkroom, Problem::DarkKeyToDoor, Problem::DarkroomPermuted}) {
    const auto d = small_dataset(problem, 5);
    for (const auto& env : d.envs)
      for (const auto& h : env) {
        const auto ret = episodic_returns(h);
        const auto grouped = returns_by_episode(h);
        REQUIRE(ret.size() == grouped.size());
        REQUIRE(ret.size() == episode_count(h));
        for (const auto& [k, r] : grouped) CHECK(ret[static_cast<std::size_t>(k)] == r);
      }
  }
}

TEST_CASE("a history that never touches the goal has all-zero returns") {
  EnvSpec spec = base_spec(Problem::Darkroom, Scale::Desk);
  spec.goal = {4, 4};
  spec.start = {0, 0};
  const std::vector<int> stays(30, static_cast<int>(Action::Stay));
  const auto h = test::play(spec, stays);
  CHECK(episodic_returns(h) == std::vector<double>(3, 0.0));
}

TEST_CASE("episodic returns reject empty and partial histories") {
  LearningHistory h;
  h.spec = test::desk_goal_at_start();
  CHECK_THROWS_AS((void)episodic_returns(h), InputError);
  const std::vector<int> partial(7, static_cast<int>(Action::Stay));
  CHECK_THROWS_AS((void)episodic_returns(test::play(h.spec, partial)), InputError);
}

TEST_CASE("prefix truncation") {
  std::vector<int> returns;
  for (int k = 0; k < 50; ++k) returns.push_back(k % 11);
  auto d = test::dataset_with_returns({returns, returns});

  const auto half = truncate_first_fraction(d, 0.5);
  check_dataset(half);
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& h = half.envs[0][l];
    CHECK(episode_count(h) == 25);
    const auto& full = d.envs[0][l].transitions;
    CHECK(h.transitions == std::vector<Transition>(full.begin(), full.begin() + 250));
  }
  REQUIRE(half.transforms.size() == 1);
  CHECK(half.transforms[0]["op"] == "truncate_first_fraction");

  const auto whole = truncate_first_fraction(d, 1.0);
  CHECK(whole.envs == d.envs);

  // floor(0.3 * 50) = 15 exactly, despite 0.3 * 50 = 14.999... in binary
  CHECK(episode_count(truncate_first_fraction(d, 0.3).envs[0][0]) == 15);

  CHECK_THROWS_AS((void)truncate_first_fraction(d, 0.0), InputError);
  CHECK_THROWS_AS((void)truncate_first_fraction(d, 1.5), InputError);
  CHECK_THROWS_AS((void)truncate_first_fraction(d, 0.01), InputError);
}

TEST_CASE("history-subset truncation") {
  const auto d = test::dataset_with_returns({{1}, {2}, {3}, {4}, {5}});
  const auto sub = keep_first_histories(d, 0.5);
  REQUIRE(sub.envs[0].size() == 2);
  CHECK(sub.envs[0][0] == d.envs[0][0]);
  CHECK(sub.envs[0][1] == d.envs[0][1]);
  CHECK_THROWS_AS((void)keep_first_histories(d, 0.1), InputError);
}

TEST_CASE("number formatting in records") {
  CHECK(format_real(0.0) == "0.0");
  CHECK(format_real(1.0) == "1.0");
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(1.3875000000000002) == "1.3875000000000002");
  Transition t;
  t.state.cell = {2, 3};
  t.action = 4;
  t.reward = 1.0;
  t.done = true;
  t.episode = 7;
  CHECK(format_transition(t) == R"({"s":[2,3],"a":4,"r":1.0,"done":true,"ep":7})");
  t.state.flag_count = 2;
  t.state.flags = {1, 0};
  CHECK(format_transition(t) == R"({"s":[2,3,1,0],"a":4,"r":1.0,"done":true,"ep":7})");
}

TEST_CASE("write/read round trip is lossless and byte-stable") {
  for (const auto problem : {Problem::Darkroom, Problem::DarkKeyToDoor, Problem::DarkroomPermuted,
                             Problem::DarkroomLarge}) {
    const auto d = small_dataset(problem, 11);
    const auto dir = test::temp_dir("roundtrip");
    write_dataset(d, dir);
    const auto back = read_dataset(dir);
    CHECK(back == d);
    const auto again = test::temp_dir("roundtrip2");
    write_dataset(back, again);
    CHECK(test::snapshot(dir) == test::snapshot(again));
    fs::remove_all(dir);
    fs::remove_all(again);
  }
}

TEST_CASE("provenance survives a round trip") {
  auto d = test::dataset_with_returns({{1, 2}, {3, 4}});
  d.envs[0][0].origin_index = 1;
  d.envs[0][1].origin_index = 1;
  d.envs[0][1].source_kind = SourceKind::Random;
  d.transforms.push_back({{"op", "lhf"}, {"seed", 3}});
  const auto dir = test::temp_dir("provenance");
  write_dataset(d, dir);
  CHECK(read_dataset(dir) == d);
  fs::remove_all(dir);
}

TEST_CASE("reader errors") {
  const auto d = test::dataset_with_returns({{1, 2}, {3, 4}});
  const auto dir = test::temp_dir("reader");
  const auto file = dir / "env_0" / "history_1.jsonl";

  SUBCASE("missing reward field names file and line") {
    write_dataset(d, dir);
    replace_line(file, 4, R"({"s":[2,2],"a":4,"done":false,"ep":0})");
    try {
      (void)read_dataset(dir);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.line() == 4);
      CHECK(e.file().find("history_1.jsonl") != std::string::npos);
      CHECK(std::string(e.what()).find("'r'") != std::string::npos);
    }
  }
  SUBCASE("ill-typed and malformed lines") {
    write_dataset(d, dir);
    replace_line(file, 2, R"({"s":[2,2],"a":"up","r":0.0,"done":false,"ep":0})");
    CHECK_THROWS_AS((void)read_dataset(dir), FormatError);
    replace_line(file, 2, "{not json");
    CHECK_THROWS_AS((void)read_dataset(dir), FormatError);
  }
  SUBCASE("wrong format tag") {
    write_dataset(d, dir);
    auto m = nlohmann::json::parse(test::slurp(dir / "manifest.json"));
    m["format"] = "lhf-history-v2";
    std::ofstream(dir / "manifest.json", std::ios::trunc) << m.dump(2);
    CHECK_THROWS_AS((void)read_dataset(dir), VersionError);
  }
  SUBCASE("stale r_max") {
    write_dataset(d, dir);
    auto m = nlohmann::json::parse(test::slurp(dir / "manifest.json"));
    m["r_max"][0] = 9.0;
    std::ofstream(dir / "manifest.json", std::ios::trunc) << m.dump(2);
    CHECK_THROWS_AS((void)read_dataset(dir), InvariantError);
  }
  SUBCASE("reward that does not replay") {
    write_dataset(d, dir);
    // line 2 is the first step of episode 0: up from the goal earns 0
    replace_line(file, 2, R"({"s":[2,2],"a":0,"r":1.0,"done":false,"ep":0})");
    CHECK_THROWS_AS((void)read_dataset(dir), InvariantError);
  }
  SUBCASE("missing history file") {
    write_dataset(d, dir);
    fs::remove(file);
    CHECK_THROWS_AS((void)read_dataset(dir), FormatError);
  }
  fs::remove_all(dir);
}

TEST_CASE("replay and dataset invariants") {
  auto d = test::dataset_with_returns({{1, 2}, {3, 4}});
  check_dataset(d);

  SUBCASE("wrong episode counter") {
    d.envs[0][0].transitions[12].episode = 0;
    CHECK_THROWS_AS(check_replay(d.envs[0][0]), InvariantError);
  }
  SUBCASE("state that does not replay") {
    d.envs[0][0].transitions[3].state.cell = {0, 0};
    CHECK_THROWS_AS(check_replay(d.envs[0][0]), InvariantError);
  }
  SUBCASE("done flag off the horizon") {
    d.envs[0][0].transitions[4].done = true;
    CHECK_THROWS_AS(check_replay(d.envs[0][0]), InvariantError);
  }
  SUBCASE("ragged dataset") {
    d.envs[0].pop_back();
    d.envs.push_back(test::dataset_with_returns({{1}, {2}}).envs[0]);
    for (auto& h : d.envs[1]) h.env_index = 1;
    d.r_max.push_back(d.r_max[0]);
    CHECK_THROWS_AS(check_dataset(d), InvariantError);
  }
  SUBCASE("mixed specs in one environment") {
    d.envs[0][1].spec.goal = {0, 0};
    CHECK_THROWS_AS(check_dataset(d), InvariantError);
  }
}
