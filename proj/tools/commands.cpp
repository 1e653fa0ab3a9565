#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lhf/errors.hpp"
#include "lhf/filter.hpp"
#include "lhf/history.hpp"
#include "lhf/run_manifest.hpp"
#include "lhf/scoring.hpp"
#include "lhf/source.hpp"

namespace lhf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string started_at;
};

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Clears a previous toolkit output at `dir`; refuses to touch anything else.
void prepare_output(const fs::path& dir, bool force) {
  if (!fs::exists(dir)) return;
  if (!fs::is_directory(dir)) throw InputError("output path " + dir.string() + " exists and is not a directory");
  if (fs::is_empty(dir)) return;
  const bool ours = fs::exists(dir / kRunManifestName) || fs::exists(dir / "manifest.json");
  if (!ours && !force)
    throw InputError("output directory " + dir.string() + " is not empty and holds no toolkit output (use --force)");
  fs::remove_all(dir);
}

void finish(const Invocation& inv, const fs::path& out, json config, json seeds,
            const std::optional<fs::path>& input) {
  RunManifest m;
  m.command_line = inv.argv;
  m.config = std::move(config);
  m.seeds = std::move(seeds);
  if (input) m.input_hash = hash_directory(*input);
  m.output_hash = hash_directory(out);
  m.started_at = inv.started_at;
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - inv.start).count();
  write_run_manifest(out, m);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string problem;
  std::string scale = "full";
  std::string split = "pretrain";
  bool envs_from_split = true;
  int histories = 100;
  int transitions = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  int max_envs = 0;
  SourceAgentConfig learner;
  std::string out;
  bool force = false;
};

void cmd_generate(const GenerateArgs& a, const Invocation& inv) {
  CollectionPlan plan;
  plan.problem = parse_problem(a.problem);
  plan.scale = parse_scale(a.scale);
  plan.n_histories_per_env = a.histories;
  plan.transitions_per_history = a.transitions > 0 ? a.transitions : 50 * base_spec(plan.problem, plan.scale).horizon;
  plan.noise_fraction = a.noise;
  plan.seed = a.seed;
  plan.split_seed = a.split_seed;
  plan.split = a.split == "test" ? SplitPart::Test : SplitPart::Pretrain;
  plan.max_envs = a.max_envs;
  plan.learner = a.learner;
  validate(plan);

  const HistoryDataset d = collect_dataset(plan);
  const fs::path out(a.out);
  prepare_output(out, a.force);
  write_dataset(d, out);
  finish(inv, out, to_json(plan), {{"seed", plan.seed}, {"split_seed", plan.split_seed}}, std::nullopt);
  std::cerr << "generated " << d.envs.size() << " environments x " << plan.n_histories_per_env << " histories ("
            << d.transition_count() << " transitions) in " << out.string() << "\n";
}

// ---- truncate ---------------------------------------------------------------

struct TruncateArgs {
  std::string in, out;
  double fraction = 0.5;
  std::string mode = "prefix";
  bool force = false;
};

void cmd_truncate(const TruncateArgs& a, const Invocation& inv) {
  const HistoryDataset d = read_dataset(a.in);
  const HistoryDataset t = a.mode == "prefix" ? truncate_first_fraction(d, a.fraction) : keep_first_histories(d, a.fraction);
  const fs::path out(a.out);
  prepare_output(out, a.force);
  write_dataset(t, out);
  finish(inv, out, {{"fraction", a.fraction}, {"mode", a.mode}}, json::object(), fs::path(a.in));
}

// ---- stats ------------------------------------------------------------------

struct StatsArgs {
  std::string in;
  std::string out;
  double lambda = 1.0;
  std::string rmax = "analytic";
  bool force = false;
};

void cmd_stats(const StatsArgs& a, const Invocation& inv) {
  const HistoryDataset d = read_dataset(a.in);
  const RmaxSource source = parse_rmax_source(a.rmax);
  const auto r_max = resolve_r_max(d, source);
  const auto scores = score_dataset(d, a.lambda, source);

  std::string table = "i,l,improvement,stability,U\n";
  std::string summary = "i,histories,r_max,mean_improvement,mean_stability,mean_U,min_U,max_U\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double imp = 0, stab = 0, u = 0;
    double u_min = scores[i].front().unified, u_max = u_min;
    for (std::size_t l = 0; l < scores[i].size(); ++l) {
      const auto& s = scores[i][l];
      table += std::to_string(i) + "," + std::to_string(l) + "," + format_real(s.improvement) + "," +
               format_real(s.stability) + "," + format_real(s.unified) + "\n";
      imp += s.improvement;
      stab += s.stability;
      u += s.unified;
      u_min = std::min(u_min, s.unified);
      u_max = std::max(u_max, s.unified);
    }
    const auto n = static_cast<double>(scores[i].size());
    summary += std::to_string(i) + "," + std::to_string(scores[i].size()) + "," + format_real(r_max[i]) + "," +
               format_real(imp / n) + "," + format_real(stab / n) + "," + format_real(u / n) + "," + format_real(u_min) +
               "," + format_real(u_max) + "\n";
  }

  if (a.out.empty()) {
    std::cout << table << "\n" << summary;
    return;
  }
  const fs::path out(a.out);
  prepare_output(out, a.force);
  fs::create_directories(out);
  write_text(out / "scores.csv", table);
  write_text(out / "env_summary.csv", summary);
  finish(inv, out, {{"lambda", a.lambda}, {"rmax", a.rmax}}, json::object(), fs::path(a.in));
}

// ---- filter -----------------------------------------------------------------

struct FilterArgs {
  std::string in, out;
  FilterConfig cfg;
  std::string strategy = "linear";
  std::string rmax = "analytic";
  std::string report;
  bool force = false;
};

void cmd_filter(FilterArgs a, const Invocation& inv) {
  a.cfg.strategy = parse_strategy(a.strategy);
  a.cfg.rmax = parse_rmax_source(a.rmax);
  validate(a.cfg);
  const HistoryDataset d = read_dataset(a.in);
  const FilterResult r = filter_dataset(d, a.cfg);

  const fs::path out(a.out);
  prepare_output(out, a.force);
  write_dataset(r.dataset, out);
  const std::string report = r.report(a.cfg).dump(2) + "\n";
  write_text(a.report.empty() ? out / "filter_report.json" : fs::path(a.report), report);

  json config = {{"lambda", a.cfg.lambda}, {"strategy", a.strategy}, {"rmax", a.rmax}};
  if (a.cfg.strategy == Strategy::Softmax) config["alpha"] = a.cfg.alpha;
  finish(inv, out, config, {{"seed", a.cfg.seed}}, fs::path(a.in));
  std::cerr << "mean U " << format_real(r.mean_u_before) << " -> " << format_real(r.mean_u_after) << "\n";
}

// ---- export / verify --------------------------------------------------------

struct ExportArgs {
  std::string in, out;
  bool force = false;
};

void cmd_export(const ExportArgs& a, const Invocation& inv) {
  const HistoryDataset d = read_dataset(a.in);
  const fs::path out(a.out);
  prepare_output(out, a.force);
  write_dataset(d, out);
  finish(inv, out, {{"format", std::string(kFormatTag)}}, json::object(), fs::path(a.in));
}

int cmd_verify(const std::string& in) {
  const HistoryDataset d = read_dataset(in);
  const bool hashed = fs::exists(fs::path(in) / kRunManifestName);
  if (hashed && !verify_run_manifest(in)) {
    std::cerr << in << ": run manifest hash does not match the directory content\n";
    return kInvariantViolation;
  }
  std::cout << in << ": ok (" << d.envs.size() << " environments, " << d.history_count() << " histories, "
            << d.transition_count() << " transitions" << (hashed ? ", hash verified" : "") << ")\n";
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  Invocation inv;
  inv.argv.assign(argv, argv + argc);
  inv.started_at = utc_now();

  CLI::App app{"Learning-history generation, scoring and filtering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Collect learning histories from source agents");
  generate->add_option("--problem", gen.problem, "darkroom | darkroom-permuted | darkroom-large | dark-key-to-door")
      ->required();
  generate->add_option("--scale", gen.scale, "full | desk")->check(CLI::IsMember({"full", "desk"}));
  generate->add_flag("--envs-from-split", gen.envs_from_split, "Take environments from the task split (default)");
  generate->add_option("--split", gen.split, "Which side of the split: pretrain | test")
      ->check(CLI::IsMember({"pretrain", "test"}));
  generate->add_option("--split-seed", gen.split_seed, "Seed of the pretrain/test task split");
  generate->add_option("--max-envs", gen.max_envs, "Keep only the first N environments (0 = all)");
  generate->add_option("--histories", gen.histories, "Histories per environment");
  generate->add_option("--transitions", gen.transitions, "Transitions per history (default 50 episodes)");
  generate->add_option("--noise", gen.noise, "Fraction of random-agent histories per environment");
  generate->add_option("--seed", gen.seed, "Collection seed");
  generate->add_option("--lr", gen.learner.learning_rate, "Learner step size");
  generate->add_option("--epsilon-start", gen.learner.epsilon_start);
  generate->add_option("--epsilon-end", gen.learner.epsilon_end);
  generate->add_option("--epsilon-decay-steps", gen.learner.epsilon_decay_steps, "0 = half of each history");
  generate->add_option("--discount", gen.learner.discount);
  generate->add_option("--out", gen.out)->required();
  generate->add_flag("--force", gen.force, "Replace a non-empty output directory");

  TruncateArgs trunc;
  auto* truncate = app.add_subcommand("truncate", "Keep the first fraction of every learning history");
  truncate->add_option("--in", trunc.in)->required();
  truncate->add_option("--out", trunc.out)->required();
  truncate->add_option("--fraction", trunc.fraction, "Fraction in (0, 1]");
  truncate->add_option("--mode", trunc.mode, "prefix: first episodes of each history; subset: first histories")
      ->check(CLI::IsMember({"prefix", "subset"}));
  truncate->add_flag("--force", trunc.force);

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Score every history (CSV)");
  stats->add_option("--in", st.in)->required();
  stats->add_option("--lambda", st.lambda, "Stability coefficient");
  stats->add_option("--rmax", st.rmax, "analytic | empirical")->check(CLI::IsMember({"analytic", "empirical"}));
  stats->add_option("--out", st.out, "Write scores.csv and env_summary.csv here instead of stdout");
  stats->add_flag("--force", st.force);

  FilterArgs fil;
  auto* filter = app.add_subcommand("filter", "Resample histories by retention probability");
  filter->add_option("--in", fil.in)->required();
  filter->add_option("--out", fil.out)->required();
  filter->add_option("--lambda", fil.cfg.lambda, "Stability coefficient");
  filter->add_option("--strategy", fil.strategy, "linear | softmax")->check(CLI::IsMember({"linear", "softmax"}));
  filter->add_option("--alpha", fil.cfg.alpha, "Softmax temperature");
  filter->add_option("--seed", fil.cfg.seed, "Filter seed");
  filter->add_option("--rmax", fil.rmax, "analytic | empirical")->check(CLI::IsMember({"analytic", "empirical"}));
  filter->add_option("--report", fil.report, "Report path (default OUT/filter_report.json)");
  filter->add_flag("--force", fil.force);

  ExportArgs ex;
  auto* exporter = app.add_subcommand("export", "Re-emit a dataset in the lhf-history-v1 layout");
  exporter->add_option("--in", ex.in)->required();
  exporter->add_option("--out", ex.out)->required();
  exporter->add_flag("--force", ex.force);

  std::string verify_in;
  auto* verify = app.add_subcommand("verify", "Load a dataset and check its run-manifest hash");
  verify->add_option("--in", verify_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) cmd_generate(gen, inv);
    else if (*truncate) cmd_truncate(trunc, inv);
    else if (*stats) cmd_stats(st, inv);
    else if (*filter) cmd_filter(fil, inv);
    else if (*exporter) cmd_export(ex, inv);
    else if (*verify) return cmd_verify(verify_in);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kDataError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariantViolation;
  } catch (const ProtocolError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariantViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}

}  // namespace lhf::cli
