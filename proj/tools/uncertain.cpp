// uncertain: replay, live tracing, scenario generation, campaigns and reports.
//
// Exit codes:
//   0  success
//   1  usage error
//   2  config error
//   3  trace or other input error
//   4  live tracing unsupported on this platform
//   5  could not start or attach to the program
//   6  partial failure (a campaign recorded errors)
//   7  output could not be written
// `run` exits with the child's status (128 + signal when killed) unless the
// tracer itself failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uncertain/config.hpp"
#include "uncertain/harness.hpp"
#include "uncertain/live/outcome.hpp"
#include "uncertain/live/tracer.hpp"
#include "uncertain/replay.hpp"
#include "uncertain/report.hpp"
#include "uncertain/scenario.hpp"
#include "uncertain/strace_import.hpp"
#include "uncertain/trace_io.hpp"

namespace fs = std::filesystem;
using namespace uncertain;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kInput = 3,
  kUnsupported = 4,
  kAttach = 5,
  kPartial = 6,
  kOutput = 7,
};

struct ExitError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, std::string msg) { throw ExitError{code, std::move(msg)}; }

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string threshold;  // number in [0,1] or "dynamic"
  std::string strategy_set;
  std::optional<double> timeout_factor;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Policy config (JSON); default $UNCERTAIN_CONFIG");
  cmd->add_option("--seed", c.seed, "RNG seed; default $UNCERTAIN_SEED, then the config's seed");
  cmd->add_option("--threshold", c.threshold,
                  "Override the threshold mode: a static value in [0,1] or 'dynamic'");
  cmd->add_option("--strategy-set", c.strategy_set, "non-intrusive | intrusive")
      ->check(CLI::IsMember({"non-intrusive", "intrusive"}));
  cmd->add_option("--timeout-factor", c.timeout_factor,
                  "Crash if a run exceeds this multiple of the baseline runtime");
}

PolicyConfig resolve_config(const Common& c) {
  std::string path = c.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("UNCERTAIN_CONFIG"); env != nullptr) path = env;
  }
  PolicyConfig cfg;
  try {
    if (!path.empty()) cfg = load_config(path);
    if (!c.threshold.empty()) {
      if (c.threshold == "dynamic") {
        cfg.static_threshold.reset();
      } else {
        std::size_t used = 0;
        double v = 0;
        try {
          v = std::stod(c.threshold, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != c.threshold.size()) {
          throw ConfigError("--threshold: expected a number in [0,1] or 'dynamic'");
        }
        cfg.static_threshold = v;
      }
    }
    if (!c.strategy_set.empty()) cfg.strategy_set = *strategy_set_from_string(c.strategy_set);
    if (c.timeout_factor) cfg.timeout_factor = *c.timeout_factor;
    cfg.validate();
  } catch (const ConfigError& e) {
    fail(kConfig, std::string("config error: ") + e.what());
  }
  return cfg;
}

std::uint64_t resolve_seed(const Common& c, const PolicyConfig& cfg) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("UNCERTAIN_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used, 0);
      if (used == std::strlen(env)) return v;
    } catch (const std::exception&) {
    }
    fail(kUsage, std::string("UNCERTAIN_SEED is not an unsigned integer: ") + env);
  }
  return cfg.seed;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(kOutput, "cannot create output directory " + dir + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(kOutput, "cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) fail(kOutput, "write failed: " + path.string());
}

std::string dump(const OrderedJson& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

struct ReplayArgs {
  Common common;
  std::string trace;
  std::string out;
};

int cmd_replay(const ReplayArgs& a) {
  const PolicyConfig cfg = resolve_config(a.common);
  const std::uint64_t seed = resolve_seed(a.common, cfg);
  TraceFile trace;
  try {
    trace = load_trace(a.trace);
  } catch (const TraceError& e) {
    fail(kInput, std::string("trace error: ") + e.what());
  }
  const auto result = replay_trace(trace, cfg, seed);

  ensure_dir(a.out);
  std::ostringstream log;
  write_decision_log(log, result.decisions);
  write_file(fs::path(a.out) / "decisions.jsonl", log.str());

  OrderedJson stats;
  const auto& meta = trace.header.meta;
  std::string group = fs::path(a.trace).stem().string();
  if (meta.contains("archetype") && meta["archetype"].is_string()) {
    group = meta["archetype"].get<std::string>();
  }
  stats["group"] = group;
  stats["mode"] = mode_label(cfg);
  stats["strategy_set"] = std::string(to_string(cfg.strategy_set));
  stats["seed"] = seed;
  stats["rng"] = Rng::kAlgorithm;
  stats["events"] = result.events;
  stats["stats"] = stats_to_json(result.stats);
  write_file(fs::path(a.out) / "stats.json", dump(stats));
  return kOk;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  Common common;
  std::vector<std::string> command;
  std::string out = "uncertain-run";
  std::optional<double> timeout;
  std::string workdir;
  bool no_baseline = false;
};

OrderedJson record_json(const live::RunRecord& r) {
  OrderedJson j;
  j["status"] = live::to_string(r.status);
  j["exit_code"] = r.status.shell_code();
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

int cmd_run(const RunArgs& a) {
  const PolicyConfig cfg = resolve_config(a.common);
  const std::uint64_t seed = resolve_seed(a.common, cfg);
  if (a.command.empty()) fail(kUsage, "run: missing program");
  if (!live::platform_supported()) {
    fail(kUnsupported, std::string("live tracing needs Linux on x86_64; this build targets ") +
                           live::platform_name());
  }
  live::ExecSpec spec;
  spec.program = a.command.front();
  spec.args.assign(a.command.begin() + 1, a.command.end());
  if (!a.workdir.empty()) spec.workdir = a.workdir;

  std::optional<live::RunRecord> baseline;
  live::RunResult run;
  try {
    live::RunOptions ro;
    ro.timeout_seconds = a.timeout;
    if (!a.no_baseline) {
      PolicyConfig standard = cfg;
      standard.environment = ProcessEnv::kStandard;
      baseline = live::run_traced(spec, standard, seed, ro).record;
      if (!a.timeout) {
        ro.timeout_seconds = cfg.timeout_factor * baseline->wall_seconds + cfg.runtime_slack_seconds;
      }
    }
    run = live::run_traced(spec, cfg, seed, ro);
  } catch (const live::UnsupportedPlatform& e) {
    fail(kUnsupported, e.what());
  } catch (const live::AttachFailure& e) {
    fail(kAttach, std::string("cannot run program: ") + e.what());
  }

  ensure_dir(a.out);
  write_file(fs::path(a.out) / "trace.jsonl", serialize_trace(run.trace));
  std::ostringstream log;
  write_decision_log(log, run.decisions);
  write_file(fs::path(a.out) / "decisions.jsonl", log.str());
  OrderedJson outcome;
  outcome["program"] = spec.program;
  outcome["args"] = spec.args;
  outcome["seed"] = seed;
  outcome["config"] = config_to_json(cfg);
  outcome["run"] = record_json(run.record);
  if (baseline) {
    outcome["baseline"] = record_json(*baseline);
    outcome["outcome"] = std::string(live::to_string(live::classify_outcome(
        run.record, baseline, cfg.timeout_factor, cfg.runtime_slack_seconds)));
  }
  PerturbationStats stats;
  for (const auto& d : run.decisions) stats.add(d);
  outcome["stats"] = stats_to_json(stats);
  write_file(fs::path(a.out) / "outcome.json", dump(outcome));

  std::cout << run.record.stdout_data << std::flush;
  std::cerr << run.stderr_data << std::flush;
  return run.record.status.shell_code();
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string archetype;
  std::size_t events = 1000;
  std::uint64_t seed = 0;
  std::int64_t pid = 1000;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  ScenarioSpec spec;
  try {
    spec.archetype = archetype_from_string(a.archetype);
  } catch (const ScenarioError& e) {
    fail(kUsage, e.what());
  }
  spec.event_count = a.events;
  spec.pid = a.pid;
  const auto trace = generate_scenario(spec, a.seed);
  if (a.out.empty() || a.out == "-") {
    std::cout << serialize_trace(trace);
  } else {
    write_file(a.out, serialize_trace(trace));
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct CampaignArgs {
  Common common;
  std::string corpus;
  std::string out;
  bool resume = false;
  unsigned jobs = 0;
};

int cmd_campaign(const CampaignArgs& a) {
  const PolicyConfig cfg = resolve_config(a.common);
  const std::uint64_t seed = resolve_seed(a.common, cfg);
  Corpus corpus;
  try {
    corpus = load_corpus(a.corpus);
  } catch (const CorpusError& e) {
    fail(kInput, std::string("corpus error: ") + e.what());
  }
  ensure_dir(a.out);
  CampaignOptions opts;
  opts.seed_base = seed;
  opts.journal_path = (fs::path(a.out) / "journal.jsonl").string();
  opts.resume = a.resume;
  opts.jobs = a.jobs;
  CampaignResult result;
  try {
    result = run_campaign(corpus, cfg, opts);
  } catch (const CorpusError& e) {
    fail(kInput, e.what());
  } catch (const std::runtime_error& e) {
    fail(kOutput, e.what());
  }

  OrderedJson summary = campaign_result_to_json(result);
  summary["seed_base"] = seed;
  write_file(fs::path(a.out) / "summary.json", dump(summary));
  std::string text;
  for (const auto set : {StrategySet::kNonIntrusive, StrategySet::kIntrusive}) {
    text += "== " + std::string(to_string(set)) + " ==\n";
    text += render_report(report_entries(result, set), Grouping::kByArchetype).text + "\n";
  }
  text += outcome_table(result);
  write_file(fs::path(a.out) / "report.txt", text);
  std::cerr << "campaign: " << result.runs_executed << " runs executed, " << result.cells.size()
            << " cells, " << result.entry_errors.size() << " entry errors, " << result.run_errors
            << " run errors\n";
  return result.partial_failure() ? kPartial : kOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string grouping = "byArchetype";
  std::string format = "text";
  std::string strategy_set = "intrusive";
  std::string out;
};

// Accepts stats files written by `replay` and summaries written by `campaign`.
std::vector<ReportEntry> read_report_inputs(const ReportArgs& a) {
  std::vector<ReportEntry> entries;
  const StrategySet want = *strategy_set_from_string(a.strategy_set);
  for (const auto& path : a.inputs) {
    std::ifstream in(path);
    if (!in) fail(kInput, "cannot read " + path);
    try {
      const auto j = nlohmann::json::parse(in);
      if (j.contains("cells")) {
        for (const auto& c : j.at("cells")) {
          const auto label = c.at("config").get<std::string>();
          const auto slash = label.find('/');
          if (label.substr(0, slash) != to_string(want)) continue;
          entries.push_back({c.at("group").get<std::string>(), label.substr(slash + 1),
                             stats_from_json(c.at("stats"))});
        }
      } else {
        if (j.contains("strategy_set") && j["strategy_set"].get<std::string>() != to_string(want)) continue;
        entries.push_back({j.at("group").get<std::string>(), j.at("mode").get<std::string>(),
                           stats_from_json(j.at("stats"))});
      }
    } catch (const nlohmann::json::exception& e) {
      fail(kInput, path + ": not a stats or campaign summary file (" + e.what() + ")");
    }
  }
  return entries;
}

int cmd_report(const ReportArgs& a) {
  const auto grouping = a.grouping == "byCategory" ? Grouping::kByCategory : Grouping::kByArchetype;
  const Report rep = render_report(read_report_inputs(a), grouping);
  const std::string text = a.format == "json" ? dump(rep.json) : rep.text;
  if (a.out.empty() || a.out == "-") {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct ImportArgs {
  std::string input;
  std::string out;
  std::int64_t pid = 1;
};

int cmd_import(const ImportArgs& a) {
  ImportResult r;
  try {
    ImportOptions opts;
    opts.default_pid = a.pid;
    r = import_strace(a.input, opts);
  } catch (const TraceError& e) {
    fail(kInput, std::string("import error: ") + e.what());
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << serialize_trace(r.trace);
  } else {
    write_file(a.out, serialize_trace(r.trace));
  }
  const auto& rep = r.report;
  std::cerr << "import: " << rep.lines_total << " lines, " << rep.lines_recognized
            << " recognized, " << rep.lines_fallback << " fallback, " << rep.lines_dropped
            << " dropped, " << rep.unfinished_joined << " unfinished joined, "
            << rep.unfinished_orphaned << " orphaned\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic syscall interference: replay, trace, generate, evaluate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "uncertain 1.0.0 (rng " + std::string(Rng::kAlgorithm) + ")");

  ReplayArgs replay_args;
  auto* replay = app.add_subcommand("replay", "Replay a trace through the policy engine");
  replay->add_option("trace", replay_args.trace, "Trace file (JSON lines)")->required();
  replay->add_option("--out", replay_args.out, "Output directory")->required();
  add_common(replay, replay_args.common);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a program under the live tracer");
  add_common(run, run_args.common);
  run->add_option("--out", run_args.out, "Output directory")->capture_default_str();
  run->add_option("--timeout", run_args.timeout, "Hard timeout in seconds");
  run->add_option("--workdir", run_args.workdir, "Working directory for the program");
  run->add_flag("--no-baseline", run_args.no_baseline, "Skip the threshold-0 baseline run");
  run->add_option("command", run_args.command, "Program and arguments (after --)")->required();
  run->prefix_command();

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic scenario trace");
  gen->add_option("--archetype", gen_args.archetype,
                  "flooder | virus | spyware | trojan | worm | benign-io | benign-cpu | apt")
      ->required();
  gen->add_option("--events", gen_args.events, "Number of events")->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "Generator seed")->capture_default_str();
  gen->add_option("--pid", gen_args.pid, "pid of the generated process")->capture_default_str();
  gen->add_option("--out", gen_args.out, "Output file (default stdout)");

  CampaignArgs campaign_args;
  auto* campaign = app.add_subcommand("campaign", "Run a corpus under all six configurations");
  campaign->add_option("--corpus", campaign_args.corpus, "Corpus manifest (JSON)")->required();
  campaign->add_option("--out", campaign_args.out, "Output directory")->required();
  campaign->add_flag("--resume", campaign_args.resume, "Continue from an existing journal");
  campaign->add_option("--jobs", campaign_args.jobs, "Worker threads (default: all cores)");
  add_common(campaign, campaign_args.common);

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Render perturbation tables");
  report->add_option("inputs", report_args.inputs, "stats.json or summary.json files")
      ->required();
  report->add_option("--grouping", report_args.grouping, "byArchetype | byCategory")->capture_default_str()
      ->check(CLI::IsMember({"byArchetype", "byCategory"}));
  report->add_option("--format", report_args.format, "text | json")->capture_default_str()
      ->check(CLI::IsMember({"text", "json"}));
  report->add_option("--strategy-set", report_args.strategy_set,
                     "Which half of a campaign summary to render")->capture_default_str()
      ->check(CLI::IsMember({"non-intrusive", "intrusive"}));
  report->add_option("--out", report_args.out, "Output file (default stdout)");

  ImportArgs import_args;
  auto* import = app.add_subcommand("import", "Convert strace output to a native trace");
  import->add_option("input", import_args.input, "strace log")->required();
  import->add_option("--out", import_args.out, "Output file (default stdout)");
  import->add_option("--pid", import_args.pid, "pid for lines without one")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*replay) return cmd_replay(replay_args);
    if (*run) return cmd_run(run_args);
    if (*gen) return cmd_gen(gen_args);
    if (*campaign) return cmd_campaign(campaign_args);
    if (*report) return cmd_report(report_args);
    if (*import) return cmd_import(import_args);
  } catch (const ExitError& e) {
    std::cerr << "uncertain: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "uncertain: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
