#pragma once

// Campaign runner: every corpus entry, `repetitions` times, under each
// configuration of {NonIntrusive, Intrusive} x {static 0.10, static 0.50,
// dynamic}.
//
// Run seed: derive_seed(seed_base, {fnv1a64(entry id), fnv1a64(config
// label), rep}). The journal (JSON lines) gets one record per finished run,
// so an interrupted campaign resumes where it stopped and a finished one
// performs no runs at all. The CampaignResult is rebuilt from the journal,
// in manifest and config order, so it does not depend on completion order.
//
// Outcomes:
//   exec entries    classify_outcome against a threshold-0 (standard
//                   environment) baseline of the same entry
//   replay entries  Succeeded if nothing was perturbed, Crashed if a call
//                   whose name carries a behavior flag was perturbed,
//                   Hampered otherwise

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "uncertain/config.hpp"
#include "uncertain/engine.hpp"
#include "uncertain/live/outcome.hpp"
#include "uncertain/live/tracer.hpp"
#include "uncertain/replay.hpp"
#include "uncertain/report.hpp"
#include "uncertain/rng.hpp"
#include "uncertain/scenario.hpp"
#include "uncertain/trace_io.hpp"

namespace uncertain {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioRef {
  ScenarioSpec spec;
  std::uint64_t seed = 0;
};

struct CorpusEntry {
  std::string id;
  std::optional<std::string> trace;  // path; relative paths resolve against the manifest
  std::optional<ScenarioRef> scenario;
  std::optional<live::ExecSpec> exec;
  bool whitelist = false;
  int repetitions = 15;
  std::string group;  // report row; defaults to the archetype or the id
};

struct Corpus {
  std::vector<CorpusEntry> entries;
};

namespace harness_detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    if (allowed.count(k) == 0) throw CorpusError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CorpusError("bad or missing '" + std::string(key) + "' in " + where);
  }
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw CorpusError(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw CorpusError(where + " must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace harness_detail

// Manifest: {"entries": [entry, ...]} or a bare list. Entry keys: id, one of
// trace | scenario {archetype, events, seed, pid} | exec {program, args, env,
// workdir}, whitelist, repetitions, group, stdin.
inline Corpus parse_corpus(const nlohmann::json& doc, const std::string& base_dir = {}) {
  using namespace harness_detail;
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    check_keys(doc, {"entries"}, "corpus manifest");
    if (!doc.contains("entries")) throw CorpusError("corpus manifest has no 'entries'");
    list = &doc["entries"];
  }
  if (!list->is_array()) throw CorpusError("corpus entries must be a list");
  Corpus c;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& j = (*list)[i];
    const std::string where = "corpus entry " + std::to_string(i);
    if (!j.is_object()) throw CorpusError(where + " is not an object");
    check_keys(j, {"id", "trace", "scenario", "exec", "whitelist", "repetitions", "group", "stdin"},
               where);
    CorpusEntry e;
    e.id = get_as<std::string>(j, "id", where);
    if (e.id.empty() || !ids.insert(e.id).second) {
      throw CorpusError(where + ": id must be non-empty and unique");
    }
    const int kinds = static_cast<int>(j.contains("trace")) + static_cast<int>(j.contains("scenario")) +
                      static_cast<int>(j.contains("exec"));
    if (kinds != 1) throw CorpusError(where + ": exactly one of trace, scenario, exec is required");
    if (j.contains("trace")) {
      std::filesystem::path p = get_as<std::string>(j, "trace", where);
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      e.trace = p.string();
    }
    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      if (!s.is_object()) throw CorpusError(where + ": scenario must be an object");
      check_keys(s, {"archetype", "events", "seed", "pid"}, where + " scenario");
      ScenarioRef ref;
      try {
        ref.spec.archetype = archetype_from_string(get_as<std::string>(s, "archetype", where));
      } catch (const ScenarioError& ex) {
        throw CorpusError(where + ": " + ex.what());
      }
      ref.spec.name = e.id;
      if (s.contains("events")) ref.spec.event_count = get_as<std::size_t>(s, "events", where);
      if (s.contains("pid")) ref.spec.pid = get_as<std::int64_t>(s, "pid", where);
      if (s.contains("seed")) ref.seed = get_as<std::uint64_t>(s, "seed", where);
      e.scenario = ref;
    }
    if (j.contains("exec")) {
      const auto& x = j["exec"];
      if (!x.is_object()) throw CorpusError(where + ": exec must be an object");
      check_keys(x, {"program", "args", "env", "workdir"}, where + " exec");
      live::ExecSpec spec;
      spec.program = get_as<std::string>(x, "program", where);
      if (x.contains("args")) spec.args = string_list(x["args"], where + " exec.args");
      if (x.contains("env")) spec.env = string_list(x["env"], where + " exec.env");
      if (x.contains("workdir")) spec.workdir = get_as<std::string>(x, "workdir", where);
      if (j.contains("stdin")) spec.stdin_data = get_as<std::string>(j, "stdin", where);
      e.exec = spec;
    } else if (j.contains("stdin")) {
      throw CorpusError(where + ": stdin applies to exec entries only");
    }
    if (j.contains("whitelist")) e.whitelist = get_as<bool>(j, "whitelist", where);
    if (j.contains("repetitions")) e.repetitions = get_as<int>(j, "repetitions", where);
    if (e.repetitions < 1) throw CorpusError(where + ": repetitions must be >= 1");
    if (j.contains("group")) {
      e.group = get_as<std::string>(j, "group", where);
    } else if (e.scenario) {
      e.group = std::string(to_string(e.scenario->spec.archetype));
    } else {
      e.group = e.id;
    }
    c.entries.push_back(std::move(e));
  }
  return c;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read corpus manifest: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError("corpus manifest is not valid JSON: " + std::string(e.what()));
  }
  return parse_corpus(doc, std::filesystem::path(path).parent_path().string());
}

struct CampaignConfig {
  StrategySet strategy_set = StrategySet::kIntrusive;
  std::optional<double> static_threshold;  // unset: dynamic

  std::string mode() const {
    if (!static_threshold) return kModeDynamic;
    PolicyConfig c;
    c.static_threshold = static_threshold;
    return mode_label(c);
  }
  std::string label() const { return std::string(to_string(strategy_set)) + "/" + mode(); }
};

inline std::vector<CampaignConfig> standard_configs() {
  std::vector<CampaignConfig> out;
  for (const auto set : {StrategySet::kNonIntrusive, StrategySet::kIntrusive}) {
    out.push_back({set, 0.10});
    out.push_back({set, 0.50});
    out.push_back({set, std::nullopt});
  }
  return out;
}

// Applies a campaign config on top of the user's base config. Whitelisted
// entries always get the non-intrusive set.
inline PolicyConfig materialize(const PolicyConfig& base, const CampaignConfig& cc, bool whitelist) {
  PolicyConfig c = base;
  c.static_threshold = cc.static_threshold;
  c.strategy_set = whitelist ? StrategySet::kNonIntrusive : cc.strategy_set;
  c.environment = ProcessEnv::kUncertain;
  return c;
}

inline std::uint64_t run_seed(std::uint64_t seed_base, const std::string& entry_id,
                              const std::string& config_label, std::uint64_t rep) {
  return derive_seed(seed_base, {fnv1a64(entry_id), fnv1a64(config_label), rep});
}

// Probability that every listed critical call escapes perturbation:
// product of (1 - threshold)^count.
struct Escalation {
  double threshold;
  int count;
};

inline double chained_success_probability(const std::vector<Escalation>& steps) {
  double p = 1.0;
  for (const auto& s : steps) {
    if (!(s.threshold >= 0.0 && s.threshold <= 1.0) || s.count < 0) {
      throw std::invalid_argument("escalation thresholds must lie in [0,1] with count >= 0");
    }
    for (int i = 0; i < s.count; ++i) p *= 1.0 - s.threshold;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Replay outcome proxy

struct ReplayOutcome {
  live::Outcome outcome = live::Outcome::kSucceeded;
  bool pre_exfil_escalated = false;  // escalated call perturbed before the first connect
  PerturbationStats stats;
};

inline ReplayOutcome replay_outcome(const TraceFile& trace, const PolicyConfig& config,
                                    std::uint64_t seed) {
  PolicyEngine engine(config, seed, program_of(trace));
  ReplayOutcome r;
  bool connected = false, escalated_hit = false;
  for (const auto& e : trace.events) {
    if (e.name.id() == Syscall::kConnect) connected = true;
    auto d = engine.replay(e);
    if (d.reason == PassReason::kNotInSet) continue;
    r.stats.add(d);
    if (!d.perturbed()) continue;
    const auto* s = engine.find(e.pid);
    if (s != nullptr && s->flagged(e.name.id())) {
      escalated_hit = true;
      if (!connected) r.pre_exfil_escalated = true;
    }
  }
  if (r.stats.all.perturbed == 0) {
    r.outcome = live::Outcome::kSucceeded;
  } else {
    r.outcome = escalated_hit ? live::Outcome::kCrashed : live::Outcome::kHampered;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Journal

struct RunRecordEntry {
  std::string entry;
  std::string config;  // empty for entry-level errors
  int rep = -1;
  std::uint64_t seed = 0;
  std::optional<live::Outcome> outcome;
  std::optional<bool> pre_exfil;
  std::optional<std::string> error;
  PerturbationStats stats;
  double wall_seconds = 0;

  std::string key() const { return entry + "\x1f" + config + "\x1f" + std::to_string(rep); }
};

inline OrderedJson record_to_json(const RunRecordEntry& r) {
  OrderedJson j;
  j["entry"] = r.entry;
  if (!r.config.empty()) j["config"] = r.config;
  if (r.rep >= 0) {
    j["rep"] = r.rep;
    j["seed"] = r.seed;
  }
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  j["outcome"] = std::string(live::to_string(*r.outcome));
  if (r.pre_exfil) j["pre_exfil_escalated"] = *r.pre_exfil;
  j["wall_seconds"] = r.wall_seconds;
  j["stats"] = stats_to_json(r.stats);
  return j;
}

inline RunRecordEntry record_from_json(const OrderedJson& j) {
  RunRecordEntry r;
  r.entry = j.at("entry").get<std::string>();
  if (j.contains("config")) r.config = j["config"].get<std::string>();
  if (j.contains("rep")) {
    r.rep = j["rep"].get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("error")) {
    r.error = j["error"].get<std::string>();
    return r;
  }
  r.outcome = live::outcome_from_string(j.at("outcome").get<std::string>());
  if (!r.outcome) throw CorpusError("journal record has an unknown outcome");
  if (j.contains("pre_exfil_escalated")) r.pre_exfil = j["pre_exfil_escalated"].get<bool>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.stats = stats_from_json(j.at("stats"));
  return r;
}

inline constexpr const char* kJournalFormat = "uncertain-campaign";

inline std::string corpus_digest(const Corpus& c) {
  std::string s;
  for (const auto& e : c.entries) {
    s += e.id + '\x1f' + e.trace.value_or("") + '\x1f';
    if (e.scenario) {
      s += std::string(to_string(e.scenario->spec.archetype)) + ':' +
           std::to_string(e.scenario->spec.event_count) + ':' + std::to_string(e.scenario->seed);
    }
    if (e.exec) {
      s += e.exec->program;
      for (const auto& a : e.exec->args) s += '\x1e' + a;
    }
    s += '\x1f' + std::to_string(e.whitelist) + '\x1f' + std::to_string(e.repetitions) + '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(s)));
  return buf;
}

// ---------------------------------------------------------------------------
// Result

struct CellResult {
  std::string entry;
  std::string group;
  std::string config;
  std::string mode;
  StrategySet strategy_set = StrategySet::kIntrusive;
  int repetitions = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t hampered = 0;
  std::uint64_t crashed = 0;
  std::uint64_t errors = 0;
  std::uint64_t pre_exfil_escalated = 0;
  PerturbationStats stats;
  std::vector<std::uint64_t> seeds;  // by rep
};

struct CampaignResult {
  std::vector<CellResult> cells;  // manifest order, then config order
  std::vector<std::pair<std::string, std::string>> entry_errors;  // (entry, message)
  std::size_t runs_executed = 0;  // this invocation only; not part of the result JSON
  std::size_t run_errors = 0;

  bool partial_failure() const { return !entry_errors.empty() || run_errors > 0; }
};

inline OrderedJson campaign_result_to_json(const CampaignResult& r) {
  OrderedJson j;
  auto cells = OrderedJson::array();
  for (const auto& c : r.cells) {
    OrderedJson jc;
    jc["entry"] = c.entry;
    jc["group"] = c.group;
    jc["config"] = c.config;
    jc["repetitions"] = c.repetitions;
    jc["outcomes"] = {{"succeeded", c.succeeded}, {"hampered", c.hampered}, {"crashed", c.crashed}};
    jc["errors"] = c.errors;
    jc["pre_exfil_escalated"] = c.pre_exfil_escalated;
    jc["stats"] = stats_to_json(c.stats);
    jc["seeds"] = c.seeds;
    cells.push_back(jc);
  }
  j["cells"] = cells;
  auto errs = OrderedJson::array();
  for (const auto& [entry, msg] : r.entry_errors) errs.push_back({{"entry", entry}, {"error", msg}});
  j["entry_errors"] = errs;
  j["run_errors"] = r.run_errors;
  return j;
}

inline std::vector<ReportEntry> report_entries(const CampaignResult& r, StrategySet set) {
  std::vector<ReportEntry> out;
  for (const auto& c : r.cells) {
    if (c.strategy_set == set) out.push_back({c.group, c.mode, c.stats});
  }
  return out;
}

// Outcome bars: one line per (entry, config), one glyph per run.
inline std::string outcome_table(const CampaignResult& r) {
  std::size_t entry_w = 5, config_w = 6;
  for (const auto& c : r.cells) {
    entry_w = std::max(entry_w, c.entry.size());
    config_w = std::max(config_w, c.config.size());
  }
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-*s  %4s %4s %4s %4s  %s\n", static_cast<int>(entry_w),
                "Entry", static_cast<int>(config_w), "Config", "S", "H", "C", "Err",
                "S=succeeded H=hampered C=crashed");
  out << line;
  for (const auto& c : r.cells) {
    std::string bar(c.succeeded, 'S');
    bar += std::string(c.hampered, 'H');
    bar += std::string(c.crashed, 'C');
    bar += std::string(c.errors, '!');
    std::snprintf(line, sizeof line, "%-*s  %-*s  %4llu %4llu %4llu %4llu  ",
                  static_cast<int>(entry_w), c.entry.c_str(), static_cast<int>(config_w),
                  c.config.c_str(), static_cast<unsigned long long>(c.succeeded),
                  static_cast<unsigned long long>(c.hampered),
                  static_cast<unsigned long long>(c.crashed),
                  static_cast<unsigned long long>(c.errors));
    out << line << bar << '\n';
  }
  for (const auto& [entry, msg] : r.entry_errors) out << "error: " << entry << ": " << msg << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Runner

struct CampaignOptions {
  std::uint64_t seed_base = 0;
  std::vector<CampaignConfig> configs = standard_configs();
  std::string journal_path;  // empty: in-memory only
  bool resume = false;       // keep an existing journal and skip finished runs
  unsigned jobs = 0;         // 0: hardware concurrency
};

class Campaign {
 public:
  Campaign(Corpus corpus, PolicyConfig base, CampaignOptions opts)
      : corpus_(std::move(corpus)), base_(std::move(base)), opts_(std::move(opts)) {}

  CampaignResult run() {
    std::map<std::string, RunRecordEntry> done;
    open_journal(done);

    struct Job {
      std::size_t entry;
      std::size_t config;
      int rep;
    };
    std::vector<Job> jobs;
    std::set<std::string> failed_entries;
    for (const auto& [_, rec] : done) {
      if (rec.config.empty() && rec.error) failed_entries.insert(rec.entry);
    }
    for (std::size_t ei = 0; ei < corpus_.entries.size(); ++ei) {
      const auto& e = corpus_.entries[ei];
      if (failed_entries.count(e.id) > 0) continue;
      if (const auto err = resolve(e)) {
        RunRecordEntry rec;
        rec.entry = e.id;
        rec.error = *err;
        append(rec, done);
        continue;
      }
      for (std::size_t ci = 0; ci < opts_.configs.size(); ++ci) {
        for (int rep = 0; rep < e.repetitions; ++rep) {
          RunRecordEntry probe;
          probe.entry = e.id;
          probe.config = opts_.configs[ci].label();
          probe.rep = rep;
          if (done.count(probe.key()) == 0) jobs.push_back({ei, ci, rep});
        }
      }
    }

    std::atomic<std::size_t> next{0};
    std::size_t executed = 0;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        const auto& job = jobs[i];
        auto rec = execute(corpus_.entries[job.entry], opts_.configs[job.config], job.rep);
        std::lock_guard lock(journal_mu_);
        append(rec, done);
        ++executed;
      }
    };
    unsigned n = opts_.jobs != 0 ? opts_.jobs : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    CampaignResult result = assemble(done);
    result.runs_executed = executed;
    return result;
  }

 private:
  // Returns an error message when the entry cannot be run at all.
  std::optional<std::string> resolve(const CorpusEntry& e) {
    try {
      if (e.trace) {
        std::lock_guard lock(cache_mu_);
        traces_[e.id] = load_trace(*e.trace);
      } else if (e.scenario) {
        std::lock_guard lock(cache_mu_);
        traces_[e.id] = generate_scenario(e.scenario->spec, e.scenario->seed);
      } else if (e.exec) {
        if (!live::platform_supported()) {
          return std::string("live tracing unsupported on ") + live::platform_name();
        }
        (void)live::detail::resolve_program(e.exec->program);
      }
    } catch (const std::exception& ex) {
      return std::string(ex.what());
    }
    return std::nullopt;
  }

  RunRecordEntry execute(const CorpusEntry& e, const CampaignConfig& cc, int rep) {
    RunRecordEntry rec;
    rec.entry = e.id;
    rec.config = cc.label();
    rec.rep = rep;
    rec.seed = run_seed(opts_.seed_base, e.id, rec.config, static_cast<std::uint64_t>(rep));
    const PolicyConfig config = materialize(base_, cc, e.whitelist);
    try {
      if (e.exec) {
        execute_live(e, config, rec);
      } else {
        const TraceFile* trace = nullptr;
        {
          std::lock_guard lock(cache_mu_);
          trace = &traces_.at(e.id);
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = replay_outcome(*trace, config, rec.seed);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.outcome = r.outcome;
        rec.pre_exfil = r.pre_exfil_escalated;
        rec.stats = r.stats;
      }
    } catch (const std::exception& ex) {
      rec.error = ex.what();
    }
    return rec;
  }

  // Live runs share one process-wide wait queue, so they run one at a time.
  void execute_live(const CorpusEntry& e, const PolicyConfig& config, RunRecordEntry& rec) {
    std::lock_guard lock(live_mu_);
    const live::RunRecord& baseline = baseline_for(e);
    auto spec = *e.exec;
    std::optional<std::filesystem::path> tmp;
    if (!spec.workdir) {
      tmp = make_workdir();
      spec.workdir = tmp->string();
    }
    live::RunOptions ro;
    ro.timeout_seconds = config.timeout_factor * baseline.wall_seconds + config.runtime_slack_seconds;
    ro.program_label = e.exec->program;
    try {
      const auto run = live::run_traced(spec, config, rec.seed, ro);
      rec.outcome = live::classify_outcome(run.record, baseline, config.timeout_factor,
                                           config.runtime_slack_seconds);
      rec.wall_seconds = run.record.wall_seconds;
      for (const auto& d : run.decisions) rec.stats.add(d);
    } catch (...) {
      if (tmp) std::filesystem::remove_all(*tmp);
      throw;
    }
    if (tmp) std::filesystem::remove_all(*tmp);
  }

  const live::RunRecord& baseline_for(const CorpusEntry& e) {
    const auto it = baselines_.find(e.id);
    if (it != baselines_.end()) return it->second;
    PolicyConfig standard = base_;
    standard.environment = ProcessEnv::kStandard;
    auto spec = *e.exec;
    std::optional<std::filesystem::path> tmp;
    if (!spec.workdir) {
      tmp = make_workdir();
      spec.workdir = tmp->string();
    }
    live::RunOptions ro;
    ro.program_label = e.exec->program;
    const auto run = live::run_traced(spec, standard, 0, ro);
    if (tmp) std::filesystem::remove_all(*tmp);
    return baselines_.emplace(e.id, run.record).first->second;
  }

  static std::filesystem::path make_workdir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "uncertain-run-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw std::runtime_error("cannot create a run directory: " + std::string(std::strerror(errno)));
    }
    return tmpl;
  }

  OrderedJson journal_header() const {
    OrderedJson h;
    h["journal"] = kJournalFormat;
    h["version"] = 1;
    h["seed_base"] = opts_.seed_base;
    h["corpus"] = corpus_digest(corpus_);
    auto labels = OrderedJson::array();
    for (const auto& c : opts_.configs) labels.push_back(c.label());
    h["configs"] = labels;
    h["rng"] = Rng::kAlgorithm;
    return h;
  }

  void open_journal(std::map<std::string, RunRecordEntry>& done) {
    if (opts_.journal_path.empty()) return;
    const auto header = journal_header();
    if (opts_.resume && std::filesystem::exists(opts_.journal_path)) {
      std::ifstream in(opts_.journal_path);
      std::string line;
      std::size_t lineno = 0;
      bool complete_last_line = true;
      while (std::getline(in, line)) {
        ++lineno;
        complete_last_line = !in.eof();
        if (line.empty()) continue;
        OrderedJson j;
        try {
          j = OrderedJson::parse(line);
        } catch (const nlohmann::json::parse_error&) {
          // A torn final line from an interrupted run is dropped and redone.
          if (!complete_last_line) break;
          throw CorpusError("journal line " + std::to_string(lineno) + " is not valid JSON");
        }
        if (lineno == 1) {
          if (j != header) {
            throw CorpusError("journal " + opts_.journal_path +
                              " belongs to a different campaign (seed, corpus or configs differ)");
          }
          continue;
        }
        auto rec = record_from_json(j);
        done[rec.key()] = std::move(rec);
      }
      rewrite_journal(header, done);
    } else {
      rewrite_journal(header, done);
    }
  }

  void rewrite_journal(const OrderedJson& header, const std::map<std::string, RunRecordEntry>& done) {
    journal_.close();
    journal_.open(opts_.journal_path, std::ios::trunc);
    if (!journal_) throw std::runtime_error("cannot write journal: " + opts_.journal_path);
    journal_ << header.dump() << '\n';
    for (const auto& [_, rec] : done) journal_ << record_to_json(rec).dump() << '\n';
    journal_.flush();
  }

  void append(const RunRecordEntry& rec, std::map<std::string, RunRecordEntry>& done) {
    if (journal_.is_open()) {
      journal_ << record_to_json(rec).dump() << '\n';
      journal_.flush();
      if (!journal_) throw std::runtime_error("journal write failed: " + opts_.journal_path);
    }
    done[rec.key()] = rec;
  }

  CampaignResult assemble(const std::map<std::string, RunRecordEntry>& done) const {
    CampaignResult r;
    for (const auto& e : corpus_.entries) {
      RunRecordEntry probe;
      probe.entry = e.id;
      if (const auto it = done.find(probe.key()); it != done.end() && it->second.error) {
        r.entry_errors.emplace_back(e.id, *it->second.error);
        continue;
      }
      for (const auto& cc : opts_.configs) {
        CellResult cell;
        cell.entry = e.id;
        cell.group = e.group;
        cell.config = cc.label();
        cell.mode = cc.mode();
        cell.strategy_set = cc.strategy_set;
        cell.repetitions = e.repetitions;
        for (int rep = 0; rep < e.repetitions; ++rep) {
          probe.config = cell.config;
          probe.rep = rep;
          const auto it = done.find(probe.key());
          if (it == done.end()) continue;
          const auto& rec = it->second;
          cell.seeds.push_back(rec.seed);
          if (rec.error) {
            ++cell.errors;
            ++r.run_errors;
            continue;
          }
          switch (*rec.outcome) {
            case live::Outcome::kSucceeded: ++cell.succeeded; break;
            case live::Outcome::kHampered: ++cell.hampered; break;
            case live::Outcome::kCrashed: ++cell.crashed; break;
          }
          if (rec.pre_exfil.value_or(false)) ++cell.pre_exfil_escalated;
          cell.stats += rec.stats;
        }
        r.cells.push_back(std::move(cell));
      }
    }
    return r;
  }

  Corpus corpus_;
  PolicyConfig base_;
  CampaignOptions opts_;
  std::ofstream journal_;
  std::mutex journal_mu_;
  std::mutex cache_mu_;
  std::mutex live_mu_;
  std::map<std::string, TraceFile> traces_;
  std::map<std::string, live::RunRecord> baselines_;
};

inline CampaignResult run_campaign(const Corpus& corpus, const PolicyConfig& base,
                                   const CampaignOptions& opts) {
  return Campaign(corpus, base, opts).run();
}

}  // namespace uncertain
