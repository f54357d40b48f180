#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "shopbench/forge.hpp"
#include "shopbench/gateway.hpp"

using namespace shopbench;
namespace fs = std::filesystem;

namespace {

/// A failure reported to the user as one line and a nonzero exit.
struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& text) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError("cannot write '" + path + "'");
  out << text;
}

std::vector<TaskSpec> load_tasks(const std::string& path) {
  if (!fs::exists(path)) throw CommandError("task file '" + path + "' does not exist");
  return read_tasks(path);
}

void add_limits(CLI::App* cmd, EpisodeLimits& limits) {
  cmd->add_option("--max-turns", limits.max_turns, "Turn limit per episode")->check(CLI::PositiveNumber);
  cmd->add_option("--max-tool-calls", limits.max_tool_calls, "Tool-call limit per episode")->check(CLI::PositiveNumber);
  cmd->add_option("--max-repeated-errors", limits.max_repeated_errors, "Identical errors in a row before stopping")
      ->check(CLI::PositiveNumber);
}

void add_backend(CLI::App* cmd, const std::string& prefix, const std::string& env, BackendConfig& b,
                 const std::string& what) {
  cmd->add_option("--" + prefix + "-url", b.url, what + " endpoint, e.g. http://localhost:8000/v1");
  cmd->add_option("--" + prefix + "-model", b.model, what + " model name")->capture_default_str();
  cmd->add_option("--" + prefix + "-api-key", b.api_key, what + " API key")->envname(env);
}

// --- gen ---------------------------------------------------------------------

struct GenArgs {
  std::string family = "all";
  std::string world = "default";
  std::string out;
  GenConfig cfg;
};

int cmd_gen(const GenArgs& a) {
  GenConfig cfg = a.cfg;
  cfg.world = world_config_preset(a.world);
  if (a.family != "all") {
    const auto f = parse_family(a.family);
    if (!f) throw CommandError("unknown family '" + a.family + "'");
    cfg.logistics_share = *f == Family::Logistics ? 1.0 : 0.0;
    cfg.after_sales_share = *f == Family::AfterSales ? 1.0 : 0.0;
  }
  const auto report = generate_tasks(cfg);
  write_tasks(a.out, report.tasks);
  if (!report.empty_reason.empty()) std::cerr << "no tasks: " << report.empty_reason << "\n";
  std::cerr << "wrote " << report.tasks.size() << " tasks to " << a.out << " (" << report.rejected
            << " rejected drafts)\n";
  return 0;
}

// --- run ---------------------------------------------------------------------

struct RunArgs {
  RunConfig cfg;
  std::string agent = "scripted";
  std::string out;
  bool no_multimodal = false;
};

int cmd_run(RunArgs a) {
  const auto kind = parse_agent_kind(a.agent);
  if (!kind) throw CommandError("unknown agent '" + a.agent + "'");
  a.cfg.agent = *kind;
  a.cfg.multimodal = !a.no_multimodal;
  validate_run_config(a.cfg);
  const auto tasks = load_tasks(a.cfg.tasks_path);
  const auto result = run_tasks(tasks, a.cfg);
  write_run(a.out, result, a.cfg);
  if (!tasks.empty()) std::cout << render_table(result.report, a.agent);
  std::cerr << "wrote " << result.episodes.size() << " episodes to " << a.out << "\n";
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string results;
  std::string report;
  std::string tasks;
  bool no_verify = false;
};

int cmd_eval(const EvalArgs& a) {
  if (!fs::exists(a.results)) throw CommandError("results '" + a.results + "' do not exist");
  const auto path = results_file(a.results);
  std::vector<ScoreRecord> records;
  try {
    records = read_score_records(path);
  } catch (const std::exception& e) {
    throw CommandError(std::string("schema error: ") + e.what());
  }
  if (records.empty()) throw CommandError("results file '" + path + "' has no records");
  if (!a.no_verify) {
    const auto manifest = read_run_manifest(path);
    const std::string tasks_path = !a.tasks.empty() ? a.tasks : manifest.tasks_path.value_or("");
    if (!tasks_path.empty()) {
      FallbackJudge judge;
      reconstruct_outcomes(records, load_tasks(tasks_path), path, judge, manifest.options);
    }
  }
  const Report report = aggregate(records);
  if (!a.report.empty()) write_file(a.report, to_json(report).dump(2) + "\n");
  std::cout << render_table(report, fs::path(path).parent_path().filename().string());
  return 0;
}

// --- serve -------------------------------------------------------------------

GatewayServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string tasks;
  bool no_multimodal = false;
  ServiceConfig cfg;
};

int cmd_serve(ServeArgs a) {
  a.cfg.tasks = load_tasks(a.tasks);
  a.cfg.multimodal = !a.no_multimodal;
  SessionService service(std::move(a.cfg));
  GatewayServer server(service);
  const int port = server.bind(a.host, a.port);
  if (port < 0) throw CommandError("cannot bind " + a.host + ":" + std::to_string(a.port));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving " << service.tasks().size() << " tasks on http://" << a.host << ":" << port << "\n";
  server.listen();
  g_server = nullptr;
  return 0;
}

// --- replay ------------------------------------------------------------------

struct ReplayArgs {
  std::string log;
  std::string tasks;
  bool no_multimodal = false;
  EpisodeLimits limits;
};

int cmd_replay(const ReplayArgs& a) {
  if (!fs::exists(a.log)) throw CommandError("log '" + a.log + "' does not exist");
  const auto records = read_transcript_log(a.log);
  if (records.empty()) throw CommandError("log '" + a.log + "' is empty");
  const auto task_id = records.front().value("task_id", std::string());
  const auto tasks = load_tasks(a.tasks);
  const auto it = std::find_if(tasks.begin(), tasks.end(), [&](const TaskSpec& t) { return t.task_id == task_id; });
  if (it == tasks.end()) throw CommandError("task '" + task_id + "' is not in '" + a.tasks + "'");
  EpisodeOptions options;
  options.multimodal = !a.no_multimodal;
  options.limits = a.limits;
  try {
    const auto outcome = replay(*it, records, options);
    std::cout << "replayed " << task_id << ": " << records.size() << " records, termination "
              << to_string(outcome.termination) << ", final state " << state_digest(outcome.final_snapshot.data())
              << "\n";
  } catch (const ReplayDivergence& e) {
    throw CommandError("diverged at record " + std::to_string(e.seq()) + ": " + e.what());
  }
  return 0;
}

// --- export-sft ----------------------------------------------------------------

struct ExportArgs {
  std::string results;
  std::string tasks;
  std::string out;
  bool all = false;
};

int cmd_export(const ExportArgs& a) {
  if (!fs::exists(a.results)) throw CommandError("results '" + a.results + "' do not exist");
  const auto path = results_file(a.results);
  const auto manifest = read_run_manifest(path);
  const std::string tasks_path = !a.tasks.empty() ? a.tasks : manifest.tasks_path.value_or("");
  if (tasks_path.empty()) throw CommandError("no task file: pass --tasks or use a run directory");
  auto records = read_score_records(path);
  if (!a.all) std::erase_if(records, [](const ScoreRecord& r) { return !r.score; });
  FallbackJudge judge;
  const auto outcomes = reconstruct_outcomes(records, load_tasks(tasks_path), path, judge, manifest.options);
  const auto segments = export_training_segments(outcomes);
  write_training_segments(a.out, segments);
  std::cerr << "wrote " << segments.size() << " segments from " << outcomes.size() << " episodes to " << a.out
            << "\n";
  return 0;
}

// --- rules -------------------------------------------------------------------

int cmd_rules(const std::string& out) {
  const std::string text = rule_catalog_to_json(builtin_rule_catalog()).dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_file(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Customer-service agent benchmark: task generation, episodes, scoring and the session gateway."};
  app.set_config("--config", "", "TOML or INI file with option values");
  app.require_subcommand(1);
  std::function<int()> action;

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate validated tasks over a seeded world");
  g->add_option("--family", gen.family, "all, logistics, after-sales or pre-sales")->capture_default_str();
  g->add_option("--count", gen.cfg.count, "Number of tasks")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.cfg.seed, "Random seed")->capture_default_str();
  g->add_option("--world", gen.world, "World size: empty, small, default or large")->capture_default_str();
  g->add_option("--threads", gen.cfg.threads, "Worker threads (0: all cores)")->capture_default_str();
  g->add_option("--out", gen.out, "Task file (JSON lines)")->required();
  g->callback([&] { action = [&] { return cmd_gen(gen); }; });

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run an agent on a task file and score every episode");
  r->add_option("--tasks", run.cfg.tasks_path, "Task file")->required();
  r->add_option("--agent", run.agent, "scripted, react, e-react, plan-solve or e-plan-solve")->capture_default_str();
  add_backend(r, "backend", "SHOPBENCH_API_KEY", run.cfg.backend, "Assistant model");
  r->add_option("--selector", run.cfg.selector, "Dynamic-module selector: identity, category or model");
  add_backend(r, "user-backend", "SHOPBENCH_USER_API_KEY", run.cfg.user_backend, "Simulated-customer model");
  add_backend(r, "judge", "SHOPBENCH_JUDGE_API_KEY", run.cfg.judge, "Judge model");
  r->add_option("--seed", run.cfg.seed, "Seed passed to model backends")->capture_default_str();
  r->add_option("--threads", run.cfg.threads, "Episodes run in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_flag("--no-multimodal", run.no_multimodal, "Keep media markers but attach no images or videos");
  add_limits(r, run.cfg.limits);
  r->add_option("--out", run.out, "Run directory")->required();
  r->callback([&] { action = [&] { return cmd_run(run); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Aggregate a results file into a report");
  e->add_option("--results", ev.results, "Results file or run directory")->required();
  e->add_option("--report", ev.report, "Report file (JSON)");
  e->add_option("--tasks", ev.tasks, "Task file for transcript verification (default: from run.json)");
  e->add_flag("--no-verify", ev.no_verify, "Skip re-scoring the transcripts");
  e->callback([&] { action = [&] { return cmd_eval(ev); }; });

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Serve the session API over HTTP");
  s->add_option("--host", serve.host, "Interface to bind")->capture_default_str();
  s->add_option("--port", serve.port, "Port (0: any free port)")->capture_default_str()->check(CLI::Range(0, 65535));
  s->add_option("--tasks", serve.tasks, "Task file")->required();
  add_backend(s, "user-backend", "SHOPBENCH_USER_API_KEY", serve.cfg.user_backend, "Simulated-customer model");
  add_backend(s, "judge", "SHOPBENCH_JUDGE_API_KEY", serve.cfg.judge, "Judge model");
  s->add_option("--log-dir", serve.cfg.log_dir, "Directory for transcripts of terminated sessions");
  s->add_flag("--no-multimodal", serve.no_multimodal, "Keep media markers but attach no images or videos");
  add_limits(s, serve.cfg.limits);
  s->callback([&] { action = [&] { return cmd_serve(serve); }; });

  ReplayArgs rp;
  auto* p = app.add_subcommand("replay", "Re-execute a transcript log and check it step by step");
  p->add_option("--log", rp.log, "Transcript log")->required();
  p->add_option("--tasks", rp.tasks, "Task file holding the logged task")->required();
  p->add_flag("--no-multimodal", rp.no_multimodal, "The log was recorded without attachments");
  add_limits(p, rp.limits);
  p->callback([&] { action = [&] { return cmd_replay(rp); }; });

  ExportArgs ex;
  auto* x = app.add_subcommand("export-sft", "Turn episodes into fine-tuning segments");
  x->add_option("--results", ex.results, "Results file or run directory")->required();
  x->add_option("--tasks", ex.tasks, "Task file (default: from run.json)");
  x->add_option("--out", ex.out, "Segment file (JSON lines)")->required();
  x->add_flag("--all", ex.all, "Include episodes that did not score");
  x->callback([&] { action = [&] { return cmd_export(ex); }; });

  std::string rules_out;
  auto* u = app.add_subcommand("rules", "Print the built-in rule catalog");
  u->add_option("--out", rules_out, "Write to a file instead of stdout");
  u->callback([&] { action = [&] { return cmd_rules(rules_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "shopbench: " << e.what() << "\n";
    return 2;
  }
  try {
    return action();
  } catch (const std::exception& ex) {
    std::cerr << "shopbench: " << ex.what() << "\n";
    return 1;
  }
}
