#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "shopbench/eval.hpp"

namespace shopbench {

// ---------------------------------------------------------------------------
// Batch runs
// ---------------------------------------------------------------------------

enum class AgentKind { Scripted, ReAct, EReAct, PlanSolve, EPlanSolve, External };
std::string_view to_string(AgentKind k);
std::optional<AgentKind> parse_agent_kind(std::string_view s);
/// E-ReAct and E-Plan-Solve.
bool uses_selector(AgentKind k);

/// Where a chat model lives. Empty url: not configured.
struct BackendConfig {
  std::string url;
  std::string model = "default";
  std::string api_key;

  bool configured() const { return !url.empty(); }
};

struct RunConfig {
  std::string tasks_path;
  AgentKind agent = AgentKind::Scripted;
  /// Assistant model, for every agent kind except scripted and external.
  BackendConfig backend;
  /// identity | category | model; required by the E-variants.
  std::string selector;
  /// Simulated-customer model; not configured: the scripted customer.
  BackendConfig user_backend;
  /// Judge model; not configured: the deterministic fallback judge.
  BackendConfig judge;
  EpisodeLimits limits;
  std::uint64_t seed = 0;
  bool multimodal = true;
  int threads = 1;
};

/// Throws std::invalid_argument when the configuration cannot be run in batch
/// mode: an E-variant without a selector, a selector without an E-variant, a
/// model agent without a backend, or the external agent (serve mode only).
void validate_run_config(const RunConfig& config);

struct EpisodeRecord {
  EpisodeOutcome outcome;
  std::vector<json> log;
  ScoreRecord score;
  /// Selector invocations of the E-variants (0 otherwise).
  int filter_invocations = 0;
};

struct RunResult {
  std::vector<EpisodeRecord> episodes;
  Report report;
};

/// Runs every task with a fresh assistant and customer and scores it. The
/// output is in task order whatever the thread count.
RunResult run_tasks(const std::vector<TaskSpec>& tasks, const RunConfig& config);

/// Judge chosen by a run configuration. `judge_backend` holds the backend a
/// model judge talks to; it must outlive the returned judge.
std::unique_ptr<Judge> make_judge(const BackendConfig& config, std::unique_ptr<ModelBackend>& judge_backend);

/// Run directory layout:
///   run.json                  the configuration (credentials omitted)
///   results.jsonl             one ScoreRecord per task
///   transcripts/<task>.jsonl  the episode log
///   report.json, report.txt   the aggregate
void write_run(const std::string& dir, const RunResult& result, const RunConfig& config);

/// `path` is a results file or a run directory.
std::string results_file(const std::string& path);
/// Transcript log of a task next to a results file.
std::string transcript_path(const std::string& results_path, const std::string& task_id);
/// What the run.json next to a results file records. Without a manifest the
/// task file is unknown and the options are the defaults.
struct RunManifest {
  std::optional<std::string> tasks_path;
  EpisodeOptions options;
};
RunManifest read_run_manifest(const std::string& results_path);

/// Replays the transcript of every record against its task and re-scores it.
/// Throws std::runtime_error when a recomputed record differs from the stored
/// one, and ReplayDivergence when a transcript does not replay.
std::vector<EpisodeOutcome> reconstruct_outcomes(const std::vector<ScoreRecord>& records,
                                                 const std::vector<TaskSpec>& tasks, const std::string& results_path,
                                                 Judge& judge, const EpisodeOptions& options = {});

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

/// A request the service refuses. `status` is the HTTP status to answer with.
class SessionError : public std::runtime_error {
 public:
  SessionError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  json body() const { return {{"code", code_}, {"message", what()}}; }

 private:
  int status_;
  std::string code_;
};

enum class SessionStatus { AwaitingAgent, Terminated };
std::string_view to_string(SessionStatus s);

struct ServiceConfig {
  std::vector<TaskSpec> tasks;
  /// Simulated-customer model; not configured: the scripted customer.
  BackendConfig user_backend;
  BackendConfig judge;
  EpisodeLimits limits;
  bool multimodal = true;
  /// Directory that receives transcripts/<session>.jsonl of terminated
  /// sessions; empty: keep them in memory only.
  std::string log_dir;
};

/// In-memory session registry behind the HTTP gateway. Handlers of one
/// session run one at a time; distinct sessions run concurrently.
class SessionService {
 public:
  explicit SessionService(ServiceConfig config);
  ~SessionService();

  /// {task_id, seed?, multimodal?, limits?} -> {session_id, task_id, question,
  /// files, tool_catalog, rules}.
  json create(const json& body);
  /// {text} -> {kind, text, files, state_version, done, termination?}.
  json agent_turn(const std::string& id, const json& body);
  /// Status and counters; never a database record.
  json state(const std::string& id);
  /// {outcome, score} once the session has terminated.
  json result(const std::string& id);
  void remove(const std::string& id);

  std::size_t size() const;
  const std::vector<TaskSpec>& tasks() const { return config_.tasks; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  const TaskSpec& task(const std::string& task_id) const;

  ServiceConfig config_;
  std::map<std::string, std::size_t> task_index_;
  std::unique_ptr<ModelBackend> user_backend_;
  std::unique_ptr<ModelBackend> judge_backend_;
  std::unique_ptr<Judge> judge_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> next_id_{1};
};

/// HTTP binding of a SessionService:
///   POST   /sessions
///   POST   /sessions/{id}/agent-turn
///   GET    /sessions/{id}/state
///   GET    /sessions/{id}/result
///   DELETE /sessions/{id}
/// Bodies are JSON; errors are {code, message} with a 4xx status.
class GatewayServer {
 public:
  explicit GatewayServer(SessionService& service);
  ~GatewayServer();

  /// Binds `host:port`; port 0 picks a free port. Returns the bound port, or
  /// -1 when binding failed.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shopbench
