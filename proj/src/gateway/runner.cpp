#include <filesystem>
#include <fstream>
#include <thread>

#include "shopbench/gateway.hpp"

namespace shopbench {

namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<AgentKind, std::string_view>> kAgentKinds = {
    {AgentKind::Scripted, "scripted"},       {AgentKind::ReAct, "react"},
    {AgentKind::EReAct, "e-react"},          {AgentKind::PlanSolve, "plan-solve"},
    {AgentKind::EPlanSolve, "e-plan-solve"}, {AgentKind::External, "external"},
};

/// A model judge behind a digest cache, owning both layers.
class CachedModelJudge : public Judge {
 public:
  explicit CachedModelJudge(ModelBackend& backend) : model_(backend), cache_(model_) {}
  std::string name() const override { return cache_.name(); }
  bool contains_key_answer(const std::string& message, const std::string& key_answer) override {
    return cache_.contains_key_answer(message, key_answer);
  }
  bool remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) override {
    return cache_.remarks_equivalent(a, b, brands);
  }

 private:
  ModelJudge model_;
  CachedJudge cache_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& c) {
  if (!c.configured()) return nullptr;
  return std::make_unique<HttpChatBackend>(c.url, c.model, c.api_key);
}

struct EpisodeRunner {
  const RunConfig& config;
  ModelBackend* backend;
  ModelBackend* user_backend;
  Judge& judge;

  EpisodeRecord run(const TaskSpec& task) const {
    std::unique_ptr<UserPolicy> user;
    if (user_backend)
      user = std::make_unique<BackendUser>(task.profile, *user_backend, config.seed);
    else
      user = std::make_unique<ScriptedUser>(task.profile);

    std::unique_ptr<Selector> selector;
    if (uses_selector(config.agent)) selector = make_selector(config.selector, default_category_map(), backend);

    EpisodeOptions options;
    options.limits = config.limits;
    options.multimodal = config.multimodal;
    Episode episode(task, *user, options);

    EpisodeRecord rec;
    switch (config.agent) {
      case AgentKind::Scripted: {
        ScriptedPolicy agent(reference_turns(task));
        drive(episode, agent);
        break;
      }
      case AgentKind::ReAct:
      case AgentKind::EReAct: {
        ReActPolicy agent(*backend, selector.get(), config.seed);
        drive(episode, agent);
        rec.filter_invocations = agent.filter_invocations();
        break;
      }
      case AgentKind::PlanSolve:
      case AgentKind::EPlanSolve: {
        PlanAndSolvePolicy agent(*backend, selector.get(), config.seed);
        drive(episode, agent);
        rec.filter_invocations = agent.filter_invocations();
        break;
      }
      case AgentKind::External:
        throw std::invalid_argument("the external agent runs through the gateway");
    }
    rec.outcome = episode.outcome();
    rec.log = episode.log();
    rec.score = evaluate(task, rec.outcome, judge);
    return rec;
  }
};

json run_config_json(const RunConfig& c) {
  auto backend = [](const BackendConfig& b) -> json {
    if (!b.configured()) return nullptr;
    return {{"url", b.url}, {"model", b.model}};
  };
  return {{"tasks", c.tasks_path},
          {"agent", to_string(c.agent)},
          {"backend", backend(c.backend)},
          {"selector", c.selector},
          {"user_backend", backend(c.user_backend)},
          {"judge", backend(c.judge)},
          {"limits",
           {{"max_turns", c.limits.max_turns},
            {"max_tool_calls", c.limits.max_tool_calls},
            {"max_repeated_errors", c.limits.max_repeated_errors}}},
          {"seed", c.seed},
          {"multimodal", c.multimodal}};
}

}  // namespace

std::string_view to_string(AgentKind k) {
  for (const auto& [kind, name] : kAgentKinds)
    if (kind == k) return name;
  return "?";
}

std::optional<AgentKind> parse_agent_kind(std::string_view s) {
  for (const auto& [kind, name] : kAgentKinds)
    if (name == s) return kind;
  return std::nullopt;
}

bool uses_selector(AgentKind k) { return k == AgentKind::EReAct || k == AgentKind::EPlanSolve; }

void validate_run_config(const RunConfig& c) {
  if (c.agent == AgentKind::External)
    throw std::invalid_argument("the external agent kind is only available through 'serve'");
  if (uses_selector(c.agent) && c.selector.empty())
    throw std::invalid_argument("agent '" + std::string(to_string(c.agent)) + "' needs a selector");
  if (!uses_selector(c.agent) && !c.selector.empty())
    throw std::invalid_argument("a selector only applies to the e-react and e-plan-solve agents");
  if (c.agent != AgentKind::Scripted && !c.backend.configured())
    throw std::invalid_argument("agent '" + std::string(to_string(c.agent)) + "' needs a backend url");
  if (c.selector == "model" && !c.backend.configured())
    throw std::invalid_argument("the model selector needs a backend url");
  if (c.threads < 1) throw std::invalid_argument("threads must be >= 1");
}

std::unique_ptr<Judge> make_judge(const BackendConfig& config, std::unique_ptr<ModelBackend>& judge_backend) {
  judge_backend = make_backend(config);
  if (!judge_backend) return std::make_unique<FallbackJudge>();
  return std::make_unique<CachedModelJudge>(*judge_backend);
}

RunResult run_tasks(const std::vector<TaskSpec>& tasks, const RunConfig& config) {
  validate_run_config(config);
  const auto backend = make_backend(config.backend);
  const auto user_backend = make_backend(config.user_backend);
  std::unique_ptr<ModelBackend> judge_backend;
  const auto judge = make_judge(config.judge, judge_backend);
  const EpisodeRunner runner{config, backend.get(), user_backend.get(), *judge};

  RunResult result;
  result.episodes.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        result.episodes[i] = runner.run(tasks[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  if (!tasks.empty()) {
    std::vector<ScoreRecord> records;
    for (const auto& e : result.episodes) records.push_back(e.score);
    result.report = aggregate(records);
  }
  return result;
}

void write_run(const std::string& dir, const RunResult& result, const RunConfig& config) {
  const fs::path root(dir);
  fs::create_directories(root / "transcripts");
  write_text(root / "run.json", run_config_json(config).dump(2) + "\n");
  std::vector<ScoreRecord> records;
  for (const auto& e : result.episodes) {
    records.push_back(e.score);
    write_transcript_log((root / "transcripts" / (e.outcome.task_id + ".jsonl")).string(), e.log);
  }
  write_score_records((root / "results.jsonl").string(), records);
  if (!records.empty()) {
    write_text(root / "report.json", to_json(result.report).dump(2) + "\n");
    write_text(root / "report.txt", render_table(result.report, std::string(to_string(config.agent))));
  }
}

std::string results_file(const std::string& path) {
  if (fs::is_directory(path)) return (fs::path(path) / "results.jsonl").string();
  return path;
}

std::string transcript_path(const std::string& results_path, const std::string& task_id) {
  return (fs::path(results_path).parent_path() / "transcripts" / (task_id + ".jsonl")).string();
}

RunManifest read_run_manifest(const std::string& results_path) {
  RunManifest m;
  const auto path = fs::path(results_path).parent_path() / "run.json";
  std::ifstream in(path);
  if (!in) return m;
  try {
    const json j = json::parse(in);
    if (j.contains("tasks") && j["tasks"].is_string() && !j["tasks"].get<std::string>().empty())
      m.tasks_path = j["tasks"].get<std::string>();
    m.options.multimodal = j.value("multimodal", true);
    if (j.contains("limits")) {
      const auto& l = j["limits"];
      m.options.limits.max_turns = l.value("max_turns", m.options.limits.max_turns);
      m.options.limits.max_tool_calls = l.value("max_tool_calls", m.options.limits.max_tool_calls);
      m.options.limits.max_repeated_errors = l.value("max_repeated_errors", m.options.limits.max_repeated_errors);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument("run manifest '" + path.string() + "': " + e.what());
  }
  return m;
}

std::vector<EpisodeOutcome> reconstruct_outcomes(const std::vector<ScoreRecord>& records,
                                                 const std::vector<TaskSpec>& tasks, const std::string& results_path,
                                                 Judge& judge, const EpisodeOptions& options) {
  std::map<std::string, const TaskSpec*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;
  std::vector<EpisodeOutcome> out;
  for (const auto& r : records) {
    const auto it = by_id.find(r.task_id);
    if (it == by_id.end()) throw std::runtime_error("results name unknown task '" + r.task_id + "'");
    const auto log = read_transcript_log(transcript_path(results_path, r.task_id));
    auto outcome = replay(*it->second, log, options);
    if (to_json(evaluate(*it->second, outcome, judge)) != to_json(r))
      throw std::runtime_error("stored score of task '" + r.task_id + "' does not match its transcript");
    out.push_back(std::move(outcome));
  }
  return out;
}

}  // namespace shopbench
