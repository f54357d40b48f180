#include <cstdio>
#include <filesystem>

#include "shopbench/gateway.hpp"

namespace shopbench {

namespace {

SessionError malformed(const std::string& message) { return SessionError(400, "malformed_body", message); }

int limit_field(const json& limits, const char* name, int fallback) {
  if (!limits.contains(name)) return fallback;
  const auto& v = limits[name];
  if (!v.is_number_integer() || v.get<long long>() < 1) throw malformed(std::string("limits.") + name + " must be a positive integer");
  return v.get<int>();
}

json files_json(const std::vector<AssetRef>& files) {
  json out = json::array();
  for (const auto& f : files) out.push_back(to_json(f));
  return out;
}

/// Score record with diff values removed: the paths say where the final state
/// went wrong without revealing the hidden records.
json redacted_score(const ScoreRecord& r) {
  json j = to_json(r);
  json paths = json::array();
  for (const auto& d : r.diffs) paths.push_back(d.path);
  j.erase("diffs");
  j["diff_paths"] = std::move(paths);
  return j;
}

}  // namespace

struct SessionService::Session {
  std::mutex mu;
  std::string id;
  const TaskSpec* task = nullptr;
  std::unique_ptr<UserPolicy> user;
  std::unique_ptr<Episode> episode;
  std::optional<json> result;
  bool logged = false;
};

std::string_view to_string(SessionStatus s) { return s == SessionStatus::Terminated ? "terminated" : "awaiting_agent"; }

SessionService::SessionService(ServiceConfig config) : config_(std::move(config)) {
  for (std::size_t i = 0; i < config_.tasks.size(); ++i)
    if (!task_index_.emplace(config_.tasks[i].task_id, i).second)
      throw std::invalid_argument("duplicate task id '" + config_.tasks[i].task_id + "'");
  if (config_.user_backend.configured())
    user_backend_ = std::make_unique<HttpChatBackend>(config_.user_backend.url, config_.user_backend.model,
                                                      config_.user_backend.api_key);
  judge_ = make_judge(config_.judge, judge_backend_);
}

SessionService::~SessionService() = default;

const TaskSpec& SessionService::task(const std::string& task_id) const {
  const auto it = task_index_.find(task_id);
  if (it == task_index_.end()) throw SessionError(404, "unknown_task", "no task '" + task_id + "'");
  return config_.tasks[it->second];
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionError(404, "unknown_session", "no session '" + id + "'");
  return it->second;
}

json SessionService::create(const json& body) {
  if (!body.is_object()) throw malformed("expected a JSON object");
  if (!body.contains("task_id") || !body["task_id"].is_string()) throw malformed("task_id must be a string");
  const TaskSpec& t = task(body["task_id"].get<std::string>());

  std::uint64_t seed = 0;
  if (body.contains("seed")) {
    if (!body["seed"].is_number_unsigned()) throw malformed("seed must be a non-negative integer");
    seed = body["seed"].get<std::uint64_t>();
  }
  EpisodeOptions options;
  options.multimodal = config_.multimodal;
  options.limits = config_.limits;
  if (body.contains("multimodal")) {
    if (!body["multimodal"].is_boolean()) throw malformed("multimodal must be a boolean");
    options.multimodal = body["multimodal"].get<bool>();
  }
  if (body.contains("limits")) {
    const auto& l = body["limits"];
    if (!l.is_object()) throw malformed("limits must be an object");
    options.limits.max_turns = limit_field(l, "max_turns", options.limits.max_turns);
    options.limits.max_tool_calls = limit_field(l, "max_tool_calls", options.limits.max_tool_calls);
    options.limits.max_repeated_errors = limit_field(l, "max_repeated_errors", options.limits.max_repeated_errors);
  }

  auto s = std::make_shared<Session>();
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_++));
  s->id = buf;
  s->task = &t;
  if (user_backend_)
    s->user = std::make_unique<BackendUser>(t.profile, *user_backend_, seed);
  else
    s->user = std::make_unique<ScriptedUser>(t.profile);
  s->episode = std::make_unique<Episode>(t, *s->user, options);

  json reply = {{"session_id", s->id},
                {"task_id", t.task_id},
                {"question", s->episode->question()},
                {"files", files_json(s->episode->files())},
                {"tool_catalog", tool_catalog_json()},
                {"rules", rule_catalog_to_json(builtin_rule_catalog())}};
  std::unique_lock lock(mu_);
  sessions_.emplace(s->id, std::move(s));
  return reply;
}

json SessionService::agent_turn(const std::string& id, const json& body) {
  if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
    throw malformed("expected {\"text\": <tagged agent output>}");
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->episode->done()) throw SessionError(409, "out_of_phase", "session '" + id + "' has terminated");
  const StepResult r = s->episode->submit(body["text"].get<std::string>());
  json reply = {{"kind", to_string(r.kind)},
                {"text", r.text},
                {"files", files_json(r.new_files)},
                {"state_version", r.state_version},
                {"done", s->episode->done()}};
  if (const auto t = s->episode->termination()) reply["termination"] = to_string(*t);
  if (s->episode->done() && !config_.log_dir.empty() && !s->logged) {
    const auto dir = std::filesystem::path(config_.log_dir) / "transcripts";
    std::filesystem::create_directories(dir);
    write_transcript_log((dir / (s->id + ".jsonl")).string(), s->episode->log());
    s->logged = true;
  }
  return reply;
}

json SessionService::state(const std::string& id) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  const auto& e = *s->episode;
  json reply = {{"session_id", s->id},
                {"task_id", s->task->task_id},
                {"status", to_string(e.done() ? SessionStatus::Terminated : SessionStatus::AwaitingAgent)},
                {"turns", e.turns()},
                {"tool_call_count", e.tool_call_count()},
                {"state_version", e.state_version()},
                {"transcript_messages", e.transcript().size()}};
  if (const auto t = e.termination()) reply["termination"] = to_string(*t);
  return reply;
}

json SessionService::result(const std::string& id) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  if (!s->episode->done()) throw SessionError(409, "out_of_phase", "session '" + id + "' has not terminated");
  if (!s->result) {
    const auto outcome = s->episode->outcome();
    s->result = json{{"outcome", to_json(outcome)}, {"score", redacted_score(evaluate(*s->task, outcome, *judge_))}};
  }
  return *s->result;
}

void SessionService::remove(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::unique_lock lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw SessionError(404, "unknown_session", "no session '" + id + "'");
    s = std::move(it->second);
    sessions_.erase(it);
  }
  // Wait for a handler still running on the session before it is destroyed.
  std::lock_guard lock(s->mu);
}

std::size_t SessionService::size() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

}  // namespace shopbench
