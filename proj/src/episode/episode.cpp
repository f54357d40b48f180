#include "shopbench/episode.hpp"

#include <fstream>

#include "shopbench/digest.hpp"

namespace shopbench {

namespace {

const char* kFinalAck =
    "Final answer delivered to the customer. Use talk_to_user to continue the conversation or end_conversation "
    "to finish.";

}  // namespace

std::string_view to_string(StepResult::Kind k) {
  switch (k) {
    case StepResult::Kind::Observation: return "observation";
    case StepResult::Kind::UserUtterance: return "user_utterance";
    case StepResult::Kind::Terminal: return "terminal";
    case StepResult::Kind::ProtocolError: return "protocol_error";
    case StepResult::Kind::FinalAnswer: return "final_answer";
  }
  return "?";
}

std::string state_digest(const WorldData& data) { return digest(canonical_bytes(data)); }

Episode::Episode(const TaskSpec& task, UserPolicy& user, EpisodeOptions options)
    : task_(task), user_(user), options_(options), state_(task.initial_world) {
  tool_ctx_.now = options_.now;
  question_ = user_.opening();
  TranscriptMessage m{TranscriptMessage::Speaker::User, question_, {}};
  attach_media(question_, m.assets, nullptr);
  transcript_.push_back(std::move(m));
  record("question", question_);
  log_.back()["task_id"] = task_.task_id;
}

std::optional<Termination> Episode::termination() const {
  if (!done_) return std::nullopt;
  return termination_;
}

void Episode::record(std::string role, std::string body) {
  log_.push_back({{"seq", log_.size()}, {"role", std::move(role)}, {"body", std::move(body)},
                  {"state_version", state_.version()}});
}

void Episode::finish(Termination t) {
  done_ = true;
  termination_ = t;
  tool_ctx_.terminated = true;
  log_.back()["termination"] = to_string(t);
  log_.back()["final_state_digest"] = state_digest(state_.data());
}

void Episode::attach_media(const std::string& text, std::vector<std::string>& ids, std::vector<AssetRef>* added) {
  for (const auto& marker : find_media_markers(text)) {
    auto id = resolve_marker(marker, task_.media, task_.initial_world);
    if (!id) continue;
    ids.push_back(*id);
    if (!options_.multimodal) continue;
    const AssetRef& asset = task_.initial_world.assets.at(*id);
    files_.push_back(asset);
    if (added) added->push_back(asset);
  }
}

std::string Episode::deliver_to_user(const std::string& message, std::vector<AssetRef>& added) {
  transcript_.push_back({TranscriptMessage::Speaker::Assistant, message, {}});
  std::string reply = user_.reply(message);
  TranscriptMessage m{TranscriptMessage::Speaker::User, reply, {}};
  attach_media(reply, m.assets, &added);
  transcript_.push_back(std::move(m));
  return reply;
}

StepResult Episode::error_step(TrajectoryStep step, StepResult::Kind kind) {
  StepResult r;
  r.kind = kind;
  r.text = step.observation;
  if (step.observation == last_error_) {
    ++error_streak_;
  } else {
    last_error_ = step.observation;
    error_streak_ = 1;
  }
  step.state_version = state_.version();
  r.state_version = state_.version();
  record("observation", step.observation);
  trajectory_.push_back(std::move(step));
  if (error_streak_ >= options_.limits.max_repeated_errors) finish(Termination::ProtocolFailure);
  return r;
}

StepResult Episode::submit(const std::string& raw) {
  if (done_) throw std::logic_error("episode has terminated");
  ++turns_;
  StepResult result;

  AgentTurn turn;
  bool parsed = true;
  try {
    turn = parse_agent_output(raw);
  } catch (const ProtocolError& e) {
    parsed = false;
    record("action", raw);
    TrajectoryStep step;
    step.kind = StepKind::ProtocolError;
    step.action = raw;
    step.observation = std::string("ERROR: protocol violation: ") + e.what() + ". " + kFormatHint;
    result = error_step(std::move(step), StepResult::Kind::ProtocolError);
  }

  if (parsed) {
    record("thought", turn.thought);
    record("action", raw);
    TrajectoryStep step;
    step.thought = turn.thought;
    step.action = raw;

    if (!turn.is_call()) {
      step.kind = StepKind::FinalAnswer;
      transcript_.push_back({TranscriptMessage::Speaker::Assistant, turn.final_answer().text, {}});
      record("final", turn.final_answer().text);
      step.observation = kFinalAck;
      step.state_version = state_.version();
      record("observation", step.observation);
      trajectory_.push_back(step);
      error_streak_ = 0;
      last_error_.clear();
      result.kind = StepResult::Kind::FinalAnswer;
      result.text = kFinalAck;
      result.state_version = state_.version();
    } else if (tool_calls_ >= options_.limits.max_tool_calls) {
      step.call = turn.call();
      step.observation = "ERROR: tool call limit reached";
      step.state_version = state_.version();
      record("observation", step.observation);
      trajectory_.push_back(step);
      result.kind = StepResult::Kind::Terminal;
      result.text = step.observation;
      result.state_version = state_.version();
      finish(Termination::TurnLimit);
    } else {
      ++tool_calls_;
      step.call = turn.call();
      std::vector<AssetRef> added;
      bool user_failed = false;
      std::string user_error;
      tool_ctx_.talk_to_user = [&](const std::string& message) -> std::string {
        try {
          return deliver_to_user(message, added);
        } catch (const std::exception& e) {
          user_failed = true;
          user_error = e.what();
          return {};
        }
      };
      const ToolResult tr = dispatch(turn.call(), state_, tool_ctx_);
      tool_ctx_.talk_to_user = nullptr;
      step.observation = render_observation(tr);
      step.state_version = tr.state_version_after;
      result.text = step.observation;
      result.state_version = tr.state_version_after;
      result.new_files = std::move(added);

      if (user_failed) {
        record("observation", "");
        trajectory_.push_back(step);
        fail("user policy failed: " + user_error);
        result.kind = StepResult::Kind::Terminal;
      } else if (tr.kind == ToolResult::Kind::Error) {
        result = error_step(std::move(step), StepResult::Kind::Observation);
      } else {
        error_streak_ = 0;
        last_error_.clear();
        if (tr.kind == ToolResult::Kind::UserReply) {
          step.user_reply = true;
          record("user", step.observation);
          result.kind = StepResult::Kind::UserUtterance;
        } else {
          record("observation", step.observation);
          result.kind = tr.kind == ToolResult::Kind::Terminal ? StepResult::Kind::Terminal : StepResult::Kind::Observation;
        }
        trajectory_.push_back(std::move(step));
        if (tr.kind == ToolResult::Kind::Terminal) finish(tr.termination);
      }
    }
  }

  if (!done_ && turns_ >= options_.limits.max_turns) finish(Termination::TurnLimit);
  result.done = done_;
  if (done_) {
    result.termination = termination_;
    if (result.kind != StepResult::Kind::Terminal && result.kind != StepResult::Kind::UserUtterance)
      result.kind = StepResult::Kind::Terminal;
  }
  return result;
}

void Episode::fail(const std::string& reason) {
  if (done_) return;
  failure_ = reason;
  finish(Termination::ProtocolFailure);
}

EpisodeOutcome Episode::outcome() const {
  EpisodeOutcome o;
  o.task_id = task_.task_id;
  o.question = question_;
  o.transcript = transcript_;
  o.trajectory = trajectory_;
  o.final_snapshot = state_.snapshot();
  o.termination = done_ ? termination_ : Termination::ProtocolFailure;
  o.tool_call_count = tool_calls_;
  o.turns = turns_;
  o.failure = failure_;
  return o;
}

void drive(Episode& episode, AgentPolicy& assistant) {
  while (!episode.done()) {
    std::string raw;
    try {
      raw = assistant.act(episode.view());
    } catch (const PolicyFailure& e) {
      episode.fail(e.what());
      break;
    }
    const StepResult r = episode.submit(raw);
    if (r.kind == StepResult::Kind::UserUtterance && !episode.done()) assistant.on_user_utterance(episode.view());
  }
}

EpisodeOutcome run_episode(const TaskSpec& task, AgentPolicy& assistant, UserPolicy& user,
                           const EpisodeOptions& options) {
  Episode episode(task, user, options);
  drive(episode, assistant);
  return episode.outcome();
}

// --- logs --------------------------------------------------------------------

void write_transcript_log(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write transcript log '" + path + "'");
  for (const auto& r : records) out << r.dump() << '\n';
}

std::vector<json> read_transcript_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transcript log '" + path + "'");
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      throw std::invalid_argument("transcript log '" + path + "': " + e.what());
    }
    if (!r.is_object() || !r.contains("seq") || !r.contains("role") || !r.contains("body") ||
        !r.contains("state_version"))
      throw std::invalid_argument("transcript log '" + path + "': record missing seq/role/body/state_version");
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

class LoggedUser : public UserPolicy {
 public:
  explicit LoggedUser(const std::vector<json>& records) {
    for (const auto& r : records) {
      if (r.at("role") == "question" && opening_.empty()) opening_ = r.at("body").get<std::string>();
      if (r.at("role") == "user") replies_.push_back(r.at("body").get<std::string>());
    }
  }
  std::string opening() override { return opening_; }
  std::string reply(const std::string&) override {
    if (next_ >= replies_.size()) throw std::runtime_error("replay requested more user replies than were logged");
    return replies_[next_++];
  }

 private:
  std::string opening_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

}  // namespace

EpisodeOutcome replay(const TaskSpec& task, const std::vector<json>& records, const EpisodeOptions& options) {
  if (records.empty()) {
    EpisodeOutcome o;
    o.task_id = task.task_id;
    o.final_snapshot = WorldState(task.initial_world).snapshot();
    o.failure = "empty log";
    return o;
  }
  if (records.front().at("role") != "question") throw ReplayDivergence(0, "log does not start with a question record");

  LoggedUser user(records);
  Episode episode(task, user, options);
  for (const auto& r : records) {
    if (r.at("role") != "action") continue;
    if (episode.done()) break;
    episode.submit(r.at("body").get<std::string>());
  }
  if (!episode.done()) {
    // The original run stopped without a terminal step: the policy failed.
    episode.fail("policy failure (replayed)");
  }

  const auto& fresh = episode.log();
  const std::size_t n = std::max(fresh.size(), records.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= fresh.size()) throw ReplayDivergence(i, "replay ended before log record " + std::to_string(i));
    if (i >= records.size()) throw ReplayDivergence(i, "replay produced extra record " + std::to_string(i));
    json want = records[i], got = fresh[i];
    // Termination fields are compared separately below.
    for (auto* j : {&want, &got}) {
      j->erase("termination");
      j->erase("final_state_digest");
    }
    if (want != got)
      throw ReplayDivergence(i, "record " + std::to_string(i) + " differs: logged " + want.dump() + ", replayed " +
                                    got.dump());
  }
  const json& last_want = records.back();
  const json& last_got = fresh.back();
  if (last_want.value("termination", "") != last_got.value("termination", ""))
    throw ReplayDivergence(records.size() - 1, "termination differs: logged " + last_want.value("termination", "") +
                                                   ", replayed " + last_got.value("termination", ""));
  if (last_want.value("final_state_digest", "") != last_got.value("final_state_digest", ""))
    throw ReplayDivergence(records.size() - 1, "final state differs");
  return episode.outcome();
}

json to_json(const Transcript& t) {
  json arr = json::array();
  for (const auto& m : t)
    arr.push_back({{"speaker", m.speaker == TranscriptMessage::Speaker::User ? "user" : "assistant"},
                   {"text", m.text},
                   {"assets", m.assets}});
  return arr;
}

json to_json(const Trajectory& t) {
  json arr = json::array();
  for (const auto& s : t) {
    json step = {{"thought", s.thought}, {"action", s.action}, {"observation", s.observation},
                 {"state_version", s.state_version}};
    step["kind"] = s.kind == StepKind::ToolCall ? "tool_call" : s.kind == StepKind::FinalAnswer ? "final_answer"
                                                                                                 : "protocol_error";
    arr.push_back(std::move(step));
  }
  return arr;
}

json to_json(const EpisodeOutcome& o) {
  return {{"task_id", o.task_id},
          {"question", o.question},
          {"transcript", to_json(o.transcript)},
          {"trajectory", to_json(o.trajectory)},
          {"termination", to_string(o.termination)},
          {"tool_call_count", o.tool_call_count},
          {"turns", o.turns},
          {"failure", o.failure},
          {"final_state_version", o.final_snapshot.version()},
          {"final_state_digest", state_digest(o.final_snapshot.data())}};
}

}  // namespace shopbench
