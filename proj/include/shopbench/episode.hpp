#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shopbench/protocol.hpp"
#include "shopbench/task.hpp"

namespace shopbench {

struct EpisodeLimits {
  int max_turns = 40;
  int max_tool_calls = 30;
  int max_repeated_errors = 3;
};

struct EpisodeOptions {
  EpisodeLimits limits;
  /// When false, media markers stay in the text but no asset is attached.
  bool multimodal = true;
  Timestamp now = kSystemNow;
};

struct TranscriptMessage {
  enum class Speaker { User, Assistant };
  Speaker speaker = Speaker::User;
  std::string text;
  /// Asset ids named by media markers in `text`.
  std::vector<std::string> assets;
};
using Transcript = std::vector<TranscriptMessage>;

enum class StepKind { ToolCall, FinalAnswer, ProtocolError };

/// One agent turn: thought, action and the observation it produced.
struct TrajectoryStep {
  StepKind kind = StepKind::ToolCall;
  std::string thought;
  /// Raw agent output for the turn.
  std::string action;
  std::optional<ToolCall> call;
  std::string observation;
  std::uint64_t state_version = 0;
  /// True when the call was talk_to_user and `observation` is the customer's reply.
  bool user_reply = false;
};
using Trajectory = std::vector<TrajectoryStep>;

struct EpisodeOutcome {
  std::string task_id;
  std::string question;
  Transcript transcript;
  Trajectory trajectory;
  Snapshot final_snapshot;
  Termination termination = Termination::ProtocolFailure;
  int tool_call_count = 0;
  int turns = 0;
  std::string failure;
};

/// Everything an assistant policy may see. The world itself is not part of it.
struct AgentView {
  const std::string& question;
  const Transcript& transcript;
  const Trajectory& trajectory;
  const std::vector<AssetRef>& files;
};

/// The assistant could not produce a turn (backend down, retries exhausted).
class PolicyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  /// Raw tagged output for the next turn. Throws PolicyFailure.
  virtual std::string act(const AgentView& view) = 0;
  /// Invoked by the engine immediately after every talk_to_user observation.
  virtual void on_user_utterance(const AgentView&) {}
};

class UserPolicy {
 public:
  virtual ~UserPolicy() = default;
  /// The first demand, presented to the assistant as the <Question>.
  virtual std::string opening() = 0;
  virtual std::string reply(const std::string& assistant_message) = 0;
};

struct StepResult {
  enum class Kind { Observation, UserUtterance, Terminal, ProtocolError, FinalAnswer };
  Kind kind = Kind::Observation;
  /// Observation body as the agent sees it inside <Observation> tags.
  std::string text;
  /// Assets attached by this step (multimodal only).
  std::vector<AssetRef> new_files;
  std::uint64_t state_version = 0;
  bool done = false;
  Termination termination = Termination::Completed;
};

std::string_view to_string(StepResult::Kind k);

/// A single episode driven one agent output at a time. The in-process runner
/// and the HTTP gateway both drive this class.
class Episode {
 public:
  Episode(const TaskSpec& task, UserPolicy& user, EpisodeOptions options = {});

  const TaskSpec& task() const { return task_; }
  const std::string& question() const { return question_; }
  const Transcript& transcript() const { return transcript_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<AssetRef>& files() const { return files_; }
  AgentView view() const { return {question_, transcript_, trajectory_, files_}; }
  std::uint64_t state_version() const { return state_.version(); }
  int turns() const { return turns_; }
  int tool_call_count() const { return tool_calls_; }
  bool done() const { return done_; }
  std::optional<Termination> termination() const;
  /// Transcript log records in order.
  const std::vector<json>& log() const { return log_; }

  /// Processes one raw assistant output. Throws std::logic_error once done.
  StepResult submit(const std::string& raw);
  /// Ends the episode with protocol_failure (policy could not continue).
  void fail(const std::string& reason);

  EpisodeOutcome outcome() const;

 private:
  void record(std::string role, std::string body);
  void finish(Termination t);
  void attach_media(const std::string& text, std::vector<std::string>& ids, std::vector<AssetRef>* added);
  std::string deliver_to_user(const std::string& message, std::vector<AssetRef>& added);
  StepResult error_step(TrajectoryStep step, StepResult::Kind kind);

  TaskSpec task_;
  UserPolicy& user_;
  EpisodeOptions options_;
  WorldState state_;
  ToolContext tool_ctx_;
  std::string question_;
  Transcript transcript_;
  Trajectory trajectory_;
  std::vector<AssetRef> files_;
  std::vector<json> log_;
  int turns_ = 0;
  int tool_calls_ = 0;
  std::string last_error_;
  int error_streak_ = 0;
  bool done_ = false;
  Termination termination_ = Termination::ProtocolFailure;
  std::string failure_;
};

/// Feeds the assistant's turns into the episode until it is done.
void drive(Episode& episode, AgentPolicy& assistant);

EpisodeOutcome run_episode(const TaskSpec& task, AgentPolicy& assistant, UserPolicy& user,
                           const EpisodeOptions& options = {});

// --- transcript logs --------------------------------------------------------

void write_transcript_log(const std::string& path, const std::vector<json>& records);
std::vector<json> read_transcript_log(const std::string& path);

class ReplayDivergence : public std::runtime_error {
 public:
  ReplayDivergence(std::uint64_t seq, const std::string& what) : std::runtime_error(what), seq_(seq) {}
  std::uint64_t seq() const { return seq_; }

 private:
  std::uint64_t seq_;
};

/// Re-executes a logged episode against the task's initial world and checks
/// every record, the termination and the final state digest. Throws
/// ReplayDivergence naming the first differing record.
EpisodeOutcome replay(const TaskSpec& task, const std::vector<json>& records, const EpisodeOptions& options = {});

/// Digest of a world's canonical bytes.
std::string state_digest(const WorldData& data);

json to_json(const Transcript& t);
json to_json(const Trajectory& t);
/// Outcome without the hidden world: the final state appears only as a digest.
json to_json(const EpisodeOutcome& o);

}  // namespace shopbench
