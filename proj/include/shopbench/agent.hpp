#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shopbench/episode.hpp"
#include "shopbench/rule_catalog.hpp"

namespace shopbench {

// ---------------------------------------------------------------------------
// Context and plans
// ---------------------------------------------------------------------------

struct SubTask {
  std::string description;
  std::vector<std::string> tools;  // expected tools; empty: any tool completes it
  bool done = false;

  bool operator==(const SubTask&) const = default;
};

struct Plan {
  std::vector<SubTask> subtasks;

  const SubTask* next_undone() const;
  bool complete() const { return next_undone() == nullptr; }
  bool operator==(const Plan&) const = default;
};

json to_json(const Plan& p);
/// Reads `<Plan>[{"description": .., "tools": [..]}, ..]</Plan>` from a
/// completion, falling back to numbered lines ("1. check the order"). Returns
/// nullopt when neither form yields a sub-task.
std::optional<Plan> parse_plan(std::string_view completion);

/// What a policy renders into the backend prompt.
struct AgentContext {
  std::vector<AssetRef> files;
  std::string question;
  Transcript query;
  RuleSet rules;
  json tools = json::array();
  Trajectory trajectory;
  std::optional<Plan> plan;
};

// ---------------------------------------------------------------------------
// Model backends
// ---------------------------------------------------------------------------

struct ChatMessage {
  std::string role;  // "user" | "assistant"
  std::string content;
};

struct ChatRequest {
  std::string system;
  std::vector<ChatMessage> messages;
  std::uint64_t seed = 0;
  int timeout_ms = 60000;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  /// Returns the completion text. Throws BackendError. Must be safe to call
  /// from several episodes at once.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Digest of everything a backend sees for a request.
std::string prompt_digest(const ChatRequest& request);

/// Returns canned completions in order. With `stamp_prompt` every completion
/// that has a </Thought> tag gets " [prompt <digest>]" inserted before it, so
/// transcripts reveal exactly which prompt produced each turn.
class ScriptedBackend : public ModelBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> completions, bool stamp_prompt = false);
  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> completions_;
  bool stamp_;
  std::size_t next_ = 0;
  std::vector<ChatRequest> requests_;
};

/// OpenAI-style chat-completion endpoint: POST {base}/chat/completions.
class HttpChatBackend : public ModelBackend {
 public:
  /// `url` like "http://host:8000/v1"; `api_key` may be empty.
  HttpChatBackend(std::string url, std::string model, std::string api_key = {});
  std::string complete(const ChatRequest& request) override;

 private:
  std::string scheme_host_port_;
  std::string base_path_;
  std::string model_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Dynamic module
// ---------------------------------------------------------------------------

struct DynamicFilterInput {
  const Transcript& query;
  const RuleSet& catalog;
  const Trajectory& trajectory;
  const Plan* plan = nullptr;
};

struct DynamicFilterOutput {
  std::vector<std::string> rules_kept;
  std::vector<std::size_t> trajectory_kept;
  std::optional<Plan> revised_plan;
  /// What clamping removed or repaired, one line each.
  std::vector<std::string> clamp_log;
  bool fell_back = false;
};

class Selector {
 public:
  virtual ~Selector() = default;
  virtual DynamicFilterOutput select(const DynamicFilterInput& in) = 0;
};

/// Keeps everything.
class IdentitySelector : public Selector {
 public:
  DynamicFilterOutput select(const DynamicFilterInput& in) override;
};

/// Keyword detection of question families over customer messages, mapped to
/// rule categories through a CategoryMap. Trajectory and plan are kept.
class CategorySelector : public Selector {
 public:
  explicit CategorySelector(CategoryMap map = default_category_map());
  DynamicFilterOutput select(const DynamicFilterInput& in) override;

 private:
  CategoryMap map_;
};

/// Asks a model for {"rules_kept": [...], "trajectory_kept": [...]}.
class BackendSelector : public Selector {
 public:
  explicit BackendSelector(ModelBackend& backend) : backend_(backend) {}
  DynamicFilterOutput select(const DynamicFilterInput& in) override;

 private:
  ModelBackend& backend_;
};

/// Families detected in the customer's messages.
std::set<Family> detect_families(const Transcript& query);

/// Runs the selector and enforces the output contract: rules_kept is a subset
/// of the catalog in catalog order, trajectory_kept is strictly increasing and
/// in range, and a revised plan keeps every finished sub-task unchanged. A
/// throwing selector yields the identity output.
DynamicFilterOutput dynamic_filter(const DynamicFilterInput& in, Selector& selector);

std::unique_ptr<Selector> make_selector(const std::string& kind, const CategoryMap& map, ModelBackend* backend);

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// Prompt for a ReAct step. Rule ids are embedded so distinct rule sets
/// always render differently.
ChatRequest render_react_prompt(const AgentContext& ctx);

class ReActPolicy : public AgentPolicy {
 public:
  /// `selector` null: vanilla ReAct. Otherwise the E-variant.
  ReActPolicy(ModelBackend& backend, Selector* selector = nullptr, std::uint64_t seed = 0);
  std::string act(const AgentView& view) override;
  void on_user_utterance(const AgentView& view) override;

  /// Replaces the built-in rule catalog.
  void set_rules(RuleSet rules) { catalog_ = std::move(rules); }
  int filter_invocations() const { return filter_calls_; }
  const std::vector<DynamicFilterOutput>& filter_outputs() const { return outputs_; }
  AgentContext context(const AgentView& view) const;

 private:
  RuleSet catalog_ = builtin_rule_catalog();
  ModelBackend& backend_;
  Selector* selector_;
  std::uint64_t seed_;
  std::optional<std::vector<std::string>> rules_kept_;
  std::set<std::size_t> hidden_steps_;
  int filter_calls_ = 0;
  std::vector<DynamicFilterOutput> outputs_;
};

class PlanAndSolvePolicy : public AgentPolicy {
 public:
  PlanAndSolvePolicy(ModelBackend& backend, Selector* selector = nullptr, std::uint64_t seed = 0);
  std::string act(const AgentView& view) override;
  void on_user_utterance(const AgentView& view) override;

  void set_rules(RuleSet rules) { catalog_ = std::move(rules); }
  const std::optional<Plan>& plan() const { return plan_; }
  int filter_invocations() const { return filter_calls_; }
  const std::vector<DynamicFilterOutput>& filter_outputs() const { return outputs_; }

 private:
  AgentContext context(const AgentView& view) const;
  void update_progress(const AgentView& view);

  RuleSet catalog_ = builtin_rule_catalog();
  ModelBackend& backend_;
  Selector* selector_;
  std::uint64_t seed_;
  std::optional<Plan> plan_;
  std::optional<std::vector<std::string>> rules_kept_;
  std::size_t seen_steps_ = 0;
  bool announced_done_ = false;
  int filter_calls_ = 0;
  std::vector<DynamicFilterOutput> outputs_;
};

/// Replays fixed turns; once exhausted it answers with a Final_Answer.
class ScriptedPolicy : public AgentPolicy {
 public:
  explicit ScriptedPolicy(std::vector<std::string> raw_turns);
  explicit ScriptedPolicy(const std::vector<AgentTurn>& turns);
  std::string act(const AgentView& view) override;

 private:
  std::vector<std::string> turns_;
  std::size_t next_ = 0;
};

/// The task's reference chain rendered as turns.
std::vector<std::string> reference_turns(const TaskSpec& task);

// ---------------------------------------------------------------------------
// Simulated customers
// ---------------------------------------------------------------------------

/// Rule-driven customer. Raises demands in order, answers picture, usage and
/// offer questions from the profile, and acknowledges once every demand has
/// been raised and the assistant asks whether anything else is needed. An
/// offer takes precedence over "anything else", which takes precedence over
/// the remaining questions. Asked for a picture, the customer re-sends the
/// marker of its utterance, or "[Image 1]" when the picture was not attached
/// up front.
///
/// Offers are recognised by "would you accept". A Calm customer accepts only
/// the desired remedy; an Impatient one rejects the first offer and accepts
/// the next.
class ScriptedUser : public UserPolicy {
 public:
  explicit ScriptedUser(UserProfile profile);
  std::string opening() override;
  std::string reply(const std::string& assistant_message) override;

  int demands_raised() const { return static_cast<int>(next_demand_); }
  int offers_seen() const { return offers_seen_; }

  static constexpr const char* kAcknowledge = "No, that's all. Thank you!";
  static constexpr const char* kAccept = "Yes, I accept.";
  static constexpr const char* kReject = "No, that does not solve my problem.";
  static constexpr const char* kRejectImpatient = "No! This is unacceptable, I want this fixed properly.";
  static constexpr const char* kShippedBack = "I have shipped the item back.";
  static constexpr const char* kNoPictures = "Sorry, I don't have any pictures.";

 private:
  const Demand* current() const;

  UserProfile profile_;
  std::size_t next_demand_ = 0;
  int offers_seen_ = 0;
};

/// Simulates the customer with a model; falls back to the scripted customer
/// for the rest of the episode on the first backend failure.
class BackendUser : public UserPolicy {
 public:
  BackendUser(UserProfile profile, ModelBackend& backend, std::uint64_t seed = 0);
  std::string opening() override;
  std::string reply(const std::string& assistant_message) override;
  bool fell_back() const { return fell_back_; }

 private:
  UserProfile profile_;
  ModelBackend& backend_;
  std::uint64_t seed_;
  ScriptedUser fallback_;
  std::vector<ChatMessage> history_;
  bool fell_back_ = false;
};

}  // namespace shopbench
