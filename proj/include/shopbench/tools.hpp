#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shopbench/world.hpp"

namespace shopbench {

enum class ToolClass { Retrieval, Calculation, Modification, Interaction };
std::string_view to_string(ToolClass c);

enum class ArgType { String, Integer };

struct ArgSpec {
  std::string name;
  ArgType type = ArgType::String;
  bool required = true;
  std::vector<std::string> allowed;  // empty: any value
  std::string description;
};

struct ToolSpec {
  std::string name;
  ToolClass tool_class;
  std::vector<ArgSpec> args;
  std::string description;
};

/// The closed registry of 18 tools.
const std::vector<ToolSpec>& tool_registry();
const ToolSpec* find_tool(std::string_view name);
/// Machine-readable catalog: [{name, class, description, arguments:[{name,type,required,allowed?}]}].
json tool_catalog_json();

struct ToolCall {
  std::string tool;
  json arguments = json::object();

  bool operator==(const ToolCall&) const = default;
};

json to_json(const ToolCall& c);
/// Accepts {"tool": name, "arguments": {...}}; throws std::invalid_argument.
ToolCall tool_call_from_json(const json& j);

/// Schema check of a call against its spec. Returns the violation, if any.
std::optional<std::string> validate_call(const ToolCall& call);

enum class Termination { Completed, Escalated, TurnLimit, ProtocolFailure };
std::string_view to_string(Termination t);
std::optional<Termination> parse_termination(std::string_view s);

struct ToolResult {
  enum class Kind { Observation, UserReply, Terminal, Error };
  Kind kind = Kind::Observation;
  json payload;      // Observation
  std::string text;  // UserReply text, or Error message
  Termination termination = Termination::Completed;  // Terminal
  std::uint64_t state_version_after = 0;
};

/// Per-session services the dispatcher needs besides the world itself.
struct ToolContext {
  Timestamp now = kSystemNow;
  /// Delivers an assistant message and returns the user's reply.
  std::function<std::string(const std::string&)> talk_to_user;
  bool terminated = false;
};

/// Executes one call. Never throws for agent mistakes: unknown tools, bad
/// arguments, missing records and illegal writes come back as Kind::Error
/// with the state untouched.
ToolResult dispatch(const ToolCall& call, WorldState& state, ToolContext& ctx);

/// Canonical text of a result, as placed inside <Observation> tags.
std::string render_observation(const ToolResult& result);

}  // namespace shopbench
