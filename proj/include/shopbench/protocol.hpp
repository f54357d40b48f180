#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "shopbench/tools.hpp"

namespace shopbench {

struct FinalAnswer {
  std::string text;
  bool operator==(const FinalAnswer&) const = default;
};

/// One parsed assistant output: a thought plus exactly one payload.
struct AgentTurn {
  std::string thought;
  std::variant<ToolCall, FinalAnswer> payload;

  bool is_call() const { return std::holds_alternative<ToolCall>(payload); }
  const ToolCall& call() const { return std::get<ToolCall>(payload); }
  const FinalAnswer& final_answer() const { return std::get<FinalAnswer>(payload); }
  bool operator==(const AgentTurn&) const = default;
};

/// The text did not follow the tagged turn grammar.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Appended to protocol-violation messages.
inline constexpr const char* kFormatHint =
    "Reply with <Thought>...</Thought> followed by either <Action_input>{\"tool\": name, \"arguments\": {...}}"
    "</Action_input> or <Final_Answer>...</Final_Answer>.";

/// Accepts `<Thought>..</Thought><Action_input>{"tool":..,"arguments":{..}}</Action_input>`
/// or `<Thought>..</Thought><Final_Answer>..</Final_Answer>`, surrounded by
/// optional whitespace. Throws ProtocolError for anything else.
AgentTurn parse_agent_output(std::string_view text);

std::string render_agent_turn(const AgentTurn& turn);

/// Wraps text in a protocol tag: tag("Observation", "x") == "<Observation>x</Observation>".
std::string tag(std::string_view name, std::string_view body);

}  // namespace shopbench
