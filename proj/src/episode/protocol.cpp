#include "shopbench/protocol.hpp"

namespace shopbench {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Consumes `<name>body</name>` from the front of `s` and returns the body.
std::string_view take_block(std::string_view& s, std::string_view name) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  if (s.substr(0, open.size()) != open) throw ProtocolError("expected <" + std::string(name) + ">");
  const auto end = s.find(close, open.size());
  if (end == std::string_view::npos) throw ProtocolError("unclosed <" + std::string(name) + "> tag");
  std::string_view body = s.substr(open.size(), end - open.size());
  if (body.find(open) != std::string_view::npos) throw ProtocolError("nested <" + std::string(name) + "> tag");
  s = trim(s.substr(end + close.size()));
  return body;
}

}  // namespace

AgentTurn parse_agent_output(std::string_view text) {
  std::string_view rest = trim(text);
  if (rest.empty()) throw ProtocolError("empty output");
  const bool has_action = rest.find("<Action_input>") != std::string_view::npos;
  const bool has_final = rest.find("<Final_Answer>") != std::string_view::npos;
  if (has_action && has_final) throw ProtocolError("both <Action_input> and <Final_Answer> present");
  if (!has_action && !has_final) throw ProtocolError("expected <Action_input> or <Final_Answer> after <Thought>");

  AgentTurn turn;
  turn.thought = std::string(trim(take_block(rest, "Thought")));
  if (has_action) {
    const std::string_view body = take_block(rest, "Action_input");
    json parsed;
    try {
      parsed = json::parse(body);
    } catch (const json::exception&) {
      throw ProtocolError("Action_input body is not valid JSON");
    }
    try {
      turn.payload = tool_call_from_json(parsed);
    } catch (const std::invalid_argument& e) {
      throw ProtocolError(std::string("Action_input body: ") + e.what());
    }
  } else {
    turn.payload = FinalAnswer{std::string(trim(take_block(rest, "Final_Answer")))};
  }
  if (!rest.empty()) throw ProtocolError("unexpected text after the closing tag");
  return turn;
}

std::string tag(std::string_view name, std::string_view body) {
  std::string out;
  out.reserve(body.size() + 2 * name.size() + 5);
  out.append("<").append(name).append(">").append(body).append("</").append(name).append(">");
  return out;
}

std::string render_agent_turn(const AgentTurn& turn) {
  std::string out = tag("Thought", turn.thought);
  if (turn.is_call())
    out += tag("Action_input", to_json(turn.call()).dump());
  else
    out += tag("Final_Answer", turn.final_answer().text);
  return out;
}

}  // namespace shopbench
