#include <regex>
#include <sstream>

#include "shopbench/agent.hpp"

namespace shopbench {

namespace {

const char* kSystemPreamble =
    "You are a customer service assistant for an e-commerce platform. Serve the customer by calling tools and "
    "following the rules below. Speak to the customer only through the talk_to_user tool. Finish with "
    "end_conversation once the customer has nothing else to ask, or with switch_to_human when the rules require a "
    "human agent.\n";

const char* kPlannerPreamble =
    "You are planning how a customer service assistant for an e-commerce platform will resolve the customer's "
    "question. Break the work into ordered sub-tasks. Reply with <Plan>[{\"description\": \"...\", \"tools\": "
    "[\"tool_name\", ...]}, ...]</Plan>, where tools lists the tools whose successful call completes the "
    "sub-task.\n";

const char* kAllDone = "<Thought>All planned sub-tasks are complete.</Thought><Final_Answer>All planned sub-tasks are complete.</Final_Answer>";

const char* kScriptExhausted = "<Thought>No scripted steps remain.</Thought><Final_Answer>I have no further steps.</Final_Answer>";

std::string render_files(const std::vector<AssetRef>& files) {
  std::string out;
  int images = 0, videos = 0;
  for (const auto& f : files) {
    const bool image = f.modality == Modality::Image;
    out += "[" + std::string(image ? "Image " : "Video ") + std::to_string(image ? ++images : ++videos) + "] " +
           f.asset_id + ": " + f.description + "\n";
    if (f.transcript) out += "  transcript: " + *f.transcript + "\n";
  }
  return out;
}

std::string render_rules(const RuleSet& rules) {
  std::string out;
  for (const auto& r : rules) out += "[" + r.rule_id + "] (" + r.category + ") " + r.text + "\n";
  return out;
}

std::string render_plan(const Plan& plan) {
  std::string out;
  const SubTask* current = plan.next_undone();
  for (std::size_t i = 0; i < plan.subtasks.size(); ++i) {
    const auto& s = plan.subtasks[i];
    out += std::to_string(i + 1) + ". [" + (s.done ? "x" : " ") + "] " + s.description;
    if (!s.tools.empty()) {
      out += " (tools:";
      for (std::size_t k = 0; k < s.tools.size(); ++k) out += (k ? ", " : " ") + s.tools[k];
      out += ")";
    }
    if (&s == current) out += "  <- current";
    out += "\n";
  }
  if (!current) out += "All sub-tasks are done; finish the conversation.\n";
  return out;
}

std::string context_header(const AgentContext& ctx, const char* preamble) {
  std::string sys = preamble;
  sys += "\n# Output format\n";
  sys += kFormatHint;
  sys += "\n\n# Rules\n" + render_rules(ctx.rules);
  sys += "\n# Tools\n" + ctx.tools.dump(2) + "\n";
  if (!ctx.files.empty()) sys += "\n# Files\n" + render_files(ctx.files);
  return sys;
}

// Sends the request, retrying once with an error hint when the output does
// not parse. Returns the raw completion.
std::string complete_turn(ModelBackend& backend, ChatRequest req) {
  for (int attempt = 0;; ++attempt) {
    std::string completion;
    try {
      completion = backend.complete(req);
    } catch (const BackendError& e) {
      throw PolicyFailure(std::string("backend unavailable: ") + e.what());
    }
    try {
      parse_agent_output(completion);
      return completion;
    } catch (const ProtocolError& e) {
      if (attempt == 1) throw PolicyFailure(std::string("backend output unparseable after retry: ") + e.what());
      req.messages.push_back({"assistant", completion});
      req.messages.push_back(
          {"user", tag("Observation", std::string("ERROR: protocol violation: ") + e.what() + ". " + kFormatHint)});
    }
  }
}

RuleSet keep_rules(const RuleSet& catalog, const std::optional<std::vector<std::string>>& kept) {
  if (!kept) return catalog;
  const std::set<std::string> ids(kept->begin(), kept->end());
  RuleSet out;
  for (const auto& r : catalog)
    if (ids.count(r.rule_id)) out.push_back(r);
  return out;
}

}  // namespace

// --- plans --------------------------------------------------------------------

const SubTask* Plan::next_undone() const {
  for (const auto& s : subtasks)
    if (!s.done) return &s;
  return nullptr;
}

json to_json(const Plan& p) {
  json out = json::array();
  for (const auto& s : p.subtasks) out.push_back({{"description", s.description}, {"tools", s.tools}, {"done", s.done}});
  return out;
}

std::optional<Plan> parse_plan(std::string_view completion) {
  const std::string text(completion);
  const auto open = text.find("<Plan>");
  const auto close = text.find("</Plan>");
  if (open != std::string::npos && close != std::string::npos && close > open) {
    try {
      const json arr = json::parse(text.substr(open + 6, close - open - 6));
      Plan plan;
      for (const auto& e : arr) {
        SubTask s;
        s.description = e.at("description").get<std::string>();
        if (e.contains("tools")) s.tools = e.at("tools").get<std::vector<std::string>>();
        plan.subtasks.push_back(std::move(s));
      }
      if (!plan.subtasks.empty()) return plan;
    } catch (const json::exception&) {
    }
  }

  static const std::regex line_re(R"(^\s*\d+[.)]\s+(.+?)\s*$)");
  static const std::regex tools_re(R"(\(tools:\s*([^)]*)\)\s*$)");
  Plan plan;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    SubTask s;
    std::string desc = m[1];
    std::smatch tm;
    if (std::regex_search(desc, tm, tools_re)) {
      std::istringstream names(tm[1].str());
      std::string name;
      while (std::getline(names, name, ',')) {
        const auto b = name.find_first_not_of(' ');
        const auto e = name.find_last_not_of(' ');
        if (b != std::string::npos) s.tools.push_back(name.substr(b, e - b + 1));
      }
      desc = desc.substr(0, tm.position(0));
      while (!desc.empty() && desc.back() == ' ') desc.pop_back();
    }
    s.description = desc;
    plan.subtasks.push_back(std::move(s));
  }
  if (plan.subtasks.empty()) return std::nullopt;
  return plan;
}

// --- prompts ------------------------------------------------------------------

ChatRequest render_react_prompt(const AgentContext& ctx) {
  ChatRequest req;
  req.system = context_header(ctx, kSystemPreamble);
  if (ctx.plan) req.system += "\n# Plan\n" + render_plan(*ctx.plan);
  req.messages.push_back({"user", tag("Question", ctx.question)});
  for (const auto& step : ctx.trajectory) {
    req.messages.push_back({"assistant", step.action});
    req.messages.push_back({"user", tag("Observation", step.observation)});
  }
  return req;
}

// --- ReAct --------------------------------------------------------------------

ReActPolicy::ReActPolicy(ModelBackend& backend, Selector* selector, std::uint64_t seed)
    : backend_(backend), selector_(selector), seed_(seed) {}

AgentContext ReActPolicy::context(const AgentView& view) const {
  AgentContext ctx;
  ctx.files = view.files;
  ctx.question = view.question;
  ctx.query = view.transcript;
  ctx.rules = keep_rules(catalog_, rules_kept_);
  ctx.tools = tool_catalog_json();
  for (std::size_t i = 0; i < view.trajectory.size(); ++i)
    if (!hidden_steps_.count(i)) ctx.trajectory.push_back(view.trajectory[i]);
  return ctx;
}

std::string ReActPolicy::act(const AgentView& view) {
  ChatRequest req = render_react_prompt(context(view));
  req.seed = seed_;
  return complete_turn(backend_, std::move(req));
}

void ReActPolicy::on_user_utterance(const AgentView& view) {
  if (!selector_) return;
  ++filter_calls_;
  DynamicFilterOutput out = dynamic_filter({view.transcript, catalog_, view.trajectory, nullptr}, *selector_);
  rules_kept_ = out.rules_kept;
  hidden_steps_.clear();
  std::size_t k = 0;
  for (std::size_t i = 0; i < view.trajectory.size(); ++i) {
    if (k < out.trajectory_kept.size() && out.trajectory_kept[k] == i)
      ++k;
    else
      hidden_steps_.insert(i);
  }
  outputs_.push_back(std::move(out));
}

// --- Plan&Solve ---------------------------------------------------------------

PlanAndSolvePolicy::PlanAndSolvePolicy(ModelBackend& backend, Selector* selector, std::uint64_t seed)
    : backend_(backend), selector_(selector), seed_(seed) {}

AgentContext PlanAndSolvePolicy::context(const AgentView& view) const {
  AgentContext ctx;
  ctx.files = view.files;
  ctx.question = view.question;
  ctx.query = view.transcript;
  ctx.rules = keep_rules(catalog_, rules_kept_);
  ctx.tools = tool_catalog_json();
  ctx.trajectory = view.trajectory;
  ctx.plan = plan_;
  return ctx;
}

void PlanAndSolvePolicy::update_progress(const AgentView& view) {
  for (; seen_steps_ < view.trajectory.size(); ++seen_steps_) {
    const auto& step = view.trajectory[seen_steps_];
    if (!plan_ || step.kind != StepKind::ToolCall || !step.call) continue;
    if (step.observation.rfind("ERROR", 0) == 0) continue;
    auto it = std::find_if(plan_->subtasks.begin(), plan_->subtasks.end(), [](const SubTask& s) { return !s.done; });
    if (it == plan_->subtasks.end()) continue;
    if (it->tools.empty() || std::find(it->tools.begin(), it->tools.end(), step.call->tool) != it->tools.end())
      it->done = true;
  }
}

std::string PlanAndSolvePolicy::act(const AgentView& view) {
  if (!plan_) {
    AgentContext ctx = context(view);
    ChatRequest req;
    req.system = context_header(ctx, kPlannerPreamble);
    req.seed = seed_;
    req.messages.push_back({"user", tag("Question", ctx.question)});
    std::optional<Plan> plan;
    for (int attempt = 0; attempt < 2 && !plan; ++attempt) {
      std::string completion;
      try {
        completion = backend_.complete(req);
      } catch (const BackendError& e) {
        throw PolicyFailure(std::string("backend unavailable: ") + e.what());
      }
      plan = parse_plan(completion);
      if (!plan) {
        req.messages.push_back({"assistant", completion});
        req.messages.push_back({"user", "The plan could not be read. Reply with <Plan>[{\"description\": \"...\", "
                                        "\"tools\": [...]}]</Plan>."});
      }
    }
    plan_ = plan ? std::move(*plan) : Plan{{SubTask{"Resolve the customer's request", {}, false}}};
    seen_steps_ = view.trajectory.size();
  }
  update_progress(view);
  if (plan_->complete() && !announced_done_) {
    announced_done_ = true;
    return kAllDone;
  }
  ChatRequest req = render_react_prompt(context(view));
  req.seed = seed_;
  return complete_turn(backend_, std::move(req));
}

void PlanAndSolvePolicy::on_user_utterance(const AgentView& view) {
  update_progress(view);
  if (!selector_) return;
  ++filter_calls_;
  const Plan* current = plan_ ? &*plan_ : nullptr;
  DynamicFilterOutput out = dynamic_filter({view.transcript, catalog_, view.trajectory, current}, *selector_);
  rules_kept_ = out.rules_kept;
  if (out.revised_plan) {
    if (!(plan_ && *plan_ == *out.revised_plan)) announced_done_ = false;
    plan_ = out.revised_plan;
  }
  outputs_.push_back(std::move(out));
}

// --- scripted -----------------------------------------------------------------

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> raw_turns) : turns_(std::move(raw_turns)) {}

ScriptedPolicy::ScriptedPolicy(const std::vector<AgentTurn>& turns) {
  for (const auto& t : turns) turns_.push_back(render_agent_turn(t));
}

std::string ScriptedPolicy::act(const AgentView&) {
  if (next_ < turns_.size()) return turns_[next_++];
  return kScriptExhausted;
}

std::vector<std::string> reference_turns(const TaskSpec& task) {
  std::vector<std::string> out;
  for (const auto& step : task.action_chain) out.push_back(render_agent_turn({step.thought, step.call}));
  return out;
}

}  // namespace shopbench
