#include "shopbench/agent.hpp"
#include "shopbench/digest.hpp"
#include "shopbench/eval.hpp"
#include "shopbench/forge.hpp"

namespace shopbench {

namespace {

std::optional<std::string> profile_problem(const TaskSpec& t) {
  QuestionType q;
  try {
    q = derive_question_type(t.profile, t.initial_world);
  } catch (const ForgeError& e) {
    return std::string(e.what());
  }
  if (!(q == t.question_type)) return "question type does not follow from the profile";
  if (t.family != q.family) return "family does not match the question type";
  const auto& p = t.profile.persona;
  const auto& u = t.initial_world.users.at(p.user_id);
  if (u.name != p.name || u.level != p.level || u.default_address != p.address)
    return "persona disagrees with customer record " + u.user_id;
  if (t.key_answers.empty()) return "no key answers";
  if (t.action_chain.empty()) return "empty reference chain";
  if (t.rules_scope != rules_scope_for(t.family)) return "rules scope is not the filter mapping of the family";
  for (const auto& d : t.profile.demands)
    for (const auto& m : find_media_markers(d.utterance))
      if (!resolve_marker(m, t.media, t.initial_world)) return "utterance names media the task does not carry";
  return std::nullopt;
}

}  // namespace

ValidationReport validate_task(const TaskSpec& task, const ReviewHook& review) {
  ValidationReport report;
  GateVerdict profile{"profile", true, false, ""};
  if (auto problem = profile_problem(task))
    profile.detail = *problem;
  else
    profile.passed = true;
  report.gates.push_back(profile);

  GateVerdict ka{"key-answers", true, false, ""};
  GateVerdict db{"database-match", true, false, ""};
  if (!profile.passed) {
    ka.detail = db.detail = "skipped: profile gate failed";
  } else {
    ScriptedPolicy agent(reference_turns(task));
    ScriptedUser user(task.profile);
    EpisodeOptions options;
    options.limits.max_turns = std::max<int>(options.limits.max_turns, static_cast<int>(task.action_chain.size()) + 2);
    options.limits.max_tool_calls = std::max<int>(options.limits.max_tool_calls, static_cast<int>(task.action_chain.size()));
    const EpisodeOutcome outcome = run_episode(task, agent, user, options);
    FallbackJudge judge;
    const ScoreRecord score = evaluate(task, outcome, judge);

    ka.passed = score.ka;
    for (const auto& k : score.missing_keys) ka.detail += (ka.detail.empty() ? "missing: " : "; ") + k;

    std::string problem;
    const Termination expected = task.escalation ? Termination::Escalated : Termination::Completed;
    if (outcome.termination != expected)
      problem = "replay ended with " + std::string(to_string(outcome.termination)) + ", expected " +
                std::string(to_string(expected));
    for (std::size_t i = 0; problem.empty() && i < task.action_chain.size(); ++i) {
      if (i >= outcome.trajectory.size())
        problem = "replay stopped after " + std::to_string(outcome.trajectory.size()) + " steps";
      else if (digest(outcome.trajectory[i].observation) != task.action_chain[i].observation_digest)
        problem = "observation of step " + std::to_string(i + 1) + " differs from the reference";
    }
    if (problem.empty() && !score.db) {
      problem = "final state differs from the ground truth at";
      for (const auto& d : score.diffs) problem += " " + d.path;
    }
    db.passed = problem.empty();
    db.detail = problem;
  }
  report.gates.push_back(ka);
  report.gates.push_back(db);

  if (review) {
    GateVerdict hook{"review", true, false, ""};
    auto verdict = review(task);
    hook.passed = !verdict;
    hook.detail = verdict.value_or("");
    report.gates.push_back(hook);
  }

  report.pass = true;
  for (const auto& g : report.gates)
    if (g.mandatory && !g.passed) report.pass = false;
  return report;
}

}  // namespace shopbench
