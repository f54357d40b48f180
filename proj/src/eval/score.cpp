#include <fstream>

#include "shopbench/eval.hpp"

namespace shopbench {

namespace {

// Runs a judge call, switching to the fallback judge for good on failure.
class GuardedJudge {
 public:
  explicit GuardedJudge(Judge& judge) : judge_(&judge) {}

  template <typename F>
  bool operator()(F&& decide) {
    if (!fell_back_) {
      try {
        return decide(*judge_);
      } catch (const std::exception&) {
        fell_back_ = true;
      }
    }
    return decide(fallback_);
  }
  bool fell_back() const { return fell_back_; }

 private:
  Judge* judge_;
  FallbackJudge fallback_;
  bool fell_back_ = false;
};

json diff_to_json(const FieldDiff& d) {
  return {{"path", d.path}, {"old", d.old_value}, {"new", d.new_value},
          {"kind", d.kind == DiffKind::Semantic ? "semantic" : "exact"}};
}

FieldDiff diff_from_json(const json& j) {
  return {j.at("path").get<std::string>(), j.at("old"), j.at("new"),
          j.at("kind") == "semantic" ? DiffKind::Semantic : DiffKind::Exact};
}

}  // namespace

KeyAnswerResult key_answer_score(const Transcript& transcript, const std::vector<std::string>& key_answers,
                                 Judge& judge) {
  KeyAnswerResult out;
  GuardedJudge guarded(judge);
  for (const auto& key : key_answers) {
    bool found = false;
    for (const auto& m : transcript) {
      if (m.speaker != TranscriptMessage::Speaker::Assistant) continue;
      if (guarded([&](Judge& j) { return j.contains_key_answer(m.text, key); })) {
        found = true;
        break;
      }
    }
    if (!found) out.missing.push_back(key);
  }
  out.ok = out.missing.empty();
  out.judge_fallback = guarded.fell_back();
  return out;
}

DatabaseResult database_score(const WorldData& final_state, const WorldData& ground_truth, Judge& judge) {
  DatabaseResult out;
  GuardedJudge guarded(judge);
  std::vector<std::string> brands;
  for (const auto& [name, tariff] : ground_truth.brand_tariffs) brands.push_back(name);

  for (auto& d : diff(final_state, ground_truth)) {
    bool resolved = false;
    if (d.kind == DiffKind::Semantic && d.old_value.is_array() && d.new_value.is_array() &&
        d.old_value.size() == d.new_value.size()) {
      resolved = true;
      for (std::size_t i = 0; i < d.old_value.size() && resolved; ++i) {
        const auto a = d.old_value[i].get<std::string>();
        const auto b = d.new_value[i].get<std::string>();
        resolved = a == b || guarded([&](Judge& j) { return j.remarks_equivalent(a, b, brands); });
      }
    }
    if (!resolved) out.diffs.push_back(std::move(d));
  }
  out.ok = out.diffs.empty();
  out.judge_fallback = guarded.fell_back();
  return out;
}

ScoreRecord evaluate(const TaskSpec& task, const EpisodeOutcome& outcome, Judge& judge) {
  ScoreRecord r;
  r.task_id = task.task_id;
  r.family = task.family;
  const auto ka = key_answer_score(outcome.transcript, task.key_answers, judge);
  const auto db = database_score(outcome.final_snapshot.data(), task.ground_truth_world, judge);
  r.ka = ka.ok;
  r.db = db.ok;
  r.score = r.ka && r.db;
  r.missing_keys = ka.missing;
  r.diffs = db.diffs;
  r.termination = outcome.termination;
  r.tool_call_count = outcome.tool_call_count;
  r.turns = outcome.turns;
  r.final_state_digest = state_digest(outcome.final_snapshot.data());
  r.judge_fallback = ka.judge_fallback || db.judge_fallback;
  return r;
}

json to_json(const ScoreRecord& r) {
  json diffs = json::array();
  for (const auto& d : r.diffs) diffs.push_back(diff_to_json(d));
  return {{"task_id", r.task_id},
          {"family", to_string(r.family)},
          {"ka", r.ka ? 1 : 0},
          {"db", r.db ? 1 : 0},
          {"score", r.score ? 1 : 0},
          {"diffs", diffs},
          {"missing_keys", r.missing_keys},
          {"termination", to_string(r.termination)},
          {"tool_call_count", r.tool_call_count},
          {"turns", r.turns},
          {"final_state_digest", r.final_state_digest},
          {"judge_fallback", r.judge_fallback}};
}

ScoreRecord score_record_from_json(const json& j) {
  ScoreRecord r;
  r.task_id = j.at("task_id").get<std::string>();
  const auto family = parse_family(j.at("family").get<std::string>());
  if (!family) throw std::invalid_argument("score record: unknown family");
  r.family = *family;
  r.ka = j.at("ka").get<int>() != 0;
  r.db = j.at("db").get<int>() != 0;
  r.score = j.at("score").get<int>() != 0;
  if (r.score != (r.ka && r.db)) throw std::invalid_argument("score record " + r.task_id + ": score != ka and db");
  for (const auto& d : j.at("diffs")) r.diffs.push_back(diff_from_json(d));
  r.missing_keys = j.at("missing_keys").get<std::vector<std::string>>();
  const auto term = parse_termination(j.at("termination").get<std::string>());
  if (!term) throw std::invalid_argument("score record: unknown termination");
  r.termination = *term;
  r.tool_call_count = j.at("tool_call_count").get<int>();
  r.turns = j.at("turns").get<int>();
  r.final_state_digest = j.at("final_state_digest").get<std::string>();
  r.judge_fallback = j.at("judge_fallback").get<bool>();
  return r;
}

void write_score_records(const std::string& path, const std::vector<ScoreRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write score records '" + path + "'");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<ScoreRecord> read_score_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open score records '" + path + "'");
  std::vector<ScoreRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(score_record_from_json(json::parse(line)));
  return out;
}

}  // namespace shopbench
