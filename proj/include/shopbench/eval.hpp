#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "shopbench/agent.hpp"

namespace shopbench {

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string name() const = 0;
  /// Does one dialogue message convey the key answer? Throws when unavailable.
  virtual bool contains_key_answer(const std::string& message, const std::string& key_answer) = 0;
  /// Do two remark texts say the same thing? `brands` lists the delivery brand
  /// names of the world, which must agree exactly.
  virtual bool remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) = 0;
};

/// Lowercased tokens: runs of letters/digits, with '.' or ':' kept between digits
/// ("5.50", "13:00"), every other character a separator.
std::vector<std::string> judge_tokens(std::string_view text);

/// Deterministic judge.
///
/// Key answers: every non-stopword token of the key must occur as a token of
/// the message. Numbers and times therefore match only when their text is
/// identical ("3.0" does not match "3.5" or "3").
///
/// Remarks: both texts must name the same set of brands and the same set of
/// digit-bearing tokens (amounts, quantities such as "x2", ids), and the
/// Jaccard overlap of their remaining non-stopword tokens must be at least
/// one half.
class FallbackJudge : public Judge {
 public:
  std::string name() const override { return "fallback"; }
  bool contains_key_answer(const std::string& message, const std::string& key_answer) override;
  bool remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) override;
};

/// Judge backed by a chat model answering "1" or "0".
class ModelJudge : public Judge {
 public:
  explicit ModelJudge(ModelBackend& backend) : backend_(backend) {}
  std::string name() const override { return "model"; }
  bool contains_key_answer(const std::string& message, const std::string& key_answer) override;
  bool remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) override;

 private:
  bool ask(const std::string& system, const std::string& user);
  ModelBackend& backend_;
};

/// Memoizes another judge by input digest, optionally persisted as JSON lines
/// so that re-runs reuse earlier decisions.
class CachedJudge : public Judge {
 public:
  explicit CachedJudge(Judge& inner, std::string path = {});
  std::string name() const override { return inner_.name() + "+cache"; }
  bool contains_key_answer(const std::string& message, const std::string& key_answer) override;
  bool remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) override;
  std::size_t size() const;
  /// Writes the cache file (no-op without a path).
  void save() const;

 private:
  template <typename F>
  bool lookup(const std::string& key, F&& compute);

  Judge& inner_;
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, bool> cache_;
};

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

struct KeyAnswerResult {
  bool ok = true;
  std::vector<std::string> missing;
  bool judge_fallback = false;
};

/// 1 iff every key answer is conveyed by some assistant message.
KeyAnswerResult key_answer_score(const Transcript& transcript, const std::vector<std::string>& key_answers, Judge& judge);

struct DatabaseResult {
  bool ok = true;
  /// Differences left after remark fields were resolved by the judge.
  std::vector<FieldDiff> diffs;
  bool judge_fallback = false;
};

DatabaseResult database_score(const WorldData& final_state, const WorldData& ground_truth, Judge& judge);

struct ScoreRecord {
  std::string task_id;
  Family family = Family::Logistics;
  bool ka = false;
  bool db = false;
  bool score = false;
  std::vector<FieldDiff> diffs;
  std::vector<std::string> missing_keys;
  Termination termination = Termination::ProtocolFailure;
  int tool_call_count = 0;
  int turns = 0;
  std::string final_state_digest;
  bool judge_fallback = false;
};

ScoreRecord evaluate(const TaskSpec& task, const EpisodeOutcome& outcome, Judge& judge);

json to_json(const ScoreRecord& r);
ScoreRecord score_record_from_json(const json& j);
void write_score_records(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_score_records(const std::string& path);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct Bucket {
  int n = 0;
  int ka = 0;
  int db = 0;
  int score = 0;
};

struct Report {
  std::map<Family, Bucket> families;
  Bucket total;
  double mean_tool_calls = 0;
  int max_tool_calls = 0;
  std::map<Termination, int> terminations;
  int judge_fallbacks = 0;
};

/// Throws std::invalid_argument on an empty record list.
Report aggregate(const std::vector<ScoreRecord>& records);

/// Percentage with one decimal, rounded half up: 1 of 3 -> "33.3".
std::string percent(int count, int n);

json to_json(const Report& r);
/// Aligned table in the layout Logistics | After-sales | Pre-sales | Total,
/// with "-" for empty buckets.
std::string render_table(const Report& r, const std::string& label = "run");

// ---------------------------------------------------------------------------
// Annotation agreement
// ---------------------------------------------------------------------------

/// Fleiss' kappa over a tasks x categories count matrix (cell = number of
/// raters who put the task in the category). Every row must sum to the same
/// rater count, at least 2. When every rating falls in one category the
/// chance agreement is 1 and the result is defined as 1.
double fleiss_kappa(const std::vector<std::vector<int>>& counts);

/// Same, from per-task rater labels (labels[task][rater] in [0, categories)).
double fleiss_kappa_from_labels(const std::vector<std::vector<int>>& labels, int categories);

}  // namespace shopbench
