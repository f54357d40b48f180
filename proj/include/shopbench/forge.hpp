#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shopbench/episode.hpp"
#include "shopbench/rule_catalog.hpp"
#include "shopbench/task.hpp"

namespace shopbench {

/// A profile that does not fit its world, or a scenario no reference chain
/// can be built for.
class ForgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Worlds
// ---------------------------------------------------------------------------

struct WorldConfig {
  int merchants = 4;
  int products_per_merchant = 4;
  int users = 8;
  int orders = 32;
  int max_coupons_per_user = 4;
  /// Share of products that carry a live-stream clip.
  double video_share = 0.5;
};

/// Named sizes: "empty" (no orders), "small", "default", "large".
WorldConfig world_config_preset(std::string_view name);

/// Seeded world: merchants with 1-3 brands, 12-72 promised shipping hours and
/// a 3-15% compensation share; fresh and non-fresh products; customers at
/// levels 1-4; orders in every lifecycle stage; coupons at levels 1-3. The
/// result satisfies validate_world, and equal seeds give equal worlds.
WorldData generate_world(std::uint64_t seed, const WorldConfig& config = {});

// ---------------------------------------------------------------------------
// Derivation
// ---------------------------------------------------------------------------

/// Maps the demands of a profile, read against the world, to a question type.
/// Throws ForgeError when a demand names records that do not exist, belong to
/// another customer or do not fit the demand (an address change without an
/// order, a complaint about an order that never shipped).
QuestionType derive_question_type(const UserProfile& profile, const WorldData& world);

struct Derivation {
  std::vector<std::string> key_answers;
  WorldData ground_truth;
  std::string reference_plan;
  std::vector<ActionStep> action_chain;
  /// The reference chain ends with switch_to_human.
  bool escalation = false;
};

/// Builds the reference chain by playing the oracle assistant against the
/// scripted customer on a copy of `world`, then reads the key answers, the
/// final state and the plan off that run. Throws ForgeError when a reference
/// call fails or the customer does not respond as the profile implies.
Derivation derive_key_answers_and_ground_truth(const UserProfile& profile, const QuestionType& theta,
                                               const WorldData& world, const std::vector<std::string>& media = {});

/// Rule ids the filter keeps for a family, in catalog order.
std::vector<std::string> rules_scope_for(Family family, const RuleSet& catalog = builtin_rule_catalog(),
                                         const CategoryMap& map = default_category_map());

/// Derives every field of a task from its profile, media and initial world.
TaskSpec build_task(std::string task_id, UserProfile profile, std::vector<std::string> media, WorldData world);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct GateVerdict {
  std::string gate;
  bool mandatory = true;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<GateVerdict> gates;
  bool pass = false;
};

/// Optional reviewer: returns a rejection reason, or nothing to approve.
using ReviewHook = std::function<std::optional<std::string>(const TaskSpec&)>;

/// Gates, in order:
///   profile         question type, persona and scope agree with the world
///   key-answers     replaying the reference chain conveys every key answer
///   database-match  replaying the reference chain reaches the ground truth
///   review          the hook approves (run only when a hook is given, and
///                   then mandatory)
ValidationReport validate_task(const TaskSpec& task, const ReviewHook& review = {});

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct GenConfig {
  std::uint64_t seed = 42;
  int count = 200;
  WorldConfig world;
  /// Family quotas: each family gets its share of `count` slots (largest
  /// remainder) and pre-sales takes the rest.
  double logistics_share = 0.4;
  double after_sales_share = 0.35;
  /// Share of evidence-based complaints whose picture supports the claim.
  double evidence_support_share = 0.7;
  /// Share of pre-sales tasks built around a live-stream clip; the others
  /// come with a product photo.
  double presales_video_share = 0.3;
  /// Share of after-sales requests made for personal reasons; the others
  /// are complaints backed by a picture.
  double personal_reason_share = 0.3;
  /// Share of complaints raised without attaching the picture up front.
  double late_picture_share = 0.2;
  /// Share of those late complaints where the customer has no picture at all.
  double late_without_picture_share = 0.25;
  int max_attempts = 50;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 0;
};

struct GenReport {
  WorldData world;
  std::vector<TaskSpec> tasks;
  int rejected = 0;
  /// Rejection reason -> count.
  std::map<std::string, int> rejections;
  /// Set when the world admits no tasks at all (for instance, no orders).
  std::string empty_reason;
};

/// Generates, validates and keeps `count` tasks over one seeded world. Task i
/// is derived from its own random stream, so the output does not depend on
/// the thread count.
GenReport generate_tasks(const GenConfig& config);

struct ModalityStats {
  int tasks = 0;
  int with_image = 0;
  int with_video = 0;
};
ModalityStats modality_stats(const std::vector<TaskSpec>& tasks);

// ---------------------------------------------------------------------------
// Fine-tuning export
// ---------------------------------------------------------------------------

struct TrainingSegment {
  std::string task_id;
  int step = 0;
  /// Question plus the first `step` turns with their observations.
  std::string instruction;
  /// The next turn: thought and action in the tag protocol.
  std::string output;
};

/// The history before step `steps` rendered in the tag protocol.
std::string render_history(const std::string& question, const Trajectory& trajectory, std::size_t steps);

/// One segment per trajectory step.
std::vector<TrainingSegment> export_training_segments(const std::vector<EpisodeOutcome>& outcomes);

json to_json(const TrainingSegment& s);
void write_training_segments(const std::string& path, const std::vector<TrainingSegment>& segments);

}  // namespace shopbench
