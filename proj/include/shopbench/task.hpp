#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shopbench/rules.hpp"
#include "shopbench/tools.hpp"

namespace shopbench {

enum class DemandKind {
  AddressChange,
  ArrivalQuery,
  CostQuery,
  ReturnCostQuery,
  BrandRequest,
  SignedNotReceived,
  AfterSales,
  CouponQuery,
  RecommendationQuery,
  LivestreamQuery,
};
std::string_view to_string(DemandKind k);
std::optional<DemandKind> parse_demand_kind(std::string_view s);

/// One customer need. Only the fields relevant to `kind` are set.
struct Demand {
  DemandKind kind = DemandKind::ArrivalQuery;
  /// What the customer says to raise the demand, ids and media markers included.
  std::string utterance;
  std::optional<std::string> order_id;
  std::optional<std::string> logistics_id;
  std::optional<std::string> item_id;
  std::optional<std::string> shop_id;
  std::optional<std::string> address;
  std::optional<std::string> brand;
  std::optional<int> quantity;
  std::optional<std::string> category;
  std::optional<Money> budget;
  std::optional<std::string> topic;
  // after-sales
  std::optional<AfterSalesReason> reason;
  std::optional<std::string> evidence_asset;
  std::optional<DesiredSolution> solution;
  std::optional<Money> requested_amount;
  bool used = false;

  bool operator==(const Demand&) const = default;
};

struct Persona {
  std::string user_id;
  std::string name;
  int level = 1;
  std::string address;
  Mood mood = Mood::Calm;

  bool operator==(const Persona&) const = default;
};

struct UserProfile {
  Persona persona;
  std::vector<Demand> demands;

  bool operator==(const UserProfile&) const = default;
};

/// One reference step: the call and the digest of its rendered observation.
struct ActionStep {
  std::string thought;
  ToolCall call;
  std::string observation_digest;

  bool operator==(const ActionStep&) const = default;
};

struct TaskSpec {
  std::string task_id;
  Family family = Family::Logistics;
  UserProfile profile;
  QuestionType question_type;
  /// Assets the customer can show, in order. "[Image k]" names the k-th image
  /// in this list, "[Video k]" the k-th video.
  std::vector<std::string> media;
  WorldData initial_world;
  WorldData ground_truth_world;
  std::vector<std::string> key_answers;
  std::string reference_plan;
  std::vector<ActionStep> action_chain;
  std::vector<std::string> rules_scope;
  /// The correct outcome is a hand-off to a human agent.
  bool escalation = false;
};

json to_json(const Demand& d);
Demand demand_from_json(const json& j);
json to_json(const UserProfile& p);
UserProfile user_profile_from_json(const json& j);
json to_json(const TaskSpec& t);
/// Throws std::invalid_argument (schema) or WorldError (embedded worlds).
TaskSpec task_from_json(const json& j);

std::vector<TaskSpec> read_tasks(const std::string& path);
void write_tasks(const std::string& path, const std::vector<TaskSpec>& tasks);

/// A media marker found in text: "[Image 2]" -> {Image, 2}.
struct MediaMarker {
  Modality modality;
  int index;  // 1-based
};
std::vector<MediaMarker> find_media_markers(std::string_view text);
/// Asset id a marker names within a task's media list, if any.
std::optional<std::string> resolve_marker(const MediaMarker& m, const std::vector<std::string>& media,
                                          const WorldData& world);

}  // namespace shopbench
