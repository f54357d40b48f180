#include "shopbench/task.hpp"

#include <array>
#include <fstream>
#include <regex>
#include <set>

namespace shopbench {

namespace {

constexpr std::array<std::pair<DemandKind, std::string_view>, 10> kDemandKinds{{
    {DemandKind::AddressChange, "address-change"},
    {DemandKind::ArrivalQuery, "arrival-query"},
    {DemandKind::CostQuery, "cost-query"},
    {DemandKind::ReturnCostQuery, "return-cost-query"},
    {DemandKind::BrandRequest, "brand-request"},
    {DemandKind::SignedNotReceived, "signed-not-received"},
    {DemandKind::AfterSales, "after-sales"},
    {DemandKind::CouponQuery, "coupon-query"},
    {DemandKind::RecommendationQuery, "recommendation-query"},
    {DemandKind::LivestreamQuery, "livestream-query"},
}};

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

std::optional<std::string> opt_str(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) throw std::invalid_argument(std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

const json& need(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("missing '") + key + "'");
  return j.at(key);
}

std::string need_str(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_string()) throw std::invalid_argument(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::string> str_list(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_array()) throw std::invalid_argument(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw std::invalid_argument(std::string("'") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::string_view to_string(DemandKind k) {
  for (auto [v, n] : kDemandKinds)
    if (v == k) return n;
  return "?";
}

std::optional<DemandKind> parse_demand_kind(std::string_view s) {
  for (auto [v, n] : kDemandKinds)
    if (n == s) return v;
  return std::nullopt;
}

json to_json(const Demand& d) {
  json j = {{"kind", to_string(d.kind)}, {"utterance", d.utterance}};
  put(j, "order_id", d.order_id);
  put(j, "logistics_id", d.logistics_id);
  put(j, "item_id", d.item_id);
  put(j, "shop_id", d.shop_id);
  put(j, "address", d.address);
  put(j, "brand", d.brand);
  put(j, "quantity", d.quantity);
  put(j, "category", d.category);
  if (d.budget) j["budget"] = d.budget->to_string();
  put(j, "topic", d.topic);
  if (d.reason) j["reason"] = to_string(*d.reason);
  put(j, "evidence_asset", d.evidence_asset);
  if (d.solution) j["solution"] = to_string(*d.solution);
  if (d.requested_amount) j["requested_amount"] = d.requested_amount->to_string();
  if (d.kind == DemandKind::AfterSales) j["used"] = d.used;
  return j;
}

Demand demand_from_json(const json& j) {
  Demand d;
  auto kind = parse_demand_kind(need_str(j, "kind"));
  if (!kind) throw std::invalid_argument("unknown demand kind '" + need_str(j, "kind") + "'");
  d.kind = *kind;
  d.utterance = need_str(j, "utterance");
  d.order_id = opt_str(j, "order_id");
  d.logistics_id = opt_str(j, "logistics_id");
  d.item_id = opt_str(j, "item_id");
  d.shop_id = opt_str(j, "shop_id");
  d.address = opt_str(j, "address");
  d.brand = opt_str(j, "brand");
  if (j.contains("quantity")) d.quantity = j.at("quantity").get<int>();
  d.category = opt_str(j, "category");
  if (auto b = opt_str(j, "budget")) d.budget = Money::parse(*b);
  d.topic = opt_str(j, "topic");
  if (auto r = opt_str(j, "reason")) {
    d.reason = parse_reason(*r);
    if (!d.reason) throw std::invalid_argument("unknown after-sales reason '" + *r + "'");
  }
  d.evidence_asset = opt_str(j, "evidence_asset");
  if (auto s = opt_str(j, "solution")) {
    d.solution = parse_solution(*s);
    if (!d.solution) throw std::invalid_argument("unknown solution '" + *s + "'");
  }
  if (auto a = opt_str(j, "requested_amount")) d.requested_amount = Money::parse(*a);
  if (j.contains("used")) d.used = j.at("used").get<bool>();
  return d;
}

json to_json(const UserProfile& p) {
  json demands = json::array();
  for (const auto& d : p.demands) demands.push_back(to_json(d));
  return {{"persona",
           {{"user_id", p.persona.user_id},
            {"name", p.persona.name},
            {"level", p.persona.level},
            {"address", p.persona.address},
            {"mood", to_string(p.persona.mood)}}},
          {"demands", demands}};
}

UserProfile user_profile_from_json(const json& j) {
  UserProfile p;
  const json& persona = need(j, "persona");
  p.persona.user_id = need_str(persona, "user_id");
  p.persona.name = need_str(persona, "name");
  p.persona.level = need(persona, "level").get<int>();
  p.persona.address = need_str(persona, "address");
  auto mood = parse_mood(need_str(persona, "mood"));
  if (!mood) throw std::invalid_argument("unknown mood");
  p.persona.mood = *mood;
  for (const auto& d : need(j, "demands")) p.demands.push_back(demand_from_json(d));
  if (p.demands.empty()) throw std::invalid_argument("profile needs at least one demand");
  return p;
}

json to_json(const TaskSpec& t) {
  json chain = json::array();
  for (const auto& s : t.action_chain)
    chain.push_back({{"thought", s.thought}, {"call", to_json(s.call)}, {"observation_digest", s.observation_digest}});
  return {{"task_id", t.task_id},
          {"family", to_string(t.family)},
          {"profile", to_json(t.profile)},
          {"question_type", to_json(t.question_type)},
          {"media", t.media},
          {"initial_world", world_to_json(t.initial_world)},
          {"ground_truth_world", world_to_json(t.ground_truth_world)},
          {"key_answers", t.key_answers},
          {"reference_plan", t.reference_plan},
          {"action_chain", chain},
          {"rules_scope", t.rules_scope},
          {"escalation", t.escalation}};
}

TaskSpec task_from_json(const json& j) {
  static const std::set<std::string> kKeys = {"task_id",       "family",         "profile",      "question_type",
                                              "media",         "initial_world",  "ground_truth_world",
                                              "key_answers",   "reference_plan", "action_chain", "rules_scope",
                                              "escalation"};
  if (!j.is_object()) throw std::invalid_argument("task must be an object");
  for (const auto& [k, v] : j.items())
    if (!kKeys.count(k)) throw std::invalid_argument("unexpected task key '" + k + "'");
  TaskSpec t;
  t.task_id = need_str(j, "task_id");
  try {
    auto family = parse_family(need_str(j, "family"));
    if (!family) throw std::invalid_argument("unknown family");
    t.family = *family;
    t.profile = user_profile_from_json(need(j, "profile"));
    t.question_type = question_type_from_json(need(j, "question_type"));
    t.media = str_list(j, "media");
    t.initial_world = world_from_json(need(j, "initial_world"));
    validate_world(t.initial_world);
    t.ground_truth_world = world_from_json(need(j, "ground_truth_world"));
    validate_world(t.ground_truth_world);
    t.key_answers = str_list(j, "key_answers");
    t.reference_plan = need_str(j, "reference_plan");
    for (const auto& s : need(j, "action_chain"))
      t.action_chain.push_back(
          {need_str(s, "thought"), tool_call_from_json(need(s, "call")), need_str(s, "observation_digest")});
    t.rules_scope = str_list(j, "rules_scope");
    const json& esc = need(j, "escalation");
    if (!esc.is_boolean()) throw std::invalid_argument("'escalation' must be a boolean");
    t.escalation = esc.get<bool>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("task " + t.task_id + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("task " + t.task_id + ": " + e.what());
  }
  for (const auto& id : t.media)
    if (!t.initial_world.assets.count(id)) throw std::invalid_argument("task " + t.task_id + ": unknown media '" + id + "'");
  return t;
}

std::vector<TaskSpec> read_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open task file '" + path + "'");
  std::vector<TaskSpec> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(task_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_tasks(const std::string& path, const std::vector<TaskSpec>& tasks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write task file '" + path + "'");
  for (const auto& t : tasks) out << to_json(t).dump() << '\n';
}

std::vector<MediaMarker> find_media_markers(std::string_view text) {
  static const std::regex re(R"(\[(Image|Video) ([1-9][0-9]*)\])");
  std::vector<MediaMarker> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back({(*it)[1] == "Image" ? Modality::Image : Modality::Video, std::stoi((*it)[2])});
  return out;
}

std::optional<std::string> resolve_marker(const MediaMarker& m, const std::vector<std::string>& media,
                                          const WorldData& world) {
  int seen = 0;
  for (const auto& id : media) {
    auto it = world.assets.find(id);
    if (it == world.assets.end() || it->second.modality != m.modality) continue;
    if (++seen == m.index) return id;
  }
  return std::nullopt;
}

}  // namespace shopbench
