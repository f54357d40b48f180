#include <algorithm>
#include <array>
#include <cctype>

#include "shopbench/agent.hpp"

namespace shopbench {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct FamilyKeywords {
  Family family;
  std::vector<std::string_view> words;
};

// Earlier entries win ties.
const std::array<FamilyKeywords, 3>& family_keywords() {
  static const std::array<FamilyKeywords, 3> kWords{{
      {Family::AfterSales,
       {"return", "refund", "broken", "damage", "missing", "wrong item", "quality", "defect", "compensat",
        "red envelope", "reship", "resend", "crack", "torn", "stain", "not working", "item back", "faulty"}},
      {Family::PreSales,
       {"coupon", "discount", "price", "recommend", "buy", "purchase", "live stream", "livestream", "host",
        "budget", "cheap", "in stock", "looking for"}},
      {Family::Logistics,
       {"address", "deliver", "arriv", "shipping", "ship ", "shipped", "logistics", "courier", "express", "brand",
        "intercept", "package", "parcel", "tracking", "signed", "received", "when will"}},
  }};
  return kWords;
}

std::vector<std::string> all_rule_ids(const RuleSet& rules) {
  std::vector<std::string> out;
  out.reserve(rules.size());
  for (const auto& r : rules) out.push_back(r.rule_id);
  return out;
}

std::vector<std::size_t> all_steps(const Trajectory& t) {
  std::vector<std::size_t> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = i;
  return out;
}

DynamicFilterOutput identity_output(const DynamicFilterInput& in) {
  DynamicFilterOutput out;
  out.rules_kept = all_rule_ids(in.catalog);
  out.trajectory_kept = all_steps(in.trajectory);
  if (in.plan) out.revised_plan = *in.plan;
  return out;
}

// Pulls the outermost {...} out of a model reply.
json extract_object(const std::string& text) {
  const auto first = text.find('{');
  const auto last = text.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first)
    throw std::runtime_error("selector reply has no JSON object");
  return json::parse(text.substr(first, last - first + 1));
}

}  // namespace

std::set<Family> detect_families(const Transcript& query) {
  std::set<Family> out;
  for (const auto& msg : query) {
    if (msg.speaker != TranscriptMessage::Speaker::User) continue;
    const std::string text = lower(msg.text) + " ";
    std::optional<Family> best;
    int best_hits = 0;
    for (const auto& fk : family_keywords()) {
      int hits = 0;
      for (auto w : fk.words)
        if (text.find(w) != std::string::npos) ++hits;
      if (hits > best_hits) {
        best_hits = hits;
        best = fk.family;
      }
    }
    if (best) out.insert(*best);
  }
  return out;
}

DynamicFilterOutput IdentitySelector::select(const DynamicFilterInput& in) { return identity_output(in); }

CategorySelector::CategorySelector(CategoryMap map) : map_(std::move(map)) {}

DynamicFilterOutput CategorySelector::select(const DynamicFilterInput& in) {
  DynamicFilterOutput out = identity_output(in);
  const auto families = detect_families(in.query);
  if (!families.empty()) out.rules_kept = all_rule_ids(filter_rules(in.catalog, families, map_));
  return out;
}

DynamicFilterOutput BackendSelector::select(const DynamicFilterInput& in) {
  json payload = {{"conversation", json::array()}, {"rules", json::array()}, {"trajectory", json::array()}};
  for (const auto& m : in.query)
    payload["conversation"].push_back(
        {{"speaker", m.speaker == TranscriptMessage::Speaker::User ? "customer" : "assistant"}, {"text", m.text}});
  for (const auto& r : in.catalog) payload["rules"].push_back({{"rule_id", r.rule_id}, {"text", r.text}});
  for (std::size_t i = 0; i < in.trajectory.size(); ++i)
    payload["trajectory"].push_back(
        {{"index", i}, {"action", in.trajectory[i].action}, {"observation", in.trajectory[i].observation}});

  ChatRequest req;
  req.system =
      "You select context for a customer-service assistant. Given the conversation, the rules and the "
      "assistant's past steps, reply with a JSON object {\"rules_kept\": [rule ids relevant to the customer's "
      "current requests], \"trajectory_kept\": [indices of steps that are still relevant and correct]}.";
  req.messages.push_back({"user", payload.dump()});
  const json reply = extract_object(backend_.complete(req));

  DynamicFilterOutput out = identity_output(in);
  out.rules_kept = reply.at("rules_kept").get<std::vector<std::string>>();
  if (reply.contains("trajectory_kept")) out.trajectory_kept = reply.at("trajectory_kept").get<std::vector<std::size_t>>();
  return out;
}

DynamicFilterOutput dynamic_filter(const DynamicFilterInput& in, Selector& selector) {
  DynamicFilterOutput raw;
  try {
    raw = selector.select(in);
  } catch (const std::exception& e) {
    DynamicFilterOutput out = identity_output(in);
    out.fell_back = true;
    out.clamp_log.push_back(std::string("selector failed, keeping full context: ") + e.what());
    return out;
  }

  DynamicFilterOutput out;
  out.clamp_log = std::move(raw.clamp_log);

  std::set<std::string> proposed;
  for (const auto& id : raw.rules_kept) {
    const bool known = std::any_of(in.catalog.begin(), in.catalog.end(), [&](const Rule& r) { return r.rule_id == id; });
    if (!known)
      out.clamp_log.push_back("dropped unknown rule id '" + id + "'");
    else if (!proposed.insert(id).second)
      out.clamp_log.push_back("dropped duplicate rule id '" + id + "'");
  }
  for (const auto& r : in.catalog)
    if (proposed.count(r.rule_id)) out.rules_kept.push_back(r.rule_id);

  std::vector<std::size_t> steps;
  for (auto i : raw.trajectory_kept) {
    if (i >= in.trajectory.size())
      out.clamp_log.push_back("dropped out-of-range step " + std::to_string(i));
    else
      steps.push_back(i);
  }
  if (!std::is_sorted(steps.begin(), steps.end()) || std::adjacent_find(steps.begin(), steps.end()) != steps.end()) {
    out.clamp_log.push_back("sorted and deduplicated trajectory indices");
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  }
  out.trajectory_kept = std::move(steps);

  if (in.plan) {
    if (!raw.revised_plan) {
      out.revised_plan = *in.plan;
    } else {
      Plan merged;
      for (const auto& s : in.plan->subtasks)
        if (s.done) merged.subtasks.push_back(s);
      for (auto s : raw.revised_plan->subtasks) {
        if (s.done) {
          const bool original = std::find(merged.subtasks.begin(), merged.subtasks.end(), s) != merged.subtasks.end();
          if (!original) out.clamp_log.push_back("dropped sub-task marked done by the revision: " + s.description);
          continue;
        }
        merged.subtasks.push_back(std::move(s));
      }
      out.revised_plan = std::move(merged);
    }
  }
  return out;
}

std::unique_ptr<Selector> make_selector(const std::string& kind, const CategoryMap& map, ModelBackend* backend) {
  if (kind == "identity") return std::make_unique<IdentitySelector>();
  if (kind == "category") return std::make_unique<CategorySelector>(map);
  if (kind == "model") {
    if (!backend) throw std::invalid_argument("the model selector needs a backend");
    return std::make_unique<BackendSelector>(*backend);
  }
  throw std::invalid_argument("unknown selector '" + kind + "' (identity, category, model)");
}

}  // namespace shopbench
