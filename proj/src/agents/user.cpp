#include <cctype>

#include "shopbench/agent.hpp"

namespace shopbench {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has(const std::string& text, std::string_view word) { return text.find(word) != std::string::npos; }

std::optional<DesiredSolution> offered_solution(const std::string& m) {
  if (has(m, "red envelope")) return DesiredSolution::RedEnvelope;
  if (has(m, "refund only") || has(m, "refund-only") || has(m, "without return")) return DesiredSolution::RefundOnly;
  if (has(m, "resend") || has(m, "reship") || has(m, "send the missing") || has(m, "send you the missing"))
    return DesiredSolution::Reship;
  if (has(m, "return")) return DesiredSolution::RefundAndReturn;
  return std::nullopt;
}

std::string render_profile(const UserProfile& p) {
  std::string out = "You are role-playing a customer of an online shop talking to its customer service assistant.\n";
  out += "Name: " + p.persona.name + "\nUser id: " + p.persona.user_id + "\nMembership level: " +
         std::to_string(p.persona.level) + "\nAddress: " + p.persona.address + "\n";
  out += p.persona.mood == Mood::Impatient
             ? "Mood: impatient. Reject the first remedy you are offered, then accept the next acceptable one.\n"
             : "Mood: calm. Accept a remedy only if it is the one you want.\n";
  out += "Your requests, to be raised one at a time in this order:\n";
  for (std::size_t i = 0; i < p.demands.size(); ++i) {
    const auto& d = p.demands[i];
    out += std::to_string(i + 1) + ". " + d.utterance;
    if (d.solution) out += " (you want: " + std::string(to_string(*d.solution)) + ")";
    if (d.kind == DemandKind::AfterSales) out += d.used ? " (the item has been used)" : " (the item is unused)";
    out += "\n";
  }
  out += "Keep every reply short and in character. Raise the next request only when the assistant asks whether you "
         "need anything else. When all requests are handled and you are asked whether you need anything else, reply "
         "exactly: ";
  out += ScriptedUser::kAcknowledge;
  out += "\n";
  return out;
}

}  // namespace

ScriptedUser::ScriptedUser(UserProfile profile) : profile_(std::move(profile)) {
  if (profile_.demands.empty()) throw std::invalid_argument("a customer profile needs at least one demand");
}

const Demand* ScriptedUser::current() const {
  return next_demand_ == 0 ? nullptr : &profile_.demands[next_demand_ - 1];
}

std::string ScriptedUser::opening() {
  next_demand_ = 1;
  return profile_.demands.front().utterance;
}

std::string ScriptedUser::reply(const std::string& assistant_message) {
  const std::string m = lower(assistant_message);
  const Demand* d = current();

  if (has(m, "would you accept")) {
    const auto kind = offered_solution(m);
    const bool impatient = profile_.persona.mood == Mood::Impatient;
    const int seen = offers_seen_++;
    if (impatient) return seen == 0 ? kRejectImpatient : kAccept;
    if (!d || !d->solution || (kind && *kind == *d->solution)) return kAccept;
    return kReject;
  }
  if (has(m, "anything else")) {
    if (next_demand_ < profile_.demands.size()) return profile_.demands[next_demand_++].utterance;
    return kAcknowledge;
  }
  if (has(m, "picture") || has(m, "photo")) {
    if (d && d->evidence_asset) {
      const auto markers = find_media_markers(d->utterance);
      if (markers.empty()) return "[Image 1] Here it is.";
      const auto& mk = markers.front();
      return "[" + std::string(mk.modality == Modality::Image ? "Image " : "Video ") + std::to_string(mk.index) +
             "] Here it is again.";
    }
    return kNoPictures;
  }
  if (has(m, "been used") || has(m, "used it") || has(m, "used the")) {
    const bool used = d && d->used;
    return used ? "Yes, I have used it." : "No, it has not been used.";
  }
  if (has(m, "return address")) return kShippedBack;
  return "OK.";
}

BackendUser::BackendUser(UserProfile profile, ModelBackend& backend, std::uint64_t seed)
    : profile_(profile), backend_(backend), seed_(seed), fallback_(std::move(profile)) {}

std::string BackendUser::opening() {
  std::string first = fallback_.opening();
  history_.push_back({"assistant", first});
  return first;
}

std::string BackendUser::reply(const std::string& assistant_message) {
  // The scripted customer tracks demand progress even while the model speaks,
  // so a fallback resumes at the right demand.
  std::string scripted = fallback_.reply(assistant_message);
  history_.push_back({"user", assistant_message});
  if (!fell_back_) {
    ChatRequest req;
    req.system = render_profile(profile_);
    req.messages = history_;
    req.seed = seed_;
    try {
      std::string text = backend_.complete(req);
      if (!text.empty()) {
        history_.push_back({"assistant", text});
        return text;
      }
    } catch (const BackendError&) {
    }
    fell_back_ = true;
  }
  history_.push_back({"assistant", scripted});
  return scripted;
}

}  // namespace shopbench
