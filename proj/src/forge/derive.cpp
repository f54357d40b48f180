#include <algorithm>
#include <set>

#include "shopbench/agent.hpp"
#include "shopbench/digest.hpp"
#include "shopbench/forge.hpp"

namespace shopbench {

namespace {

constexpr const char* kAnythingElse = "Is there anything else I can help you with?";
constexpr const char* kEscalationFact = "transfer you to a human agent";

Family family_of(DemandKind k) {
  switch (k) {
    case DemandKind::AfterSales: return Family::AfterSales;
    case DemandKind::CouponQuery:
    case DemandKind::RecommendationQuery:
    case DemandKind::LivestreamQuery: return Family::PreSales;
    default: return Family::Logistics;
  }
}

LogisticsIntent intent_of(DemandKind k) {
  switch (k) {
    case DemandKind::AddressChange: return LogisticsIntent::AddressChange;
    case DemandKind::BrandRequest: return LogisticsIntent::BrandRequest;
    case DemandKind::CostQuery:
    case DemandKind::ReturnCostQuery: return LogisticsIntent::ShippingCostQuery;
    case DemandKind::SignedNotReceived: return LogisticsIntent::SignedNotReceived;
    default: return LogisticsIntent::ArrivalQuery;
  }
}

[[noreturn]] void bad(const Demand& d, const std::string& msg) {
  throw ForgeError(std::string(to_string(d.kind)) + " demand: " + msg);
}

template <typename R>
const R& need(const std::map<std::string, R>& m, const std::optional<std::string>& id, const Demand& d,
              const char* what) {
  if (!id) bad(d, std::string("needs ") + what);
  auto it = m.find(*id);
  if (it == m.end()) bad(d, std::string("unknown ") + what + " '" + *id + "'");
  return it->second;
}

// The last sentence of a live-stream transcript carries the product fact.
std::string clip_fact(const std::string& transcript) {
  std::string t = transcript;
  while (!t.empty() && (t.back() == '.' || t.back() == ' ')) t.pop_back();
  const auto cut = t.rfind(". ");
  return cut == std::string::npos ? t : t.substr(cut + 2);
}

}  // namespace

QuestionType derive_question_type(const UserProfile& profile, const WorldData& world) {
  if (profile.demands.empty()) throw ForgeError("profile has no demands");
  const auto user_it = world.users.find(profile.persona.user_id);
  if (user_it == world.users.end()) throw ForgeError("unknown customer '" + profile.persona.user_id + "'");

  QuestionType q;
  q.family = family_of(profile.demands.front().kind);
  for (const auto& d : profile.demands) {
    if (family_of(d.kind) != q.family) throw ForgeError("demands of one profile must share a family");
    if (d.utterance.empty()) bad(d, "empty utterance");

    const OrderRecord* order = nullptr;
    const LogisticsRecord* shipment = nullptr;
    if (d.order_id) {
      order = &need(world.orders, d.order_id, d, "order");
      if (order->user_id != profile.persona.user_id) bad(d, "order '" + *d.order_id + "' belongs to another customer");
      shipment = world.logistics_for_order(order->order_id);
      if (shipment && d.logistics_id != shipment->logistics_id)
        bad(d, "order '" + *d.order_id + "' has shipped; the demand must carry logistics id '" +
                   shipment->logistics_id + "'");
      if (!shipment && d.logistics_id) bad(d, "order '" + *d.order_id + "' has not shipped");
    } else if (d.logistics_id) {
      bad(d, "a logistics id needs its order id");
    }

    switch (d.kind) {
      case DemandKind::AddressChange:
        if (!order) bad(d, "an address change needs an order");
        if (!d.address || d.address->empty()) bad(d, "needs the new address");
        break;
      case DemandKind::ArrivalQuery:
        if (!order) need(world.merchants, d.shop_id, d, "shop");
        break;
      case DemandKind::CostQuery: {
        const auto& item = need(world.products, d.item_id, d, "item");
        if (!d.quantity || *d.quantity < 1) bad(d, "needs a positive quantity");
        if (!d.brand) bad(d, "needs a brand");
        const auto& shop = world.merchants.at(item.shop_id);
        if (std::find(shop.brands.begin(), shop.brands.end(), *d.brand) == shop.brands.end())
          bad(d, "shop '" + shop.shop_id + "' does not ship with '" + *d.brand + "'");
        break;
      }
      case DemandKind::ReturnCostQuery:
        if (!order) bad(d, "needs an order");
        break;
      case DemandKind::BrandRequest:
        if (!order) bad(d, "needs an order");
        if (!d.brand || !world.brand_tariffs.count(*d.brand)) bad(d, "needs a known brand");
        break;
      case DemandKind::SignedNotReceived:
        if (!shipment || shipment->state != LogisticsState::Delivered) bad(d, "needs a delivered order");
        break;
      case DemandKind::AfterSales: {
        if (profile.demands.size() != 1) bad(d, "an after-sales profile carries exactly one demand");
        if (!order) bad(d, "needs an order");
        if (!d.reason || !d.solution) bad(d, "needs a reason and a desired solution");
        const bool personal = *d.reason == AfterSalesReason::PersonalReason;
        if (!personal && !(shipment && shipment->state == LogisticsState::Delivered))
          bad(d, "a complaint needs a delivered order");
        if (order->status != OrderStatus::Paid && order->status != OrderStatus::Completed)
          bad(d, "order '" + order->order_id + "' is already in status '" + std::string(to_string(order->status)) +
                     "'");
        AfterSalesType t;
        t.reason = *d.reason;
        t.solution = *d.solution;
        t.requested_amount = d.requested_amount;
        t.mood = profile.persona.mood;
        if (d.evidence_asset) {
          const auto& asset = need(world.assets, d.evidence_asset, d, "evidence asset");
          auto ev = asset.evidence.find(std::string(claim_kind(*d.reason)));
          t.image_verification = !personal && ev != asset.evidence.end() && ev->second;
        }
        q.after_sales = t;
        break;
      }
      case DemandKind::CouponQuery:
        need(world.products, d.item_id, d, "item");
        break;
      case DemandKind::RecommendationQuery: {
        if (!d.category || !d.budget) bad(d, "needs a category and a budget");
        const bool any = std::any_of(world.products.begin(), world.products.end(),
                                     [&](const auto& p) { return p.second.category == *d.category; });
        if (!any) bad(d, "no product in category '" + *d.category + "'");
        break;
      }
      case DemandKind::LivestreamQuery: {
        const auto& item = need(world.products, d.item_id, d, "item");
        const bool clip = std::any_of(item.asset_refs.begin(), item.asset_refs.end(), [&](const std::string& a) {
          return world.assets.at(a).modality == Modality::Video;
        });
        if (!clip) bad(d, "item '" + item.item_id + "' has no live-stream clip");
        break;
      }
    }
    if (q.family == Family::Logistics) q.logistics_intents.push_back(intent_of(d.kind));
  }
  return q;
}

namespace {

// Plays the oracle assistant against the scripted customer on a private
// world copy and records every step.
template <typename T>
const T* opt_ptr(const std::optional<T>& v) {
  return v ? &*v : nullptr;
}

class ChainBuilder {
 public:
  ChainBuilder(const UserProfile& profile, const QuestionType& theta, const WorldData& world,
               const std::vector<std::string>& media)
      : profile_(profile), theta_(theta), state_(world), user_(profile) {
    ctx_.talk_to_user = [this](const std::string& m) { return user_.reply(m); };
    for (const auto& d : profile.demands)
      for (const auto& m : find_media_markers(d.utterance))
        if (!resolve_marker(m, media, world)) throw ForgeError("utterance names media the task does not carry");
    opening_ = user_.opening();
  }

  Derivation run() {
    for (std::size_t i = 0; i < profile_.demands.size() && !out_.escalation; ++i) {
      const auto& d = profile_.demands[i];
      switch (d.kind) {
        case DemandKind::ArrivalQuery: arrival(d); break;
        case DemandKind::AddressChange: address_change(d); break;
        case DemandKind::BrandRequest: brand_request(d); break;
        case DemandKind::CostQuery: cost_query(d); break;
        case DemandKind::ReturnCostQuery: return_cost_query(d); break;
        case DemandKind::SignedNotReceived: signed_not_received(d); break;
        case DemandKind::CouponQuery: coupon_query(d); break;
        case DemandKind::RecommendationQuery: recommendation(d); break;
        case DemandKind::LivestreamQuery: livestream(d); break;
        case DemandKind::AfterSales: after_sales(d); break;
      }
      if (out_.escalation) break;
      const std::string expected =
          i + 1 < profile_.demands.size() ? profile_.demands[i + 1].utterance : ScriptedUser::kAcknowledge;
      if (last_reply_ != expected)
        throw ForgeError("customer answered the closing question of demand " + std::to_string(i + 1) + " with '" +
                         last_reply_ + "'");
    }
    if (!out_.escalation) call("Every request is handled and the customer has confirmed; end the conversation.",
                               "end_conversation", json::object());
    if (out_.key_answers.empty()) throw ForgeError("the reference chain states no key answer");
    out_.ground_truth = state_.data();
    for (std::size_t i = 0; i < out_.action_chain.size(); ++i)
      out_.reference_plan += std::to_string(i + 1) + ". " + out_.action_chain[i].thought + " (tools: " +
                             out_.action_chain[i].call.tool + ")\n";
    return std::move(out_);
  }

 private:
  // --- primitives -----------------------------------------------------------

  json call(const std::string& thought, const std::string& tool, json args) {
    ToolCall c{tool, std::move(args)};
    ToolResult r = dispatch(c, state_, ctx_);
    if (r.kind == ToolResult::Kind::Error)
      throw ForgeError("reference call " + to_json(c).dump() + " failed: " + r.text);
    const std::string obs = render_observation(r);
    out_.action_chain.push_back({thought, c, digest(obs)});
    if (r.kind == ToolResult::Kind::UserReply) last_reply_ = r.text;
    return r.payload;
  }

  // Reads a record once per task.
  json read(const std::string& tool, const std::string& key, const std::string& id) {
    const std::string memo = tool + "/" + id;
    if (auto it = reads_.find(memo); it != reads_.end()) return it->second;
    std::string what = tool.substr(4, tool.size() - 4 - 7);  // get_<what>_detail
    std::replace(what.begin(), what.end(), '_', ' ');
    json v = call("Look up " + what + " " + id + ".", tool, {{key, id}});
    reads_[memo] = v;
    return v;
  }

  void fact(const std::string& f) {
    if (std::find(out_.key_answers.begin(), out_.key_answers.end(), f) == out_.key_answers.end())
      out_.key_answers.push_back(f);
  }

  std::string say(const std::string& thought, const std::string& content, const std::vector<std::string>& facts = {}) {
    for (const auto& f : facts) {
      if (content.find(f) == std::string::npos) throw ForgeError("message does not state its fact '" + f + "'");
      fact(f);
    }
    call(thought, "talk_to_user", {{"content", content}});
    return last_reply_;
  }

  void close(const std::string& summary, const std::vector<std::string>& facts = {}) {
    say("Give the customer the result and ask whether anything else is needed.", summary + " " + kAnythingElse, facts);
  }

  void escalate(const std::string& reason, const std::string& preface = "I'm sorry that we could not settle this.") {
    say("The tools cannot settle this; tell the customer a person will take over.",
        preface + " I will " + std::string(kEscalationFact) + " who can help you further.", {kEscalationFact});
    call("Hand the conversation to a person.", "switch_to_human", {{"reason", reason}});
    out_.escalation = true;
  }

  const WorldData& world() const { return state_.data(); }
  // Records are returned by value: every write replaces the current world.
  OrderRecord order(const Demand& d) { return world().orders.at(*d.order_id); }
  std::optional<LogisticsRecord> shipment(const Demand& d) {
    if (!d.logistics_id) return std::nullopt;
    return world().logistics.at(*d.logistics_id);
  }
  ProductRecord product_of(const OrderRecord& o) { return world().products.at(o.item_id); }

  void read_order(const Demand& d) {
    read("get_order_detail", "order_id", *d.order_id);
    if (d.logistics_id) read("get_logistics_detail", "logistics_id", *d.logistics_id);
  }
  std::string read_shop_of(const OrderRecord& o) {
    return read("get_item_detail", "item_id", o.item_id).at("shop_id").get<std::string>();
  }

  // --- logistics -------------------------------------------------------------

  void arrival(const Demand& d) {
    json args = {{"mode", "arrival"}};
    std::string subject;
    std::optional<OrderRecord> o;
    std::optional<LogisticsRecord> l;
    std::optional<std::string> brand;
    std::string shop_id;
    if (d.order_id) {
      read_order(d);
      o = order(d);
      l = shipment(d);
      shop_id = read_shop_of(*o);
      args["order_id"] = o->order_id;
      if (l) args["logistics_id"] = l->logistics_id;
      if (!l)
        if (auto it = chosen_brand_.find(o->order_id); it != chosen_brand_.end()) brand = it->second;
      subject = "Your order " + o->order_id;
    } else {
      shop_id = *d.shop_id;
      read("get_shop_detail", "shop_id", shop_id);
      subject = "An order placed now";
    }
    args["shop_id"] = shop_id;
    if (brand) args["brand"] = *brand;
    const json r = call("Estimate the arrival time.", "calculate_shipping_time", args);
    const Timestamp expected = estimate_arrival_time(opt_ptr(o), opt_ptr(l), world().merchants.at(shop_id), world().brand_tariffs,
                                                     brand, kSystemNow);
    const std::string when = format_time(expected);
    if (r.at("formatted") != when) throw ForgeError("arrival estimate disagrees with the rule oracle");
    close(subject + " is expected to arrive at " + when + ".", {when});
  }

  void address_change(const Demand& d) {
    read_order(d);
    const OrderRecord o = order(d);
    const auto l = shipment(d);
    bool return_eligible = false;
    if (l && l->state == LogisticsState::Delivered) {
      read_shop_of(o);
      const ProductRecord p = product_of(o);
      return_eligible = p.is_support_7d_back && !p.is_fresh_perishable && l->delivered_time &&
                        kSystemNow.minutes - l->delivered_time->minutes <= kReturnWindowMinutes;
    }
    AddressChangePlan plan;
    try {
      plan = plan_address_change(o, opt_ptr(l), *d.address, return_eligible);
    } catch (const OracleError& e) {
      escalate(e.what(), "The parcel of order " + o.order_id + " has already been redirected once.");
      return;
    }
    using K = AddressChangePlan::Kind;
    if (plan.kind == K::RequireReturnFlow)
      throw ForgeError("an address change on a delivered, returnable order has no reference chain");
    if (plan.kind == K::ReferToLogisticsCompany) {
      const std::string f = "please contact the logistics company";
      close("Order " + o.order_id + " has already been delivered, so its address can no longer be changed; " + f + ".",
            {f});
      return;
    }
    for (const auto& w : plan.writes) {
      switch (w.target) {
        case WriteTarget::OrderReceiveAddress:
          call("Update the order's delivery address.", "modify_order_address",
               {{"order_id", w.record_id}, {"address", w.value}});
          break;
        case WriteTarget::LogisticsReceiveAddress:
          call("Redirect the shipment to the new address.", "modify_logistics_address",
               {{"logistics_id", w.record_id}, {"address", w.value}});
          break;
        case WriteTarget::LogisticsState:
          call("Intercept the shipment.", "modify_logistics_state", {{"logistics_id", w.record_id}, {"state", w.value}});
          break;
        default:
          throw ForgeError("unexpected write in an address change");
      }
    }
    const std::string f = "delivery address has been changed to " + *d.address;
    close("The " + f + "." +
              (plan.kind == K::Interception ? " The parcel has been intercepted and redirected at no extra cost." : ""),
          {f});
  }

  void brand_request(const Demand& d) {
    read_order(d);
    const OrderRecord o = order(d);
    const std::string shop_id = read_shop_of(o);
    read("get_shop_detail", "shop_id", shop_id);
    const auto decision = brand_request_decision(world().merchants.at(shop_id), opt_ptr(shipment(d)), *d.brand);
    switch (decision) {
      case BrandDecision::RecordInRemark: {
        call("Note the brand preference on the order.", "remark",
             {{"order_id", o.order_id}, {"content", "Customer requests delivery by " + *d.brand}});
        chosen_brand_[o.order_id] = *d.brand;
        const std::string f = "order " + o.order_id + " will be shipped with " + *d.brand;
        close("I have noted your request: " + f + ".", {f});
        return;
      }
      case BrandDecision::DeclineAlreadyShipped: {
        const std::string f = "has already been shipped";
        close("Sorry, order " + o.order_id + " " + f + ", so its logistics brand can no longer be chosen.", {f});
        return;
      }
      case BrandDecision::DeclineNotSupported: {
        const std::string f = "does not support choosing a logistics brand";
        close("Sorry, this shop " + f + ".", {f});
        return;
      }
      case BrandDecision::DeclineNotOffered: {
        const std::string f = "does not ship with " + *d.brand;
        close("Sorry, this shop " + f + ".", {f});
        return;
      }
    }
  }

  void cost_query(const Demand& d) {
    const json item = read("get_item_detail", "item_id", *d.item_id);
    const json r = call("Compute the shipping cost.", "calculate_shipping_cost",
                        {{"mode", "shipping"}, {"item_id", *d.item_id}, {"quantity", *d.quantity}, {"brand", *d.brand}});
    const auto& p = world().products.at(*d.item_id);
    const Money expected = compute_shipping_cost(world().brand_tariffs.at(*d.brand), *d.quantity, p.unit_weight_g);
    if (r.at("cost") != expected.to_string()) throw ForgeError("shipping cost disagrees with the rule oracle");
    const std::string f = "shipping costs " + expected.to_string() + " RMB";
    close("For " + std::to_string(*d.quantity) + " x " + p.name + " with " + *d.brand + ", " + f + ".", {f});
  }

  void return_cost_query(const Demand& d) {
    read("get_order_detail", "order_id", *d.order_id);
    json args = {{"mode", "return"}, {"order_id", *d.order_id}};
    if (d.logistics_id) args["logistics_id"] = *d.logistics_id;
    const json r = call("Compute the return shipping cost.", "calculate_shipping_cost", args);
    const OrderRecord o = order(d);
    const ProductRecord p = product_of(o);
    const auto quote =
        return_shipping_quote(o, opt_ptr(shipment(d)), world().merchants.at(p.shop_id), p, world().brand_tariffs);
    if (r.at("cost") != quote.cost.to_string()) throw ForgeError("return cost disagrees with the rule oracle");
    const std::string f = "return shipping costs " + quote.cost.to_string() + " RMB";
    close("For order " + o.order_id + ", " + f + " with " + quote.brand + ".", {f});
  }

  void signed_not_received(const Demand& d) {
    read_order(d);
    const std::string f1 = "check with your family or friends";
    const std::string f2 = "contact the logistics company";
    close("Our records show that order " + *d.order_id + " was signed for. Please " + f1 + ", or " + f2 + ".",
          {f1, f2});
  }

  // --- pre-sales ---------------------------------------------------------------

  void coupon_query(const Demand& d) {
    read("get_item_detail", "item_id", *d.item_id);
    read("get_user_coupon_detail", "user_id", profile_.persona.user_id);
    const auto& p = world().products.at(*d.item_id);
    std::vector<CouponRecord> held;
    for (const auto& [id, c] : world().coupons)
      if (c.user_id == profile_.persona.user_id) held.push_back(c);
    const auto choice = min_payable(p.price, held, p);
    if (choice.coupon_ids.empty()) {
      const std::string f = "none of your coupons applies";
      close("Sorry, " + f + " to the " + p.name + "; its price is " + p.price.to_string() + " RMB.",
            {f, p.price.to_string() + " RMB"});
      return;
    }
    std::string ids;
    for (const auto& id : choice.coupon_ids) ids += (ids.empty() ? "" : " and ") + id;
    const std::string f = "lowest price is " + choice.payable.to_string() + " RMB";
    close("With coupon " + ids + ", the " + f + " for the " + p.name + ".", {f});
  }

  void recommendation(const Demand& d) {
    const json list = call("List the products in the requested category.", "get_product_detail",
                           {{"category", *d.category}});
    std::vector<const ProductRecord*> fits, above;
    for (const auto& [id, p] : world().products) {
      if (p.category != *d.category) continue;
      (p.price <= *d.budget ? fits : above).push_back(&p);
    }
    if (fits.size() > 1) throw ForgeError("more than one product fits the budget");
    if (fits.size() == 1) {
      const auto& p = *fits.front();
      close("I recommend the " + p.name + " (item " + p.item_id + ") at " + p.price.to_string() + " RMB.",
            {p.name, p.price.to_string() + " RMB"});
      return;
    }
    const auto* closest = *std::min_element(above.begin(), above.end(), [](const auto* a, const auto* b) {
      return a->price != b->price ? a->price < b->price : a->item_id < b->item_id;
    });
    const std::string f = "no " + *d.category + " product is within your budget";
    close("Sorry, " + f + " of " + d.budget->to_string() + " RMB. The closest option is the " + closest->name +
              " at " + closest->price.to_string() + " RMB.",
          {f, closest->name});
  }

  void livestream(const Demand& d) {
    const json r = call("Check the product's live-stream clips.", "get_video_detail", {{"item_id", *d.item_id}});
    const std::string f = clip_fact(r.at("clips").at(0).at("transcript").get<std::string>());
    close("In the live stream the host said: " + f + ".", {f});
  }

  // --- after-sales -------------------------------------------------------------

  void after_sales(const Demand& d) {
    read_order(d);
    const OrderRecord o = order(d);
    read_shop_of(o);
    const ProductRecord p = product_of(o);
    const auto shipped = shipment(d);
    const LogisticsRecord* l = shipped ? &*shipped : nullptr;
    const auto& theta = *theta_.after_sales;

    bool evidence_ok = false;
    if (theta.reason != AfterSalesReason::PersonalReason) {
      bool attached = !find_media_markers(d.utterance).empty();
      if (!attached) {
        const std::string reply =
            say("Ask the customer for a picture of the problem.", "I'm sorry to hear that. Could you please send a "
                                                                  "picture showing the problem?");
        attached = !find_media_markers(reply).empty();
      }
      evidence_ok = attached && theta.image_verification;
    }

    const AfterSalesCase c{p, o, l, world().merchants.at(p.shop_id), world().users.at(o.user_id),
                           world().brand_tariffs, d.used, kSystemNow};
    const auto ladder = resolve_after_sales(theta, c, evidence_ok);
    const bool delivered = l && l->state == LogisticsState::Delivered;
    bool asked_used = false;
    auto ask_used = [&] {
      if (asked_used || !delivered) return;
      asked_used = true;
      say("Check whether the item has been used before deciding on a return.", "Has the item been used?");
    };

    auto from_return_path = [](const Resolution& r) {
      return r.kind == Resolution::Kind::ReturnRefund ||
             (r.kind == Resolution::Kind::Decline && r.reason.rfind("process a return", 0) == 0);
    };
    if (theta.reason != AfterSalesReason::PersonalReason && !evidence_ok && from_return_path(ladder.front()))
      say("The evidence does not confirm the complaint; explain what remains possible.",
          "I'm sorry, but the evidence does not confirm the problem, so we cannot offer compensation. We can still "
          "handle this as a regular return.");

    for (std::size_t i = 0; i < ladder.size(); ++i) {
      const auto& r = ladder[i];
      const bool first = i == 0;
      switch (r.kind) {
        case Resolution::Kind::Reship:
          for (const auto& remark : r.required_remarks)
            call("Note the reshipment on the order.", "remark", {{"order_id", o.order_id}, {"content", remark}});
          close("We have confirmed the problem: " + r.required_key_facts.front() + ".", r.required_key_facts);
          return;
        case Resolution::Kind::RefundOnly:
          call("Issue a refund without return.", "modify_order_state",
               {{"order_id", o.order_id}, {"state", std::string(to_string(OrderStatus::RefundOnly))}});
          close("We have confirmed the problem: " + r.required_key_facts.front() + ".", r.required_key_facts);
          return;
        case Resolution::Kind::Decline: {
          if (from_return_path(r)) ask_used();
          const std::string text = "I'm sorry, we are " + r.required_key_facts.front() + ".";
          if (i + 1 < ladder.size()) {
            say("Explain why this remedy is not possible.", text, r.required_key_facts);
            continue;
          }
          close(text, r.required_key_facts);
          return;
        }
        case Resolution::Kind::RedEnvelope: {
          const std::string reply =
              say("Offer the largest red envelope allowed.",
                  "We are sorry for the trouble. We can offer you a " + r.required_key_facts.front() +
                      " as compensation. Would you accept it?",
                  r.required_key_facts);
          if (reply != ScriptedUser::kAccept) continue;
          for (const auto& remark : r.required_remarks)
            call("Note the compensation on the order.", "remark", {{"order_id", o.order_id}, {"content", remark}});
          close("The " + r.required_key_facts.front() + " has been issued to your account.");
          return;
        }
        case Resolution::Kind::ReturnRefund: {
          if (r.target_status != OrderStatus::Cancelled) {
            ask_used();
            if (!first) {
              const std::string reply = say("Offer a return and refund.", "We can offer a return and refund for order " +
                                                                              o.order_id + ". Would you accept?");
              if (reply != ScriptedUser::kAccept) continue;
            }
          }
          run_return(r, o, l);
          return;
        }
        case Resolution::Kind::Escalate:
          escalate(r.reason);
          return;
      }
    }
    throw ForgeError("the after-sales ladder ended without a resolution");
  }

  void run_return(const Resolution& r, const OrderRecord& o, const LogisticsRecord* l) {
    if (r.target_status == OrderStatus::Cancelled) {
      call("Cancel the unshipped order.", "modify_order_state",
           {{"order_id", o.order_id}, {"state", std::string(to_string(OrderStatus::Cancelled))}});
      close("The " + r.required_key_facts.front() + " and the payment will be refunded.", r.required_key_facts);
      return;
    }
    json args = {{"mode", "return"}, {"order_id", o.order_id}};
    if (l) args["logistics_id"] = l->logistics_id;
    call("Price the return shipment.", "calculate_shipping_cost", args);
    read("get_shop_detail", "shop_id", product_of(o).shop_id);
    const std::string note = r.advance.fen == 0 ? "You do not need to pay anything for the return shipping."
                                                : "Shipping insurance covers up to 9 RMB of the return shipping.";
    const std::string reply =
        say("Give the return address and the advance shipping amount.",
            "Please send the item to our " + r.required_key_facts[0] + ". The " + r.required_key_facts[1] + ". " +
                note + " Let me know once you have sent it.",
            r.required_key_facts);
    if (reply != ScriptedUser::kShippedBack) throw ForgeError("customer did not confirm the return parcel");
    call(r.expedited ? "Expedited return: refund right away." : "Standard return: mark the order as returning.",
         "modify_order_state", {{"order_id", o.order_id}, {"state", std::string(to_string(*r.target_status))}});
    close(r.expedited ? "Your refund for order " + o.order_id + " has been issued."
                      : "Your return for order " + o.order_id + " is registered; the refund follows once it arrives.");
  }

  const UserProfile& profile_;
  const QuestionType& theta_;
  WorldState state_;
  ToolContext ctx_;
  ScriptedUser user_;
  std::string opening_;
  std::string last_reply_;
  std::map<std::string, json> reads_;
  std::map<std::string, std::string> chosen_brand_;
  Derivation out_;
};

}  // namespace

Derivation derive_key_answers_and_ground_truth(const UserProfile& profile, const QuestionType& theta,
                                               const WorldData& world, const std::vector<std::string>& media) {
  if (theta.family == Family::AfterSales && !theta.after_sales)
    throw ForgeError("after-sales question type without its quadruple");
  try {
    return ChainBuilder(profile, theta, world, media).run();
  } catch (const OracleError& e) {
    throw ForgeError(std::string("rule oracle: ") + e.what());
  }
}

std::vector<std::string> rules_scope_for(Family family, const RuleSet& catalog, const CategoryMap& map) {
  std::vector<std::string> ids;
  for (const auto& r : filter_rules(catalog, {family}, map)) ids.push_back(r.rule_id);
  return ids;
}

TaskSpec build_task(std::string task_id, UserProfile profile, std::vector<std::string> media, WorldData world) {
  TaskSpec t;
  t.task_id = std::move(task_id);
  t.question_type = derive_question_type(profile, world);
  t.family = t.question_type.family;
  auto d = derive_key_answers_and_ground_truth(profile, t.question_type, world, media);
  t.profile = std::move(profile);
  t.media = std::move(media);
  t.initial_world = std::move(world);
  t.ground_truth_world = std::move(d.ground_truth);
  t.key_answers = std::move(d.key_answers);
  t.reference_plan = std::move(d.reference_plan);
  t.action_chain = std::move(d.action_chain);
  t.rules_scope = rules_scope_for(t.family);
  t.escalation = d.escalation;
  return t;
}

}  // namespace shopbench
