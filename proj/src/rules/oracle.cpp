#include <algorithm>
#include <array>
#include <functional>

#include "shopbench/rules.hpp"

namespace shopbench {

namespace {

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
  for (auto [k, n] : table)
    if (k == v) return n;
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s) {
  for (auto [k, n] : table)
    if (n == s) return k;
  return std::nullopt;
}

constexpr std::array<std::pair<Family, std::string_view>, 3> kFamilies{{
    {Family::Logistics, "logistics"},
    {Family::PreSales, "pre-sales"},
    {Family::AfterSales, "after-sales"},
}};
constexpr std::array<std::pair<AfterSalesReason, std::string_view>, 4> kReasons{{
    {AfterSalesReason::MissingOrWrong, "Missing/Wrong items shipped"},
    {AfterSalesReason::TransitDamage, "Item damaged during transit"},
    {AfterSalesReason::QualityIssue, "Dissatisfied with product quality"},
    {AfterSalesReason::PersonalReason, "Return due to other personal reasons"},
}};
constexpr std::array<std::pair<DesiredSolution, std::string_view>, 4> kSolutions{{
    {DesiredSolution::Reship, "Re-ship missing items"},
    {DesiredSolution::RedEnvelope, "Red envelope"},
    {DesiredSolution::RefundAndReturn, "Refund and return"},
    {DesiredSolution::RefundOnly, "Refund only"},
}};
constexpr std::array<std::pair<Mood, std::string_view>, 2> kMoods{{
    {Mood::Calm, "Calm"},
    {Mood::Impatient, "Impatient"},
}};
constexpr std::array<std::pair<LogisticsIntent, std::string_view>, 5> kIntents{{
    {LogisticsIntent::AddressChange, "address-change"},
    {LogisticsIntent::BrandRequest, "brand-request"},
    {LogisticsIntent::ArrivalQuery, "arrival-time-query"},
    {LogisticsIntent::ShippingCostQuery, "shipping-cost-query"},
    {LogisticsIntent::SignedNotReceived, "signed-not-received"},
}};

constexpr const char* kMonths[] = {"January", "February", "March",     "April",   "May",      "June",
                                   "July",    "August",   "September", "October", "November", "December"};

const BrandTariff& tariff_for(const std::map<std::string, BrandTariff>& tariffs, const std::string& brand) {
  auto it = tariffs.find(brand);
  if (it == tariffs.end()) throw OracleError("no tariff for brand '" + brand + "'");
  return it->second;
}

}  // namespace

std::string_view to_string(Family f) { return name_of(kFamilies, f); }
std::optional<Family> parse_family(std::string_view s) { return value_of(kFamilies, s); }
std::string_view to_string(AfterSalesReason r) { return name_of(kReasons, r); }
std::string_view to_string(DesiredSolution s) { return name_of(kSolutions, s); }
std::string_view to_string(Mood m) { return name_of(kMoods, m); }
std::optional<AfterSalesReason> parse_reason(std::string_view s) { return value_of(kReasons, s); }
std::optional<DesiredSolution> parse_solution(std::string_view s) { return value_of(kSolutions, s); }
std::optional<Mood> parse_mood(std::string_view s) { return value_of(kMoods, s); }
std::string_view to_string(LogisticsIntent i) { return name_of(kIntents, i); }
std::optional<LogisticsIntent> parse_logistics_intent(std::string_view s) { return value_of(kIntents, s); }

std::string_view claim_kind(AfterSalesReason r) {
  switch (r) {
    case AfterSalesReason::MissingOrWrong: return "missing_or_wrong_items";
    case AfterSalesReason::TransitDamage: return "transit_damage";
    case AfterSalesReason::QualityIssue: return "quality_defect";
    case AfterSalesReason::PersonalReason: return "personal";
  }
  return "?";
}

json to_json(const QuestionType& q) {
  json j = {{"family", to_string(q.family)}};
  if (q.after_sales) {
    const auto& a = *q.after_sales;
    j["after_sales"] = {{"reason", to_string(a.reason)},
                        {"image_verification", a.image_verification ? 1 : 0},
                        {"solution", to_string(a.solution)},
                        {"requested_amount", a.requested_amount ? json(a.requested_amount->to_string()) : json(nullptr)},
                        {"mood", to_string(a.mood)}};
  }
  if (!q.logistics_intents.empty()) {
    json intents = json::array();
    for (auto i : q.logistics_intents) intents.push_back(to_string(i));
    j["logistics_intents"] = intents;
  }
  return j;
}

QuestionType question_type_from_json(const json& j) {
  QuestionType q;
  const auto family = parse_family(j.at("family").get<std::string>());
  if (!family) throw std::invalid_argument("unknown family");
  q.family = *family;
  if (j.contains("after_sales")) {
    const json& a = j.at("after_sales");
    AfterSalesType t;
    auto reason = parse_reason(a.at("reason").get<std::string>());
    auto solution = parse_solution(a.at("solution").get<std::string>());
    auto mood = parse_mood(a.at("mood").get<std::string>());
    if (!reason || !solution || !mood) throw std::invalid_argument("malformed after-sales question type");
    t.reason = *reason;
    t.solution = *solution;
    t.mood = *mood;
    t.image_verification = a.at("image_verification").get<int>() != 0;
    if (a.contains("requested_amount") && !a.at("requested_amount").is_null())
      t.requested_amount = Money::parse(a.at("requested_amount").get<std::string>());
    q.after_sales = t;
  }
  if (j.contains("logistics_intents"))
    for (const auto& i : j.at("logistics_intents")) {
      auto intent = parse_logistics_intent(i.get<std::string>());
      if (!intent) throw std::invalid_argument("unknown logistics intent");
      q.logistics_intents.push_back(*intent);
    }
  if (q.after_sales.has_value() != (q.family == Family::AfterSales))
    throw std::invalid_argument("after_sales present iff family is after-sales");
  return q;
}

std::string_view to_string(Resolution::Kind k) {
  switch (k) {
    case Resolution::Kind::Reship: return "Reship";
    case Resolution::Kind::RedEnvelope: return "RedEnvelope";
    case Resolution::Kind::ReturnRefund: return "ReturnRefund";
    case Resolution::Kind::RefundOnly: return "RefundOnly";
    case Resolution::Kind::Decline: return "Decline";
    case Resolution::Kind::Escalate: return "Escalate";
  }
  return "?";
}

std::string_view to_string(AddressChangePlan::Kind k) {
  switch (k) {
    case AddressChangePlan::Kind::DirectOrderUpdate: return "DirectOrderUpdate";
    case AddressChangePlan::Kind::Interception: return "Interception";
    case AddressChangePlan::Kind::RequireReturnFlow: return "RequireReturnFlow";
    case AddressChangePlan::Kind::ReferToLogisticsCompany: return "ReferToLogisticsCompany";
  }
  return "?";
}

std::string_view to_string(BrandDecision d) {
  switch (d) {
    case BrandDecision::RecordInRemark: return "RecordInRemark";
    case BrandDecision::DeclineNotOffered: return "DeclineNotOffered";
    case BrandDecision::DeclineAlreadyShipped: return "DeclineAlreadyShipped";
    case BrandDecision::DeclineNotSupported: return "DeclineNotSupported";
  }
  return "?";
}

// --- shipping cost ---------------------------------------------------------

Money compute_shipping_cost(const BrandTariff& tariff, int quantity, std::int64_t unit_weight_g) {
  const std::int64_t grams = static_cast<std::int64_t>(quantity) * unit_weight_g;
  const std::int64_t kg = grams <= 0 ? 0 : (grams + 999) / 1000;
  return tariff.base_fee + tariff.per_kg_fee * kg;
}

ShippingQuote return_shipping_quote(const OrderRecord& order, const LogisticsRecord* logistics,
                                    const MerchantRecord& merchant, const ProductRecord& product,
                                    const std::map<std::string, BrandTariff>& tariffs) {
  if (logistics) {
    const auto& t = tariff_for(tariffs, logistics->brand);
    return {logistics->brand, compute_shipping_cost(t, order.quantity, product.unit_weight_g)};
  }
  if (merchant.brands.empty()) throw OracleError("merchant '" + merchant.shop_id + "' has no logistics brands");
  std::optional<ShippingQuote> best;
  for (const auto& brand : merchant.brands) {
    ShippingQuote q{brand, compute_shipping_cost(tariff_for(tariffs, brand), order.quantity, product.unit_weight_g)};
    if (!best || q.cost < best->cost || (q.cost == best->cost && q.brand < best->brand)) best = q;
  }
  return *best;
}

Money user_advance_amount(Money return_cost, bool has_insurance, bool merchant_fault,
                          bool interception_for_address_change) {
  if (merchant_fault || interception_for_address_change) return Money{};
  if (has_insurance) return std::max(Money{}, return_cost - kInsuranceCap);
  return return_cost;
}

// --- time ------------------------------------------------------------------

Timestamp estimate_shipping_time(const OrderRecord* order, const MerchantRecord& merchant, Timestamp now) {
  const Timestamp base = order ? order->payment_time : now;
  return base.plus_hours(merchant.promised_shipping_hours);
}

Timestamp estimate_arrival_time(const OrderRecord* order, const LogisticsRecord* logistics,
                                const MerchantRecord& merchant, const std::map<std::string, BrandTariff>& tariffs,
                                const std::optional<std::string>& specified_brand, Timestamp now) {
  if (logistics) return logistics->pickup_time.plus_hours(tariff_for(tariffs, logistics->brand).transit_hours);

  const Timestamp shipping = estimate_shipping_time(order, merchant, now);
  if (specified_brand && merchant.allows_brand_choice) {
    if (std::find(merchant.brands.begin(), merchant.brands.end(), *specified_brand) == merchant.brands.end())
      throw OracleError("brand '" + *specified_brand + "' is not offered by merchant '" + merchant.shop_id + "'");
    return shipping.plus_hours(tariff_for(tariffs, *specified_brand).transit_hours);
  }
  int longest = 0;
  for (const auto& brand : merchant.brands) longest = std::max(longest, tariff_for(tariffs, brand).transit_hours);
  return shipping.plus_hours(longest);
}

std::string format_time(Timestamp t) {
  char hour[8];
  std::snprintf(hour, sizeof hour, "%02d:00", t.hour());
  return std::string(hour) + " on " + kMonths[t.month() - 1] + " " + std::to_string(t.day());
}

// --- address / brand -------------------------------------------------------

AddressChangePlan plan_address_change(const OrderRecord& order, const LogisticsRecord* logistics,
                                      const std::string& new_address, bool return_eligible) {
  if (new_address.empty()) throw OracleError("new address must be non-empty");
  using K = AddressChangePlan::Kind;
  if (!logistics) return {K::DirectOrderUpdate, {{WriteTarget::OrderReceiveAddress, order.order_id, new_address}}};
  switch (logistics->state) {
    case LogisticsState::InTransit:
      return {K::Interception,
              {{WriteTarget::OrderReceiveAddress, order.order_id, new_address},
               {WriteTarget::LogisticsReceiveAddress, logistics->logistics_id, new_address},
               {WriteTarget::LogisticsState, logistics->logistics_id, std::string(to_string(LogisticsState::Intercepted))}}};
    case LogisticsState::Delivered:
      return {return_eligible ? K::RequireReturnFlow : K::ReferToLogisticsCompany, {}};
    case LogisticsState::Intercepted:
      break;
  }
  throw OracleError("shipment '" + logistics->logistics_id + "' is already intercepted; no rule covers a second change");
}

BrandDecision brand_request_decision(const MerchantRecord& merchant, const LogisticsRecord* logistics,
                                     const std::string& requested) {
  if (logistics) return BrandDecision::DeclineAlreadyShipped;
  if (!merchant.allows_brand_choice) return BrandDecision::DeclineNotSupported;
  if (std::find(merchant.brands.begin(), merchant.brands.end(), requested) == merchant.brands.end())
    return BrandDecision::DeclineNotOffered;
  return BrandDecision::RecordInRemark;
}

// --- after-sales -----------------------------------------------------------

Money max_red_envelope(Money payment, std::int64_t bp) {
  // payment_fen * bp / (100 fen * 10000 bp) whole RMB, floored
  const std::int64_t whole = payment.fen * bp / 1000000;
  return Money::from_yuan(std::max<std::int64_t>(1, whole));
}

Resolution check_return_eligibility(const ProductRecord& product, const OrderRecord& order,
                                    const LogisticsRecord* logistics, bool used, int user_level, Timestamp now) {
  switch (order.status) {
    case OrderStatus::Cancelled:
    case OrderStatus::Refunded:
    case OrderStatus::RefundOnly:
    case OrderStatus::Returning:
      throw OracleError("order '" + order.order_id + "' is already in status '" + std::string(to_string(order.status)) +
                        "'");
    default:
      break;
  }
  Resolution r{};
  if (product.is_fresh_perishable) {
    r.kind = Resolution::Kind::RefundOnly;
    r.target_status = OrderStatus::RefundOnly;
    return r;
  }
  if (!logistics) {
    r.kind = Resolution::Kind::ReturnRefund;
    r.target_status = OrderStatus::Cancelled;
    return r;
  }
  if (logistics->state != LogisticsState::Delivered) {
    r.kind = Resolution::Kind::Decline;
    r.reason = "the shipment has not been delivered yet";
    return r;
  }
  if (!logistics->delivered_time)
    throw OracleError("shipment '" + logistics->logistics_id + "' is Delivered without a delivered_time");

  std::string failing;
  if (used)
    failing = "the product has been used";
  else if (!product.is_support_7d_back)
    failing = "the product does not support 7-day no-reason returns";
  else if (now.minutes - logistics->delivered_time->minutes > kReturnWindowMinutes)
    failing = "more than 7 days have passed since receipt";
  if (!failing.empty()) {
    r.kind = Resolution::Kind::Decline;
    r.reason = failing;
    return r;
  }
  r.kind = Resolution::Kind::ReturnRefund;
  r.expedited = user_level >= kExpeditedLevel;
  r.target_status = r.expedited ? OrderStatus::Refunded : OrderStatus::Returning;
  return r;
}

namespace {

Resolution decline(std::string reason) {
  Resolution r{};
  r.kind = Resolution::Kind::Decline;
  r.reason = std::move(reason);
  r.required_key_facts = {"unable to " + r.reason};
  return r;
}

Resolution escalate(std::string reason) {
  Resolution r{};
  r.kind = Resolution::Kind::Escalate;
  r.reason = std::move(reason);
  r.required_key_facts = {"transfer you to a human agent"};
  return r;
}

// Return path shared by personal-reason and merchant-fault returns.
Resolution return_path(const AfterSalesCase& c, bool merchant_fault) {
  Resolution r = check_return_eligibility(c.product, c.order, c.logistics, c.used, c.user.level, c.now);
  if (r.kind == Resolution::Kind::Decline) {
    const std::string why = r.reason;
    r = decline("process a return because " + why);
    return r;
  }
  if (r.kind != Resolution::Kind::ReturnRefund) return r;
  if (r.target_status == OrderStatus::Cancelled) {
    r.required_key_facts = {"order " + c.order.order_id + " has been cancelled"};
    return r;
  }
  const auto quote = return_shipping_quote(c.order, c.logistics, c.merchant, c.product, c.tariffs);
  r.advance = user_advance_amount(quote.cost, c.order.has_shipping_insurance, merchant_fault, false);
  r.merchant_address = c.merchant.return_address;
  r.required_key_facts = {"return address: " + r.merchant_address,
                          "return shipping advance: " + r.advance.one_decimal() + " RMB"};
  return r;
}

}  // namespace

std::vector<Resolution> resolve_after_sales(const AfterSalesType& theta, const AfterSalesCase& c, bool evidence_ok) {
  using K = Resolution::Kind;
  const bool fresh = c.product.is_fresh_perishable;

  if (theta.reason == AfterSalesReason::PersonalReason) {
    if (fresh) return {decline("accept a personal-reason return for fresh or perishable goods")};
    return {return_path(c, false)};
  }

  if (!evidence_ok) {
    // Unverified complaint: only a return is still possible, as a personal-reason return.
    if (theta.solution == DesiredSolution::RefundAndReturn && !fresh) return {return_path(c, false)};
    return {decline("confirm the problem from the evidence provided")};
  }

  if (theta.reason == AfterSalesReason::MissingOrWrong) {
    Resolution r{};
    r.kind = K::Reship;
    r.required_remarks = {"Reship missing items: " + c.product.name + " x" + std::to_string(c.order.quantity)};
    r.required_key_facts = {"the missing items will be resent"};
    return {r};
  }

  if (fresh) {
    Resolution r{};
    r.kind = K::RefundOnly;
    r.target_status = OrderStatus::RefundOnly;
    r.required_key_facts = {"refund-only has been processed for order " + c.order.order_id};
    return {r};
  }

  Resolution envelope{};
  envelope.kind = K::RedEnvelope;
  envelope.amount = max_red_envelope(c.order.payment_amount, c.merchant.max_compensation_bp);
  envelope.required_remarks = {"Red envelope compensation of " + envelope.amount.whole_yuan() + " RMB"};
  envelope.required_key_facts = {"red envelope of " + envelope.amount.whole_yuan() + " RMB"};
  return {envelope, return_path(c, true), escalate("neither compensation nor return resolved the issue")};
}

// --- coupons ---------------------------------------------------------------

std::vector<CouponRecord> applicable_coupons(const std::vector<CouponRecord>& coupons, const ProductRecord& product) {
  std::vector<CouponRecord> out;
  for (const auto& c : coupons) {
    const bool category = std::find(c.category_list.begin(), c.category_list.end(), product.category) !=
                          c.category_list.end();
    if (category && product.price >= c.minimum_purchase) out.push_back(c);
  }
  return out;
}

CouponChoice min_payable(Money price, const std::vector<CouponRecord>& coupons, const ProductRecord& product) {
  auto usable = applicable_coupons(coupons, product);
  std::map<int, std::vector<CouponRecord>> by_level;
  for (auto& c : usable) by_level[c.level].push_back(c);
  for (auto& [lvl, list] : by_level)
    std::sort(list.begin(), list.end(), [](const CouponRecord& a, const CouponRecord& b) {
      return a.amount_off != b.amount_off ? a.amount_off > b.amount_off : a.coupon_id < b.coupon_id;
    });

  // Largest total discount takes the best coupon of every level.
  Money best_total{};
  for (const auto& [lvl, list] : by_level) best_total = best_total + list.front().amount_off;
  const Money payable = std::max(Money{}, price - best_total);

  CouponChoice choice{payable, {}};
  if (payable.fen > 0) {
    for (const auto& [lvl, list] : by_level) choice.coupon_ids.push_back(list.front().coupon_id);
    std::sort(choice.coupon_ids.begin(), choice.coupon_ids.end());
    return choice;
  }
  if (by_level.empty()) return choice;

  // Discounts cover the price: find the fewest coupons reaching it, then the
  // lexicographically smallest sorted id list.
  std::vector<const std::vector<CouponRecord>*> levels;
  for (const auto& [lvl, list] : by_level) levels.push_back(&list);
  std::optional<std::vector<std::string>> best;
  std::vector<std::string> picked;
  std::function<void(std::size_t, Money)> search = [&](std::size_t i, Money sum) {
    if (best && picked.size() > best->size()) return;
    if (i == levels.size()) {
      if (sum < price) return;
      auto ids = picked;
      std::sort(ids.begin(), ids.end());
      if (!best || ids.size() < best->size() || (ids.size() == best->size() && ids < *best)) best = ids;
      return;
    }
    search(i + 1, sum);
    for (const auto& c : *levels[i]) {
      picked.push_back(c.coupon_id);
      search(i + 1, sum + c.amount_off);
      picked.pop_back();
    }
  };
  search(0, Money{});
  choice.coupon_ids = *best;
  return choice;
}

}  // namespace shopbench
