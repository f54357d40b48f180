#include <algorithm>
#include <stdexcept>

#include "shopbench/rule_catalog.hpp"

namespace shopbench {

const std::vector<std::string>& rule_categories() {
  static const std::vector<std::string> kCategories = {
      "basic",        "shipping-cost", "insurance", "delivery",    "brand",       "time",           "address",
      "after-sales",  "reship",        "red-envelope", "return",   "refund-only", "coupon",         "recommendation",
      "live-stream",
  };
  return kCategories;
}

const RuleSet& builtin_rule_catalog() {
  static const RuleSet kRules = {
      // basic
      {"basic-01", "basic", "Answer customers courteously and patiently, in the voice of an online-store service agent."},
      {"basic-02", "basic", "The environment clock reads 2025-06-12 00:00."},
      {"basic-03", "basic", "When the available tools cannot solve a problem, hand the conversation to a person with switch_to_human instead of giving an empty reply."},
      {"basic-04", "basic", "When the customer is strongly upset, hand the conversation to a person with switch_to_human."},
      {"basic-05", "basic", "Never ask the customer for identifiers; the ids you need arrive with the query."},
      {"basic-06", "basic", "A query without an order_id means the customer has not placed an order yet."},
      {"basic-07", "basic", "A query without a logistics_id means the merchant has not shipped the order yet."},
      {"basic-08", "basic", "Special customer wishes (faster shipping, a delivery time, product-specific requests) go into the order notes."},
      {"basic-09", "basic", "Once the current request is handled, ask whether the customer needs anything else."},
      {"basic-10", "basic", "When the customer confirms everything is handled and every required tool call is done, call end_conversation."},
      // shipping cost
      {"cost-01", "shipping-cost", "Shipping cost is driven by total weight: quantity times unit weight."},
      {"cost-02", "shipping-cost", "Return shipping is priced with the brand that carried the original shipment."},
      {"cost-03", "shipping-cost", "For an order that has not shipped, price return shipping with the cheapest of the merchant's brands."},
      {"cost-04", "shipping-cost", "When asked whether shipping must be paid in advance, state the exact amount after accounting for shipping insurance."},
      {"cost-05", "shipping-cost", "Returns caused by the merchant cost the customer no return shipping, insured or not."},
      {"cost-06", "shipping-cost", "An interception made for an address change costs the customer nothing extra."},
      // insurance
      {"insurance-01", "insurance", "Shipping insurance is a merchant service that subsidizes return shipping."},
      {"insurance-02", "insurance", "The insurance subsidy is at most 9 RMB."},
      {"insurance-03", "insurance", "Any return shipping above the 9 RMB subsidy is paid by the customer."},
      {"insurance-04", "insurance", "For advance-payment questions, compute the shipping cost first and then apply the insurance."},
      // delivery
      {"delivery-01", "delivery", "If a parcel shows as delivered but the customer has not received it, suggest checking with family or friends or contacting the logistics company."},
      // brand
      {"brand-01", "brand", "A merchant that accepts a brand preference only lets the customer pick among the brands it already uses."},
      {"brand-02", "brand", "The logistics brand of an order that has shipped cannot be chosen or changed."},
      {"brand-03", "brand", "If the merchant allows brand choice and the requested brand is one it uses, write the request into the order notes."},
      {"brand-04", "brand", "If the merchant does not allow brand choice or does not use the requested brand, decline politely."},
      // time
      {"time-01", "time", "The environment clock reads 00:00 on Thursday, June 12, 2025."},
      {"time-02", "time", "Give times as \"HH:00 on Month Day\" (for example 13:00 on June 12); all time arithmetic is to the hour."},
      {"time-03", "time", "For a placed order, estimated shipping time = payment time + the merchant's promised shipping hours."},
      {"time-04", "time", "Without an order, estimated shipping time = current time + the merchant's promised shipping hours."},
      {"time-05", "time", "For a shipped order, estimated arrival = pickup time + the brand's transit time."},
      {"time-06", "time", "For an unshipped order, estimated arrival = estimated shipping time + transit time."},
      {"time-07", "time", "For an unshipped order with no successfully chosen brand (or no brand choice allowed), use the longest transit time among the merchant's brands."},
      {"time-08", "time", "If the customer successfully chose a brand, use that brand's transit time."},
      // address
      {"address-01", "address", "For an unshipped order, update receive_address on the order directly."},
      {"address-02", "address", "For a shipped order, check the logistics state (In Transit or Delivered) before changing the address."},
      {"address-03", "address", "For an In Transit shipment, intercept it with three writes: the order's receive_address, the shipment's receive_address, and the shipment state set to Intercepted."},
      {"address-04", "address", "For a Delivered shipment, discuss a return with the customer under the return rules."},
      {"address-05", "address", "For a Delivered shipment that does not qualify for return, tell the customer to contact the logistics company."},
      // after-sales
      {"aftersales-01", "after-sales", "For missing or wrong items, transit damage, or quality complaints, first ask the customer for pictures that show the problem."},
      {"aftersales-02", "after-sales", "A marker [Image x] in a customer message is the x-th image the customer has sent."},
      {"aftersales-03", "after-sales", "Returns for personal reasons (changed mind, ordered too many, picked the wrong item) need no pictures."},
      {"aftersales-04", "after-sales", "If no picture is provided or the pictures do not support the claim, comfort the customer and decline politely."},
      {"aftersales-05", "after-sales", "Once pictures confirm missing items, tell the customer the items will be sent again and note it on the order."},
      {"aftersales-06", "after-sales", "Once pictures confirm transit damage or a quality problem, first offer a small red envelope to settle."},
      {"aftersales-07", "after-sales", "The largest red envelope is the payment amount times the merchant's compensation share, floored to whole RMB and never below 1 RMB."},
      {"aftersales-08", "after-sales", "Do not reveal how the red envelope amount is computed."},
      {"aftersales-09", "after-sales", "If the red envelope is accepted, note the compensation on the order."},
      {"aftersales-10", "after-sales", "If the red envelope does not settle it, move to the return process."},
      {"aftersales-11", "after-sales", "If neither a red envelope nor a return settles it, hand over to a person."},
      // reship
      {"reship-01", "reship", "Register a reshipment only after confirming the merchant really sent missing or wrong items, and note it on the order."},
      {"reship-02", "reship", "No other situation allows a reshipment."},
      {"reship-03", "reship", "If a requested reshipment does not qualify, say so politely."},
      // red envelope
      {"envelope-01", "red-envelope", "The largest red envelope is floor(payment amount x merchant compensation share) RMB, at least 1 RMB."},
      {"envelope-02", "red-envelope", "Keep the red envelope formula to yourself."},
      {"envelope-03", "red-envelope", "Record an accepted red envelope in the order notes."},
      // return
      {"return-01", "return", "Before any return, check whether the product is fresh or perishable; if so, follow the refund-only rules."},
      {"return-02", "return", "Personal-reason returns need no photo evidence."},
      {"return-03", "return", "A personal-reason return can at most become a return and refund, when the conditions hold."},
      {"return-04", "return", "Personal-reason returns never get refund-only, reshipment, or a red envelope."},
      {"return-05", "return", "For quality complaints, first ask for pictures that show the problem."},
      {"return-06", "return", "If the pictures confirm the complaint, try a small red envelope first, then a return and refund; the merchant is at fault, so the customer pays no return shipping."},
      {"return-07", "return", "If the pictures do not confirm the complaint, decline red envelope, refund-only and reshipment; a requested return and refund proceeds as a personal-reason return with insurance-based shipping."},
      {"return-08", "return", "Once the goods have been sent back, no red envelope may be given."},
      {"return-09", "return", "For an unshipped order, set the order status to Cancelled."},
      {"return-10", "return", "For a shipped order, check is_support_7d_back and ask whether the product was used."},
      {"return-11", "return", "A shipped order is returnable only if unused, is_support_7d_back holds, and no more than 7 days have passed since receipt."},
      {"return-12", "return", "For a returnable order, give the merchant's return address, the insurance situation (insurance covers up to 9 RMB), and the exact advance shipping amount to one decimal place."},
      {"return-13", "return", "Process the return only after the customer says the parcel has been sent back."},
      {"return-14", "return", "Customers at level 3 get an expedited return: set the order status to Refunded."},
      {"return-15", "return", "Customers below level 3 get a standard return: set the order status to Returning."},
      // refund only
      {"refund-01", "refund-only", "Refund-only applies only to fresh or perishable goods; everything else goes through return and refund."},
      {"refund-02", "refund-only", "Confirm the problem with fresh goods before a refund-only, then set the order status to Refund-Only."},
      {"refund-03", "refund-only", "A refund-only for fresh goods does not require asking whether the product was used."},
      {"refund-04", "refund-only", "Confirmed problems with fresh goods get refund-only, never return and refund."},
      {"refund-05", "refund-only", "A refund-only needs no merchant address and no return parcel."},
      {"refund-06", "refund-only", "If a requested refund-only does not qualify, say so politely."},
      // coupon
      {"coupon-01", "coupon", "A coupon applies only if the product's category is in its category_list."},
      {"coupon-02", "coupon", "A coupon applies only if the product's price reaches its minimum_purchase."},
      {"coupon-03", "coupon", "Coupons of different levels combine; coupons of the same level do not."},
      {"coupon-04", "coupon", "When coupons apply, tell the customer the lowest price payable after coupons."},
      // recommendation
      {"recommend-01", "recommendation", "If no product meets the request, say so and suggest the closest similar products."},
      // live stream
      {"livestream-01", "live-stream", "For product questions you cannot answer, look at the product's recent live-stream clips with get_video_detail."},
  };
  return kRules;
}

json rule_catalog_to_json(const RuleSet& rules) {
  json arr = json::array();
  for (const auto& r : rules) arr.push_back({{"rule_id", r.rule_id}, {"category", r.category}, {"text", r.text}});
  return arr;
}

RuleSet rule_catalog_from_json(const json& doc) {
  if (!doc.is_array()) throw std::invalid_argument("rule catalog must be an array");
  RuleSet out;
  std::set<std::string> ids;
  const auto& cats = rule_categories();
  for (const auto& e : doc) {
    Rule r{e.at("rule_id").get<std::string>(), e.at("category").get<std::string>(), e.at("text").get<std::string>()};
    if (std::find(cats.begin(), cats.end(), r.category) == cats.end())
      throw std::invalid_argument("rule '" + r.rule_id + "': unknown category '" + r.category + "'");
    if (!ids.insert(r.rule_id).second) throw std::invalid_argument("duplicate rule id '" + r.rule_id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

const CategoryMap& default_category_map() {
  static const CategoryMap kMap = {
      {Family::Logistics, {"basic", "shipping-cost", "insurance", "delivery", "brand", "time", "address"}},
      {Family::PreSales, {"basic", "shipping-cost", "brand", "time", "coupon", "recommendation", "live-stream"}},
      {Family::AfterSales, {"basic", "after-sales", "reship", "red-envelope", "return", "refund-only"}},
  };
  return kMap;
}

CategoryMap category_map_from_json(const json& j) {
  CategoryMap out;
  const auto& cats = rule_categories();
  for (const auto& [name, tags] : j.items()) {
    const auto family = parse_family(name);
    if (!family) throw std::invalid_argument("category map: unknown family '" + name + "'");
    for (const auto& t : tags) {
      const auto tag = t.get<std::string>();
      if (std::find(cats.begin(), cats.end(), tag) == cats.end())
        throw std::invalid_argument("category map: unknown category '" + tag + "'");
      out[*family].push_back(tag);
    }
  }
  return out;
}

RuleSet filter_rules(const RuleSet& catalog, const std::set<Family>& families, const CategoryMap& map) {
  std::set<std::string> keep = {"basic"};
  for (auto f : families)
    if (auto it = map.find(f); it != map.end()) keep.insert(it->second.begin(), it->second.end());
  RuleSet out;
  for (const auto& r : catalog)
    if (keep.count(r.category)) out.push_back(r);
  return out;
}

}  // namespace shopbench
