#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shopbench/world.hpp"

namespace shopbench {

// ---------------------------------------------------------------------------
// Question types
// ---------------------------------------------------------------------------

enum class Family { Logistics, PreSales, AfterSales };
std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view s);

enum class AfterSalesReason { MissingOrWrong, TransitDamage, QualityIssue, PersonalReason };
enum class DesiredSolution { Reship, RedEnvelope, RefundAndReturn, RefundOnly };
enum class Mood { Calm, Impatient };

std::string_view to_string(AfterSalesReason r);
std::string_view to_string(DesiredSolution s);
std::string_view to_string(Mood m);
std::optional<AfterSalesReason> parse_reason(std::string_view s);
std::optional<DesiredSolution> parse_solution(std::string_view s);
std::optional<Mood> parse_mood(std::string_view s);

/// Evidence-map key an asset must carry for a given complaint reason.
std::string_view claim_kind(AfterSalesReason r);

struct AfterSalesType {
  AfterSalesReason reason = AfterSalesReason::PersonalReason;
  bool image_verification = false;
  DesiredSolution solution = DesiredSolution::RefundAndReturn;
  /// Red-envelope amount the customer asks for, when solution is RedEnvelope.
  std::optional<Money> requested_amount;
  Mood mood = Mood::Calm;

  bool operator==(const AfterSalesType&) const = default;
};

enum class LogisticsIntent { AddressChange, BrandRequest, ArrivalQuery, ShippingCostQuery, SignedNotReceived };
std::string_view to_string(LogisticsIntent i);
std::optional<LogisticsIntent> parse_logistics_intent(std::string_view s);

struct QuestionType {
  Family family = Family::Logistics;
  std::optional<AfterSalesType> after_sales;
  std::vector<LogisticsIntent> logistics_intents;

  bool operator==(const QuestionType&) const = default;
};

json to_json(const QuestionType& q);
QuestionType question_type_from_json(const json& j);

// ---------------------------------------------------------------------------
// Oracle results
// ---------------------------------------------------------------------------

struct AddressChangePlan {
  enum class Kind { DirectOrderUpdate, Interception, RequireReturnFlow, ReferToLogisticsCompany };
  Kind kind;
  std::vector<FieldWrite> writes;
};

struct Resolution {
  enum class Kind { Reship, RedEnvelope, ReturnRefund, RefundOnly, Decline, Escalate };
  Kind kind;
  /// RedEnvelope: the maximum amount that may be offered (whole RMB).
  Money amount;
  /// ReturnRefund
  bool expedited = false;
  Money advance;
  std::string merchant_address;
  /// Status the order ends in when this resolution is carried out.
  std::optional<OrderStatus> target_status;
  /// Decline/Escalate explanation.
  std::string reason;
  std::vector<std::string> required_remarks;
  std::vector<std::string> required_key_facts;
};

std::string_view to_string(Resolution::Kind k);
std::string_view to_string(AddressChangePlan::Kind k);

enum class BrandDecision { RecordInRemark, DeclineNotOffered, DeclineAlreadyShipped, DeclineNotSupported };
std::string_view to_string(BrandDecision d);

/// The oracle was asked about a state no rule covers, or about corrupt data.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shipping cost and insurance
// ---------------------------------------------------------------------------

inline constexpr Money kInsuranceCap = Money::from_yuan(9);
inline constexpr std::int64_t kReturnWindowMinutes = 7 * kMinutesPerDay;
inline constexpr int kExpeditedLevel = 3;

/// base_fee + per_kg_fee * ceil(quantity * unit weight in kg).
Money compute_shipping_cost(const BrandTariff& tariff, int quantity, std::int64_t unit_weight_g);

struct ShippingQuote {
  std::string brand;
  Money cost;
  bool operator==(const ShippingQuote&) const = default;
};

/// Same brand as the outbound shipment when one exists, otherwise the
/// merchant's cheapest brand (ties: lexicographically smallest name).
ShippingQuote return_shipping_quote(const OrderRecord& order, const LogisticsRecord* logistics,
                                    const MerchantRecord& merchant, const ProductRecord& product,
                                    const std::map<std::string, BrandTariff>& tariffs);

Money user_advance_amount(Money return_cost, bool has_insurance, bool merchant_fault,
                          bool interception_for_address_change);

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

Timestamp estimate_shipping_time(const OrderRecord* order, const MerchantRecord& merchant, Timestamp now);

Timestamp estimate_arrival_time(const OrderRecord* order, const LogisticsRecord* logistics,
                                const MerchantRecord& merchant, const std::map<std::string, BrandTariff>& tariffs,
                                const std::optional<std::string>& specified_brand, Timestamp now);

/// "13:00 on June 12"; minutes are truncated.
std::string format_time(Timestamp t);

// ---------------------------------------------------------------------------
// Address changes, brands
// ---------------------------------------------------------------------------

AddressChangePlan plan_address_change(const OrderRecord& order, const LogisticsRecord* logistics,
                                      const std::string& new_address, bool return_eligible);

BrandDecision brand_request_decision(const MerchantRecord& merchant, const LogisticsRecord* logistics,
                                     const std::string& requested);

// ---------------------------------------------------------------------------
// After-sales
// ---------------------------------------------------------------------------

/// max(1, floor(payment * pct)) in whole RMB.
Money max_red_envelope(Money payment, std::int64_t max_compensation_bp);

/// Eligibility of a return for an order. Produces RefundOnly for perishables,
/// a Cancelled-status ReturnRefund for unshipped orders, ReturnRefund for
/// eligible shipped orders (expedited at level >= 3) and Decline otherwise.
/// `advance` and `merchant_address` are left for the caller to fill.
Resolution check_return_eligibility(const ProductRecord& product, const OrderRecord& order,
                                    const LogisticsRecord* logistics, bool used, int user_level, Timestamp now);

struct AfterSalesCase {
  const ProductRecord& product;
  const OrderRecord& order;
  const LogisticsRecord* logistics;
  const MerchantRecord& merchant;
  const UserRecord& user;
  const std::map<std::string, BrandTariff>& tariffs;
  bool used = false;
  Timestamp now = kSystemNow;
};

/// The prescribed escalation ladder for an after-sales request, in the order
/// remedies are to be offered.
std::vector<Resolution> resolve_after_sales(const AfterSalesType& theta, const AfterSalesCase& c, bool evidence_ok);

// ---------------------------------------------------------------------------
// Coupons
// ---------------------------------------------------------------------------

std::vector<CouponRecord> applicable_coupons(const std::vector<CouponRecord>& coupons, const ProductRecord& product);

struct CouponChoice {
  Money payable;
  std::vector<std::string> coupon_ids;  // sorted
};

/// Minimum payable price using at most one applicable coupon per level.
CouponChoice min_payable(Money price, const std::vector<CouponRecord>& coupons, const ProductRecord& product);

}  // namespace shopbench
