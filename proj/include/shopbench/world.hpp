#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopbench/money.hpp"
#include "shopbench/timestamp.hpp"

namespace shopbench {

using json = nlohmann::json;

enum class OrderStatus { Paid, Cancelled, Returning, Refunded, RefundOnly, Completed };
enum class LogisticsState { InTransit, Delivered, Intercepted };
enum class Modality { Image, Video };

std::string_view to_string(OrderStatus s);
std::string_view to_string(LogisticsState s);
std::string_view to_string(Modality m);
std::optional<OrderStatus> parse_order_status(std::string_view s);
std::optional<LogisticsState> parse_logistics_state(std::string_view s);

struct UserRecord {
  std::string user_id;
  std::string name;
  int level = 1;
  std::string default_address;
};

struct MerchantRecord {
  std::string shop_id;
  std::string name;
  std::string return_address;
  std::vector<std::string> brands;
  bool allows_brand_choice = false;
  int promised_shipping_hours = 0;
  /// Maximum red-envelope share of the payment, in basis points (0..10000).
  std::int64_t max_compensation_bp = 0;
};

struct ProductRecord {
  std::string item_id;
  std::string shop_id;
  std::string name;
  Money price;
  /// Unit weight in grams (> 0).
  std::int64_t unit_weight_g = 0;
  std::string category;
  bool is_fresh_perishable = false;
  bool is_support_7d_back = false;
  bool has_shipping_insurance = false;
  std::vector<std::string> asset_refs;
};

struct OrderRecord {
  std::string order_id;
  std::string user_id;
  std::string item_id;
  int quantity = 1;
  Money payment_amount;
  Timestamp payment_time;
  std::string receive_address;
  OrderStatus status = OrderStatus::Paid;
  bool has_shipping_insurance = false;
  std::vector<std::string> remarks;
};

struct LogisticsRecord {
  std::string logistics_id;
  std::string order_id;
  std::string brand;
  Timestamp pickup_time;
  std::string receive_address;
  LogisticsState state = LogisticsState::InTransit;
  std::optional<Timestamp> delivered_time;
};

struct BrandTariff {
  std::string brand;
  int transit_hours = 24;
  Money base_fee;
  Money per_kg_fee;
};

struct CouponRecord {
  std::string coupon_id;
  std::string user_id;
  int level = 1;
  Money amount_off;
  Money minimum_purchase;
  std::vector<std::string> category_list;
};

struct AssetRef {
  std::string asset_id;
  Modality modality = Modality::Image;
  std::string description;
  /// claim kind -> does this asset substantiate the claim
  std::map<std::string, bool> evidence;
  std::optional<std::string> transcript;
};

/// The plain data of a world: every collection keyed by its identifier.
struct WorldData {
  std::map<std::string, UserRecord> users;
  std::map<std::string, MerchantRecord> merchants;
  std::map<std::string, ProductRecord> products;
  std::map<std::string, OrderRecord> orders;
  std::map<std::string, LogisticsRecord> logistics;
  std::map<std::string, CouponRecord> coupons;
  std::map<std::string, AssetRef> assets;
  std::map<std::string, BrandTariff> brand_tariffs;

  const LogisticsRecord* logistics_for_order(std::string_view order_id) const;
  bool operator==(const WorldData&) const;
};

/// Schema or referential-integrity problem in a world document.
class WorldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Validates every record invariant and cross-reference; throws WorldError
/// naming the offending record and field.
void validate_world(const WorldData& data);

json to_json(const UserRecord& r);
json to_json(const MerchantRecord& r);
json to_json(const ProductRecord& r);
json to_json(const OrderRecord& r);
json to_json(const LogisticsRecord& r);
json to_json(const BrandTariff& r);
json to_json(const CouponRecord& r);
json to_json(const AssetRef& r);

WorldData world_from_json(const json& doc);
/// Canonical document: collections as arrays sorted by id, keys sorted.
json world_to_json(const WorldData& data);
/// Byte-stable serialization of world_to_json.
std::string canonical_bytes(const WorldData& data);

/// A single mutation the tool layer may perform.
enum class WriteTarget { OrderReceiveAddress, OrderStatus, OrderRemark, LogisticsReceiveAddress, LogisticsState };
std::string_view to_string(WriteTarget t);

struct FieldWrite {
  WriteTarget target;
  std::string record_id;
  std::string value;

  bool operator==(const FieldWrite&) const = default;
};

json to_json(const FieldWrite& w);
FieldWrite field_write_from_json(const json& j);

class WriteError : public std::runtime_error {
 public:
  enum class Code { NotFound, InvalidValue, IllegalTransition, Integrity };
  WriteError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Applies one write to plain data (no versioning); throws WriteError.
void apply_write(WorldData& data, const FieldWrite& write);

/// Immutable, shareable view of a world at some version.
class Snapshot {
 public:
  Snapshot() : data_(std::make_shared<const WorldData>()) {}
  Snapshot(std::shared_ptr<const WorldData> data, std::uint64_t version)
      : data_(std::move(data)), version_(version) {}

  const WorldData& data() const { return *data_; }
  std::uint64_t version() const { return version_; }
  std::string canonical() const { return canonical_bytes(*data_); }

 private:
  std::shared_ptr<const WorldData> data_;
  std::uint64_t version_ = 0;
};

/// The mutable store owned by one session. Every successful write bumps the
/// version by one and is appended to the write log.
class WorldState {
 public:
  WorldState() = default;
  explicit WorldState(WorldData data);

  const WorldData& data() const { return current_; }
  std::uint64_t version() const { return version_; }
  const std::vector<FieldWrite>& write_log() const { return log_; }
  const WorldData& initial() const { return *initial_; }

  void apply(const FieldWrite& write);
  Snapshot snapshot() const;

 private:
  std::shared_ptr<const WorldData> initial_ = std::make_shared<const WorldData>();
  WorldData current_;
  std::uint64_t version_ = 0;
  std::vector<FieldWrite> log_;
};

/// Parses and validates a world document. The result is at version 0.
WorldState load_world(std::string_view source);
WorldState load_world_file(const std::string& path);

WorldData replay_writes(const WorldData& initial, std::span<const FieldWrite> writes);

enum class DiffKind { Exact, Semantic };

struct FieldDiff {
  std::string path;  // "<collection>/<id>[/<field>]"
  json old_value;
  json new_value;
  DiffKind kind = DiffKind::Exact;
};

std::vector<FieldDiff> diff(const WorldData& a, const WorldData& b);
inline std::vector<FieldDiff> diff(const Snapshot& a, const Snapshot& b) { return diff(a.data(), b.data()); }

}  // namespace shopbench
