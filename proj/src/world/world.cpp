#include "shopbench/world.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace shopbench {

namespace {

constexpr std::pair<OrderStatus, std::string_view> kOrderStatusNames[] = {
    {OrderStatus::Paid, "Paid"},           {OrderStatus::Cancelled, "Cancelled"},
    {OrderStatus::Returning, "Returning"}, {OrderStatus::Refunded, "Refunded"},
    {OrderStatus::RefundOnly, "Refund-Only"}, {OrderStatus::Completed, "Completed"},
};

constexpr std::pair<LogisticsState, std::string_view> kLogisticsStateNames[] = {
    {LogisticsState::InTransit, "In Transit"},
    {LogisticsState::Delivered, "Delivered"},
    {LogisticsState::Intercepted, "Intercepted"},
};

// Reads one record object, reporting problems as "<collection>[<id>].<field>".
class RecordReader {
 public:
  RecordReader(const json& obj, std::string collection, std::string id_key)
      : obj_(obj), where_(std::move(collection)) {
    if (!obj_.is_object()) throw WorldError(where_ + ": record is not an object");
    id_ = str(id_key);
    where_ += "[" + id_ + "]";
    seen_.insert(id_key);
  }

  const std::string& id() const { return id_; }

  std::string str(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected string");
    return v.get<std::string>();
  }
  std::string nonempty(const std::string& key) {
    auto s = str(key);
    if (s.empty()) fail(key, "must be non-empty");
    return s;
  }
  long long integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected integer");
    return v.get<long long>();
  }
  bool flag(const std::string& key) {
    const json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected boolean");
    return v.get<bool>();
  }
  std::int64_t decimal(const std::string& key, int places) {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected decimal string");
    try {
      return parse_decimal(v.get<std::string>(), places);
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }
  Money money(const std::string& key) {
    const Money m{decimal(key, 2)};
    if (m.fen < 0) fail(key, "must be non-negative");
    return m;
  }
  Timestamp time(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected \"YYYY-MM-DD HH:MM\"");
    try {
      return Timestamp::parse(v.get<std::string>());
    } catch (const std::invalid_argument&) {
      fail(key, "expected \"YYYY-MM-DD HH:MM\"");
    }
  }
  std::optional<Timestamp> optional_time(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
    return time(key);
  }
  std::optional<std::string> optional_str(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
    return str(key);
  }
  std::vector<std::string> strings(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(key, "expected array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  const json& raw(const std::string& key) { return at(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw WorldError(where_ + "." + key + ": " + msg);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw WorldError(where_ + "." + k + ": unknown field");
  }

 private:
  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) fail(key, "missing field");
    return obj_.at(key);
  }

  const json& obj_;
  std::string where_;
  std::string id_;
  std::set<std::string> seen_;
};

template <typename Record, typename Parse>
void read_collection(const json& doc, const char* name, const char* id_key, std::map<std::string, Record>& out,
                     Parse parse) {
  if (!doc.contains(name)) throw WorldError(std::string(name) + ": missing collection");
  const json& arr = doc.at(name);
  if (!arr.is_array()) throw WorldError(std::string(name) + ": expected array");
  for (const auto& item : arr) {
    RecordReader r(item, name, id_key);
    if (r.id().empty()) throw WorldError(std::string(name) + ": empty identifier");
    Record rec = parse(r);
    r.finish();
    if (!out.emplace(r.id(), std::move(rec)).second)
      throw WorldError(std::string(name) + "[" + r.id() + "]: duplicate identifier");
  }
}

std::string bp_to_string(std::int64_t bp) { return format_decimal(bp, 4); }

}  // namespace

std::string_view to_string(OrderStatus s) {
  for (auto [v, n] : kOrderStatusNames)
    if (v == s) return n;
  return "?";
}

std::string_view to_string(LogisticsState s) {
  for (auto [v, n] : kLogisticsStateNames)
    if (v == s) return n;
  return "?";
}

std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "video"; }

std::optional<OrderStatus> parse_order_status(std::string_view s) {
  for (auto [v, n] : kOrderStatusNames)
    if (n == s) return v;
  return std::nullopt;
}

std::optional<LogisticsState> parse_logistics_state(std::string_view s) {
  for (auto [v, n] : kLogisticsStateNames)
    if (n == s) return v;
  return std::nullopt;
}

const LogisticsRecord* WorldData::logistics_for_order(std::string_view order_id) const {
  for (const auto& [id, l] : logistics)
    if (l.order_id == order_id) return &l;
  return nullptr;
}

bool WorldData::operator==(const WorldData& other) const { return canonical_bytes(*this) == canonical_bytes(other); }

WorldData world_from_json(const json& doc) {
  if (!doc.is_object()) throw WorldError("world: top level must be an object");
  static const std::set<std::string> kKeys = {"users",     "merchants", "products", "orders",
                                              "logistics", "coupons",   "assets",   "brand_tariffs"};
  for (const auto& [k, v] : doc.items())
    if (!kKeys.count(k)) throw WorldError("world: unknown top-level key '" + k + "'");

  WorldData w;
  read_collection(doc, "users", "user_id", w.users, [](RecordReader& r) {
    UserRecord u;
    u.user_id = r.id();
    u.name = r.str("name");
    u.level = static_cast<int>(r.integer("level"));
    u.default_address = r.str("default_address");
    return u;
  });
  read_collection(doc, "merchants", "shop_id", w.merchants, [](RecordReader& r) {
    MerchantRecord m;
    m.shop_id = r.id();
    m.name = r.str("name");
    m.return_address = r.str("return_address");
    m.brands = r.strings("brands");
    m.allows_brand_choice = r.flag("allows_brand_choice");
    m.promised_shipping_hours = static_cast<int>(r.integer("promised_shipping_hours"));
    m.max_compensation_bp = r.decimal("max_compensation_pct", 4);
    return m;
  });
  read_collection(doc, "products", "item_id", w.products, [](RecordReader& r) {
    ProductRecord p;
    p.item_id = r.id();
    p.shop_id = r.str("shop_id");
    p.name = r.str("name");
    p.price = r.money("price");
    p.unit_weight_g = r.decimal("unit_weight_kg", 3);
    p.category = r.str("category");
    p.is_fresh_perishable = r.flag("is_fresh_perishable");
    p.is_support_7d_back = r.flag("is_support_7d_back");
    p.has_shipping_insurance = r.flag("has_shipping_insurance");
    p.asset_refs = r.strings("asset_refs");
    return p;
  });
  read_collection(doc, "orders", "order_id", w.orders, [](RecordReader& r) {
    OrderRecord o;
    o.order_id = r.id();
    o.user_id = r.str("user_id");
    o.item_id = r.str("item_id");
    o.quantity = static_cast<int>(r.integer("quantity"));
    o.payment_amount = r.money("payment_amount");
    o.payment_time = r.time("payment_time");
    o.receive_address = r.str("receive_address");
    const auto status = parse_order_status(r.str("status"));
    if (!status) r.fail("status", "unknown order status");
    o.status = *status;
    o.has_shipping_insurance = r.flag("has_shipping_insurance");
    o.remarks = r.strings("remarks");
    return o;
  });
  read_collection(doc, "logistics", "logistics_id", w.logistics, [](RecordReader& r) {
    LogisticsRecord l;
    l.logistics_id = r.id();
    l.order_id = r.str("order_id");
    l.brand = r.str("brand");
    l.pickup_time = r.time("pickup_time");
    l.receive_address = r.str("receive_address");
    const auto state = parse_logistics_state(r.str("state"));
    if (!state) r.fail("state", "unknown logistics state");
    l.state = *state;
    l.delivered_time = r.optional_time("delivered_time");
    return l;
  });
  read_collection(doc, "coupons", "coupon_id", w.coupons, [](RecordReader& r) {
    CouponRecord c;
    c.coupon_id = r.id();
    c.user_id = r.str("user_id");
    c.level = static_cast<int>(r.integer("level"));
    c.amount_off = r.money("amount_off");
    c.minimum_purchase = r.money("minimum_purchase");
    c.category_list = r.strings("category_list");
    return c;
  });
  read_collection(doc, "assets", "asset_id", w.assets, [](RecordReader& r) {
    AssetRef a;
    a.asset_id = r.id();
    const auto modality = r.str("modality");
    if (modality == "image")
      a.modality = Modality::Image;
    else if (modality == "video")
      a.modality = Modality::Video;
    else
      r.fail("modality", "expected \"image\" or \"video\"");
    a.description = r.str("description");
    const json& ev = r.raw("evidence");
    if (!ev.is_object()) r.fail("evidence", "expected object of booleans");
    for (const auto& [k, v] : ev.items()) {
      if (!v.is_boolean()) r.fail("evidence", "expected object of booleans");
      a.evidence[k] = v.get<bool>();
    }
    a.transcript = r.optional_str("transcript");
    return a;
  });
  read_collection(doc, "brand_tariffs", "brand", w.brand_tariffs, [](RecordReader& r) {
    BrandTariff t;
    t.brand = r.id();
    t.transit_hours = static_cast<int>(r.integer("transit_hours"));
    t.base_fee = r.money("base_fee");
    t.per_kg_fee = r.money("per_kg_fee");
    return t;
  });
  return w;
}

void validate_world(const WorldData& w) {
  auto fail = [](const std::string& where, const std::string& msg) { throw WorldError(where + ": " + msg); };
  for (const auto& [id, u] : w.users)
    if (u.level < 1) fail("users[" + id + "].level", "must be >= 1");
  for (const auto& [id, t] : w.brand_tariffs)
    if (t.transit_hours <= 0) fail("brand_tariffs[" + id + "].transit_hours", "must be > 0");
  for (const auto& [id, m] : w.merchants) {
    const std::string where = "merchants[" + id + "]";
    if (m.brands.empty()) fail(where + ".brands", "must be non-empty");
    for (const auto& b : m.brands)
      if (!w.brand_tariffs.count(b)) fail(where + ".brands", "brand '" + b + "' has no tariff");
    if (m.max_compensation_bp < 0 || m.max_compensation_bp > 10000)
      fail(where + ".max_compensation_pct", "must lie in [0, 1]");
    if (m.promised_shipping_hours < 0) fail(where + ".promised_shipping_hours", "must be >= 0");
  }
  for (const auto& [id, p] : w.products) {
    const std::string where = "products[" + id + "]";
    if (!w.merchants.count(p.shop_id)) fail(where + ".shop_id", "unknown shop '" + p.shop_id + "'");
    if (p.unit_weight_g <= 0) fail(where + ".unit_weight_kg", "must be > 0");
    for (const auto& a : p.asset_refs)
      if (!w.assets.count(a)) fail(where + ".asset_refs", "unknown asset '" + a + "'");
  }
  for (const auto& [id, o] : w.orders) {
    const std::string where = "orders[" + id + "]";
    if (!w.users.count(o.user_id)) fail(where + ".user_id", "unknown user '" + o.user_id + "'");
    if (!w.products.count(o.item_id)) fail(where + ".item_id", "unknown item '" + o.item_id + "'");
    if (o.quantity < 1) fail(where + ".quantity", "must be >= 1");
  }
  std::set<std::string> shipped;
  for (const auto& [id, l] : w.logistics) {
    const std::string where = "logistics[" + id + "]";
    auto order = w.orders.find(l.order_id);
    if (order == w.orders.end()) fail(where + ".order_id", "unknown order '" + l.order_id + "'");
    if (!shipped.insert(l.order_id).second) fail(where + ".order_id", "order already has a shipment");
    const auto& merchant = w.merchants.at(w.products.at(order->second.item_id).shop_id);
    if (std::find(merchant.brands.begin(), merchant.brands.end(), l.brand) == merchant.brands.end())
      fail(where + ".brand", "brand '" + l.brand + "' not used by merchant '" + merchant.shop_id + "'");
    if ((l.state == LogisticsState::Delivered) != l.delivered_time.has_value())
      fail(where + ".delivered_time", "present iff state is Delivered");
  }
  for (const auto& [id, c] : w.coupons) {
    const std::string where = "coupons[" + id + "]";
    if (!w.users.count(c.user_id)) fail(where + ".user_id", "unknown user '" + c.user_id + "'");
    if (c.level < 1) fail(where + ".level", "must be >= 1");
    if (c.amount_off.fen <= 0) fail(where + ".amount_off", "must be > 0");
  }
}

json to_json(const UserRecord& u) {
  return {{"user_id", u.user_id}, {"name", u.name}, {"level", u.level}, {"default_address", u.default_address}};
}

json to_json(const MerchantRecord& m) {
  return {{"shop_id", m.shop_id},
          {"name", m.name},
          {"return_address", m.return_address},
          {"brands", m.brands},
          {"allows_brand_choice", m.allows_brand_choice},
          {"promised_shipping_hours", m.promised_shipping_hours},
          {"max_compensation_pct", bp_to_string(m.max_compensation_bp)}};
}

json to_json(const ProductRecord& p) {
  return {{"item_id", p.item_id},
          {"shop_id", p.shop_id},
          {"name", p.name},
          {"price", p.price.to_string()},
          {"unit_weight_kg", format_decimal(p.unit_weight_g, 3)},
          {"category", p.category},
          {"is_fresh_perishable", p.is_fresh_perishable},
          {"is_support_7d_back", p.is_support_7d_back},
          {"has_shipping_insurance", p.has_shipping_insurance},
          {"asset_refs", p.asset_refs}};
}

json to_json(const OrderRecord& o) {
  return {{"order_id", o.order_id},
          {"user_id", o.user_id},
          {"item_id", o.item_id},
          {"quantity", o.quantity},
          {"payment_amount", o.payment_amount.to_string()},
          {"payment_time", o.payment_time.to_string()},
          {"receive_address", o.receive_address},
          {"status", to_string(o.status)},
          {"has_shipping_insurance", o.has_shipping_insurance},
          {"remarks", o.remarks}};
}

json to_json(const LogisticsRecord& l) {
  return {{"logistics_id", l.logistics_id},
          {"order_id", l.order_id},
          {"brand", l.brand},
          {"pickup_time", l.pickup_time.to_string()},
          {"receive_address", l.receive_address},
          {"state", to_string(l.state)},
          {"delivered_time", l.delivered_time ? json(l.delivered_time->to_string()) : json(nullptr)}};
}

json to_json(const BrandTariff& t) {
  return {{"brand", t.brand},
          {"transit_hours", t.transit_hours},
          {"base_fee", t.base_fee.to_string()},
          {"per_kg_fee", t.per_kg_fee.to_string()}};
}

json to_json(const CouponRecord& c) {
  return {{"coupon_id", c.coupon_id},
          {"user_id", c.user_id},
          {"level", c.level},
          {"amount_off", c.amount_off.to_string()},
          {"minimum_purchase", c.minimum_purchase.to_string()},
          {"category_list", c.category_list}};
}

json to_json(const AssetRef& a) {
  return {{"asset_id", a.asset_id},
          {"modality", to_string(a.modality)},
          {"description", a.description},
          {"evidence", a.evidence},
          {"transcript", a.transcript ? json(*a.transcript) : json(nullptr)}};
}

namespace {

template <typename Record>
json collection(const std::map<std::string, Record>& records) {
  json arr = json::array();
  for (const auto& [id, r] : records) arr.push_back(to_json(r));
  return arr;
}

}  // namespace

json world_to_json(const WorldData& w) {
  return {{"users", collection(w.users)},         {"merchants", collection(w.merchants)},
          {"products", collection(w.products)},   {"orders", collection(w.orders)},
          {"logistics", collection(w.logistics)}, {"coupons", collection(w.coupons)},
          {"assets", collection(w.assets)},       {"brand_tariffs", collection(w.brand_tariffs)}};
}

std::string canonical_bytes(const WorldData& data) { return world_to_json(data).dump(); }

std::string_view to_string(WriteTarget t) {
  switch (t) {
    case WriteTarget::OrderReceiveAddress: return "order.receive_address";
    case WriteTarget::OrderStatus: return "order.status";
    case WriteTarget::OrderRemark: return "order.remarks";
    case WriteTarget::LogisticsReceiveAddress: return "logistics.receive_address";
    case WriteTarget::LogisticsState: return "logistics.state";
  }
  return "?";
}

json to_json(const FieldWrite& w) {
  return {{"target", to_string(w.target)}, {"record_id", w.record_id}, {"value", w.value}};
}

FieldWrite field_write_from_json(const json& j) {
  const auto target = j.at("target").get<std::string>();
  for (auto t : {WriteTarget::OrderReceiveAddress, WriteTarget::OrderStatus, WriteTarget::OrderRemark,
                 WriteTarget::LogisticsReceiveAddress, WriteTarget::LogisticsState})
    if (to_string(t) == target) return FieldWrite{t, j.at("record_id").get<std::string>(), j.at("value").get<std::string>()};
  throw std::invalid_argument("unknown write target '" + target + "'");
}

namespace {

bool order_transition_allowed(OrderStatus from, OrderStatus to) {
  switch (from) {
    case OrderStatus::Paid:
      return to == OrderStatus::Cancelled || to == OrderStatus::Returning || to == OrderStatus::Refunded ||
             to == OrderStatus::RefundOnly;
    case OrderStatus::Completed:
      return to == OrderStatus::Returning || to == OrderStatus::Refunded || to == OrderStatus::RefundOnly;
    case OrderStatus::Returning:
      return to == OrderStatus::Refunded;
    default:
      return false;
  }
}

}  // namespace

void apply_write(WorldData& data, const FieldWrite& w) {
  using Code = WriteError::Code;
  auto order = [&]() -> OrderRecord& {
    auto it = data.orders.find(w.record_id);
    if (it == data.orders.end()) throw WriteError(Code::NotFound, "order '" + w.record_id + "' not found");
    return it->second;
  };
  auto shipment = [&]() -> LogisticsRecord& {
    auto it = data.logistics.find(w.record_id);
    if (it == data.logistics.end()) throw WriteError(Code::NotFound, "logistics '" + w.record_id + "' not found");
    return it->second;
  };
  auto require_text = [&] {
    if (w.value.empty()) throw WriteError(Code::InvalidValue, std::string(to_string(w.target)) + " must be non-empty");
  };

  switch (w.target) {
    case WriteTarget::OrderReceiveAddress: {
      require_text();
      auto& o = order();
      if (o.status != OrderStatus::Paid)
        throw WriteError(Code::IllegalTransition,
                         "address of an order in status '" + std::string(to_string(o.status)) + "' cannot change");
      o.receive_address = w.value;
      break;
    }
    case WriteTarget::OrderStatus: {
      auto& o = order();
      const auto to = parse_order_status(w.value);
      if (!to)
        throw WriteError(Code::InvalidValue,
                         "unknown order status '" + w.value +
                             "' (allowed: Paid, Cancelled, Returning, Refunded, Refund-Only, Completed)");
      if (!order_transition_allowed(o.status, *to))
        throw WriteError(Code::IllegalTransition, "order status cannot go from '" + std::string(to_string(o.status)) +
                                                      "' to '" + w.value + "'");
      o.status = *to;
      break;
    }
    case WriteTarget::OrderRemark:
      require_text();
      order().remarks.push_back(w.value);
      break;
    case WriteTarget::LogisticsReceiveAddress: {
      require_text();
      auto& l = shipment();
      if (l.state != LogisticsState::InTransit)
        throw WriteError(Code::IllegalTransition,
                         "address of a shipment in state '" + std::string(to_string(l.state)) + "' cannot change");
      l.receive_address = w.value;
      break;
    }
    case WriteTarget::LogisticsState: {
      auto& l = shipment();
      const auto to = parse_logistics_state(w.value);
      if (!to)
        throw WriteError(Code::InvalidValue,
                         "unknown logistics state '" + w.value + "' (allowed: In Transit, Delivered, Intercepted)");
      if (!(l.state == LogisticsState::InTransit && *to == LogisticsState::Intercepted))
        throw WriteError(Code::IllegalTransition, "logistics state cannot go from '" +
                                                      std::string(to_string(l.state)) + "' to '" + w.value + "'");
      l.state = *to;
      break;
    }
  }
}

WorldState::WorldState(WorldData data)
    : initial_(std::make_shared<const WorldData>(data)), current_(std::move(data)) {}

void WorldState::apply(const FieldWrite& write) {
  WorldData next = current_;
  apply_write(next, write);
  try {
    validate_world(next);
  } catch (const WorldError& e) {
    throw WriteError(WriteError::Code::Integrity, e.what());
  }
  current_ = std::move(next);
  ++version_;
  log_.push_back(write);
}

Snapshot WorldState::snapshot() const { return Snapshot(std::make_shared<const WorldData>(current_), version_); }

WorldState load_world(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw WorldError(std::string("world: malformed JSON: ") + e.what());
  }
  WorldData data = world_from_json(doc);
  validate_world(data);
  return WorldState(std::move(data));
}

WorldState load_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorldError("cannot open world file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_world(ss.str());
}

WorldData replay_writes(const WorldData& initial, std::span<const FieldWrite> writes) {
  WorldData w = initial;
  for (const auto& write : writes) apply_write(w, write);
  return w;
}

namespace {

std::map<std::string, const json*> index_by(const json& arr, const std::string& key) {
  std::map<std::string, const json*> out;
  for (const auto& rec : arr) out[rec.at(key).get<std::string>()] = &rec;
  return out;
}

}  // namespace

std::vector<FieldDiff> diff(const WorldData& a, const WorldData& b) {
  static const std::pair<const char*, const char*> kCollections[] = {
      {"assets", "asset_id"},   {"brand_tariffs", "brand"}, {"coupons", "coupon_id"}, {"logistics", "logistics_id"},
      {"merchants", "shop_id"}, {"orders", "order_id"},     {"products", "item_id"},  {"users", "user_id"},
  };
  const json ja = world_to_json(a), jb = world_to_json(b);
  std::vector<FieldDiff> out;
  for (auto [name, key] : kCollections) {
    const auto ia = index_by(ja.at(name), key), ib = index_by(jb.at(name), key);
    std::set<std::string> ids;
    for (const auto& [id, _] : ia) ids.insert(id);
    for (const auto& [id, _] : ib) ids.insert(id);
    for (const auto& id : ids) {
      const std::string base = std::string(name) + "/" + id;
      auto pa = ia.find(id), pb = ib.find(id);
      if (pa == ia.end() || pb == ib.end()) {
        out.push_back({base, pa == ia.end() ? json(nullptr) : *pa->second, pb == ib.end() ? json(nullptr) : *pb->second,
                       DiffKind::Exact});
        continue;
      }
      for (const auto& [field, va] : pa->second->items()) {
        const json& vb = pb->second->at(field);
        if (va == vb) continue;
        const bool semantic = std::string_view(name) == "orders" && field == "remarks";
        out.push_back({base + "/" + field, va, vb, semantic ? DiffKind::Semantic : DiffKind::Exact});
      }
    }
  }
  return out;
}

}  // namespace shopbench
