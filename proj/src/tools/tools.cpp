#include "shopbench/tools.hpp"

#include <algorithm>
#include <stdexcept>

#include "shopbench/rules.hpp"

namespace shopbench {

namespace {

ArgSpec str_arg(std::string name, std::string description, bool required = true,
                std::vector<std::string> allowed = {}) {
  return {std::move(name), ArgType::String, required, std::move(allowed), std::move(description)};
}

const std::vector<std::string> kOrderStates = {"Paid", "Cancelled", "Returning", "Refunded", "Refund-Only", "Completed"};
const std::vector<std::string> kLogisticsStates = {"In Transit", "Delivered", "Intercepted"};

// Raised inside a handler; becomes a Kind::Error result.
struct ToolFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string arg(const ToolCall& c, const char* name) { return c.arguments.at(name).get<std::string>(); }

std::optional<std::string> opt_arg(const ToolCall& c, const char* name) {
  if (!c.arguments.contains(name)) return std::nullopt;
  return c.arguments.at(name).get<std::string>();
}

template <typename Record>
const Record& lookup(const std::map<std::string, Record>& m, const std::string& id, const char* what) {
  auto it = m.find(id);
  if (it == m.end()) throw ToolFailure(std::string(what) + " '" + id + "' not found");
  return it->second;
}

}  // namespace

std::string_view to_string(ToolClass c) {
  switch (c) {
    case ToolClass::Retrieval: return "retrieval";
    case ToolClass::Calculation: return "calculation";
    case ToolClass::Modification: return "modification";
    case ToolClass::Interaction: return "interaction";
  }
  return "?";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Escalated: return "escalated";
    case Termination::TurnLimit: return "turn_limit";
    case Termination::ProtocolFailure: return "protocol_failure";
  }
  return "?";
}

std::optional<Termination> parse_termination(std::string_view s) {
  for (auto t : {Termination::Completed, Termination::Escalated, Termination::TurnLimit, Termination::ProtocolFailure})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

const std::vector<ToolSpec>& tool_registry() {
  using C = ToolClass;
  static const std::vector<ToolSpec> kTools = {
      {"get_shop_detail", C::Retrieval, {str_arg("shop_id", "merchant id")}, "Merchant record: brands, promised shipping hours, return address, compensation share."},
      {"get_order_detail", C::Retrieval, {str_arg("order_id", "order id")}, "Order record."},
      {"get_item_detail", C::Retrieval, {str_arg("item_id", "product id")}, "Product record."},
      {"get_logistics_detail", C::Retrieval, {str_arg("logistics_id", "shipment id")}, "Shipment record."},
      {"get_user_detail", C::Retrieval, {str_arg("user_id", "customer id")}, "Customer record."},
      {"get_user_coupon_detail", C::Retrieval, {str_arg("user_id", "customer id")}, "All coupons held by a customer."},
      {"get_product_detail", C::Retrieval, {str_arg("category", "product category")}, "All products listed in a category."},
      {"get_video_detail", C::Retrieval, {str_arg("item_id", "product id")}, "Content of the product's recent live-stream clips."},
      {"calculate_shipping_time",
       C::Calculation,
       {str_arg("mode", "which estimate", true, {"shipping", "arrival"}), str_arg("shop_id", "merchant id"),
        str_arg("order_id", "order id, when an order exists", false),
        str_arg("logistics_id", "shipment id, when shipped", false),
        str_arg("brand", "customer-chosen brand, arrival mode only", false)},
       "Estimated shipping or arrival time."},
      {"calculate_shipping_cost",
       C::Calculation,
       {str_arg("mode", "outbound shipping or return shipping", true, {"shipping", "return"}),
        str_arg("item_id", "product id, shipping mode", false),
        {"quantity", ArgType::Integer, false, {}, "number of units, shipping mode"},
        str_arg("brand", "logistics brand, shipping mode", false),
        str_arg("order_id", "order id, return mode", false),
        str_arg("logistics_id", "shipment id, return mode when shipped", false)},
       "Shipping cost for a brand, or the return shipping quote for an order."},
      {"modify_logistics_address", C::Modification, {str_arg("logistics_id", "shipment id"), str_arg("address", "new address")}, "Set a shipment's receive_address."},
      {"modify_logistics_state", C::Modification, {str_arg("logistics_id", "shipment id"), str_arg("state", "new state", true, kLogisticsStates)}, "Set a shipment's state."},
      {"modify_order_address", C::Modification, {str_arg("order_id", "order id"), str_arg("address", "new address")}, "Set an order's receive_address."},
      {"modify_order_state", C::Modification, {str_arg("order_id", "order id"), str_arg("state", "new status", true, kOrderStates)}, "Set an order's status."},
      {"talk_to_user", C::Interaction, {str_arg("content", "message to the customer")}, "Send a message to the customer and wait for the reply."},
      {"switch_to_human", C::Interaction, {str_arg("reason", "why a person is needed", false)}, "Hand the conversation to a human agent (ends the episode)."},
      {"remark", C::Interaction, {str_arg("order_id", "order id"), str_arg("content", "note text")}, "Append a note to an order."},
      {"end_conversation", C::Interaction, {}, "End the conversation once every request is resolved."},
  };
  return kTools;
}

const ToolSpec* find_tool(std::string_view name) {
  for (const auto& t : tool_registry())
    if (t.name == name) return &t;
  return nullptr;
}

json tool_catalog_json() {
  json out = json::array();
  for (const auto& t : tool_registry()) {
    json args = json::array();
    for (const auto& a : t.args) {
      json ja = {{"name", a.name},
                 {"type", a.type == ArgType::String ? "string" : "integer"},
                 {"required", a.required},
                 {"description", a.description}};
      if (!a.allowed.empty()) ja["allowed"] = a.allowed;
      args.push_back(ja);
    }
    out.push_back({{"name", t.name}, {"class", to_string(t.tool_class)}, {"description", t.description}, {"arguments", args}});
  }
  return out;
}

json to_json(const ToolCall& c) { return {{"tool", c.tool}, {"arguments", c.arguments}}; }

ToolCall tool_call_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("action must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "tool" && k != "arguments") throw std::invalid_argument("unexpected key '" + k + "' in action");
  if (!j.contains("tool") || !j.at("tool").is_string()) throw std::invalid_argument("action needs a string \"tool\"");
  ToolCall c{j.at("tool").get<std::string>(), json::object()};
  if (j.contains("arguments")) {
    if (!j.at("arguments").is_object()) throw std::invalid_argument("\"arguments\" must be an object");
    c.arguments = j.at("arguments");
  }
  return c;
}

std::optional<std::string> validate_call(const ToolCall& call) {
  const ToolSpec* spec = find_tool(call.tool);
  if (!spec) return "unknown tool '" + call.tool + "'";
  if (!call.arguments.is_object()) return "arguments must be an object";
  for (const auto& [name, value] : call.arguments.items()) {
    auto it = std::find_if(spec->args.begin(), spec->args.end(), [&](const ArgSpec& a) { return a.name == name; });
    if (it == spec->args.end()) return "unexpected argument '" + name + "' for " + spec->name;
    if (it->type == ArgType::String && !value.is_string()) return "argument '" + name + "' must be a string";
    if (it->type == ArgType::Integer && !value.is_number_integer()) return "argument '" + name + "' must be an integer";
    if (!it->allowed.empty() &&
        std::find(it->allowed.begin(), it->allowed.end(), value.get<std::string>()) == it->allowed.end()) {
      std::string allowed;
      for (const auto& a : it->allowed) allowed += (allowed.empty() ? "" : ", ") + a;
      return "argument '" + name + "' must be one of: " + allowed;
    }
  }
  for (const auto& a : spec->args)
    if (a.required && !call.arguments.contains(a.name)) return "missing argument '" + a.name + "' for " + spec->name;
  return std::nullopt;
}

namespace {

json handle_retrieval(const ToolCall& c, const WorldData& w) {
  if (c.tool == "get_shop_detail") return to_json(lookup(w.merchants, arg(c, "shop_id"), "shop"));
  if (c.tool == "get_order_detail") return to_json(lookup(w.orders, arg(c, "order_id"), "order"));
  if (c.tool == "get_item_detail") return to_json(lookup(w.products, arg(c, "item_id"), "item"));
  if (c.tool == "get_logistics_detail") return to_json(lookup(w.logistics, arg(c, "logistics_id"), "logistics"));
  if (c.tool == "get_user_detail") return to_json(lookup(w.users, arg(c, "user_id"), "user"));
  if (c.tool == "get_user_coupon_detail") {
    const auto user = arg(c, "user_id");
    lookup(w.users, user, "user");
    json list = json::array();
    for (const auto& [id, coupon] : w.coupons)
      if (coupon.user_id == user) list.push_back(to_json(coupon));
    return {{"user_id", user}, {"coupons", list}};
  }
  if (c.tool == "get_product_detail") {
    const auto category = arg(c, "category");
    json list = json::array();
    for (const auto& [id, p] : w.products)
      if (p.category == category) list.push_back(to_json(p));
    return {{"category", category}, {"products", list}};
  }
  // get_video_detail
  const auto& product = lookup(w.products, arg(c, "item_id"), "item");
  json clips = json::array();
  for (const auto& ref : product.asset_refs) {
    const auto& a = lookup(w.assets, ref, "asset");
    if (a.modality != Modality::Video) continue;
    clips.push_back({{"asset_id", a.asset_id}, {"description", a.description}, {"transcript", a.transcript.value_or("")}});
  }
  if (clips.empty()) throw ToolFailure("item '" + product.item_id + "' has no live-stream clips");
  return {{"item_id", product.item_id}, {"clips", clips}};
}

// Resolves the order/shipment pair named by a calculation call and checks it
// belongs to the given shop.
struct CalcSubjects {
  const OrderRecord* order = nullptr;
  const LogisticsRecord* logistics = nullptr;
};

CalcSubjects calc_subjects(const ToolCall& c, const WorldData& w, const MerchantRecord* shop) {
  CalcSubjects s;
  if (auto id = opt_arg(c, "order_id")) {
    s.order = &lookup(w.orders, *id, "order");
    const auto& product = lookup(w.products, s.order->item_id, "item");
    if (shop && product.shop_id != shop->shop_id)
      throw ToolFailure("order '" + *id + "' does not belong to shop '" + shop->shop_id + "'");
  }
  if (auto id = opt_arg(c, "logistics_id")) {
    s.logistics = &lookup(w.logistics, *id, "logistics");
    if (!s.order) throw ToolFailure("logistics_id requires order_id");
    if (s.logistics->order_id != s.order->order_id)
      throw ToolFailure("logistics '" + *id + "' does not belong to order '" + s.order->order_id + "'");
  }
  return s;
}

json handle_calculation(const ToolCall& c, const WorldData& w, Timestamp now) {
  const auto mode = arg(c, "mode");
  if (c.tool == "calculate_shipping_time") {
    const auto& shop = lookup(w.merchants, arg(c, "shop_id"), "shop");
    const auto s = calc_subjects(c, w, &shop);
    Timestamp t;
    if (mode == "shipping") {
      if (c.arguments.contains("brand")) throw ToolFailure("brand is only accepted in arrival mode");
      t = estimate_shipping_time(s.order, shop, now);
    } else {
      const auto brand = opt_arg(c, "brand");
      if (brand && !shop.allows_brand_choice)
        throw ToolFailure("shop '" + shop.shop_id + "' does not support choosing a logistics brand");
      if (brand && std::find(shop.brands.begin(), shop.brands.end(), *brand) == shop.brands.end())
        throw ToolFailure("brand '" + *brand + "' is not used by shop '" + shop.shop_id + "'");
      try {
        t = estimate_arrival_time(s.order, s.logistics, shop, w.brand_tariffs, brand, now);
      } catch (const OracleError& e) {
        throw ToolFailure(e.what());
      }
    }
    return {{"mode", mode}, {"estimated_time", t.to_string()}, {"formatted", format_time(t)}};
  }

  // calculate_shipping_cost
  if (mode == "shipping") {
    for (const char* need : {"item_id", "quantity", "brand"})
      if (!c.arguments.contains(need)) throw ToolFailure(std::string("shipping mode needs '") + need + "'");
    const auto& product = lookup(w.products, arg(c, "item_id"), "item");
    const auto brand = arg(c, "brand");
    const auto& shop = lookup(w.merchants, product.shop_id, "shop");
    if (std::find(shop.brands.begin(), shop.brands.end(), brand) == shop.brands.end())
      throw ToolFailure("brand '" + brand + "' is not used by shop '" + shop.shop_id + "'");
    const int quantity = c.arguments.at("quantity").get<int>();
    if (quantity < 0) throw ToolFailure("quantity must be >= 0");
    const Money cost = compute_shipping_cost(lookup(w.brand_tariffs, brand, "brand"), quantity, product.unit_weight_g);
    return {{"mode", mode}, {"brand", brand}, {"quantity", quantity}, {"cost", cost.to_string()}};
  }
  if (!c.arguments.contains("order_id")) throw ToolFailure("return mode needs 'order_id'");
  const auto s = calc_subjects(c, w, nullptr);
  const auto& product = lookup(w.products, s.order->item_id, "item");
  const auto& shop = lookup(w.merchants, product.shop_id, "shop");
  const auto* shipment = s.logistics ? s.logistics : w.logistics_for_order(s.order->order_id);
  const auto quote = return_shipping_quote(*s.order, shipment, shop, product, w.brand_tariffs);
  return {{"mode", mode}, {"order_id", s.order->order_id}, {"brand", quote.brand}, {"cost", quote.cost.to_string()}};
}

FieldWrite modification_write(const ToolCall& c) {
  if (c.tool == "modify_logistics_address")
    return {WriteTarget::LogisticsReceiveAddress, arg(c, "logistics_id"), arg(c, "address")};
  if (c.tool == "modify_logistics_state") return {WriteTarget::LogisticsState, arg(c, "logistics_id"), arg(c, "state")};
  if (c.tool == "modify_order_address") return {WriteTarget::OrderReceiveAddress, arg(c, "order_id"), arg(c, "address")};
  if (c.tool == "modify_order_state") return {WriteTarget::OrderStatus, arg(c, "order_id"), arg(c, "state")};
  return {WriteTarget::OrderRemark, arg(c, "order_id"), arg(c, "content")};
}

json written_record(const FieldWrite& w, const WorldData& data) {
  switch (w.target) {
    case WriteTarget::LogisticsReceiveAddress:
    case WriteTarget::LogisticsState:
      return to_json(data.logistics.at(w.record_id));
    default:
      return to_json(data.orders.at(w.record_id));
  }
}

}  // namespace

ToolResult dispatch(const ToolCall& call, WorldState& state, ToolContext& ctx) {
  ToolResult r;
  auto error = [&](std::string msg) {
    r.kind = ToolResult::Kind::Error;
    r.text = std::move(msg);
    r.state_version_after = state.version();
    return r;
  };
  if (auto violation = validate_call(call)) return error(*violation);
  if (ctx.terminated) return error("the session has terminated");

  const ToolSpec& spec = *find_tool(call.tool);
  try {
    switch (spec.tool_class) {
      case ToolClass::Retrieval:
        r.payload = handle_retrieval(call, state.data());
        break;
      case ToolClass::Calculation:
        r.payload = handle_calculation(call, state.data(), ctx.now);
        break;
      case ToolClass::Modification:
      case ToolClass::Interaction:
        if (call.tool == "talk_to_user") {
          if (!ctx.talk_to_user) throw ToolFailure("no user is attached to this session");
          r.kind = ToolResult::Kind::UserReply;
          r.text = ctx.talk_to_user(arg(call, "content"));
        } else if (call.tool == "switch_to_human" || call.tool == "end_conversation") {
          r.kind = ToolResult::Kind::Terminal;
          r.termination = call.tool == "end_conversation" ? Termination::Completed : Termination::Escalated;
          ctx.terminated = true;
        } else {
          const FieldWrite w = modification_write(call);
          state.apply(w);
          r.payload = written_record(w, state.data());
        }
        break;
    }
  } catch (const ToolFailure& e) {
    return error(e.what());
  } catch (const WriteError& e) {
    return error(e.what());
  } catch (const OracleError& e) {
    return error(e.what());
  }
  r.state_version_after = state.version();
  return r;
}

std::string render_observation(const ToolResult& result) {
  switch (result.kind) {
    case ToolResult::Kind::Observation:
      return result.payload.dump();
    case ToolResult::Kind::UserReply:
      return result.text;
    case ToolResult::Kind::Terminal:
      return result.termination == Termination::Completed ? "conversation ended" : "transferred to a human agent";
    case ToolResult::Kind::Error:
      return "ERROR: " + result.text;
  }
  return {};
}

}  // namespace shopbench
