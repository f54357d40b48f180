#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "shopbench/tools.hpp"

namespace shopbench {
namespace {

using testing::fixture_world;

ToolResult call(WorldState& s, const std::string& tool, json args, ToolContext* ctx = nullptr) {
  ToolContext local;
  return dispatch({tool, std::move(args)}, s, ctx ? *ctx : local);
}

TEST(Registry, EighteenToolsInFourClasses) {
  const auto& reg = tool_registry();
  EXPECT_EQ(reg.size(), 18u);
  std::map<ToolClass, int> per_class;
  std::set<std::string> names;
  for (const auto& t : reg) {
    ++per_class[t.tool_class];
    EXPECT_TRUE(names.insert(t.name).second);
  }
  EXPECT_EQ(per_class[ToolClass::Retrieval], 8);
  EXPECT_EQ(per_class[ToolClass::Calculation], 2);
  EXPECT_EQ(per_class[ToolClass::Modification], 4);
  EXPECT_EQ(per_class[ToolClass::Interaction], 4);
  EXPECT_EQ(tool_catalog_json().size(), 18u);
  EXPECT_EQ(find_tool("refund_everything"), nullptr);
}

TEST(Dispatch, RetrievalReturnsRecord) {
  WorldState s(fixture_world());
  auto r = call(s, "get_order_detail", {{"order_id", "O1"}});
  ASSERT_EQ(r.kind, ToolResult::Kind::Observation);
  EXPECT_EQ(r.payload.at("status"), "Paid");
  EXPECT_EQ(r.payload.at("order_id"), "O1");

  r = call(s, "get_user_coupon_detail", {{"user_id", "U1"}});
  EXPECT_EQ(r.payload.at("coupons").size(), 3u);
  r = call(s, "get_product_detail", {{"category", "kitchen"}});
  EXPECT_EQ(r.payload.at("products").size(), 2u);
  r = call(s, "get_video_detail", {{"item_id", "P1"}});
  ASSERT_EQ(r.kind, ToolResult::Kind::Observation);
  EXPECT_EQ(r.payload.at("clips")[0].at("asset_id"), "A2");
  r = call(s, "get_video_detail", {{"item_id", "P3"}});
  EXPECT_EQ(r.kind, ToolResult::Kind::Error);
}

TEST(Dispatch, UnknownOrderIsErrorObservation) {
  WorldState s(fixture_world());
  const auto r = call(s, "get_order_detail", {{"order_id", "O999"}});
  EXPECT_EQ(r.kind, ToolResult::Kind::Error);
  EXPECT_NE(r.text.find("O999"), std::string::npos);
  EXPECT_EQ(render_observation(r).rfind("ERROR: ", 0), 0u);
}

TEST(Dispatch, SchemaViolations) {
  WorldState s(fixture_world());
  EXPECT_EQ(call(s, "cancel_everything", json::object()).kind, ToolResult::Kind::Error);
  EXPECT_EQ(call(s, "get_order_detail", json::object()).kind, ToolResult::Kind::Error);
  EXPECT_EQ(call(s, "get_order_detail", {{"order_id", 1}}).kind, ToolResult::Kind::Error);
  EXPECT_EQ(call(s, "get_order_detail", {{"order_id", "O1"}, {"extra", "x"}}).kind, ToolResult::Kind::Error);
  EXPECT_EQ(call(s, "modify_order_state", {{"order_id", "O1"}, {"state", "Lost"}}).kind, ToolResult::Kind::Error);
  EXPECT_EQ(s.version(), 0u);
  EXPECT_EQ(tool_call_from_json(json{{"tool", "end_conversation"}}).arguments, json::object());
  EXPECT_THROW(tool_call_from_json(json{{"arguments", json::object()}}), std::invalid_argument);
  EXPECT_THROW(tool_call_from_json(json{{"tool", "x"}, {"arguments", json::object()}, {"id", 1}}),
               std::invalid_argument);
}

TEST(Dispatch, ModificationsProduceOneDiffEach) {
  WorldState s(fixture_world());
  struct Case {
    std::string tool;
    json args;
    std::string path;
  };
  const std::vector<Case> cases = {
      {"modify_order_address", {{"order_id", "O1"}, {"address", "5 Elm Court"}}, "orders/O1/receive_address"},
      {"modify_order_state", {{"order_id", "O1"}, {"state", "Cancelled"}}, "orders/O1/status"},
      {"remark", {{"order_id", "O2"}, {"content", "Use EcoPost"}}, "orders/O2/remarks"},
      {"modify_logistics_address", {{"logistics_id", "L2"}, {"address", "9 Birch Row"}}, "logistics/L2/receive_address"},
      {"modify_logistics_state", {{"logistics_id", "L2"}, {"state", "Intercepted"}}, "logistics/L2/state"},
  };
  for (const auto& c : cases) {
    const auto before = s.snapshot();
    const auto r = call(s, c.tool, c.args);
    ASSERT_EQ(r.kind, ToolResult::Kind::Observation) << c.tool << ": " << r.text;
    EXPECT_EQ(r.state_version_after, before.version() + 1);
    const auto d = diff(before, s.snapshot());
    ASSERT_EQ(d.size(), 1u) << c.tool;
    EXPECT_EQ(d[0].path, c.path);
  }
}

TEST(Dispatch, IllegalWriteIsErrorAndLeavesState) {
  WorldState s(fixture_world());
  const auto before = s.snapshot().canonical();
  auto r = call(s, "modify_order_state", {{"order_id", "O3"}, {"state", "Cancelled"}});  // Completed -> Cancelled
  EXPECT_EQ(r.kind, ToolResult::Kind::Error);
  r = call(s, "modify_logistics_state", {{"logistics_id", "L3"}, {"state", "Intercepted"}});
  EXPECT_EQ(r.kind, ToolResult::Kind::Error);
  EXPECT_EQ(s.snapshot().canonical(), before);
}

TEST(Dispatch, ReadOnlyToolsNeverChangeState) {
  WorldState s(fixture_world());
  const auto before = s.snapshot().canonical();
  const std::vector<std::pair<std::string, json>> calls = {
      {"get_shop_detail", {{"shop_id", "S1"}}},
      {"get_item_detail", {{"item_id", "P1"}}},
      {"get_logistics_detail", {{"logistics_id", "L2"}}},
      {"get_user_detail", {{"user_id", "U1"}}},
      {"calculate_shipping_time", {{"mode", "arrival"}, {"shop_id", "S1"}, {"order_id", "O1"}}},
      {"calculate_shipping_time", {{"mode", "shipping"}, {"shop_id", "S1"}}},
      {"calculate_shipping_cost", {{"mode", "shipping"}, {"item_id", "P1"}, {"quantity", 3}, {"brand", "EcoPost"}}},
      {"calculate_shipping_cost", {{"mode", "return"}, {"order_id", "O3"}}},
      {"calculate_shipping_cost", {{"mode", "return"}, {"order_id", "O404"}}},
  };
  for (const auto& [tool, args] : calls) {
    const auto r = call(s, tool, args);
    EXPECT_EQ(r.state_version_after, 0u) << tool;
  }
  EXPECT_EQ(s.snapshot().canonical(), before);
  EXPECT_EQ(s.version(), 0u);
}

TEST(Dispatch, CalculationsMatchOracle) {
  WorldState s(fixture_world());
  auto r = call(s, "calculate_shipping_time",
                {{"mode", "arrival"}, {"shop_id", "S1"}, {"order_id", "O2"}, {"logistics_id", "L2"}});
  EXPECT_EQ(r.payload.at("estimated_time"), "2025-06-12 09:00");
  EXPECT_EQ(r.payload.at("formatted"), "09:00 on June 12");
  r = call(s, "calculate_shipping_cost", {{"mode", "shipping"}, {"item_id", "P1"}, {"quantity", 3}, {"brand", "EcoPost"}});
  EXPECT_EQ(r.payload.at("cost"), "8.50");
  r = call(s, "calculate_shipping_cost", {{"mode", "return"}, {"order_id", "O3"}});
  EXPECT_EQ(r.payload.at("cost"), "5.50");
  EXPECT_EQ(r.payload.at("brand"), "EcoPost");
  r = call(s, "calculate_shipping_time", {{"mode", "arrival"}, {"shop_id", "S2"}, {"brand", "FreshLine"}});
  EXPECT_EQ(r.kind, ToolResult::Kind::Error);  // S2 does not allow brand choice
}

TEST(Dispatch, InteractionTools) {
  WorldState s(fixture_world());
  ToolContext ctx;
  std::vector<std::string> said;
  ctx.talk_to_user = [&](const std::string& m) {
    said.push_back(m);
    return std::string("thanks");
  };
  auto r = call(s, "talk_to_user", {{"content", "hello"}}, &ctx);
  EXPECT_EQ(r.kind, ToolResult::Kind::UserReply);
  EXPECT_EQ(r.text, "thanks");
  EXPECT_EQ(render_observation(r), "thanks");
  EXPECT_EQ(said, std::vector<std::string>{"hello"});

  r = call(s, "switch_to_human", json::object(), &ctx);
  EXPECT_EQ(r.kind, ToolResult::Kind::Terminal);
  EXPECT_EQ(r.termination, Termination::Escalated);
  EXPECT_TRUE(ctx.terminated);
  r = call(s, "get_user_detail", {{"user_id", "U1"}}, &ctx);
  EXPECT_EQ(r.kind, ToolResult::Kind::Error);

  ToolContext ctx2;
  r = call(s, "end_conversation", json::object(), &ctx2);
  EXPECT_EQ(r.termination, Termination::Completed);
  EXPECT_EQ(render_observation(r), "conversation ended");
}

TEST(Termination, Strings) {
  for (auto t : {Termination::Completed, Termination::Escalated, Termination::TurnLimit, Termination::ProtocolFailure})
    EXPECT_EQ(parse_termination(to_string(t)), t);
  EXPECT_EQ(parse_termination("done"), std::nullopt);
}

}  // namespace
}  // namespace shopbench
