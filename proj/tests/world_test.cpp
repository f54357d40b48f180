#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "shopbench/world.hpp"

namespace shopbench {
namespace {

using testing::fixture_world;

TEST(Money, ParseAndFormat) {
  EXPECT_EQ(Money::parse("12.50").fen, 1250);
  EXPECT_EQ(Money::parse("12.5").fen, 1250);
  EXPECT_EQ(Money::parse("12").fen, 1200);
  EXPECT_EQ(Money::parse("0.05").to_string(), "0.05");
  EXPECT_THROW(Money::parse("1.234"), std::invalid_argument);
  EXPECT_THROW(Money::parse("abc"), std::invalid_argument);
  EXPECT_THROW(Money::parse("1."), std::invalid_argument);
  EXPECT_EQ(Money::from_fen(300).one_decimal(), "3.0");
  EXPECT_EQ(Money::from_fen(1255).one_decimal(), "12.6");
  EXPECT_EQ(Money::from_fen(1254).one_decimal(), "12.5");
  EXPECT_EQ(Money::from_fen(700).whole_yuan(), "7");
}

TEST(Timestamp, ParseFormatAndArithmetic) {
  const auto t = Timestamp::parse("2025-06-10 14:00");
  EXPECT_EQ(t.to_string(), "2025-06-10 14:00");
  EXPECT_EQ(t.plus_hours(24).to_string(), "2025-06-11 14:00");
  EXPECT_EQ(kSystemNow.to_string(), "2025-06-12 00:00");
  EXPECT_EQ(Timestamp::parse("2025-06-12 13:45").truncated_to_hour().to_string(), "2025-06-12 13:00");
  EXPECT_EQ(Timestamp::parse("2024-12-31 23:00").plus_hours(2).to_string(), "2025-01-01 01:00");
  EXPECT_THROW(Timestamp::parse("2025-02-30 10:00"), std::invalid_argument);
  EXPECT_THROW(Timestamp::parse("2025-06-10T14:00"), std::invalid_argument);
  EXPECT_THROW(Timestamp::parse("2025-06-10 24:00"), std::invalid_argument);
}

TEST(LoadWorld, FixtureReadsBackAtVersionZero) {
  const std::string doc = world_to_json(fixture_world()).dump(2);
  const WorldState state = load_world(doc);
  EXPECT_EQ(state.version(), 0u);
  EXPECT_EQ(state.data().orders.at("O1").quantity, 3);
  EXPECT_EQ(state.data().merchants.at("S1").max_compensation_bp, 700);
  EXPECT_EQ(state.data().products.at("P1").unit_weight_g, 800);
  EXPECT_EQ(canonical_bytes(state.data()), canonical_bytes(fixture_world()));
}

TEST(LoadWorld, SingleUserSingleOrder) {
  const char* doc = R"({
    "users": [{"user_id": "U1", "name": "A", "level": 1, "default_address": "x"}],
    "merchants": [{"shop_id": "S1", "name": "s", "return_address": "r", "brands": ["B"],
                   "allows_brand_choice": false, "promised_shipping_hours": 24, "max_compensation_pct": "0.05"}],
    "products": [{"item_id": "P1", "shop_id": "S1", "name": "p", "price": "10.00", "unit_weight_kg": "0.5",
                  "category": "c", "is_fresh_perishable": false, "is_support_7d_back": true,
                  "has_shipping_insurance": false, "asset_refs": []}],
    "orders": [{"order_id": "O1", "user_id": "U1", "item_id": "P1", "quantity": 1, "payment_amount": "10.00",
                "payment_time": "2025-06-10 10:00", "receive_address": "x", "status": "Paid",
                "has_shipping_insurance": false, "remarks": []}],
    "logistics": [], "coupons": [], "assets": [],
    "brand_tariffs": [{"brand": "B", "transit_hours": 24, "base_fee": "5.00", "per_kg_fee": "1.00"}]
  })";
  const WorldState s = load_world(doc);
  EXPECT_EQ(s.version(), 0u);
  EXPECT_EQ(s.data().users.size(), 1u);
  EXPECT_EQ(s.data().orders.at("O1").payment_amount, Money::parse("10"));
}

std::string error_of(const WorldData& w) {
  try {
    load_world(world_to_json(w).dump());
  } catch (const WorldError& e) {
    return e.what();
  }
  return {};
}

TEST(LoadWorld, ReferentialErrorsNameTheRecord) {
  auto w = fixture_world();
  w.orders.at("O1").item_id = "P404";
  EXPECT_NE(error_of(w).find("orders[O1].item_id"), std::string::npos) << error_of(w);

  w = fixture_world();
  w.logistics.at("L2").order_id = "O404";
  EXPECT_NE(error_of(w).find("logistics[L2].order_id"), std::string::npos);

  w = fixture_world();
  w.coupons.at("C1").user_id = "U404";
  EXPECT_NE(error_of(w).find("coupons[C1].user_id"), std::string::npos);
}

TEST(LoadWorld, LogisticsBrandMustBelongToMerchant) {
  // Replay every (shipment, brand) pairing over the fixture and compare the
  // validator's verdict against the merchant brand lists.
  const auto base = fixture_world();
  for (const auto& [lid, shipment] : base.logistics) {
    const auto& shop = base.merchants.at(base.products.at(base.orders.at(shipment.order_id).item_id).shop_id);
    for (const auto& [brand, tariff] : base.brand_tariffs) {
      auto w = base;
      w.logistics.at(lid).brand = brand;
      const bool offered = std::find(shop.brands.begin(), shop.brands.end(), brand) != shop.brands.end();
      const auto err = error_of(w);
      EXPECT_EQ(err.empty(), offered) << lid << " " << brand << ": " << err;
      if (!offered) {
        EXPECT_NE(err.find("logistics[" + lid + "].brand"), std::string::npos);
      }
    }
  }
}

TEST(LoadWorld, SchemaViolations) {
  auto doc = world_to_json(fixture_world());
  doc["orders"][0]["quantity"] = "three";
  EXPECT_THROW(load_world(doc.dump()), WorldError);

  doc = world_to_json(fixture_world());
  doc["orders"][0]["status"] = "Lost";
  EXPECT_THROW(load_world(doc.dump()), WorldError);

  doc = world_to_json(fixture_world());
  doc["products"][0]["price"] = "-1.00";
  EXPECT_THROW(load_world(doc.dump()), WorldError);

  doc = world_to_json(fixture_world());
  doc["users"][0]["nickname"] = "x";
  try {
    load_world(doc.dump());
    FAIL();
  } catch (const WorldError& e) {
    EXPECT_NE(std::string(e.what()).find("nickname"), std::string::npos);
  }

  doc = world_to_json(fixture_world());
  doc["logistics"][1]["delivered_time"] = nullptr;  // L3 is Delivered
  EXPECT_THROW(load_world(doc.dump()), WorldError);

  EXPECT_THROW(load_world("{not json"), WorldError);
  EXPECT_THROW(load_world(R"({"users": []})"), WorldError);
}

TEST(Snapshot, ImmutableAfterWrites) {
  WorldState state(fixture_world());
  const Snapshot before = state.snapshot();
  state.apply({WriteTarget::OrderStatus, "O1", "Cancelled"});
  EXPECT_EQ(before.data().orders.at("O1").status, OrderStatus::Paid);
  EXPECT_EQ(state.data().orders.at("O1").status, OrderStatus::Cancelled);
  EXPECT_EQ(before.version(), 0u);
  EXPECT_EQ(state.version(), 1u);
}

TEST(Snapshot, EmptyWorldAndSameVersionEquality) {
  WorldState empty;
  EXPECT_TRUE(empty.snapshot().data().orders.empty());
  EXPECT_TRUE(diff(empty.snapshot(), Snapshot{}).empty());

  WorldState state(fixture_world());
  EXPECT_EQ(state.snapshot().canonical(), state.snapshot().canonical());
}

TEST(Diff, IdentityIsEmpty) {
  const auto w = fixture_world();
  EXPECT_TRUE(diff(w, w).empty());
}

TEST(Diff, SingleStatusChange) {
  WorldState state(fixture_world());
  const auto before = state.snapshot();
  state.apply({WriteTarget::OrderStatus, "O1", "Cancelled"});
  const auto d = diff(before, state.snapshot());
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].path, "orders/O1/status");
  EXPECT_EQ(d[0].old_value, "Paid");
  EXPECT_EQ(d[0].new_value, "Cancelled");
  EXPECT_EQ(d[0].kind, DiffKind::Exact);
}

TEST(Diff, InterceptionIsThreeDiffs) {
  WorldState state(fixture_world());
  const auto before = state.snapshot();
  state.apply({WriteTarget::OrderReceiveAddress, "O2", "1 New Road"});
  state.apply({WriteTarget::LogisticsReceiveAddress, "L2", "1 New Road"});
  state.apply({WriteTarget::LogisticsState, "L2", "Intercepted"});
  const auto d = diff(before, state.snapshot());
  ASSERT_EQ(d.size(), 3u);
  std::vector<std::string> paths;
  for (const auto& f : d) paths.push_back(f.path);
  std::sort(paths.begin(), paths.end());
  EXPECT_EQ(paths, (std::vector<std::string>{"logistics/L2/receive_address", "logistics/L2/state",
                                             "orders/O2/receive_address"}));
}

TEST(Diff, RemarksAreSemantic) {
  WorldState state(fixture_world());
  const auto before = state.snapshot();
  state.apply({WriteTarget::OrderRemark, "O1", "Customer prefers EcoPost"});
  const auto d = diff(before, state.snapshot());
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].path, "orders/O1/remarks");
  EXPECT_EQ(d[0].kind, DiffKind::Semantic);
}

TEST(Diff, AddedAndRemovedRecords) {
  auto a = fixture_world();
  auto b = a;
  b.coupons.erase("C1");
  const auto d = diff(a, b);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].path, "coupons/C1");
  EXPECT_TRUE(d[0].new_value.is_null());
}

TEST(Writes, IllegalAndInvalidWritesLeaveStateUntouched) {
  WorldState state(fixture_world());
  const auto before = state.snapshot().canonical();
  EXPECT_THROW(state.apply({WriteTarget::OrderStatus, "O1", "Lost"}), WriteError);
  EXPECT_THROW(state.apply({WriteTarget::OrderStatus, "O404", "Cancelled"}), WriteError);
  EXPECT_THROW(state.apply({WriteTarget::LogisticsState, "L3", "Intercepted"}), WriteError);  // delivered
  EXPECT_THROW(state.apply({WriteTarget::LogisticsState, "L2", "Delivered"}), WriteError);
  EXPECT_THROW(state.apply({WriteTarget::OrderRemark, "O1", ""}), WriteError);
  EXPECT_THROW(state.apply({WriteTarget::OrderReceiveAddress, "O3", "x"}), WriteError);  // completed
  EXPECT_EQ(state.snapshot().canonical(), before);
  EXPECT_EQ(state.version(), 0u);
  EXPECT_TRUE(state.write_log().empty());
}

// Random write sequences: replaying the log from the initial snapshot
// reproduces the final state, diff is empty exactly when canonical bytes
// agree, and canonicalization survives a load round trip.
TEST(WorldProperties, ReplayDiffAndCanonicalization) {
  const std::vector<FieldWrite> candidates = {
      {WriteTarget::OrderStatus, "O1", "Cancelled"},
      {WriteTarget::OrderStatus, "O1", "Refunded"},
      {WriteTarget::OrderStatus, "O3", "Returning"},
      {WriteTarget::OrderStatus, "O3", "Refunded"},
      {WriteTarget::OrderStatus, "O4", "Refund-Only"},
      {WriteTarget::OrderRemark, "O1", "note a"},
      {WriteTarget::OrderRemark, "O2", "note b"},
      {WriteTarget::OrderReceiveAddress, "O1", "5 Elm Court"},
      {WriteTarget::OrderReceiveAddress, "O2", "9 Birch Row"},
      {WriteTarget::LogisticsReceiveAddress, "L2", "9 Birch Row"},
      {WriteTarget::LogisticsState, "L2", "Intercepted"},
      {WriteTarget::LogisticsState, "L3", "Intercepted"},
  };
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    WorldState state(fixture_world());
    const int n = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int i = 0; i < n; ++i) {
      const auto& w = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
      try {
        state.apply(w);
      } catch (const WriteError&) {
      }
      validate_world(state.data());
    }
    EXPECT_EQ(state.version(), state.write_log().size());
    const WorldData replayed = replay_writes(state.initial(), state.write_log());
    EXPECT_EQ(canonical_bytes(replayed), canonical_bytes(state.data()));

    const auto d = diff(state.initial(), state.data());
    EXPECT_EQ(d.empty(), canonical_bytes(state.initial()) == canonical_bytes(state.data()));

    const auto bytes = canonical_bytes(state.data());
    EXPECT_EQ(canonical_bytes(load_world(bytes).data()), bytes);
  }
}

TEST(FieldWrite, JsonRoundTrip) {
  const FieldWrite w{WriteTarget::LogisticsState, "L2", "Intercepted"};
  EXPECT_EQ(field_write_from_json(to_json(w)), w);
  EXPECT_THROW(field_write_from_json(json{{"target", "user.name"}, {"record_id", "U1"}, {"value", "x"}}),
               std::invalid_argument);
}

}  // namespace
}  // namespace shopbench
