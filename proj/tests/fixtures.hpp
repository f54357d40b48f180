#pragma once

#include "shopbench/task.hpp"
#include "shopbench/world.hpp"

namespace shopbench::testing {

// A small hand-built world used across unit tests.
//   S1: brands SwiftExpress (48h, 5.00 + 2.00/kg) and EcoPost (72h, 4.00 + 1.50/kg),
//       brand choice allowed, 24h promised, 7% compensation.
//   S2: FreshLine only (24h, 6.00 + 3.00/kg), no brand choice, 12h promised, 10%.
//   O1 unshipped, O2 in transit, O3 delivered 2025-06-09 10:00, O4 fresh & delivered.
inline WorldData fixture_world() {
  WorldData w;
  w.users["U1"] = {"U1", "Alice Chen", 3, "12 Willow Lane, Hangzhou"};
  w.users["U2"] = {"U2", "Bo Li", 1, "7 Pine Street, Suzhou"};
  w.brand_tariffs["SwiftExpress"] = {"SwiftExpress", 48, Money::parse("5.00"), Money::parse("2.00")};
  w.brand_tariffs["EcoPost"] = {"EcoPost", 72, Money::parse("4.00"), Money::parse("1.50")};
  w.brand_tariffs["FreshLine"] = {"FreshLine", 24, Money::parse("6.00"), Money::parse("3.00")};
  w.merchants["S1"] = {"S1", "Blue Harbor Home", "88 Harbor Road, Ningbo", {"SwiftExpress", "EcoPost"}, true, 24, 700};
  w.merchants["S2"] = {"S2", "Orchard Direct", "3 Orchard Way, Jiaxing", {"FreshLine"}, false, 12, 1000};
  w.assets["A1"] = {"A1", Modality::Image, "Photo of a cracked ceramic mug in its box", {{"transit_damage", true}}, std::nullopt};
  w.assets["A2"] = {"A2", Modality::Video, "Live-stream clip for the ceramic mug", {}, std::string("The mug is dishwasher safe and holds 350 ml.")};
  w.products["P1"] = {"P1", "S1", "Ceramic Mug", Money::parse("100.00"), 800, "kitchen", false, true, true, {"A2"}};
  w.products["P2"] = {"P2", "S2", "Fresh Cherries", Money::parse("59.90"), 1000, "fruit", true, false, false, {}};
  w.products["P3"] = {"P3", "S1", "Linen Apron", Money::parse("40.00"), 300, "kitchen", false, false, false, {}};
  w.orders["O1"] = {"O1", "U1", "P1", 3, Money::parse("100.00"), Timestamp::parse("2025-06-10 14:00"),
                    "12 Willow Lane, Hangzhou", OrderStatus::Paid, true, {}};
  w.orders["O2"] = {"O2", "U1", "P1", 1, Money::parse("100.00"), Timestamp::parse("2025-06-09 08:00"),
                    "12 Willow Lane, Hangzhou", OrderStatus::Paid, false, {}};
  w.orders["O3"] = {"O3", "U2", "P1", 1, Money::parse("100.00"), Timestamp::parse("2025-06-05 09:30"),
                    "7 Pine Street, Suzhou", OrderStatus::Completed, true, {}};
  w.orders["O4"] = {"O4", "U2", "P2", 2, Money::parse("59.90"), Timestamp::parse("2025-06-08 20:00"),
                    "7 Pine Street, Suzhou", OrderStatus::Completed, false, {}};
  w.logistics["L2"] = {"L2", "O2", "SwiftExpress", Timestamp::parse("2025-06-10 09:00"), "12 Willow Lane, Hangzhou",
                       LogisticsState::InTransit, std::nullopt};
  w.logistics["L3"] = {"L3", "O3", "EcoPost", Timestamp::parse("2025-06-06 08:00"), "7 Pine Street, Suzhou",
                       LogisticsState::Delivered, Timestamp::parse("2025-06-09 10:00")};
  w.logistics["L4"] = {"L4", "O4", "FreshLine", Timestamp::parse("2025-06-09 06:00"), "7 Pine Street, Suzhou",
                       LogisticsState::Delivered, Timestamp::parse("2025-06-10 06:00")};
  w.coupons["C1"] = {"C1", "U1", 1, Money::parse("5.00"), Money::parse("50.00"), {"kitchen"}};
  w.coupons["C2"] = {"C2", "U1", 1, Money::parse("8.00"), Money::parse("120.00"), {"kitchen"}};
  w.coupons["C3"] = {"C3", "U1", 2, Money::parse("10.00"), Money::parse("80.00"), {"kitchen", "fruit"}};
  return w;
}

// A one-demand logistics task over the fixture world: U1 asks when O2 arrives.
inline TaskSpec fixture_task() {
  TaskSpec t;
  t.task_id = "T-fixture";
  t.family = Family::Logistics;
  t.profile.persona = {"U1", "Alice Chen", 3, "12 Willow Lane, Hangzhou", Mood::Calm};
  Demand d;
  d.kind = DemandKind::ArrivalQuery;
  d.utterance = "When will my order O2 arrive? [Image 1]";
  d.order_id = "O2";
  d.logistics_id = "L2";
  t.profile.demands.push_back(d);
  t.question_type.family = Family::Logistics;
  t.question_type.logistics_intents = {LogisticsIntent::ArrivalQuery};
  t.media = {"A1", "A2"};
  t.initial_world = fixture_world();
  t.ground_truth_world = t.initial_world;
  t.key_answers = {"09:00 on June 12"};
  t.reference_plan = "Look up the shipment, estimate the arrival time, tell the customer.";
  t.rules_scope = {"basic"};
  return t;
}

}  // namespace shopbench::testing
