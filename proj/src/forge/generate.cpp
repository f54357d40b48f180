#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

#include "random.hpp"
#include "shopbench/forge.hpp"

namespace shopbench {

namespace {

using forge::Rng;

struct Draft {
  UserProfile profile;
  std::vector<std::string> media;
  WorldData world;
};

const std::vector<std::string> kNewStreets = {"Jasmine Road", "Canal Street", "Temple Lane", "Cedar Avenue",
                                              "Spring Road", "Market Street"};
const std::vector<std::string> kNewCities = {"Hangzhou", "Shanghai", "Suzhou", "Ningbo", "Hefei"};

std::string new_address(Rng& rng) {
  return std::to_string(rng.range(200, 399)) + " " + rng.pick(kNewStreets) + ", " + rng.pick(kNewCities);
}

Persona persona_for(const UserRecord& u, Rng& rng) {
  return {u.user_id, u.name, u.level, u.default_address, rng.chance(0.25) ? Mood::Impatient : Mood::Calm};
}

std::string ids(const OrderRecord& o, const LogisticsRecord* l) {
  std::string s = " (user_id: " + o.user_id + ", order_id: " + o.order_id;
  if (l) s += ", logistics_id: " + l->logistics_id;
  return s + ")";
}

Demand order_demand(DemandKind kind, const OrderRecord& o, const LogisticsRecord* l) {
  Demand d;
  d.kind = kind;
  d.order_id = o.order_id;
  if (l) d.logistics_id = l->logistics_id;
  return d;
}

struct OrderPools {
  std::vector<std::string> unshipped, in_transit, delivered, intercepted;
};

OrderPools order_pools(const WorldData& w) {
  OrderPools p;
  for (const auto& [id, o] : w.orders) {
    const auto* l = w.logistics_for_order(id);
    if (!l) {
      if (o.status == OrderStatus::Paid) p.unshipped.push_back(id);
    } else if (l->state == LogisticsState::InTransit && o.status == OrderStatus::Paid) {
      p.in_transit.push_back(id);
    } else if (l->state == LogisticsState::Delivered && o.status == OrderStatus::Completed) {
      p.delivered.push_back(id);
    } else if (l->state == LogisticsState::Intercepted && o.status == OrderStatus::Paid) {
      p.intercepted.push_back(id);
    }
  }
  return p;
}

// --- logistics ---------------------------------------------------------------

std::optional<Draft> logistics_draft(Rng& rng, const WorldData& w) {
  using K = DemandKind;
  const auto pools = order_pools(w);
  std::vector<std::pair<const std::vector<std::string>*, int>> stages = {
      {&pools.unshipped, 3}, {&pools.in_transit, 3}, {&pools.delivered, 3}, {&pools.intercepted, 1}};
  std::vector<const std::vector<std::string>*> weighted;
  for (auto [pool, weight] : stages)
    if (!pool->empty())
      for (int i = 0; i < weight; ++i) weighted.push_back(pool);
  if (weighted.empty()) return std::nullopt;
  const auto* pool = rng.pick(weighted);
  const auto& o = w.orders.at(rng.pick(*pool));
  const auto* l = w.logistics_for_order(o.order_id);
  const auto& product = w.products.at(o.item_id);
  const auto& shop = w.merchants.at(product.shop_id);

  std::vector<std::vector<K>> combos;
  if (pool == &pools.unshipped) {
    combos = {{K::ArrivalQuery},     {K::AddressChange},
              {K::BrandRequest},     {K::CostQuery},
              {K::BrandRequest, K::ArrivalQuery}, {K::ArrivalQuery, K::AddressChange},
              {K::BrandRequest, K::ArrivalQuery, K::AddressChange}, {K::CostQuery, K::BrandRequest}};
  } else if (pool == &pools.in_transit) {
    combos = {{K::ArrivalQuery},     {K::AddressChange},  {K::ArrivalQuery, K::AddressChange},
              {K::BrandRequest},     {K::ReturnCostQuery}, {K::ArrivalQuery, K::ReturnCostQuery}};
  } else if (pool == &pools.delivered) {
    combos = {{K::SignedNotReceived}, {K::ReturnCostQuery}, {K::SignedNotReceived, K::ReturnCostQuery}};
    const bool returnable = product.is_support_7d_back && !product.is_fresh_perishable &&
                            kSystemNow.minutes - l->delivered_time->minutes <= kReturnWindowMinutes;
    if (!returnable) combos.push_back({K::AddressChange});
  } else {
    combos = {{K::AddressChange}};
  }

  Draft draft;
  draft.world = w;
  draft.profile.persona = persona_for(w.users.at(o.user_id), rng);
  const std::string tail = ids(o, l);
  for (K kind : rng.pick(combos)) {
    Demand d = order_demand(kind, o, l);
    switch (kind) {
      case K::ArrivalQuery:
        d.utterance = "When will my order arrive?";
        break;
      case K::AddressChange:
        d.address = new_address(rng);
        d.utterance = "I need to change the delivery address of my order to " + *d.address + ".";
        break;
      case K::BrandRequest: {
        std::vector<std::string> others;
        for (const auto& [brand, t] : w.brand_tariffs)
          if (std::find(shop.brands.begin(), shop.brands.end(), brand) == shop.brands.end()) others.push_back(brand);
        d.brand = others.empty() || rng.chance(0.7) ? rng.pick(shop.brands) : rng.pick(others);
        d.utterance = "Could you ship my order with " + *d.brand + "?";
        break;
      }
      case K::CostQuery:
        d = Demand{};
        d.kind = K::CostQuery;
        d.item_id = product.item_id;
        d.quantity = static_cast<int>(rng.range(1, 3));
        d.brand = rng.pick(shop.brands);
        d.utterance = "How much would shipping cost for " + std::to_string(*d.quantity) + " more of the " +
                      product.name + " (item " + product.item_id + ") with " + *d.brand + "?";
        break;
      case K::ReturnCostQuery:
        d.utterance = "If I sent this order back, how much would the return shipping cost?";
        break;
      case K::SignedNotReceived:
        d.utterance = "The tracking says my parcel was signed for, but I never received it.";
        break;
      default:
        break;
    }
    d.utterance += tail;
    draft.profile.demands.push_back(d);
  }
  return draft;
}

// --- after-sales ---------------------------------------------------------------

std::optional<Draft> after_sales_draft(Rng& rng, const WorldData& w, const GenConfig& cfg) {
  const auto pools = order_pools(w);
  // Evidence-based reasons split the non-personal share 20:25:25.
  const double roll = static_cast<double>(rng.range(0, 9999)) / 10000.0;
  const double evidence = 1.0 - cfg.personal_reason_share;
  const AfterSalesReason reason = roll < evidence * 20 / 70   ? AfterSalesReason::MissingOrWrong
                                  : roll < evidence * 45 / 70 ? AfterSalesReason::TransitDamage
                                  : roll < evidence           ? AfterSalesReason::QualityIssue
                                                              : AfterSalesReason::PersonalReason;
  std::vector<std::string> candidates = pools.delivered;
  if (reason == AfterSalesReason::PersonalReason) {
    candidates.insert(candidates.end(), pools.unshipped.begin(), pools.unshipped.end());
    candidates.insert(candidates.end(), pools.in_transit.begin(), pools.in_transit.end());
  }
  if (candidates.empty()) return std::nullopt;
  std::sort(candidates.begin(), candidates.end());
  const auto& o = w.orders.at(rng.pick(candidates));
  const auto* l = w.logistics_for_order(o.order_id);
  const auto& product = w.products.at(o.item_id);

  Draft draft;
  draft.world = w;
  draft.profile.persona = persona_for(w.users.at(o.user_id), rng);
  Demand d = order_demand(DemandKind::AfterSales, o, l);
  d.reason = reason;
  d.used = l && l->state == LogisticsState::Delivered && rng.chance(0.25);

  std::string text;
  switch (reason) {
    case AfterSalesReason::MissingOrWrong:
      d.solution = DesiredSolution::Reship;
      text = "Some of the " + product.name + " I ordered were missing from the parcel. Please send the missing items.";
      break;
    case AfterSalesReason::PersonalReason:
      d.solution = DesiredSolution::RefundAndReturn;
      text = "I changed my mind about the " + product.name + " and would like to return it for a refund.";
      break;
    default: {
      if (product.is_fresh_perishable) {
        d.solution = DesiredSolution::RefundOnly;
      } else {
        const auto s = rng.range(0, 99);
        d.solution = s < 40 ? DesiredSolution::RedEnvelope
                     : s < 85 ? DesiredSolution::RefundAndReturn
                              : DesiredSolution::RefundOnly;
      }
      text = reason == AfterSalesReason::TransitDamage ? "The " + product.name + " from my order arrived damaged."
                                                       : "The " + product.name + " I received has a quality problem.";
      text += *d.solution == DesiredSolution::RedEnvelope       ? " I would like some compensation."
              : *d.solution == DesiredSolution::RefundAndReturn ? " I want to return it for a refund."
                                                                : " I want my money back without sending it back.";
      break;
    }
  }
  if (draft.profile.persona.mood == Mood::Impatient) text = "This is really frustrating! " + text;

  if (reason != AfterSalesReason::PersonalReason) {
    const bool late = rng.chance(cfg.late_picture_share);
    const bool none = late && rng.chance(cfg.late_without_picture_share);
    if (!none) {
      const bool supports = rng.chance(cfg.evidence_support_share);
      std::string what;
      switch (reason) {
        case AfterSalesReason::MissingOrWrong:
          what = supports ? "the opened parcel holds fewer " + product.name + " than ordered"
                          : "the opened parcel with every ordered item present";
          break;
        case AfterSalesReason::TransitDamage:
          what = supports ? "the " + product.name + " with a cracked casing and a crushed box"
                          : "the " + product.name + " intact in an undamaged box";
          break;
        default:
          what = supports ? "the " + product.name + " with a clear manufacturing defect"
                          : "the " + product.name + " without any visible defect";
          break;
      }
      AssetRef ev{"EV-" + o.order_id, Modality::Image, "Customer photo for order " + o.order_id + ": " + what,
                  {{std::string(claim_kind(reason)), supports}}, std::nullopt};
      draft.world.assets[ev.asset_id] = ev;
      draft.media.push_back(ev.asset_id);
      d.evidence_asset = ev.asset_id;
      if (!late) text += " [Image 1]";
    }
  }
  d.utterance = text + ids(o, l);
  draft.profile.demands.push_back(d);
  return draft;
}

// --- pre-sales -------------------------------------------------------------------

std::optional<Draft> pre_sales_draft(Rng& rng, const WorldData& w, const GenConfig& cfg) {
  if (w.orders.empty()) return std::nullopt;
  std::vector<std::string> order_ids;
  for (const auto& [id, o] : w.orders) order_ids.push_back(id);
  const auto& anchor = w.orders.at(rng.pick(order_ids));
  Draft draft;
  draft.world = w;
  draft.profile.persona = persona_for(w.users.at(anchor.user_id), rng);
  const std::string tail = " (user_id: " + anchor.user_id + ")";

  std::vector<const ProductRecord*> with_clip;
  for (const auto& [id, p] : w.products)
    if (w.assets.count("VID-" + id)) with_clip.push_back(&p);

  Demand d;
  if (!with_clip.empty() && rng.chance(cfg.presales_video_share)) {
    const auto& p = *rng.pick(with_clip);
    d.kind = DemandKind::LivestreamQuery;
    d.item_id = p.item_id;
    d.topic = "live stream";
    draft.media.push_back("VID-" + p.item_id);
    d.utterance = "[Video 1] I watched this live stream about the " + p.name + ". What did the host say about it?" + tail;
  } else if (rng.chance(0.6)) {
    std::vector<std::string> product_ids;
    for (const auto& [id, p] : w.products) product_ids.push_back(id);
    const auto& p = w.products.at(rng.pick(product_ids));
    d.kind = DemandKind::CouponQuery;
    d.item_id = p.item_id;
    draft.media.push_back("IMG-" + p.item_id);
    d.utterance = "[Image 1] I'd like to buy this. What is the lowest price I can pay with my coupons?" + tail;
  } else {
    std::map<std::string, std::vector<const ProductRecord*>> by_category;
    for (const auto& [id, p] : w.products) by_category[p.category].push_back(&p);
    std::vector<std::string> cats;
    for (const auto& [c, list] : by_category) cats.push_back(c);
    const auto& cat = rng.pick(cats);
    auto list = by_category.at(cat);
    std::sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
      return a->price != b->price ? a->price < b->price : a->item_id < b->item_id;
    });
    const Money cheapest = list.front()->price;
    std::int64_t budget_yuan = 0;
    if (rng.chance(0.3)) {
      budget_yuan = cheapest.fen / 100 - rng.range(1, 10);
      if (budget_yuan < 1) return std::nullopt;
    } else {
      budget_yuan = (cheapest.fen + 99) / 100;
      if (list.size() > 1 && list[1]->price <= Money::from_yuan(budget_yuan)) return std::nullopt;
    }
    d.kind = DemandKind::RecommendationQuery;
    d.category = cat;
    d.budget = Money::from_yuan(budget_yuan);
    draft.media.push_back("IMG-" + rng.pick(list)->item_id);
    d.utterance = "[Image 1] I'm looking for something like this for at most " + std::to_string(budget_yuan) +
                  " RMB. What would you recommend?" + tail;
  }
  draft.profile.demands.push_back(d);
  return draft;
}

std::string task_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%04d", index + 1);
  return buf;
}

struct Slot {
  std::optional<TaskSpec> task;
  std::map<std::string, int> rejections;
};

/// Family of every slot: each family gets its share of the count (largest
/// remainder), spread over the slots by a seeded shuffle.
std::vector<Family> family_plan(const GenConfig& cfg) {
  const std::vector<std::pair<Family, double>> shares = {
      {Family::Logistics, cfg.logistics_share},
      {Family::AfterSales, cfg.after_sales_share},
      {Family::PreSales, std::max(0.0, 1.0 - cfg.logistics_share - cfg.after_sales_share)}};
  std::vector<int> quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t f = 0; f < shares.size(); ++f) {
    const double exact = shares[f].second * cfg.count;
    quota.push_back(static_cast<int>(exact));
    assigned += quota.back();
    remainders.emplace_back(exact - quota.back(), f);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < cfg.count; i = (i + 1) % remainders.size(), ++assigned)
    ++quota[remainders[i].second];
  std::vector<Family> plan;
  for (std::size_t f = 0; f < shares.size(); ++f) plan.insert(plan.end(), static_cast<std::size_t>(quota[f]), shares[f].first);
  Rng rng(forge::substream(cfg.seed, ~0ULL));
  for (std::size_t i = plan.size(); i > 1; --i)
    std::swap(plan[i - 1], plan[static_cast<std::size_t>(rng.range(0, static_cast<std::int64_t>(i) - 1))]);
  return plan;
}

Slot derive_slot(int index, Family family, const WorldData& world, const GenConfig& cfg) {
  Slot slot;
  Rng rng(forge::substream(cfg.seed, static_cast<std::uint64_t>(index)));
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::optional<Draft> draft;
    switch (family) {
      case Family::Logistics:
        draft = logistics_draft(rng, world);
        break;
      case Family::AfterSales:
        draft = after_sales_draft(rng, world, cfg);
        break;
      case Family::PreSales:
        draft = pre_sales_draft(rng, world, cfg);
        break;
    }
    if (!draft) {
      ++slot.rejections["no-candidate"];
      continue;
    }
    try {
      TaskSpec t = build_task(task_id(index), std::move(draft->profile), std::move(draft->media),
                              std::move(draft->world));
      const auto report = validate_task(t);
      if (!report.pass) {
        for (const auto& g : report.gates)
          if (!g.passed) ++slot.rejections["gate:" + g.gate];
        continue;
      }
      slot.task = std::move(t);
      return slot;
    } catch (const ForgeError&) {
      ++slot.rejections["derivation"];
    }
  }
  ++slot.rejections["attempts-exhausted"];
  return slot;
}

}  // namespace

GenReport generate_tasks(const GenConfig& cfg) {
  if (cfg.count < 0) throw std::invalid_argument("task count must be >= 0");
  GenReport report;
  report.world = generate_world(cfg.seed, cfg.world);
  if (report.world.orders.empty()) {
    report.empty_reason = "the world has no orders, and every scenario starts from a customer's order";
    return report;
  }

  if (cfg.logistics_share < 0 || cfg.after_sales_share < 0 || cfg.logistics_share + cfg.after_sales_share > 1.0 + 1e-9)
    throw std::invalid_argument("family shares must be non-negative and sum to at most 1");
  const auto families = family_plan(cfg);
  std::vector<Slot> slots(static_cast<std::size_t>(cfg.count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.count; i = next++) slots[static_cast<std::size_t>(i)] = derive_slot(i, families[static_cast<std::size_t>(i)], report.world, cfg);
  };
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::max(1, std::min(threads, cfg.count));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (auto& s : slots) {
    for (const auto& [reason, n] : s.rejections) {
      report.rejections[reason] += n;
      report.rejected += n;
    }
    if (s.task) report.tasks.push_back(std::move(*s.task));
  }
  return report;
}

ModalityStats modality_stats(const std::vector<TaskSpec>& tasks) {
  ModalityStats s;
  for (const auto& t : tasks) {
    ++s.tasks;
    bool image = false, video = false;
    for (const auto& id : t.media) {
      const auto& a = t.initial_world.assets.at(id);
      (a.modality == Modality::Image ? image : video) = true;
    }
    s.with_image += image;
    s.with_video += video;
  }
  return s;
}

}  // namespace shopbench
