#include <set>

#include "random.hpp"
#include "shopbench/forge.hpp"

namespace shopbench {

namespace {

using forge::Rng;

struct CategoryInfo {
  std::string name;
  bool fresh;
  std::vector<std::string> nouns;
  std::int64_t min_weight_g;
  std::int64_t max_weight_g;
};

const std::vector<CategoryInfo>& categories() {
  static const std::vector<CategoryInfo> kCategories = {
      {"kitchen", false, {"Mug", "Kettle", "Cutting Board", "Teapot", "Chef Knife", "Mixing Bowl"}, 200, 2500},
      {"apparel", false, {"Linen Shirt", "Wool Scarf", "Rain Jacket", "Canvas Cap", "Cotton Socks"}, 100, 1200},
      {"electronics", false, {"Desk Lamp", "Bluetooth Speaker", "Power Bank", "Wireless Mouse", "Alarm Clock"}, 150, 1800},
      {"stationery", false, {"Notebook", "Fountain Pen", "Desk Organizer", "Sketchbook", "Pencil Case"}, 50, 900},
      {"home", false, {"Throw Pillow", "Bath Towel", "Storage Basket", "Wall Clock", "Doormat"}, 300, 3000},
      {"fruit", true, {"Cherries", "Mangoes", "Lychees", "Blueberries", "Kiwis"}, 500, 3000},
      {"seafood", true, {"Prawns", "Scallops", "Hairy Crab", "Sea Bass"}, 500, 2500},
  };
  return kCategories;
}

const std::vector<std::string> kAdjectives = {"Classic", "Deluxe", "Compact", "Premium", "Everyday",
                                              "Organic", "Rustic",  "Nordic",  "Golden",  "Harbor"};

const std::vector<BrandTariff>& brand_pool() {
  static const std::vector<BrandTariff> kBrands = {
      {"SwiftExpress", 48, Money::parse("5.00"), Money::parse("2.00")},
      {"EcoPost", 72, Money::parse("4.00"), Money::parse("1.50")},
      {"FreshLine", 24, Money::parse("6.00"), Money::parse("3.00")},
      {"JadeCourier", 36, Money::parse("5.50"), Money::parse("1.80")},
      {"NorthStar", 60, Money::parse("4.50"), Money::parse("1.20")},
      {"MetroDash", 30, Money::parse("7.00"), Money::parse("2.50")},
  };
  return kBrands;
}

const std::vector<std::string> kShopNames = {"Blue Harbor Home", "Orchard Direct", "Maple Supply", "Lotus Lane",
                                             "River Stone Goods", "Cloud Nine Store", "Pearl Market", "Bamboo Corner"};
const std::vector<std::string> kFirstNames = {"Alice", "Bo", "Chen", "Dana", "Eli", "Fang", "Grace", "Hao",
                                              "Iris", "Jun", "Kai", "Lena", "Min", "Nora", "Omar", "Ping"};
const std::vector<std::string> kLastNames = {"Chen", "Li", "Wang", "Zhao", "Liu", "Sun", "Zhou", "Wu", "Xu", "Lin"};
const std::vector<std::string> kStreets = {"Willow Lane", "Pine Street", "Harbor Road", "Orchard Way", "Maple Avenue",
                                           "Lake Road", "Garden Street", "Bridge Lane", "Station Road", "Hill Street"};
const std::vector<std::string> kCities = {"Hangzhou", "Suzhou", "Ningbo", "Jiaxing", "Wuxi", "Shaoxing", "Nanjing"};
const std::vector<std::string> kColors = {"red", "navy", "ivory", "olive", "charcoal", "sky blue"};
const std::vector<std::string> kGifts = {"tote bag", "spare lid", "travel pouch", "sample pack"};

std::string address(Rng& rng) {
  return std::to_string(rng.range(1, 199)) + " " + rng.pick(kStreets) + ", " + rng.pick(kCities);
}

std::string clip_fact(Rng& rng) {
  switch (rng.range(0, 2)) {
    case 0:
      return "It comes with a " + std::to_string(rng.pick(std::vector<int>{3, 6, 12, 24})) + "-month warranty";
    case 1: {
      auto two = rng.sample(kColors, 2);
      return "It is available in " + two[0] + " and " + two[1];
    }
    default:
      return "Orders placed during the stream include a free " + rng.pick(kGifts);
  }
}

enum class Stage { Unshipped, InTransit, DeliveredRecent, DeliveredOld, Intercepted, Cancelled, Refunded, Returning };

Stage pick_stage(Rng& rng) {
  const auto r = rng.range(0, 99);
  if (r < 24) return Stage::Unshipped;
  if (r < 48) return Stage::InTransit;
  if (r < 72) return Stage::DeliveredRecent;
  if (r < 80) return Stage::DeliveredOld;
  if (r < 88) return Stage::Intercepted;
  if (r < 92) return Stage::Cancelled;
  if (r < 96) return Stage::Refunded;
  return Stage::Returning;
}

}  // namespace

WorldConfig world_config_preset(std::string_view name) {
  WorldConfig c;
  if (name == "empty") {
    c.orders = 0;
  } else if (name == "small") {
    c.merchants = 3;
    c.products_per_merchant = 3;
    c.users = 4;
    c.orders = 12;
  } else if (name == "large") {
    c.merchants = 8;
    c.products_per_merchant = 6;
    c.users = 16;
    c.orders = 80;
  } else if (name != "default") {
    throw std::invalid_argument("unknown world size '" + std::string(name) + "' (empty, small, default, large)");
  }
  return c;
}

WorldData generate_world(std::uint64_t seed, const WorldConfig& config) {
  if (config.merchants < 1 || config.products_per_merchant < 1 || config.users < 1 || config.orders < 0)
    throw std::invalid_argument("world config needs at least one merchant, product and user");
  Rng rng(seed);
  WorldData w;
  for (const auto& t : brand_pool()) w.brand_tariffs[t.brand] = t;

  std::vector<std::string> brand_names;
  for (const auto& t : brand_pool()) brand_names.push_back(t.brand);

  const auto now = kSystemNow;
  std::set<std::string> used_names;
  for (int m = 1; m <= config.merchants; ++m) {
    MerchantRecord shop;
    shop.shop_id = "S" + std::to_string(m);
    shop.name = kShopNames[static_cast<std::size_t>(m - 1) % kShopNames.size()];
    if (m > static_cast<int>(kShopNames.size())) shop.name += " " + std::to_string(m);
    shop.return_address = address(rng);
    shop.brands = rng.sample(brand_names, static_cast<std::size_t>(rng.range(1, 3)));
    shop.allows_brand_choice = shop.brands.size() > 1 && rng.chance(0.6);
    shop.promised_shipping_hours = static_cast<int>(rng.range(1, 6)) * 12;
    shop.max_compensation_bp = rng.range(3, 15) * 100;
    w.merchants[shop.shop_id] = shop;

    for (int k = 1; k <= config.products_per_merchant; ++k) {
      const auto& cat = rng.pick(categories());
      ProductRecord p;
      p.item_id = "P" + std::to_string(static_cast<int>(w.products.size()) + 1);
      p.shop_id = shop.shop_id;
      for (int attempt = 0; attempt < 20 && (p.name.empty() || used_names.count(p.name)); ++attempt)
        p.name = rng.pick(kAdjectives) + " " + rng.pick(cat.nouns);
      if (used_names.count(p.name)) p.name += " " + p.item_id;
      used_names.insert(p.name);
      p.price = Money::from_fen(rng.range(99, 3990) * 10);
      p.unit_weight_g = rng.range(cat.min_weight_g / 50, cat.max_weight_g / 50) * 50;
      p.category = cat.name;
      p.is_fresh_perishable = cat.fresh;
      p.is_support_7d_back = !cat.fresh && rng.chance(0.7);
      p.has_shipping_insurance = rng.chance(0.5);

      AssetRef photo{"IMG-" + p.item_id, Modality::Image,
                     "Product photo: " + p.name + " (item " + p.item_id + ", category " + p.category + ")", {},
                     std::nullopt};
      w.assets[photo.asset_id] = photo;
      p.asset_refs.push_back(photo.asset_id);
      if (rng.chance(config.video_share)) {
        AssetRef clip{"VID-" + p.item_id, Modality::Video, "Live-stream clip presenting the " + p.name, {},
                      "Welcome back to the live room! Today we are showing the " + p.name + ". " + clip_fact(rng) + "."};
        w.assets[clip.asset_id] = clip;
        p.asset_refs.push_back(clip.asset_id);
      }
      w.products[p.item_id] = p;
    }
  }

  for (int u = 1; u <= config.users; ++u) {
    UserRecord user;
    user.user_id = "U" + std::to_string(u);
    user.name = rng.pick(kFirstNames) + " " + rng.pick(kLastNames);
    user.level = static_cast<int>(rng.range(1, 4));
    user.default_address = address(rng);
    w.users[user.user_id] = user;
  }

  std::vector<std::string> product_ids, user_ids;
  for (const auto& [id, p] : w.products) product_ids.push_back(id);
  for (const auto& [id, u] : w.users) user_ids.push_back(id);

  for (int n = 1; n <= config.orders; ++n) {
    const auto& product = w.products.at(rng.pick(product_ids));
    const auto& shop = w.merchants.at(product.shop_id);
    const auto& user = w.users.at(rng.pick(user_ids));
    OrderRecord o;
    o.order_id = "O" + std::to_string(n);
    o.user_id = user.user_id;
    o.item_id = product.item_id;
    o.quantity = static_cast<int>(rng.range(1, 3));
    o.payment_amount = product.price * o.quantity;
    o.receive_address = user.default_address;
    o.has_shipping_insurance = product.has_shipping_insurance;

    const Stage stage = pick_stage(rng);
    const auto& brand = rng.pick(shop.brands);
    const int transit = w.brand_tariffs.at(brand).transit_hours;
    LogisticsRecord l;
    l.logistics_id = "L" + std::to_string(n);
    l.order_id = o.order_id;
    l.brand = brand;
    bool shipped = true;
    switch (stage) {
      case Stage::Unshipped:
      case Stage::Cancelled:
        o.payment_time = Timestamp{now.minutes - rng.range(2 * 60, 40 * 60)};
        o.status = stage == Stage::Cancelled ? OrderStatus::Cancelled : OrderStatus::Paid;
        shipped = false;
        break;
      case Stage::InTransit:
      case Stage::Intercepted:
        l.pickup_time = now.plus_hours(-rng.range(2, transit - 1));
        o.payment_time = Timestamp{l.pickup_time.minutes - rng.range(4 * 60, 30 * 60)};
        o.status = OrderStatus::Paid;
        if (stage == Stage::Intercepted) {
          l.state = LogisticsState::Intercepted;
          o.receive_address = l.receive_address = address(rng);
        }
        break;
      default: {
        const std::int64_t ago_h =
            stage == Stage::DeliveredOld ? rng.range(8 * 24, 20 * 24) : rng.range(6, 6 * 24);
        l.delivered_time = now.plus_hours(-ago_h);
        l.pickup_time = l.delivered_time->plus_hours(-transit);
        o.payment_time = Timestamp{l.pickup_time.minutes - rng.range(4 * 60, 30 * 60)};
        l.state = LogisticsState::Delivered;
        o.status = stage == Stage::Refunded    ? OrderStatus::Refunded
                   : stage == Stage::Returning ? OrderStatus::Returning
                                               : OrderStatus::Completed;
        break;
      }
    }
    if (shipped) {
      if (l.receive_address.empty()) l.receive_address = o.receive_address;
      w.logistics[l.logistics_id] = l;
    }
    w.orders[o.order_id] = o;
  }

  std::vector<std::string> category_names;
  for (const auto& c : categories()) category_names.push_back(c.name);
  int coupon_no = 0;
  for (const auto& uid : user_ids) {
    const auto k = rng.range(0, config.max_coupons_per_user);
    for (std::int64_t i = 0; i < k; ++i) {
      CouponRecord c;
      c.coupon_id = "C" + std::to_string(++coupon_no);
      c.user_id = uid;
      c.level = static_cast<int>(rng.range(1, 3));
      c.amount_off = Money::from_yuan(rng.range(3, 30));
      c.minimum_purchase = Money::from_yuan(c.amount_off.fen / 100 * rng.range(2, 10));
      c.category_list = rng.sample(category_names, static_cast<std::size_t>(rng.range(1, 2)));
      w.coupons[c.coupon_id] = c;
    }
  }

  validate_world(w);
  return w;
}

}  // namespace shopbench
