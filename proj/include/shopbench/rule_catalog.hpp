#pragma once

#include <set>
#include <string>
#include <vector>

#include "shopbench/rules.hpp"

namespace shopbench {

struct Rule {
  std::string rule_id;
  std::string category;
  std::string text;

  bool operator==(const Rule&) const = default;
};

using RuleSet = std::vector<Rule>;

/// The closed set of category tags a rule may carry.
const std::vector<std::string>& rule_categories();

/// The built-in catalog of 82 domain rules. Ids are stable.
const RuleSet& builtin_rule_catalog();

json rule_catalog_to_json(const RuleSet& rules);
/// Throws std::invalid_argument on unknown categories or duplicate ids.
RuleSet rule_catalog_from_json(const json& doc);

/// Family -> category tags retained by the rule filter.
using CategoryMap = std::map<Family, std::vector<std::string>>;
const CategoryMap& default_category_map();
CategoryMap category_map_from_json(const json& j);

/// Rules whose category is mapped from any of the given families. `basic`
/// is always retained. Catalog order is preserved.
RuleSet filter_rules(const RuleSet& catalog, const std::set<Family>& families, const CategoryMap& map);

}  // namespace shopbench
