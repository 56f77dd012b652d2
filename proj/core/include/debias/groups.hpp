#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "debias/data.hpp"

namespace debias {

enum class GroupKind { Indep, Inter, Gerry };

const char* to_string(GroupKind k);
GroupKind group_kind_from_string(const std::string& s);

// A subgroup as a partial assignment over attributes; attributes not listed
// are wildcards. INDEP fixes exactly one attribute, INTER fixes all of them,
// GERRY fixes any nonempty subset.
struct GroupDef {
  std::vector<std::pair<int, int>> assignment;  // (attribute index, value), sorted by attribute
  GroupKind kind = GroupKind::Gerry;
  std::string label;

  bool matches(const Eigen::MatrixXi& protected_values, Index row) const;
};

// Deterministic order: by number of fixed attributes, then fixed attribute
// indices, then values. Counts for k binary attributes: INDEP 2k,
// INTER 2^k, GERRY 3^k - 1 (the all-wildcard group is excluded; its
// violation term is identically zero).
std::vector<GroupDef> enumerate_groups(const AttributeSchema& schema, GroupKind kind);

struct GroupSet {
  GroupKind kind = GroupKind::Gerry;
  std::vector<GroupDef> defs;
  std::vector<std::vector<std::uint8_t>> masks;  // per def, length n
  std::vector<Index> member_counts;              // |g|
  std::vector<Index> positive_counts;            // |g intersect {y=1}|

  std::size_t size() const { return defs.size(); }
};

GroupSet build_group_set(const std::vector<GroupDef>& defs, const Dataset& ds);
GroupSet build_group_set(const AttributeSchema& schema, GroupKind kind, const Dataset& ds);

// JSON array [{"label": ..., "size": ..., "positives": ...}, ...]
std::string group_report_json(const GroupSet& groups);

}  // namespace debias
