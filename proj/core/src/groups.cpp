#include "debias/groups.hpp"

#include <algorithm>

#include <json.hpp>

namespace debias {

const char* to_string(GroupKind k) {
  switch (k) {
    case GroupKind::Indep: return "INDEP";
    case GroupKind::Inter: return "INTER";
    case GroupKind::Gerry: return "GERRY";
  }
  return "GERRY";
}

GroupKind group_kind_from_string(const std::string& s) {
  if (s == "INDEP" || s == "indep") return GroupKind::Indep;
  if (s == "INTER" || s == "inter") return GroupKind::Inter;
  if (s == "GERRY" || s == "gerry") return GroupKind::Gerry;
  fail(ErrorCode::Config, "unknown group kind '" + s + "'");
}

bool GroupDef::matches(const Eigen::MatrixXi& protected_values, Index row) const {
  for (const auto& [attr, value] : assignment)
    if (protected_values(row, attr) != value) return false;
  return true;
}

namespace {

std::string build_label(const AttributeSchema& schema, const std::vector<std::pair<int, int>>& assignment) {
  std::string label;
  for (const auto& [attr, value] : assignment) {
    if (!label.empty()) label += "&";
    label += schema.attributes[attr].name + "=" + std::to_string(value);
  }
  return label;
}

void emit(std::vector<GroupDef>& out, const AttributeSchema& schema,
          std::vector<std::pair<int, int>> assignment, GroupKind kind) {
  GroupDef def;
  def.kind = kind;
  def.label = build_label(schema, assignment);
  def.assignment = std::move(assignment);
  out.push_back(std::move(def));
}

// All assignments fixing exactly the attributes in `subset`, value order
// lexicographic.
void emit_value_combinations(std::vector<GroupDef>& out, const AttributeSchema& schema,
                             const std::vector<int>& subset, GroupKind kind) {
  std::vector<int> values(subset.size(), 0);
  while (true) {
    std::vector<std::pair<int, int>> assignment;
    assignment.reserve(subset.size());
    for (std::size_t j = 0; j < subset.size(); ++j) assignment.emplace_back(subset[j], values[j]);
    emit(out, schema, std::move(assignment), kind);
    int pos = static_cast<int>(values.size()) - 1;
    while (pos >= 0) {
      if (++values[pos] < schema.attributes[subset[pos]].cardinality) break;
      values[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
}

}  // namespace

std::vector<GroupDef> enumerate_groups(const AttributeSchema& schema, GroupKind kind) {
  schema.validate();
  const int k = schema.num_attributes();
  std::vector<GroupDef> out;

  switch (kind) {
    case GroupKind::Indep:
      for (int a = 0; a < k; ++a)
        for (int v = 0; v < schema.attributes[a].cardinality; ++v)
          emit(out, schema, {{a, v}}, kind);
      break;
    case GroupKind::Inter: {
      std::vector<int> all(k);
      for (int a = 0; a < k; ++a) all[a] = a;
      emit_value_combinations(out, schema, all, kind);
      break;
    }
    case GroupKind::Gerry: {
      // nonempty attribute subsets by (size, lexicographic indices)
      std::vector<std::vector<int>> subsets;
      for (std::uint32_t bits = 1; bits < (1u << k); ++bits) {
        std::vector<int> subset;
        for (int a = 0; a < k; ++a)
          if (bits & (1u << a)) subset.push_back(a);
        subsets.push_back(std::move(subset));
      }
      std::sort(subsets.begin(), subsets.end(), [](const auto& x, const auto& y) {
        if (x.size() != y.size()) return x.size() < y.size();
        return x < y;
      });
      for (const auto& subset : subsets) emit_value_combinations(out, schema, subset, kind);
      break;
    }
  }
  return out;
}

GroupSet build_group_set(const std::vector<GroupDef>& defs, const Dataset& ds) {
  const int k = ds.schema.num_attributes();
  for (const GroupDef& def : defs) {
    for (const auto& [attr, value] : def.assignment) {
      if (attr < 0 || attr >= k)
        fail(ErrorCode::Config, "group def '" + def.label + "' references unknown attribute");
      if (value < 0 || value >= ds.schema.attributes[attr].cardinality)
        fail(ErrorCode::Config, "group def '" + def.label + "' references value out of range");
    }
  }

  GroupSet gs;
  gs.defs = defs;
  if (!defs.empty()) gs.kind = defs.front().kind;
  const Index n = ds.size();
  gs.masks.resize(defs.size());
  gs.member_counts.assign(defs.size(), 0);
  gs.positive_counts.assign(defs.size(), 0);
  for (std::size_t g = 0; g < defs.size(); ++g) {
    gs.masks[g].assign(n, 0);
    for (Index i = 0; i < n; ++i) {
      if (defs[g].matches(ds.protected_values, i)) {
        gs.masks[g][i] = 1;
        ++gs.member_counts[g];
        if (ds.labels[i] == 1) ++gs.positive_counts[g];
      }
    }
  }
  return gs;
}

GroupSet build_group_set(const AttributeSchema& schema, GroupKind kind, const Dataset& ds) {
  return build_group_set(enumerate_groups(schema, kind), ds);
}

std::string group_report_json(const GroupSet& groups) {
  nlohmann::json report = nlohmann::json::array();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    report.push_back({{"label", groups.defs[g].label},
                      {"size", groups.member_counts[g]},
                      {"positives", groups.positive_counts[g]}});
  }
  return report.dump(2);
}

}  // namespace debias
