#include <doctest.h>

#include <set>

#include "debias/groups.hpp"

using namespace debias;

namespace {

AttributeSchema binary_schema(int k) {
  AttributeSchema schema;
  for (int i = 0; i < k; ++i) schema.attributes.push_back({"a" + std::to_string(i), 2});
  return schema;
}

// Fig.-1 style dataset: gender x race with one row per cell, labels all 1.
Dataset fig1_dataset() {
  Dataset ds;
  ds.schema = AttributeSchema{{{"race", 2}, {"gender", 2}}};  // race: 0=white, gender: 0=male
  ds.features = Matrix::Zero(4, 2);
  ds.labels = {1, 1, 1, 1};
  ds.protected_values.resize(4, 2);
  // rows: A = white male, B = male PoC, C = white female, D = female PoC
  ds.protected_values << 0, 0, 1, 0, 0, 1, 1, 1;
  return ds;
}

}  // namespace

TEST_CASE("enumerate_groups: counts for two binary attributes") {
  const AttributeSchema schema = binary_schema(2);
  CHECK(enumerate_groups(schema, GroupKind::Indep).size() == 4);
  CHECK(enumerate_groups(schema, GroupKind::Inter).size() == 4);
  CHECK(enumerate_groups(schema, GroupKind::Gerry).size() == 8);
}

TEST_CASE("enumerate_groups: counts for four binary attributes") {
  const AttributeSchema schema = binary_schema(4);
  CHECK(enumerate_groups(schema, GroupKind::Indep).size() == 8);
  CHECK(enumerate_groups(schema, GroupKind::Inter).size() == 16);
  CHECK(enumerate_groups(schema, GroupKind::Gerry).size() == 80);
}

TEST_CASE("enumerate_groups: single binary attribute degeneracy") {
  const AttributeSchema schema = binary_schema(1);
  CHECK(enumerate_groups(schema, GroupKind::Indep).size() == 2);
  CHECK(enumerate_groups(schema, GroupKind::Inter).size() == 2);
  CHECK(enumerate_groups(schema, GroupKind::Gerry).size() == 2);
}

TEST_CASE("enumerate_groups: higher-cardinality counts") {
  // cardinalities (2, 3): INDEP sums, INTER multiplies, GERRY excludes the
  // all-wildcard group
  const AttributeSchema schema{{{"g", 2}, {"age", 3}}};
  CHECK(enumerate_groups(schema, GroupKind::Indep).size() == 5);
  CHECK(enumerate_groups(schema, GroupKind::Inter).size() == 6);
  CHECK(enumerate_groups(schema, GroupKind::Gerry).size() == 3 * 4 - 1);
}

TEST_CASE("enumerate_groups: fixed-attribute structure per kind") {
  const AttributeSchema schema = binary_schema(3);
  for (const GroupDef& def : enumerate_groups(schema, GroupKind::Indep))
    CHECK(def.assignment.size() == 1);
  for (const GroupDef& def : enumerate_groups(schema, GroupKind::Inter))
    CHECK(def.assignment.size() == 3);
  for (const GroupDef& def : enumerate_groups(schema, GroupKind::Gerry))
    CHECK(def.assignment.size() >= 1);
}

TEST_CASE("enumerate_groups: deterministic ordering and labels") {
  const AttributeSchema schema = binary_schema(2);
  const auto a = enumerate_groups(schema, GroupKind::Gerry);
  const auto b = enumerate_groups(schema, GroupKind::Gerry);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].label == b[i].label);
  // singles first (by attribute, then value), then pairs
  CHECK(a[0].label == "a0=0");
  CHECK(a[3].label == "a1=1");
  CHECK(a[4].label == "a0=0&a1=0");
  CHECK(a[7].label == "a0=1&a1=1");
}

TEST_CASE("build_group_set: the F group of Fig. 1 covers C and D") {
  const Dataset ds = fig1_dataset();
  GroupDef female;
  female.assignment = {{1, 1}};  // gender = female
  female.kind = GroupKind::Indep;
  female.label = "gender=1";
  const GroupSet gs = build_group_set({female}, ds);
  CHECK(gs.masks[0][0] == 0);  // A: white male
  CHECK(gs.masks[0][1] == 0);  // B: male PoC
  CHECK(gs.masks[0][2] == 1);  // C: white female
  CHECK(gs.masks[0][3] == 1);  // D: female PoC
  CHECK(gs.member_counts[0] == 2);
  CHECK(gs.positive_counts[0] == 2);
}

TEST_CASE("build_group_set: INTER masks partition any dataset") {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.d = 4;
  spec.schema = AttributeSchema{{{"a", 2}, {"b", 3}, {"c", 2}}};
  spec.seed = 71;
  const Dataset ds = generate_synthetic(spec);
  const GroupSet gs = build_group_set(ds.schema, GroupKind::Inter, ds);
  Index total = 0;
  for (Index count : gs.member_counts) total += count;
  CHECK(total == ds.size());
  for (Index i = 0; i < ds.size(); ++i) {
    int hits = 0;
    for (const auto& mask : gs.masks) hits += mask[i];
    CHECK(hits == 1);
  }
}

TEST_CASE("build_group_set: GERRY contains INDEP and INTER by mask equality") {
  SyntheticSpec spec;
  spec.n = 300;
  spec.d = 4;
  spec.schema = binary_schema(3);
  spec.seed = 73;
  const Dataset ds = generate_synthetic(spec);
  const GroupSet gerry = build_group_set(ds.schema, GroupKind::Gerry, ds);
  const GroupSet indep = build_group_set(ds.schema, GroupKind::Indep, ds);
  const GroupSet inter = build_group_set(ds.schema, GroupKind::Inter, ds);

  auto contains_mask = [&](const std::vector<std::uint8_t>& mask) {
    for (const auto& gm : gerry.masks)
      if (gm == mask) return true;
    return false;
  };
  for (const auto& mask : indep.masks) CHECK(contains_mask(mask));
  for (const auto& mask : inter.masks) CHECK(contains_mask(mask));
  CHECK(indep.size() + inter.size() <= gerry.size());
}

TEST_CASE("build_group_set: every row lies in 2^k - 1 GERRY groups (binary attrs)") {
  SyntheticSpec spec;
  spec.n = 200;
  spec.d = 4;
  spec.schema = binary_schema(3);
  spec.seed = 79;
  const Dataset ds = generate_synthetic(spec);
  const GroupSet gerry = build_group_set(ds.schema, GroupKind::Gerry, ds);
  for (Index i = 0; i < ds.size(); ++i) {
    int hits = 0;
    for (const auto& mask : gerry.masks) hits += mask[i];
    CHECK(hits == (1 << 3) - 1);
  }
}

TEST_CASE("build_group_set: unknown attribute reference is an error") {
  const Dataset ds = fig1_dataset();
  GroupDef bad;
  bad.assignment = {{5, 0}};
  bad.label = "nope";
  CHECK_THROWS_AS(build_group_set({bad}, ds), Error);
  GroupDef bad_value;
  bad_value.assignment = {{0, 7}};
  bad_value.label = "nope2";
  CHECK_THROWS_AS(build_group_set({bad_value}, ds), Error);
}

TEST_CASE("group report JSON carries label, size, and positives per def") {
  const Dataset ds = fig1_dataset();
  const GroupSet gs = build_group_set(ds.schema, GroupKind::Indep, ds);
  const std::string report = group_report_json(gs);
  CHECK(report.find("\"label\"") != std::string::npos);
  CHECK(report.find("\"size\": 2") != std::string::npos);
  CHECK(report.find("\"positives\": 2") != std::string::npos);
  CHECK(report.find("race=0") != std::string::npos);
  CHECK(report.find("gender=1") != std::string::npos);
}

TEST_CASE("group report counts: sum of INTER member counts equals n") {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.d = 4;
  spec.schema = binary_schema(3);
  spec.seed = 83;
  spec.label_bias = {0.5, 0.0, 0.0};
  const Dataset ds = generate_synthetic(spec);
  const GroupSet gs = build_group_set(ds.schema, GroupKind::Inter, ds);
  Index members = 0, positives = 0;
  for (std::size_t g = 0; g < gs.size(); ++g) {
    members += gs.member_counts[g];
    positives += gs.positive_counts[g];
  }
  CHECK(members == ds.size());
  Index label_positives = 0;
  for (int y : ds.labels) label_positives += y;
  CHECK(positives == label_positives);
}
