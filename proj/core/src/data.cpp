#include "debias/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "debias/rng.hpp"

namespace debias {

using json = nlohmann::json;

namespace {

// rng stream tags; one stage's draw count can never shift another stage
enum : std::uint64_t { kTagDirections = 11, kTagProtected = 12, kTagLabels = 13, kTagNoise = 14 };

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Vector random_unit_direction(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(d);
  do {
    for (Index i = 0; i < d; ++i) v(i) = gauss(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

int AttributeSchema::attribute_index(const std::string& name) const {
  for (int i = 0; i < num_attributes(); ++i)
    if (attributes[i].name == name) return i;
  return -1;
}

void AttributeSchema::validate() const {
  std::set<std::string> seen;
  for (const Attribute& a : attributes) {
    if (a.name.empty()) fail(ErrorCode::Config, "schema: empty attribute name");
    if (a.cardinality < 2) fail(ErrorCode::Config, "schema: attribute '" + a.name + "' needs cardinality >= 2");
    if (!seen.insert(a.name).second) fail(ErrorCode::Config, "schema: duplicate attribute '" + a.name + "'");
  }
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  fail(ErrorCode::Config, "unknown split tag '" + s + "'");
}

double Dataset::positive_rate() const {
  if (labels.empty()) return 0.0;
  return static_cast<double>(std::accumulate(labels.begin(), labels.end(), 0)) / labels.size();
}

void Dataset::validate() const {
  schema.validate();
  const Index n = features.rows();
  const int k = schema.num_attributes();
  if (n < 1) fail(ErrorCode::InvalidInput, "dataset: no rows");
  if (!features.allFinite()) fail(ErrorCode::InvalidInput, "dataset: non-finite features");
  if (static_cast<Index>(labels.size()) != n) fail(ErrorCode::InvalidInput, "dataset: label count mismatch");
  if (protected_values.rows() != n || protected_values.cols() != k)
    fail(ErrorCode::InvalidInput, "dataset: protected table shape mismatch");
  for (Index i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::NonBinaryLabel, "dataset: non-binary label");
    for (int j = 0; j < k; ++j) {
      const int v = protected_values(i, j);
      if (v < 0 || v >= schema.attributes[j].cardinality)
        fail(ErrorCode::ValueOutOfRange, "dataset: protected value out of range");
    }
  }
}

void SyntheticSpec::validate() const {
  schema.validate();
  const int k = schema.num_attributes();
  if (n < 1 || d < 1) fail(ErrorCode::Config, "synthetic spec: n and d must be >= 1");
  if (label_signal < 0.0) fail(ErrorCode::Config, "synthetic spec: label_signal must be >= 0");
  if (!(noise_std > 0.0)) fail(ErrorCode::Config, "synthetic spec: noise_std must be > 0");
  if (!attribute_signal.empty() && static_cast<int>(attribute_signal.size()) != k)
    fail(ErrorCode::Config, "synthetic spec: attribute_signal size mismatch");
  if (!label_bias.empty() && static_cast<int>(label_bias.size()) != k)
    fail(ErrorCode::Config, "synthetic spec: label_bias size mismatch");
  for (double s : attribute_signal)
    if (s < 0.0) fail(ErrorCode::Config, "synthetic spec: attribute_signal must be >= 0");
  for (double b : label_bias)
    if (b < -1.0 || b > 1.0) fail(ErrorCode::Config, "synthetic spec: label_bias must lie in [-1, 1]");
  for (const IntersectionSignal& c : intersection_signal) {
    if (c.combo.empty()) fail(ErrorCode::Config, "synthetic spec: empty intersection combo");
    for (const auto& [attr, value] : c.combo) {
      if (attr < 0 || attr >= k) fail(ErrorCode::Config, "synthetic spec: combo attribute out of range");
      if (value < 0 || value >= schema.attributes[attr].cardinality)
        fail(ErrorCode::Config, "synthetic spec: combo value out of range");
    }
  }
}

// ---------------------------------------------------------------------------
// file ingestion
// ---------------------------------------------------------------------------

namespace {

std::vector<double> parse_csv_row(const std::string& line, int line_no) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (true) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{}) {
      fail(ErrorCode::MalformedRow,
           "malformed row, line " + std::to_string(line_no) + ": unreadable number");
    }
    out.push_back(v);
    p = next;
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    if (*p != ',') {
      fail(ErrorCode::MalformedRow,
           "malformed row, line " + std::to_string(line_no) + ": expected ','");
    }
    ++p;
  }
  return out;
}

struct MetadataRow {
  int label = 0;
  std::vector<int> values;
};

MetadataRow parse_metadata_line(const std::string& line, int line_no, const AttributeSchema& schema) {
  const json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object())
    fail(ErrorCode::Parse, "malformed metadata JSON, line " + std::to_string(line_no));
  if (!obj.contains("id") || !obj["id"].is_string())
    fail(ErrorCode::Parse, "missing or non-string \"id\", line " + std::to_string(line_no));
  if (!obj.contains("label") || !obj["label"].is_number_integer())
    fail(ErrorCode::NonBinaryLabel, "non-binary label, line " + std::to_string(line_no));
  MetadataRow row;
  row.label = obj["label"].get<int>();
  if (row.label != 0 && row.label != 1)
    fail(ErrorCode::NonBinaryLabel, "non-binary label, line " + std::to_string(line_no));
  if (!obj.contains("attrs") || !obj["attrs"].is_object())
    fail(ErrorCode::Parse, "missing \"attrs\" object, line " + std::to_string(line_no));
  const json& attrs = obj["attrs"];
  for (const auto& [key, value] : attrs.items()) {
    if (schema.attribute_index(key) < 0)
      fail(ErrorCode::Parse, "unknown attribute '" + key + "', line " + std::to_string(line_no));
  }
  row.values.resize(schema.num_attributes());
  for (int j = 0; j < schema.num_attributes(); ++j) {
    const Attribute& a = schema.attributes[j];
    if (!attrs.contains(a.name))
      fail(ErrorCode::Parse, "missing attribute '" + a.name + "', line " + std::to_string(line_no));
    if (!attrs[a.name].is_number_integer())
      fail(ErrorCode::Parse, "attribute '" + a.name + "' is not an integer, line " + std::to_string(line_no));
    const int v = attrs[a.name].get<int>();
    if (v < 0 || v >= a.cardinality) {
      fail(ErrorCode::ValueOutOfRange,
           "value out of range, line " + std::to_string(line_no) + ": attribute '" + a.name +
               "' value " + std::to_string(v) + " (cardinality " + std::to_string(a.cardinality) + ")");
    }
    row.values[j] = v;
  }
  return row;
}

}  // namespace

Dataset load_dataset(const std::string& features_path, const std::string& metadata_path,
                     const AttributeSchema& schema) {
  schema.validate();
  std::ifstream ff(features_path);
  if (!ff) fail(ErrorCode::Io, "cannot open features file: " + features_path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  Index d = -1;
  while (std::getline(ff, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row = parse_csv_row(line, line_no);
    if (d < 0) d = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != d) {
      fail(ErrorCode::MalformedRow, "malformed row, line " + std::to_string(line_no) +
                                        ": expected " + std::to_string(d) + " fields, got " +
                                        std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::Parse, "empty features file: " + features_path);

  std::ifstream mf(metadata_path);
  if (!mf) fail(ErrorCode::Io, "cannot open metadata file: " + metadata_path);
  std::vector<MetadataRow> meta;
  line_no = 0;
  while (std::getline(mf, line)) {
    ++line_no;
    if (line.empty()) continue;
    meta.push_back(parse_metadata_line(line, line_no, schema));
  }
  if (meta.size() != rows.size()) {
    fail(ErrorCode::RowCountMismatch, "row count mismatch: features file has " +
                                          std::to_string(rows.size()) + " rows, metadata has " +
                                          std::to_string(meta.size()));
  }

  Dataset ds;
  ds.schema = schema;
  const Index n = static_cast<Index>(rows.size());
  ds.features.resize(n, d);
  ds.labels.resize(n);
  ds.protected_values.resize(n, schema.num_attributes());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
    ds.labels[i] = meta[i].label;
    for (int j = 0; j < schema.num_attributes(); ++j) ds.protected_values(i, j) = meta[i].values[j];
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& features_path,
                  const std::string& metadata_path) {
  ds.validate();
  std::ofstream ff(features_path);
  if (!ff) fail(ErrorCode::Io, "cannot write features file: " + features_path);
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < ds.dim(); ++j) {
      if (j) ff << ',';
      ff << fmt_double(ds.features(i, j));
    }
    ff << '\n';
  }
  std::ofstream mf(metadata_path);
  if (!mf) fail(ErrorCode::Io, "cannot write metadata file: " + metadata_path);
  for (Index i = 0; i < ds.size(); ++i) {
    json attrs = json::object();
    for (int j = 0; j < ds.schema.num_attributes(); ++j)
      attrs[ds.schema.attributes[j].name] = ds.protected_values(i, j);
    const json obj = {{"id", std::to_string(i)}, {"label", ds.labels[i]}, {"attrs", attrs}};
    mf << obj.dump() << '\n';
  }
}

AttributeSchema load_schema(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot open schema file: " + path);
  const json obj = json::parse(f, nullptr, false);
  if (obj.is_discarded() || !obj.is_object() || !obj.contains("attributes") || !obj["attributes"].is_array())
    fail(ErrorCode::Parse, "schema file must be {\"attributes\": [...]}: " + path);
  AttributeSchema schema;
  for (const json& a : obj["attributes"]) {
    if (!a.is_object() || !a.contains("name") || !a.contains("cardinality"))
      fail(ErrorCode::Parse, "schema attribute needs \"name\" and \"cardinality\": " + path);
    schema.attributes.push_back({a["name"].get<std::string>(), a["cardinality"].get<int>()});
  }
  schema.validate();
  return schema;
}

void save_schema(const AttributeSchema& schema, const std::string& path) {
  json attrs = json::array();
  for (const Attribute& a : schema.attributes)
    attrs.push_back({{"name", a.name}, {"cardinality", a.cardinality}});
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write schema file: " + path);
  f << json{{"attributes", attrs}}.dump(2) << '\n';
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot open synthetic spec: " + path);
  const json obj = json::parse(f, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) fail(ErrorCode::Parse, "malformed synthetic spec JSON: " + path);

  SyntheticSpec spec;
  try {
    spec.n = obj.at("n").get<Index>();
    spec.d = obj.at("d").get<Index>();
    for (const json& a : obj.at("schema").at("attributes"))
      spec.schema.attributes.push_back({a.at("name").get<std::string>(), a.at("cardinality").get<int>()});
    spec.label_signal = obj.value("label_signal", 0.0);
    spec.noise_std = obj.value("noise_std", 1.0);
    spec.seed = obj.value("seed", std::uint64_t{0});
    if (obj.contains("attribute_signal")) spec.attribute_signal = obj["attribute_signal"].get<std::vector<double>>();
    if (obj.contains("label_bias")) spec.label_bias = obj["label_bias"].get<std::vector<double>>();
    if (obj.contains("intersection_signal")) {
      for (const json& c : obj["intersection_signal"]) {
        IntersectionSignal s;
        s.signal = c.at("signal").get<double>();
        for (const auto& [name, value] : c.at("combo").items()) {
          const int idx = spec.schema.attribute_index(name);
          if (idx < 0) fail(ErrorCode::Parse, "synthetic spec combo names unknown attribute '" + name + "'");
          s.combo[idx] = value.get<int>();
        }
        spec.intersection_signal.push_back(std::move(s));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// synthetic generation
// ---------------------------------------------------------------------------

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index n = spec.n;
  const Index d = spec.d;
  const int k = spec.schema.num_attributes();
  const std::vector<double> attr_signal =
      spec.attribute_signal.empty() ? std::vector<double>(k, 0.0) : spec.attribute_signal;
  const std::vector<double> label_bias =
      spec.label_bias.empty() ? std::vector<double>(k, 0.0) : spec.label_bias;

  // Fixed unit directions. Binary attributes get one signed direction
  // (value v contributes (2v-1) * mu); higher-cardinality ones get a
  // direction per value. The label direction is signed the same way.
  auto dir_rng = make_rng(spec.seed, kTagDirections);
  const Vector mu_label = random_unit_direction(d, dir_rng);
  std::vector<std::vector<Vector>> mu_attr(k);
  for (int j = 0; j < k; ++j) {
    const int c = spec.schema.attributes[j].cardinality;
    const int count = (c == 2) ? 1 : c;
    for (int v = 0; v < count; ++v) mu_attr[j].push_back(random_unit_direction(d, dir_rng));
  }
  std::vector<Vector> mu_combo;
  for (std::size_t c = 0; c < spec.intersection_signal.size(); ++c)
    mu_combo.push_back(random_unit_direction(d, dir_rng));

  Dataset ds;
  ds.schema = spec.schema;
  ds.protected_values.resize(n, k);
  auto attr_rng = make_rng(spec.seed, kTagProtected);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      std::uniform_int_distribution<int> uniform(0, spec.schema.attributes[j].cardinality - 1);
      ds.protected_values(i, j) = uniform(attr_rng);
    }
  }

  // Label marginal tilted toward attributes: p = 1/2 + 1/2 * mean_j(bias_j * s_j)
  // with s_j the value mapped onto [-1, 1].
  ds.labels.resize(n);
  auto label_rng = make_rng(spec.seed, kTagLabels);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    double tilt = 0.0;
    for (int j = 0; j < k; ++j) {
      const int c = spec.schema.attributes[j].cardinality;
      const double s = 2.0 * ds.protected_values(i, j) / (c - 1) - 1.0;
      tilt += label_bias[j] * s;
    }
    if (k > 0) tilt /= k;
    const double p = std::clamp(0.5 + 0.5 * tilt, 0.0, 1.0);
    ds.labels[i] = unit(label_rng) < p ? 1 : 0;
  }

  ds.features = Matrix::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    ds.features.row(i) += spec.label_signal * (2.0 * ds.labels[i] - 1.0) * mu_label.transpose();
    for (int j = 0; j < k; ++j) {
      const int c = spec.schema.attributes[j].cardinality;
      const int v = ds.protected_values(i, j);
      if (c == 2)
        ds.features.row(i) += attr_signal[j] * (2.0 * v - 1.0) * mu_attr[j][0].transpose();
      else
        ds.features.row(i) += attr_signal[j] * mu_attr[j][v].transpose();
    }
    for (std::size_t ci = 0; ci < spec.intersection_signal.size(); ++ci) {
      const IntersectionSignal& combo = spec.intersection_signal[ci];
      bool match = true;
      for (const auto& [attr, value] : combo.combo)
        if (ds.protected_values(i, attr) != value) { match = false; break; }
      if (match) ds.features.row(i) += combo.signal * mu_combo[ci].transpose();
    }
  }

  auto noise_rng = make_rng(spec.seed, kTagNoise);
  std::normal_distribution<double> gauss(0.0, spec.noise_std);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) ds.features(i, j) += gauss(noise_rng);

  ds.split = Split::Train;
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// splitting
// ---------------------------------------------------------------------------

namespace {

// Largest-remainder apportionment of n into shares proportional to fractions.
std::array<Index, 3> apportion(Index n, const std::array<double, 3>& fractions) {
  std::array<Index, 3> sizes{};
  std::array<double, 3> remainder{};
  Index assigned = 0;
  for (int j = 0; j < 3; ++j) {
    const double exact = n * fractions[j];
    sizes[j] = static_cast<Index>(std::floor(exact));
    remainder[j] = exact - sizes[j];
    assigned += sizes[j];
  }
  while (assigned < n) {
    int best = 0;
    for (int j = 1; j < 3; ++j)
      if (remainder[j] > remainder[best]) best = j;
    ++sizes[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

}  // namespace

SplitIndices split_indices(const Dataset& ds, const std::array<double, 3>& fractions,
                           std::uint64_t seed, bool stratify_by_group) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) fail(ErrorCode::InvalidInput, "split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::InvalidInput, "split: fractions must sum to 1");

  const Index n = ds.size();
  const std::array<Index, 3> sizes = apportion(n, fractions);
  for (int j = 0; j < 3; ++j) {
    if (sizes[j] == 0)
      fail(ErrorCode::InvalidInput, std::string("split: ") + to_string(static_cast<Split>(j)) +
                                        " split would receive 0 rows");
  }

  // stratum key: label alone, or label x intersectional cell
  const int k = ds.schema.num_attributes();
  Index cells = 1;
  if (stratify_by_group)
    for (int a = 0; a < k; ++a) cells *= ds.schema.attributes[a].cardinality;
  const Index num_strata = 2 * cells;
  std::vector<std::vector<Index>> strata(num_strata);
  for (Index i = 0; i < n; ++i) {
    Index cell = 0;
    if (stratify_by_group)
      for (int a = 0; a < k; ++a) cell = cell * ds.schema.attributes[a].cardinality + ds.protected_values(i, a);
    strata[ds.labels[i] * cells + cell].push_back(i);
  }

  // Shuffle within each stratum, then interleave so every contiguous block
  // keeps the parent's stratum mix.
  for (Index s = 0; s < num_strata; ++s) {
    auto rng = make_rng(seed, 100 + static_cast<std::uint64_t>(s));
    std::shuffle(strata[s].begin(), strata[s].end(), rng);
  }

  std::vector<Index> order;
  order.reserve(n);
  std::vector<std::size_t> emitted(num_strata, 0);
  while (order.size() < static_cast<std::size_t>(n)) {
    // pick the stratum furthest behind its target share
    Index pick = -1;
    double worst = -1.0;
    for (Index s = 0; s < num_strata; ++s) {
      if (emitted[s] == strata[s].size()) continue;
      const double target = static_cast<double>(strata[s].size()) / n;
      const double deficit = target * (order.size() + 1) - static_cast<double>(emitted[s]);
      if (deficit > worst) { worst = deficit; pick = s; }
    }
    order.push_back(strata[pick][emitted[pick]++]);
  }

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + sizes[0]);
  out.dev.assign(order.begin() + sizes[0], order.begin() + sizes[0] + sizes[1]);
  out.test.assign(order.begin() + sizes[0] + sizes[1], order.end());
  return out;
}

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows, Split tag) {
  Dataset out;
  out.schema = ds.schema;
  out.split = tag;
  const Index m = static_cast<Index>(rows.size());
  out.features.resize(m, ds.dim());
  out.labels.resize(m);
  out.protected_values.resize(m, ds.schema.num_attributes());
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= ds.size()) fail(ErrorCode::InvalidInput, "take_rows: index out of range");
    out.features.row(i) = ds.features.row(r);
    out.labels[i] = ds.labels[r];
    out.protected_values.row(i) = ds.protected_values.row(r);
  }
  return out;
}

std::array<Dataset, 3> split(const Dataset& ds, const std::array<double, 3>& fractions,
                             std::uint64_t seed, bool stratify_by_group) {
  const SplitIndices idx = split_indices(ds, fractions, seed, stratify_by_group);
  return {take_rows(ds, idx.train, Split::Train), take_rows(ds, idx.dev, Split::Dev),
          take_rows(ds, idx.test, Split::Test)};
}

}  // namespace debias
