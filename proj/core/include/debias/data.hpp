#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "debias/linalg.hpp"

namespace debias {

struct Attribute {
  std::string name;
  int cardinality = 2;

  bool operator==(const Attribute&) const = default;
};

struct AttributeSchema {
  std::vector<Attribute> attributes;

  int num_attributes() const { return static_cast<int>(attributes.size()); }
  int attribute_index(const std::string& name) const;  // -1 if unknown
  void validate() const;

  bool operator==(const AttributeSchema&) const = default;
};

enum class Split { Train, Dev, Test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

// Frozen feature representations plus task labels and protected attributes.
// Rows with missing protected values never enter a Dataset.
struct Dataset {
  Matrix features;               // n x d
  std::vector<int> labels;       // {0,1}, length n
  Eigen::MatrixXi protected_values;  // n x k, column j in [0, cardinality_j)
  AttributeSchema schema;
  Split split = Split::Train;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  double positive_rate() const;
  void validate() const;
};

// A partial assignment over attributes; signal strength is added to every
// row matching all fixed values.
struct IntersectionSignal {
  std::map<int, int> combo;  // attribute index -> value
  double signal = 0.0;
};

struct SyntheticSpec {
  Index n = 0;
  Index d = 0;
  AttributeSchema schema;
  double label_signal = 0.0;
  std::vector<double> attribute_signal;  // one per attribute, >= 0
  std::vector<IntersectionSignal> intersection_signal;
  std::vector<double> label_bias;  // one per attribute, in [-1, 1]
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// -- file formats (see README): features CSV, metadata JSONL, schema JSON --

Dataset load_dataset(const std::string& features_path, const std::string& metadata_path,
                     const AttributeSchema& schema);
void save_dataset(const Dataset& ds, const std::string& features_path,
                  const std::string& metadata_path);

AttributeSchema load_schema(const std::string& path);
void save_schema(const AttributeSchema& schema, const std::string& path);

SyntheticSpec load_synthetic_spec(const std::string& path);

// Deterministic per seed: identical spec => identical Dataset.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Stratified 3-way split. Fractions must be positive and sum to 1. Strata
// are label-only by default; stratify_by_group additionally keys them by the
// full intersectional cell (the paper is silent on its split mechanics, so
// both behaviors are offered).
struct SplitIndices {
  std::vector<Index> train, dev, test;
};

SplitIndices split_indices(const Dataset& ds, const std::array<double, 3>& fractions,
                           std::uint64_t seed, bool stratify_by_group = false);
std::array<Dataset, 3> split(const Dataset& ds, const std::array<double, 3>& fractions,
                             std::uint64_t seed, bool stratify_by_group = false);

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows, Split tag);

}  // namespace debias
