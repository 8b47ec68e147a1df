#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hierood/taxonomy.hpp"

namespace hierood {

// Feature rows with leaf labels. `class_names[label]` names the leaf, so a
// dataset can be re-indexed against a pruned taxonomy without losing meaning.
// `ids` are stable sample identifiers carried through splits.
struct LabeledDataset {
  Eigen::MatrixXd features;  // N x D
  std::vector<std::size_t> labels;
  std::vector<std::size_t> ids;
  std::vector<std::string> class_names;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_classes() const { return class_names.size(); }

  // Throws DatasetError on any broken invariant.
  void validate() const;
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
  std::vector<std::size_t> class_counts() const;
};

struct GeneratorSpec {
  std::size_t feature_dim = 16;
  std::vector<std::size_t> counts;  // per leaf, in class order
  double parent_spread = 4.0;
  double child_spread = 1.0;
  double noise = 0.5;
  std::uint64_t seed = 0;

  void validate(std::size_t num_classes) const;
};

// Per-leaf sample sizes of the hot-rolling defect table, keyed by leaf name.
// Leaves missing from the table get `fallback`.
std::vector<std::size_t> steel_sample_counts(const TaxonomyTree& tree, std::size_t fallback = 50);

GeneratorSpec default_generator_spec(const TaxonomyTree& tree);

// Parent means ~ N(0, parent_spread^2 I) per depth-1 node, leaf means offset
// by N(0, child_spread^2 I), samples offset by N(0, noise^2 I).
LabeledDataset generate_synthetic(const TaxonomyTree& tree, const GeneratorSpec& spec);

// Leaf means produced by the generator for this spec (same RNG stream).
Eigen::MatrixXd synthetic_leaf_means(const TaxonomyTree& tree, const GeneratorSpec& spec);

struct DataSplit {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

// Per-class shuffle then largest-remainder allocation; every class must give
// at least one sample to each partition.
DataSplit stratified_split(const LabeledDataset& ds, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

// Largest-remainder quotas for n items; exposed for testing.
std::array<std::size_t, 3> split_quotas(std::size_t n, const std::array<double, 3>& fractions);

struct LeaveOutSplit {
  TaxonomyTree known_tree;
  LabeledDataset known;  // labels index known_tree
  LabeledDataset novel;  // original labelling
};

LeaveOutSplit leave_out_class(const LabeledDataset& ds, const TaxonomyTree& tree, std::size_t leaf);

// Header `f0,...,f{D-1},label`; labels are leaf names of `tree`.
LabeledDataset load_csv(const std::string& path, const TaxonomyTree& tree);
void save_csv(const LabeledDataset& ds, const std::string& path);

}  // namespace hierood
