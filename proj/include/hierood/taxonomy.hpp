#pragma once

// Fault taxonomy: a rooted tree whose leaves are the classifier's classes.
//
// Class indices 0..K-1 are the leaves in depth-first, left-to-right order of
// the source document. Distances between classes are the normalized height of
// their lowest common ancestor, which is only defined here for trees whose
// leaves all sit at the same depth.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace hierood {

struct TaxonomyNode {
  std::string name;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  int depth = 0;
};

class TaxonomyTree {
 public:
  // Builds from the nested {"name": ..., "children": [...]} object.
  static TaxonomyTree from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  std::size_t num_classes() const { return leaves_.size(); }
  int height() const { return height_; }
  bool uniform_leaf_depth() const { return uniform_depth_; }

  const std::vector<TaxonomyNode>& nodes() const { return nodes_; }
  std::size_t root() const { return 0; }
  std::size_t leaf_node(std::size_t cls) const { return leaves_.at(cls); }
  const std::string& leaf_name(std::size_t cls) const { return nodes_[leaves_.at(cls)].name; }
  std::vector<std::string> leaf_names() const;

  std::optional<std::size_t> find_class(std::string_view leaf) const;
  // Throws TaxonomyError when the leaf is unknown.
  std::size_t class_index(std::string_view leaf) const;

  // Ancestor of `node` at the given depth (depth 0 is the root).
  std::size_t ancestor_at_depth(std::size_t node, int depth) const;
  std::size_t lca_node(std::size_t cls_a, std::size_t cls_b) const;

  // Tree with one leaf removed; internal nodes left childless are dropped.
  TaxonomyTree without_leaf(std::size_t cls) const;
  // Tree keeping only the named leaves, in their original relative order.
  TaxonomyTree restricted_to(std::span<const std::string> keep) const;

  bool operator==(const TaxonomyTree& other) const;

 private:
  std::vector<TaxonomyNode> nodes_;  // preorder; nodes_[0] is the root
  std::vector<std::size_t> leaves_;
  int height_ = 0;
  bool uniform_depth_ = true;
};

TaxonomyTree parse_taxonomy(std::string_view document);
std::string serialize_taxonomy(const TaxonomyTree& tree);
TaxonomyTree load_taxonomy(const std::string& path);

// The 14-leaf, two-level defect hierarchy used by the hot-rolling case study
// (leaves A10..A70 under eight parents).
TaxonomyTree steel_taxonomy();

// h_T minus the depth of the lowest common ancestor; 0 iff i == j.
int lca_levels(const TaxonomyTree& tree, std::size_t i, std::size_t j);
// lca_levels / h_T, in [0, 1].
double lca_distance(const TaxonomyTree& tree, std::size_t i, std::size_t j);
// K x K matrix of pairwise lca_distance values.
Eigen::MatrixXd distance_matrix(const TaxonomyTree& tree);

// Row i holds the soft-label embedding of label i:
//   values(i, k) = exp(-beta d(k, i)) / sum_j exp(-beta d(j, i)).
class SoftLabelMatrix {
 public:
  SoftLabelMatrix(double beta, Eigen::MatrixXd values)
      : beta_(beta), values_(std::move(values)) {}

  double beta() const { return beta_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::VectorXd row(std::size_t label) const { return values_.row(static_cast<Eigen::Index>(label)).transpose(); }
  double operator()(std::size_t label, std::size_t k) const {
    return values_(static_cast<Eigen::Index>(label), static_cast<Eigen::Index>(k));
  }

 private:
  double beta_;
  Eigen::MatrixXd values_;
};

SoftLabelMatrix soft_label_matrix(const TaxonomyTree& tree, double beta);

// One-hot soft labels: the beta -> infinity limit, used by flat training.
SoftLabelMatrix one_hot_matrix(std::size_t num_classes);

Eigen::VectorXd one_hot(std::size_t num_classes, std::size_t k);

}  // namespace hierood
