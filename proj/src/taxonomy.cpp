#include "hierood/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "hierood/error.hpp"

namespace hierood {

namespace {

using nlohmann::json;

void add_node(const json& doc, std::optional<std::size_t> parent, int depth,
              std::vector<TaxonomyNode>& nodes) {
  if (!doc.is_object()) throw TaxonomyError("malformed document: node is not an object");
  auto name_it = doc.find("name");
  if (name_it == doc.end() || !name_it->is_string())
    throw TaxonomyError("malformed document: node without a string `name`");

  const std::size_t id = nodes.size();
  nodes.push_back({name_it->get<std::string>(), parent, {}, depth});
  if (parent) nodes[*parent].children.push_back(id);

  auto children_it = doc.find("children");
  if (children_it == doc.end() || children_it->is_null()) return;
  if (!children_it->is_array())
    throw TaxonomyError("malformed document: `children` of '" + nodes[id].name + "' is not a list");
  for (const auto& child : *children_it) add_node(child, id, depth + 1, nodes);
}

json node_to_json(const std::vector<TaxonomyNode>& nodes, std::size_t id) {
  json children = json::array();
  for (std::size_t c : nodes[id].children) children.push_back(node_to_json(nodes, c));
  return json{{"name", nodes[id].name}, {"children", std::move(children)}};
}

// Copies the subtree at `id` keeping only leaves accepted by `keep`. Returns
// null when nothing survives.
template <typename Keep>
json filtered_subtree(const std::vector<TaxonomyNode>& nodes, std::size_t id, const Keep& keep) {
  const auto& node = nodes[id];
  if (node.children.empty()) {
    if (!keep(id)) return nullptr;
    return json{{"name", node.name}, {"children", json::array()}};
  }
  json children = json::array();
  for (std::size_t c : node.children) {
    json sub = filtered_subtree(nodes, c, keep);
    if (!sub.is_null()) children.push_back(std::move(sub));
  }
  if (children.empty()) return nullptr;
  return json{{"name", node.name}, {"children", std::move(children)}};
}

}  // namespace

TaxonomyTree TaxonomyTree::from_json(const json& doc) {
  if (doc.is_null() || (doc.is_object() && doc.empty()))
    throw TaxonomyError("empty tree");

  TaxonomyTree tree;
  add_node(doc, std::nullopt, 0, tree.nodes_);

  std::unordered_set<std::string> seen;
  std::optional<int> leaf_depth;
  for (std::size_t id = 0; id < tree.nodes_.size(); ++id) {
    const auto& node = tree.nodes_[id];
    if (!node.children.empty()) continue;
    if (!seen.insert(node.name).second)
      throw TaxonomyError("duplicate leaf name '" + node.name + "'");
    tree.leaves_.push_back(id);
    tree.height_ = std::max(tree.height_, node.depth);
    if (leaf_depth && *leaf_depth != node.depth) tree.uniform_depth_ = false;
    leaf_depth = node.depth;
  }
  if (tree.leaves_.size() < 2)
    throw TaxonomyError("taxonomy needs at least two leaves, found " +
                        std::to_string(tree.leaves_.size()));
  return tree;
}

json TaxonomyTree::to_json() const { return node_to_json(nodes_, 0); }

std::vector<std::string> TaxonomyTree::leaf_names() const {
  std::vector<std::string> names;
  names.reserve(leaves_.size());
  for (std::size_t id : leaves_) names.push_back(nodes_[id].name);
  return names;
}

std::optional<std::size_t> TaxonomyTree::find_class(std::string_view leaf) const {
  for (std::size_t k = 0; k < leaves_.size(); ++k)
    if (nodes_[leaves_[k]].name == leaf) return k;
  return std::nullopt;
}

std::size_t TaxonomyTree::class_index(std::string_view leaf) const {
  if (auto k = find_class(leaf)) return *k;
  throw TaxonomyError("unknown leaf '" + std::string(leaf) + "'");
}

std::size_t TaxonomyTree::ancestor_at_depth(std::size_t node, int depth) const {
  if (depth < 0 || depth > nodes_.at(node).depth)
    throw InvalidArgument("ancestor depth out of range");
  while (nodes_[node].depth > depth) node = *nodes_[node].parent;
  return node;
}

std::size_t TaxonomyTree::lca_node(std::size_t cls_a, std::size_t cls_b) const {
  std::size_t a = leaf_node(cls_a);
  std::size_t b = leaf_node(cls_b);
  while (nodes_[a].depth > nodes_[b].depth) a = *nodes_[a].parent;
  while (nodes_[b].depth > nodes_[a].depth) b = *nodes_[b].parent;
  while (a != b) {
    a = *nodes_[a].parent;
    b = *nodes_[b].parent;
  }
  return a;
}

TaxonomyTree TaxonomyTree::without_leaf(std::size_t cls) const {
  if (cls >= leaves_.size()) throw InvalidArgument("leaf index out of range");
  const std::size_t drop = leaves_[cls];
  json pruned = filtered_subtree(nodes_, 0, [drop](std::size_t id) { return id != drop; });
  if (pruned.is_null()) throw TaxonomyError("removing the leaf empties the tree");
  return from_json(pruned);
}

TaxonomyTree TaxonomyTree::restricted_to(std::span<const std::string> keep) const {
  std::set<std::string> wanted(keep.begin(), keep.end());
  for (const auto& name : wanted) class_index(name);
  json pruned = filtered_subtree(nodes_, 0, [&](std::size_t id) { return wanted.count(nodes_[id].name) > 0; });
  if (pruned.is_null()) throw TaxonomyError("restriction leaves an empty tree");
  return from_json(pruned);
}

bool TaxonomyTree::operator==(const TaxonomyTree& other) const {
  if (nodes_.size() != other.nodes_.size() || leaves_ != other.leaves_) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.name != b.name || a.parent != b.parent || a.children != b.children || a.depth != b.depth)
      return false;
  }
  return true;
}

TaxonomyTree parse_taxonomy(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw TaxonomyError(std::string("malformed document: ") + e.what());
  }
  return TaxonomyTree::from_json(doc);
}

std::string serialize_taxonomy(const TaxonomyTree& tree) { return tree.to_json().dump(2); }

TaxonomyTree load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open taxonomy file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_taxonomy(buffer.str());
}

TaxonomyTree steel_taxonomy() {
  auto leaf = [](const char* name) { return json{{"name", name}, {"children", json::array()}}; };
  auto parent = [](const char* name, json children) {
    return json{{"name", name}, {"children", std::move(children)}};
  };
  json root = {
      {"name", "defect"},
      {"children",
       {parent("P1", {leaf("A10"), leaf("A11"), leaf("A12")}),
        parent("P2", {leaf("A20"), leaf("A21")}),
        parent("P3", {leaf("A30"), leaf("A31")}),
        parent("P4", {leaf("A40")}),
        parent("P5", {leaf("A41")}),
        parent("P6", {leaf("A50"), leaf("A51")}),
        parent("P7", {leaf("A60"), leaf("A61")}),
        parent("P8", {leaf("A70")})}}};
  return TaxonomyTree::from_json(root);
}

int lca_levels(const TaxonomyTree& tree, std::size_t i, std::size_t j) {
  const std::size_t k = tree.num_classes();
  if (i >= k || j >= k) throw InvalidArgument("leaf index out of range");
  if (!tree.uniform_leaf_depth())
    throw TaxonomyError("LCA distance needs all leaves at the same depth");
  return tree.height() - tree.nodes()[tree.lca_node(i, j)].depth;
}

double lca_distance(const TaxonomyTree& tree, std::size_t i, std::size_t j) {
  return static_cast<double>(lca_levels(tree, i, j)) / static_cast<double>(tree.height());
}

Eigen::MatrixXd distance_matrix(const TaxonomyTree& tree) {
  const auto k = static_cast<Eigen::Index>(tree.num_classes());
  Eigen::MatrixXd d(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      d(i, j) = lca_distance(tree, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return d;
}

SoftLabelMatrix soft_label_matrix(const TaxonomyTree& tree, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw InvalidArgument("soft-label beta must be positive and finite");
  const Eigen::MatrixXd d = distance_matrix(tree);
  const Eigen::Index k = d.rows();
  Eigen::MatrixXd values(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    // log-space with max subtraction; the max of -beta d is 0 at the diagonal
    Eigen::VectorXd logits = -beta * d.row(i).transpose();
    logits.array() -= logits.maxCoeff();
    Eigen::VectorXd w = logits.array().exp();
    values.row(i) = (w / w.sum()).transpose();
  }
  return SoftLabelMatrix(beta, std::move(values));
}

SoftLabelMatrix one_hot_matrix(std::size_t num_classes) {
  const auto k = static_cast<Eigen::Index>(num_classes);
  return SoftLabelMatrix(std::numeric_limits<double>::infinity(), Eigen::MatrixXd::Identity(k, k));
}

Eigen::VectorXd one_hot(std::size_t num_classes, std::size_t k) {
  if (k >= num_classes)
    throw InvalidArgument("class index " + std::to_string(k) + " out of range for K=" +
                          std::to_string(num_classes));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes));
  v(static_cast<Eigen::Index>(k)) = 1.0;
  return v;
}

}  // namespace hierood
