#include "hierood/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hierood/error.hpp"
#include "hierood/text_io.hpp"

namespace hierood {

void LabeledDataset::validate() const {
  if (labels.empty()) throw DatasetError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw DatasetError("feature rows and labels differ in count");
  if (ids.size() != labels.size()) throw DatasetError("sample ids and labels differ in count");
  for (std::size_t label : labels)
    if (label >= class_names.size())
      throw DatasetError("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(class_names.size()) + ")");
  if (!features.allFinite()) throw DatasetError("non-finite feature value");
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(rows[r]));
    out.labels.push_back(labels.at(rows[r]));
    out.ids.push_back(ids.at(rows[r]));
  }
  out.class_names = class_names;
  out.provenance = provenance;
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (std::size_t label : labels) ++counts.at(label);
  return counts;
}

void GeneratorSpec::validate(std::size_t num_classes) const {
  if (feature_dim == 0) throw InvalidArgument("generator feature_dim must be positive");
  if (!(child_spread > 0.0) || !(parent_spread > child_spread))
    throw InvalidArgument("generator needs parent_spread > child_spread > 0");
  if (!(noise > 0.0)) throw InvalidArgument("generator noise must be positive");
  if (counts.size() != num_classes)
    throw InvalidArgument("generator needs one count per leaf (" + std::to_string(num_classes) +
                          "), got " + std::to_string(counts.size()));
  for (std::size_t c : counts)
    if (c == 0) throw InvalidArgument("generator counts must be >= 1");
}

std::vector<std::size_t> steel_sample_counts(const TaxonomyTree& tree, std::size_t fallback) {
  static const std::map<std::string, std::size_t> table = {
      {"A10", 44}, {"A11", 92}, {"A12", 75}, {"A20", 135}, {"A21", 54},
      {"A30", 127}, {"A31", 115}, {"A40", 18}, {"A41", 105}, {"A50", 89},
      {"A51", 78}, {"A60", 72}, {"A61", 75}, {"A70", 96}};
  std::vector<std::size_t> counts;
  for (const auto& name : tree.leaf_names()) {
    auto it = table.find(name);
    counts.push_back(it == table.end() ? fallback : it->second);
  }
  return counts;
}

GeneratorSpec default_generator_spec(const TaxonomyTree& tree) {
  GeneratorSpec spec;
  spec.counts = steel_sample_counts(tree);
  return spec;
}

namespace {

// Draws parent and leaf means from `rng`, in node order then class order.
Eigen::MatrixXd draw_leaf_means(const TaxonomyTree& tree, const GeneratorSpec& spec,
                                std::mt19937_64& rng) {
  const auto d = static_cast<Eigen::Index>(spec.feature_dim);
  const std::size_t k = tree.num_classes();
  std::normal_distribution<double> normal(0.0, 1.0);

  std::map<std::size_t, Eigen::VectorXd> group_means;
  for (std::size_t id = 0; id < tree.nodes().size(); ++id) {
    if (tree.nodes()[id].depth != 1) continue;
    Eigen::VectorXd mu(d);
    for (Eigen::Index j = 0; j < d; ++j) mu(j) = spec.parent_spread * normal(rng);
    group_means.emplace(id, std::move(mu));
  }

  Eigen::MatrixXd means(static_cast<Eigen::Index>(k), d);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t group = tree.ancestor_at_depth(tree.leaf_node(c), 1);
    for (Eigen::Index j = 0; j < d; ++j)
      means(static_cast<Eigen::Index>(c), j) = group_means.at(group)(j) + spec.child_spread * normal(rng);
  }
  return means;
}

}  // namespace

Eigen::MatrixXd synthetic_leaf_means(const TaxonomyTree& tree, const GeneratorSpec& spec) {
  spec.validate(tree.num_classes());
  std::mt19937_64 rng(spec.seed);
  return draw_leaf_means(tree, spec, rng);
}

LabeledDataset generate_synthetic(const TaxonomyTree& tree, const GeneratorSpec& spec) {
  spec.validate(tree.num_classes());
  std::mt19937_64 rng(spec.seed);
  const Eigen::MatrixXd means = draw_leaf_means(tree, spec, rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t n = std::accumulate(spec.counts.begin(), spec.counts.end(), std::size_t{0});
  const auto d = static_cast<Eigen::Index>(spec.feature_dim);
  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), d);
  ds.labels.reserve(n);
  ds.ids.reserve(n);
  ds.class_names = tree.leaf_names();
  ds.provenance = "synthetic:seed=" + std::to_string(spec.seed);

  Eigen::Index row = 0;
  for (std::size_t c = 0; c < tree.num_classes(); ++c) {
    for (std::size_t s = 0; s < spec.counts[c]; ++s, ++row) {
      for (Eigen::Index j = 0; j < d; ++j)
        ds.features(row, j) = means(static_cast<Eigen::Index>(c), j) + spec.noise * normal(rng);
      ds.labels.push_back(c);
      ds.ids.push_back(static_cast<std::size_t>(row));
    }
  }
  return ds;
}

std::array<std::size_t, 3> split_quotas(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> quota{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    const double exact = fractions[p] * static_cast<double>(n);
    quota[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[p] = exact - static_cast<double>(quota[p]);
    assigned += quota[p];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++quota[order[i % 3]];

  // every partition keeps at least one sample; take it from the largest
  for (std::size_t p = 0; p < 3; ++p) {
    if (quota[p] > 0) continue;
    auto largest = std::max_element(quota.begin(), quota.end());
    --*largest;
    quota[p] = 1;
  }
  return quota;
}

DataSplit stratified_split(const LabeledDataset& ds, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw InvalidArgument("split fractions must all be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < 3)
      throw DatasetError("class '" + ds.class_names[c] + "' has " + std::to_string(rows.size()) +
                         " samples; a three-way split needs at least 3");
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto quota = split_quotas(rows.size(), fractions);
    std::size_t at = 0;
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t q = 0; q < quota[p]; ++q) parts[p].push_back(rows[at++]);
  }
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return {ds.subset(parts[0]), ds.subset(parts[1]), ds.subset(parts[2])};
}

LeaveOutSplit leave_out_class(const LabeledDataset& ds, const TaxonomyTree& tree, std::size_t leaf) {
  if (leaf >= tree.num_classes()) throw InvalidArgument("leaf index out of range");
  if (ds.class_names != tree.leaf_names())
    throw DatasetError("dataset classes do not match the taxonomy");
  if (tree.num_classes() - 1 < 2)
    throw DatasetError("leaving out '" + tree.leaf_name(leaf) + "' leaves fewer than 2 classes");

  TaxonomyTree known_tree = tree.without_leaf(leaf);
  std::vector<std::size_t> known_rows;
  std::vector<std::size_t> novel_rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (ds.labels[i] == leaf ? novel_rows : known_rows).push_back(i);

  LabeledDataset known = ds.subset(known_rows);
  for (auto& label : known.labels) label = known_tree.class_index(ds.class_names[label]);
  known.class_names = known_tree.leaf_names();

  LabeledDataset novel = ds.subset(novel_rows);
  return {std::move(known_tree), std::move(known), std::move(novel)};
}

LabeledDataset load_csv(const std::string& path, const TaxonomyTree& tree) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("'" + path + "' is empty");
  const auto header = text::split_csv_line(line);
  if (header.size() < 2 || text::trim(header.back()) != "label")
    throw DatasetError("header must be f0,...,f{D-1},label");
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j)
    if (text::trim(header[j]) != "f" + std::to_string(j))
      throw DatasetError("header column " + std::to_string(j) + " must be f" + std::to_string(j));

  std::vector<double> values;
  LabeledDataset ds;
  ds.class_names = tree.leaf_names();
  ds.provenance = path;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split_csv_line(line);
    if (fields.size() != d + 1)
      throw DatasetError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) +
                         " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < d; ++j) {
      try {
        values.push_back(text::parse_double(fields[j]));
      } catch (const IoError&) {
        throw DatasetError("line " + std::to_string(line_no) + ": non-numeric feature '" + fields[j] + "'");
      }
    }
    const std::string name = text::trim(fields[d]);
    auto cls = tree.find_class(name);
    if (!cls) throw DatasetError("line " + std::to_string(line_no) + ": unknown leaf '" + name + "'");
    ds.labels.push_back(*cls);
    ds.ids.push_back(ds.ids.size());
  }
  const auto n = static_cast<Eigen::Index>(ds.labels.size());
  ds.features.resize(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j)
      ds.features(i, j) = values[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j)];
  ds.validate();
  return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (std::size_t j = 0; j < ds.feature_dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.feature_dim(); ++j)
      out << text::format_double(ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << ',';
    out << ds.class_names[ds.labels[i]] << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace hierood
