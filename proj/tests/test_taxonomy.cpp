#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hierood/error.hpp"
#include "hierood/taxonomy.hpp"
#include "test_util.hpp"

using namespace hierood;

TEST_CASE("illustration tree shape") {
  const TaxonomyTree t = testutil::fig_tree();
  CHECK(t.num_classes() == 4);
  CHECK(t.height() == 2);
  CHECK(t.uniform_leaf_depth());
  CHECK(t.leaf_names() == std::vector<std::string>{"L11", "L12", "L21", "L22"});
  CHECK(t.class_index("L21") == 2);
  CHECK_FALSE(t.find_class("P1").has_value());
  CHECK_THROWS_AS(t.class_index("Z9"), TaxonomyError);
}

TEST_CASE("lca levels and distances") {
  const TaxonomyTree t = testutil::fig_tree();
  CHECK(lca_levels(t, 0, 1) == 1);
  CHECK(lca_levels(t, 0, 2) == 2);
  CHECK(lca_levels(t, 3, 3) == 0);
  CHECK(lca_distance(t, 0, 1) == 0.5);
  CHECK(lca_distance(t, 0, 2) == 1.0);
  CHECK(lca_distance(t, 2, 0) == lca_distance(t, 0, 2));
  const Eigen::MatrixXd d = distance_matrix(t);
  CHECK(d.diagonal().isZero(0.0));
  CHECK((d - d.transpose()).isZero(0.0));
  CHECK(t.nodes()[t.lca_node(0, 1)].name == "P1");
  CHECK(t.nodes()[t.lca_node(1, 3)].name == "root");
}

TEST_CASE("lca distance needs uniform leaf depth") {
  const TaxonomyTree t = parse_taxonomy(R"({"name":"r","children":[{"name":"a"},
    {"name":"p","children":[{"name":"b"},{"name":"c"}]}]})");
  CHECK_FALSE(t.uniform_leaf_depth());
  CHECK_THROWS_AS(lca_distance(t, 0, 1), TaxonomyError);
  CHECK_THROWS_AS(soft_label_matrix(t, 1.0), TaxonomyError);
}

TEST_CASE("malformed documents") {
  CHECK_THROWS_AS(parse_taxonomy("{"), TaxonomyError);
  CHECK_THROWS_AS(parse_taxonomy(R"({"name":"r"})"), TaxonomyError);
  CHECK_THROWS_AS(parse_taxonomy(R"({"name":"r","children":[{"name":"a"}]})"), TaxonomyError);
  CHECK_THROWS_AS(parse_taxonomy(R"({"name":"r","children":[{"name":"a"},{"name":"a"}]})"), TaxonomyError);
  CHECK_THROWS_AS(parse_taxonomy(R"({"children":[]})"), TaxonomyError);
  CHECK_THROWS_AS(parse_taxonomy(R"({"name":"r","children":{"name":"a"}})"), TaxonomyError);
}

TEST_CASE("serialization round trip") {
  const TaxonomyTree t = steel_taxonomy();
  const TaxonomyTree back = parse_taxonomy(serialize_taxonomy(t));
  CHECK(back == t);
  CHECK(back.leaf_names() == t.leaf_names());
}

TEST_CASE("steel taxonomy") {
  const TaxonomyTree t = steel_taxonomy();
  CHECK(t.num_classes() == 14);
  CHECK(t.height() == 2);
  CHECK(t.uniform_leaf_depth());
  CHECK(lca_distance(t, t.class_index("A10"), t.class_index("A12")) == 0.5);
  CHECK(lca_distance(t, t.class_index("A40"), t.class_index("A41")) == 1.0);
  CHECK(lca_distance(t, t.class_index("A60"), t.class_index("A61")) == 0.5);
}

TEST_CASE("pruning a leaf") {
  const TaxonomyTree t = steel_taxonomy();
  const TaxonomyTree pruned = t.without_leaf(t.class_index("A40"));
  CHECK(pruned.num_classes() == 13);
  CHECK_FALSE(pruned.find_class("A40").has_value());
  CHECK(pruned.height() == 2);
  // the single-child parent disappears with its leaf
  std::size_t internal = 0;
  for (const auto& n : pruned.nodes()) internal += (n.depth == 1) ? 1 : 0;
  CHECK(internal == 7);

  const TaxonomyTree fig = testutil::fig_tree();
  const TaxonomyTree keep = fig.restricted_to(std::vector<std::string>{"L22", "L11"});
  CHECK(keep.leaf_names() == std::vector<std::string>{"L11", "L22"});
  CHECK(lca_distance(keep, 0, 1) == 1.0);
}

TEST_CASE("soft labels against a direct evaluation") {
  const TaxonomyTree t = testutil::fig_tree();
  for (double beta : {0.1, 1.0, 5.0, 10.0, 100.0}) {
    const SoftLabelMatrix s = soft_label_matrix(t, beta);
    const auto row0 = testutil::naive_soft_row({0.0, 0.5, 1.0, 1.0}, beta);
    const auto row2 = testutil::naive_soft_row({1.0, 1.0, 0.0, 0.5}, beta);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(s(0, k) == doctest::Approx(row0[k]).epsilon(1e-14));
      CHECK(s(2, k) == doctest::Approx(row2[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("soft label row for L11 at beta 5") {
  // 1, e^-2.5, e^-5, e^-5 normalized
  const double z = 1.0 + std::exp(-2.5) + 2.0 * std::exp(-5.0);
  const SoftLabelMatrix s = soft_label_matrix(testutil::fig_tree(), 5.0);
  CHECK(s(0, 0) == doctest::Approx(1.0 / z).epsilon(1e-15));
  CHECK(s(0, 1) == doctest::Approx(std::exp(-2.5) / z).epsilon(1e-15));
  CHECK(s(0, 0) == doctest::Approx(0.9127744580281996).epsilon(1e-13));
  CHECK(s(0, 2) == s(0, 3));
}

TEST_CASE("soft label limits and invariants") {
  const TaxonomyTree t = steel_taxonomy();
  const std::size_t k = t.num_classes();
  for (double beta : {1e-9, 0.1, 1.0, 10.0, 1e4}) {
    const SoftLabelMatrix s = soft_label_matrix(t, beta);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(std::abs(s.row(i).sum() - 1.0) < 1e-12);
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(s(i, j) > 0.0);
        CHECK(s(i, i) >= s(i, j));
      }
    }
  }
  const SoftLabelMatrix tiny = soft_label_matrix(t, 1e-9);
  CHECK((tiny.values().array() - 1.0 / static_cast<double>(k)).abs().maxCoeff() < 1e-6);
  const SoftLabelMatrix huge = soft_label_matrix(t, 1e4);
  CHECK((huge.values() - Eigen::MatrixXd::Identity(14, 14)).cwiseAbs().maxCoeff() < 1e-9);
  // closer leaves get at least as much mass
  const SoftLabelMatrix s = soft_label_matrix(t, 3.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        if (lca_distance(t, i, a) < lca_distance(t, i, b)) CHECK(s(i, a) > s(i, b));
}

TEST_CASE("soft label errors") {
  const TaxonomyTree t = testutil::fig_tree();
  CHECK_THROWS_AS(soft_label_matrix(t, 0.0), InvalidArgument);
  CHECK_THROWS_AS(soft_label_matrix(t, -1.0), InvalidArgument);
  CHECK_THROWS_AS(soft_label_matrix(t, std::nan("")), InvalidArgument);
  CHECK_THROWS_AS(one_hot(4, 4), InvalidArgument);
  const SoftLabelMatrix oh = one_hot_matrix(4);
  CHECK(oh.values() == Eigen::MatrixXd::Identity(4, 4));
  CHECK(std::isinf(oh.beta()));
}
