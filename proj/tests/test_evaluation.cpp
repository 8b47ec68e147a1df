#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "hierood/error.hpp"
#include "hierood/evaluation.hpp"
#include "hierood/ood_scores.hpp"
#include "test_util.hpp"

using namespace hierood;

TEST_CASE("auroc hand cases") {
  CHECK(auroc(std::vector<double>{1, 2}, std::vector<double>{3, 4}) == 1.0);
  CHECK(auroc(std::vector<double>{3, 4}, std::vector<double>{1, 2}) == 0.0);
  CHECK(auroc(std::vector<double>{1, 3}, std::vector<double>{2, 4}) == 0.75);
  const std::vector<double> same{0.3, 0.1, 0.7};
  CHECK(auroc(same, same) == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, same), InvalidArgument);
  CHECK_THROWS_AS(auroc(same, std::vector<double>{NAN}), InvalidArgument);
}

TEST_CASE("auroc equals the all-pairs count") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(1, 100), small(0, 9);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> known(static_cast<std::size_t>(len(rng))), novel(static_cast<std::size_t>(len(rng)));
    // integer-valued lists force plenty of ties
    const bool ties = rep % 2 == 0;
    for (auto& v : known) v = ties ? small(rng) : normal(rng);
    for (auto& v : novel) v = ties ? small(rng) + 1 : normal(rng) + 0.5;
    CHECK(auroc(known, novel) == testutil::brute_auroc(known, novel));
  }
}

TEST_CASE("auroc is invariant to increasing transforms") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> k(50), n(40);
  for (auto& v : k) v = normal(rng);
  for (auto& v : n) v = normal(rng) + 1.0;
  std::vector<double> k2, n2;
  for (double v : k) k2.push_back(std::exp(3.0 * v) + 1.0);
  for (double v : n) n2.push_back(std::exp(3.0 * v) + 1.0);
  CHECK(auroc(k, n) == auroc(k2, n2));
}

TEST_CASE("nearest-rank percentile") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(nearest_rank_percentile(v, 0.95) == 95.0);
  CHECK(nearest_rank_percentile(v, 1.0) == 100.0);
  CHECK(nearest_rank_percentile(v, 0.001) == 1.0);
  std::vector<double> forty(40);
  std::iota(forty.begin(), forty.end(), 1.0);
  CHECK(nearest_rank_percentile(forty, 0.95) == 38.0);
}

namespace {

// Integer re-trace of the removal rule on 1..n: keep ceil(19 m / 20) values.
double traced_threshold(int n) {
  int m = n;
  while (true) {
    const int c = (19 * m + 19) / 20;
    if (c == m) return c;
    m = c;
  }
}

}  // namespace

TEST_CASE("calibration on 1..100 at alpha 0.05") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const CalibrationResult r = calibrate_threshold(v, 0.05);
  CHECK(r.threshold == traced_threshold(100));
  CHECK(r.threshold == 19.0);
  CHECK(r.removed == 81);
  CHECK(r.alpha == 0.05);
  // the first pass alone gives 95
  std::vector<double> first(v);
  CHECK(nearest_rank_percentile(first, 0.95) == 95.0);

  std::vector<double> kept;
  for (double s : v)
    if (s <= r.threshold) kept.push_back(s);
  const CalibrationResult again = calibrate_threshold(kept, 0.05);
  CHECK(again.threshold == r.threshold);
  CHECK(again.iterations == 1);
  CHECK(again.removed == 0);
}

TEST_CASE("calibration edge cases") {
  const std::vector<double> constant(30, 2.5);
  const CalibrationResult r = calibrate_threshold(constant, 0.1);
  CHECK(r.threshold == 2.5);
  CHECK(r.iterations == 1);
  CHECK_THROWS_AS(calibrate_threshold(constant, 0.0), InvalidArgument);
  CHECK_THROWS_AS(calibrate_threshold(constant, 1.0), InvalidArgument);
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.05), InvalidArgument);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> scores(500);
  for (auto& s : scores) s = normal(rng);
  const CalibrationResult c = calibrate_threshold(scores, 0.05);
  CHECK(c.iterations >= 1);
  CHECK(c.iterations <= 100);
  CHECK(std::isfinite(c.threshold));
}

TEST_CASE("standardization") {
  CHECK(standardize_scores(std::vector<double>{6.0}, 2.0, 2.0)[0] == 2.0);
  CHECK(standardize_scores(std::vector<double>{2.0}, 2.0, 2.0)[0] == 0.0);
  CHECK_THROWS_AS(standardize_scores(std::vector<double>{1.0}, 0.0, 0.0), InvalidArgument);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(3.0, 2.0);
  std::vector<double> v(77);
  for (auto& x : v) x = normal(rng);
  const MeanStd ms = mean_std(v);
  const MeanStd z = mean_std(standardize_scores(v, ms.mean, ms.std));
  CHECK(std::abs(z.mean) < 1e-9);
  CHECK(std::abs(z.std - 1.0) < 1e-9);
}

TEST_CASE("summary half width") {
  const Summary s = summarize(std::vector<double>{1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.count == 4);
  CHECK(s.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("rank-distance curve of soft-label rows is non-decreasing") {
  const TaxonomyTree t = steel_taxonomy();
  const SoftLabelMatrix s = soft_label_matrix(t, 4.0);
  const auto points = rank_distance_points(s.values(), distance_matrix(t));
  REQUIRE(points.size() == 13);
  CHECK(points.front().rank == 2);
  for (std::size_t i = 1; i < points.size(); ++i) CHECK(points[i].distance.mean >= points[i - 1].distance.mean);
}

TEST_CASE("rank-distance curve with two classes") {
  const TaxonomyTree t = parse_taxonomy(R"({"name":"r","children":[{"name":"a"},{"name":"b"}]})");
  Eigen::MatrixXd p(3, 2);
  p << 0.9, 0.1, 0.2, 0.8, 0.5, 0.5;
  const auto points = rank_distance_points(p, distance_matrix(t));
  REQUIRE(points.size() == 1);
  CHECK(points[0].distance.mean == 1.0);
  CHECK_THROWS_AS(rank_distance_points(Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Zero(1, 1)),
                  InvalidArgument);
}

TEST_CASE("uniform random predictions give the mean pairwise distance") {
  const TaxonomyTree t = steel_taxonomy();
  const Eigen::MatrixXd d = distance_matrix(t);
  const double k = 14.0;
  const double pairwise = (d.sum()) / (k * (k - 1.0));
  std::mt19937_64 rng(5);
  Eigen::MatrixXd p(300, 14);
  for (int i = 0; i < 300; ++i) p.row(i) = testutil::random_simplex(14, rng).transpose();
  for (const auto& pt : rank_distance_points(p, d))
    CHECK(std::abs(pt.distance.mean - pairwise) < 1.5 * pt.distance.half_width + 1e-12);
}

TEST_CASE("u1/u2 summaries") {
  const TaxonomyTree t = testutil::fig_tree();
  const ClassifierModel m = testutil::random_model(4, {5}, 4, 6);
  std::mt19937_64 rng(6);
  Eigen::MatrixXd known(20, 4), novel(15, 4);
  for (int i = 0; i < 20; ++i) known.row(i) = testutil::random_vector(4, rng).transpose();
  for (int i = 0; i < 15; ++i) novel.row(i) = testutil::random_vector(4, rng, 3.0).transpose();
  const U1U2Summary flat = u1u2_summary(m, known, novel, one_hot_matrix(4), 10.0);
  CHECK(flat.u2_known.mean == 0.0);
  CHECK(flat.u2_novel.mean == 0.0);
  CHECK(flat.u1_known.count == 20);
  CHECK(flat.u1_known.mean <= 0.0);
  CHECK_THROWS_AS(u1u2_summary(m, known, Eigen::MatrixXd(0, 4), one_hot_matrix(4), 10.0), InvalidArgument);
}
