#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hierood/classifier.hpp"
#include "hierood/taxonomy.hpp"

namespace hierood {

// P(novel score > known score) with ties counted 1/2, from mid-ranks.
double auroc(std::span<const double> known_scores, std::span<const double> novel_scores);

// Nearest-rank percentile: the ceil(p n)-th smallest value, p in (0, 1].
double nearest_rank_percentile(std::span<const double> values, double p);

struct CalibrationResult {
  double threshold = 0.0;
  double alpha = 0.0;
  std::size_t iterations = 0;
  std::size_t removed = 0;
};

// c <- (1 - alpha) nearest-rank percentile of the retained scores; scores
// above c are removed; repeat until a pass removes nothing (at most 100).
CalibrationResult calibrate_threshold(std::span<const double> val_scores, double alpha);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};
MeanStd mean_std(std::span<const double> values);

std::vector<double> standardize_scores(std::span<const double> scores, double val_mean, double val_std);

// Mean with a normal-approximation 95% half-width, 1.96 s / sqrt(n).
struct Summary {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

struct RankPoint {
  std::size_t rank = 0;  // 2..K
  Summary distance;
};

struct RankDistanceCurve {
  std::vector<RankPoint> known;
  std::vector<RankPoint> novel;
};

// For each row of `probs`, the LCA distance between the class at rank r and
// the top class, summarized per rank r = 2..K.
std::vector<RankPoint> rank_distance_points(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& distances);

RankDistanceCurve rank_distance_curve(const ClassifierModel& model, const Eigen::MatrixXd& known_features,
                                      const Eigen::MatrixXd& novel_features, const TaxonomyTree& tree);

struct U1U2Summary {
  Summary u1_known;
  Summary u2_known;
  Summary u1_novel;
  Summary u2_novel;
};

U1U2Summary u1u2_summary(const ClassifierModel& model, const Eigen::MatrixXd& known_features,
                         const Eigen::MatrixXd& novel_features, const SoftLabelMatrix& soft,
                         double temperature);

// Columns: population,rank,mean,half_width,count.
void write_rank_distance_csv(const std::string& path, const RankDistanceCurve& curve);
// Columns: population,term,mean,half_width,count.
void write_u1u2_csv(const std::string& path, const U1U2Summary& summary);

}  // namespace hierood
