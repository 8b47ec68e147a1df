#pragma once

// Novelty scores. Every score follows one convention: higher means more
// anomalous, and a sample is flagged when its score exceeds a threshold c.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hierood/classifier.hpp"
#include "hierood/taxonomy.hpp"

namespace hierood {

enum class Method { msp, odin, dmd };
enum class Variant { flat, hier };

std::string to_string(Method m);
std::string to_string(Variant v);
Method parse_method(std::string_view s);
Variant parse_variant(std::string_view s);

// First index of the largest probability.
std::size_t predicted_class(const Eigen::VectorXd& probs);

// -max_k probs_k.
double msp_score(const Eigen::VectorXd& probs);

// -sum_k soft(label, k) log probs_k with the given label.
double hier_score_for_label(const Eigen::VectorXd& probs, const SoftLabelMatrix& soft, std::size_t label);
// Hierarchically consistent score with label = argmax probs.
double hier_score(const Eigen::VectorXd& probs, const SoftLabelMatrix& soft);

// x - eps * sign(-grad_x log f_yhat(x; T)), yhat = argmax f(x; T).
Eigen::VectorXd odin_perturb(const ClassifierModel& model, const Eigen::VectorXd& x, double temperature,
                             double epsilon);

struct OdinParams {
  double temperature = 1000.0;
  double epsilon = 0.0012;
};

struct OdinResult {
  double score = 0.0;
  std::size_t predicted = 0;  // argmax f(x; T) of the unperturbed input
};

// flat: -max_k f_k(x~; T).
// hier: -sum_k soft(yhat, k) log f_k(x~; T) with yhat taken from x itself.
OdinResult odin_evaluate(const ClassifierModel& model, const Eigen::VectorXd& x, const OdinParams& params,
                         Variant variant, const SoftLabelMatrix* soft = nullptr);
double odin_score(const ClassifierModel& model, const Eigen::VectorXd& x, double temperature,
                  double epsilon, Variant variant, const SoftLabelMatrix* soft = nullptr);

enum class FitLabels { truth, predicted };
std::string to_string(FitLabels f);
FitLabels parse_fit_labels(std::string_view s);

// Class-conditional Gaussians with a tied covariance over penultimate
// features. `classes[i]` is the label whose mean is row i of `means`.
struct GaussianBank {
  Eigen::MatrixXd means;       // C x H
  Eigen::MatrixXd covariance;  // H x H, unregularized
  Eigen::MatrixXd precision;   // (covariance + ridge I)^-1
  double ridge = 0.0;
  std::vector<std::size_t> classes;
  FitLabels fit_labels = FitLabels::truth;
  bool underdetermined = false;  // N <= H at fit time

  std::size_t feature_dim() const { return static_cast<std::size_t>(covariance.rows()); }
};

struct DmdOptions {
  // ridge = ridge_scale * trace(cov) / H (ridge_scale itself if the trace is 0)
  double ridge_scale = 1e-6;
  // Drop classes without samples instead of failing (predicted-label fits).
  bool skip_empty_classes = false;
  FitLabels fit_labels = FitLabels::truth;
};

// Means and covariance are accumulated over each class's rows in
// lexicographic order, so the result does not depend on sample order.
GaussianBank dmd_fit(const Eigen::MatrixXd& features, const std::vector<std::size_t>& labels,
                     std::size_t num_classes, const DmdOptions& options = {});

// Squared Mahalanobis distance to every class mean.
Eigen::VectorXd mahalanobis_distances(const GaussianBank& bank, const Eigen::VectorXd& g);
// min_k D_k(g).
double dmd_score(const GaussianBank& bank, const Eigen::VectorXd& g);

// First-order terms of the perturbed hierarchical score:
//   score(x~) = score(x) + eps (u1 + u2) + O(eps^2).
struct U1U2 {
  double u1 = 0.0;
  double u2 = 0.0;
  // -sum_{k != yhat} soft(yhat, k) ||grad_x log f_k(x)||_1, never above u2.
  double u2_lower_bound = 0.0;
  std::size_t predicted = 0;
};

U1U2 u1_u2(const ClassifierModel& model, const Eigen::VectorXd& x, double temperature,
           const SoftLabelMatrix& soft);

struct ScoreRecord {
  std::size_t sample_id = 0;
  Method method = Method::msp;
  Variant variant = Variant::flat;
  double beta = 0.0;  // ignored for flat rows
  double score = 0.0;
  std::string predicted_leaf;
  bool is_novel = false;
};

// Columns: sample_id,method,variant,beta,score,predicted_leaf,is_novel.
// Flat rows leave beta empty.
void write_score_dump(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_score_dump(const std::string& path);

}  // namespace hierood
