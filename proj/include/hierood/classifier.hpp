#pragma once

// Small fully connected softmax classifier with tanh hidden layers.
//
// Parameters live in one flat vector, layer by layer: W_l (out x in,
// column-major) followed by b_l. The penultimate representation g(x) is the
// last hidden activation (the input itself when there are no hidden layers).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hierood/dataset.hpp"
#include "hierood/taxonomy.hpp"

namespace hierood {

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t num_classes = 0;

  std::size_t num_layers() const { return hidden.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden[l - 1]; }
  std::size_t layer_out(std::size_t l) const { return l == hidden.size() ? num_classes : hidden[l]; }
  std::size_t penultimate_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
  std::size_t num_parameters() const;
  bool operator==(const Architecture&) const = default;
};

class ClassifierModel {
 public:
  // All-zero parameters.
  explicit ClassifierModel(Architecture arch);
  // Fan-in scaled uniform weights U(-1/sqrt(in), 1/sqrt(in)), zero biases.
  static ClassifierModel initialized(Architecture arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::size_t num_parameters() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  // Offset of W_l in the flat vector; b_l follows it.
  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }

  std::vector<std::string> class_names;
  bool trained = false;

 private:
  Architecture arch_;
  Eigen::VectorXd params_;
  std::vector<std::size_t> offsets_;
};

struct ForwardResult {
  Eigen::VectorXd penultimate;
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

ForwardResult forward(const ClassifierModel& model, const Eigen::VectorXd& x);

// Row-per-sample variants of `forward`.
struct BatchForward {
  Eigen::MatrixXd penultimate;  // N x H
  Eigen::MatrixXd logits;       // N x K
  Eigen::MatrixXd probs;        // N x K
};
BatchForward forward_batch(const ClassifierModel& model, const Eigen::MatrixXd& features);

// exp(g_k / T) / sum_j exp(g_j / T), evaluated with max subtraction.
Eigen::VectorXd softmax_T(const Eigen::VectorXd& logits, double temperature);
Eigen::VectorXd log_softmax_T(const Eigen::VectorXd& logits, double temperature);

// Floor applied to probabilities inside logarithms.
inline constexpr double kProbabilityFloor = 1e-300;

// -sum_k target_k log probs_k. Zero probabilities under positive target mass
// are clamped to kProbabilityFloor and counted by soft_ce_clamp_count().
double soft_ce_loss(const Eigen::VectorXd& probs, const Eigen::VectorXd& target);
std::uint64_t soft_ce_clamp_count();

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

// Mean soft cross-entropy over the rows of `features` against `targets`
// (N x K, rows on the simplex) and its exact gradient w.r.t. the parameters.
LossAndGradient param_gradient(const ClassifierModel& model, const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& targets);
double mean_soft_ce(const ClassifierModel& model, const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& targets);

// grad_x log f_k(x; T).
Eigen::VectorXd input_gradient(const ClassifierModel& model, const Eigen::VectorXd& x,
                               double temperature, std::size_t k);
// All K input gradients at once; row k is grad_x log f_k(x; T).
Eigen::MatrixXd input_log_prob_jacobian(const ClassifierModel& model, const Eigen::VectorXd& x,
                                        double temperature);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // Soft-label strength; empty means flat (one-hot) training.
  std::optional<double> beta;
  double weight_decay = 1e-4;
  double momentum = 0.9;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // full training set, after each epoch
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

struct TrainResult {
  ClassifierModel model;
  TrainHistory history;
};

// Per-sample training targets: soft-label rows of the true labels, or one-hot
// rows when `beta` is empty.
Eigen::MatrixXd training_targets(const LabeledDataset& ds, const TaxonomyTree& tree,
                                 std::optional<double> beta);

// Mini-batch SGD with momentum on the mean soft cross-entropy. Returns the
// parameters of the epoch with the lowest validation loss.
TrainResult train(const ClassifierModel& model, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, const TaxonomyTree& tree, const TrainConfig& config);

void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);

}  // namespace hierood
