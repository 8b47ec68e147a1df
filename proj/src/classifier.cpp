#include "hierood/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hierood/error.hpp"
#include "json.hpp"

namespace hierood {

namespace {

std::atomic<std::uint64_t> g_clamp_count{0};

struct Activations {
  // layers[0] is the input (D x N); layers[l] the tanh output of hidden layer l.
  std::vector<Eigen::MatrixXd> layers;
  Eigen::MatrixXd logits;  // K x N
};

Activations run_layers(const ClassifierModel& model, const Eigen::MatrixXd& inputs_cols) {
  const auto& arch = model.architecture();
  Activations act;
  act.layers.reserve(arch.num_layers());
  act.layers.push_back(inputs_cols);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    Eigen::MatrixXd z = model.weight(l) * act.layers.back();
    z.colwise() += model.bias(l);
    if (l + 1 == arch.num_layers()) {
      act.logits = std::move(z);
    } else {
      act.layers.push_back(z.array().tanh().matrix());
    }
  }
  return act;
}

void check_input(const ClassifierModel& model, Eigen::Index cols) {
  if (static_cast<std::size_t>(cols) != model.architecture().input_dim)
    throw ShapeError("input has " + std::to_string(cols) + " features, model expects " +
                     std::to_string(model.architecture().input_dim));
}

// Log-softmax of each column.
Eigen::MatrixXd log_softmax_cols(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    const double m = logits.col(n).maxCoeff();
    const double lse = m + std::log((logits.col(n).array() - m).exp().sum());
    out.col(n) = logits.col(n).array() - lse;
  }
  return out;
}

void check_targets(const ClassifierModel& model, const Eigen::MatrixXd& features,
                   const Eigen::MatrixXd& targets) {
  check_input(model, features.cols());
  if (targets.rows() != features.rows() ||
      static_cast<std::size_t>(targets.cols()) != model.architecture().num_classes)
    throw ShapeError("targets must be N x K matching the features and model");
}

}  // namespace

std::size_t Architecture::num_parameters() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) total += layer_out(l) * (layer_in(l) + 1);
  return total;
}

ClassifierModel::ClassifierModel(Architecture arch) : arch_(std::move(arch)) {
  if (arch_.input_dim == 0 || arch_.num_classes < 2)
    throw ShapeError("architecture needs input_dim >= 1 and at least 2 classes");
  for (std::size_t h : arch_.hidden)
    if (h == 0) throw ShapeError("hidden layer widths must be positive");
  std::size_t at = 0;
  for (std::size_t l = 0; l < arch_.num_layers(); ++l) {
    offsets_.push_back(at);
    at += arch_.layer_out(l) * (arch_.layer_in(l) + 1);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(at));
}

ClassifierModel ClassifierModel::initialized(Architecture arch, std::uint64_t seed) {
  ClassifierModel model(std::move(arch));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < model.arch_.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.arch_.layer_in(l)));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    auto w = model.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(rng);
  }
  return model;
}

void ClassifierModel::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) throw ShapeError("parameter vector has the wrong length");
  if (!params.allFinite()) throw InvalidArgument("parameters must be finite");
  params_ = params;
}

Eigen::Map<const Eigen::MatrixXd> ClassifierModel::weight(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer), static_cast<Eigen::Index>(arch_.layer_out(layer)),
          static_cast<Eigen::Index>(arch_.layer_in(layer))};
}

Eigen::Map<const Eigen::VectorXd> ClassifierModel::bias(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer) + arch_.layer_out(layer) * arch_.layer_in(layer),
          static_cast<Eigen::Index>(arch_.layer_out(layer))};
}

Eigen::Map<Eigen::MatrixXd> ClassifierModel::weight(std::size_t layer) {
  return {params_.data() + offsets_.at(layer), static_cast<Eigen::Index>(arch_.layer_out(layer)),
          static_cast<Eigen::Index>(arch_.layer_in(layer))};
}

Eigen::Map<Eigen::VectorXd> ClassifierModel::bias(std::size_t layer) {
  return {params_.data() + offsets_.at(layer) + arch_.layer_out(layer) * arch_.layer_in(layer),
          static_cast<Eigen::Index>(arch_.layer_out(layer))};
}

Eigen::VectorXd softmax_T(const Eigen::VectorXd& logits, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (logits.size() == 0) throw ShapeError("softmax of an empty vector");
  Eigen::VectorXd scaled = logits / temperature;
  scaled.array() -= scaled.maxCoeff();
  Eigen::VectorXd e = scaled.array().exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax_T(const Eigen::VectorXd& logits, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (logits.size() == 0) throw ShapeError("softmax of an empty vector");
  Eigen::VectorXd scaled = logits / temperature;
  const double m = scaled.maxCoeff();
  const double lse = m + std::log((scaled.array() - m).exp().sum());
  return scaled.array() - lse;
}

ForwardResult forward(const ClassifierModel& model, const Eigen::VectorXd& x) {
  check_input(model, x.size());
  if (!x.allFinite()) throw InvalidArgument("input contains non-finite values");
  Activations act = run_layers(model, x);
  ForwardResult out;
  out.penultimate = act.layers.back().col(0);
  out.logits = act.logits.col(0);
  out.probs = softmax_T(out.logits, 1.0);
  return out;
}

BatchForward forward_batch(const ClassifierModel& model, const Eigen::MatrixXd& features) {
  check_input(model, features.cols());
  if (!features.allFinite()) throw InvalidArgument("input contains non-finite values");
  Activations act = run_layers(model, features.transpose());
  BatchForward out;
  out.penultimate = act.layers.back().transpose();
  out.logits = act.logits.transpose();
  out.probs.resize(out.logits.rows(), out.logits.cols());
  for (Eigen::Index n = 0; n < out.logits.rows(); ++n)
    out.probs.row(n) = softmax_T(out.logits.row(n).transpose(), 1.0).transpose();
  return out;
}

double soft_ce_loss(const Eigen::VectorXd& probs, const Eigen::VectorXd& target) {
  if (probs.size() != target.size() || probs.size() == 0)
    throw ShapeError("probability and target vectors must be non-empty and equal length");
  double loss = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (target(k) == 0.0) continue;
    double p = probs(k);
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
    loss -= target(k) * std::log(p);
  }
  return loss;
}

std::uint64_t soft_ce_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }

double mean_soft_ce(const ClassifierModel& model, const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& targets) {
  check_targets(model, features, targets);
  Activations act = run_layers(model, features.transpose());
  const Eigen::MatrixXd logp = log_softmax_cols(act.logits);
  return -(targets.transpose().array() * logp.array()).sum() / static_cast<double>(features.rows());
}

LossAndGradient param_gradient(const ClassifierModel& model, const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& targets) {
  check_targets(model, features, targets);
  const auto& arch = model.architecture();
  const double n = static_cast<double>(features.rows());
  Activations act = run_layers(model, features.transpose());
  const Eigen::MatrixXd logp = log_softmax_cols(act.logits);
  const Eigen::MatrixXd t = targets.transpose();

  LossAndGradient out;
  out.loss = -(t.array() * logp.array()).sum() / n;
  out.gradient = Eigen::VectorXd::Zero(model.parameters().size());

  // d loss / d logits = p * sum_k t_k - t, per sample
  const Eigen::MatrixXd probs = logp.array().exp();
  const Eigen::RowVectorXd mass = t.colwise().sum();
  Eigen::MatrixXd delta = (probs.array().rowwise() * mass.array() - t.array()).matrix() / n;

  for (std::size_t l = arch.num_layers(); l-- > 0;) {
    const Eigen::MatrixXd& input = act.layers[l];
    const auto rows = static_cast<Eigen::Index>(arch.layer_out(l));
    const auto cols = static_cast<Eigen::Index>(arch.layer_in(l));
    const auto offset = static_cast<Eigen::Index>(model.weight_offset(l));
    Eigen::Map<Eigen::MatrixXd>(out.gradient.data() + offset, rows, cols) = delta * input.transpose();
    out.gradient.segment(offset + rows * cols, rows) = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = model.weight(l).transpose() * delta;
    delta = back.array() * (1.0 - input.array().square());
  }
  return out;
}

Eigen::MatrixXd input_log_prob_jacobian(const ClassifierModel& model, const Eigen::VectorXd& x,
                                        double temperature) {
  check_input(model, x.size());
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  const auto& arch = model.architecture();
  Activations act = run_layers(model, x);
  const Eigen::VectorXd p = softmax_T(act.logits.col(0), temperature);
  const auto k = static_cast<Eigen::Index>(arch.num_classes);

  // d log f_k / d logits_j = (delta_kj - p_j) / T
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(k, k);
  jac.rowwise() -= p.transpose();
  jac /= temperature;
  for (std::size_t l = arch.num_layers(); l-- > 0;) {
    jac = jac * model.weight(l);
    if (l == 0) break;
    const Eigen::VectorXd slope = 1.0 - act.layers[l].col(0).array().square();
    jac = jac * slope.asDiagonal();
  }
  return jac;
}

Eigen::VectorXd input_gradient(const ClassifierModel& model, const Eigen::VectorXd& x,
                               double temperature, std::size_t k) {
  if (k >= model.architecture().num_classes) throw ShapeError("class index out of range");
  return input_log_prob_jacobian(model, x, temperature).row(static_cast<Eigen::Index>(k)).transpose();
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (beta && (!(*beta > 0.0) || !std::isfinite(*beta)))
    throw InvalidArgument("beta must be positive and finite");
  if (weight_decay < 0.0) throw InvalidArgument("weight decay must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("momentum must be in [0, 1)");
}

Eigen::MatrixXd training_targets(const LabeledDataset& ds, const TaxonomyTree& tree,
                                 std::optional<double> beta) {
  if (ds.class_names != tree.leaf_names())
    throw DatasetError("dataset classes are not indexed against this taxonomy");
  const SoftLabelMatrix soft = beta ? soft_label_matrix(tree, *beta) : one_hot_matrix(tree.num_classes());
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(tree.num_classes()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    targets.row(static_cast<Eigen::Index>(i)) = soft.values().row(static_cast<Eigen::Index>(ds.labels[i]));
  return targets;
}

TrainResult train(const ClassifierModel& model, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, const TaxonomyTree& tree, const TrainConfig& config) {
  config.validate();
  train_ds.validate();
  val_ds.validate();
  const auto& arch = model.architecture();
  if (arch.num_classes != tree.num_classes())
    throw ShapeError("model has " + std::to_string(arch.num_classes) + " outputs, taxonomy has " +
                     std::to_string(tree.num_classes()) + " leaves");
  check_input(model, train_ds.features.cols());

  const Eigen::MatrixXd train_targets = training_targets(train_ds, tree, config.beta);
  const Eigen::MatrixXd val_targets = training_targets(val_ds, tree, config.beta);

  // weight decay applies to weights only
  Eigen::VectorXd decay_mask = Eigen::VectorXd::Zero(model.parameters().size());
  for (std::size_t l = 0; l < arch.num_layers(); ++l)
    decay_mask.segment(static_cast<Eigen::Index>(model.weight_offset(l)),
                       static_cast<Eigen::Index>(arch.layer_out(l) * arch.layer_in(l)))
        .setOnes();

  ClassifierModel current = model;
  Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd best = theta;
  TrainResult result{model, {}};
  result.history.best_val_loss = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n = train_ds.size();
  const auto d = train_ds.features.cols();
  const auto k = train_targets.cols();
  Eigen::MatrixXd batch_x;
  Eigen::MatrixXd batch_t;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      batch_x.resize(rows, d);
      batch_t.resize(rows, k);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]);
        batch_x.row(r) = train_ds.features.row(src);
        batch_t.row(r) = train_targets.row(src);
      }
      LossAndGradient lg = param_gradient(current, batch_x, batch_t);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) +
                               " (lr=" + std::to_string(config.learning_rate) + ")");
      lg.gradient += config.weight_decay * decay_mask.cwiseProduct(theta);
      velocity = config.momentum * velocity + lg.gradient;
      theta -= config.learning_rate * velocity;
      if (!theta.allFinite())
        throw TrainingDiverged("non-finite parameters at epoch " + std::to_string(epoch + 1));
      current.set_parameters(theta);
    }

    const double train_loss = mean_soft_ce(current, train_ds.features, train_targets);
    const double val_loss = mean_soft_ce(current, val_ds.features, val_targets);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw TrainingDiverged("non-finite loss after epoch " + std::to_string(epoch + 1));
    result.history.train_loss.push_back(train_loss);
    result.history.val_loss.push_back(val_loss);
    if (val_loss < result.history.best_val_loss) {
      result.history.best_val_loss = val_loss;
      result.history.best_epoch = epoch;
      best = theta;
    }
  }

  result.model.set_parameters(best);
  result.model.class_names = tree.leaf_names();
  result.model.trained = true;
  return result;
}

void save_model(const ClassifierModel& model, const std::string& path) {
  const auto& arch = model.architecture();
  const auto& p = model.parameters();
  nlohmann::json doc = {
      {"format", "hierood-model"},
      {"version", 1},
      {"input_dim", arch.input_dim},
      {"hidden", arch.hidden},
      {"num_classes", arch.num_classes},
      {"class_names", model.class_names},
      {"trained", model.trained},
      {"parameters", std::vector<double>(p.data(), p.data() + p.size())}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (doc.at("format") != "hierood-model") throw IoError("'" + path + "' is not a model checkpoint");
    if (doc.at("version").get<int>() != 1) throw IoError("unsupported checkpoint version");
    Architecture arch;
    arch.input_dim = doc.at("input_dim").get<std::size_t>();
    arch.hidden = doc.at("hidden").get<std::vector<std::size_t>>();
    arch.num_classes = doc.at("num_classes").get<std::size_t>();
    ClassifierModel model(arch);
    const auto params = doc.at("parameters").get<std::vector<double>>();
    model.set_parameters(Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size())));
    model.class_names = doc.at("class_names").get<std::vector<std::string>>();
    model.trained = doc.at("trained").get<bool>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace hierood
