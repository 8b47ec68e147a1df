#include "hierood/ood_scores.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hierood/error.hpp"
#include "hierood/text_io.hpp"

namespace hierood {

std::string to_string(Method m) {
  switch (m) {
    case Method::msp: return "msp";
    case Method::odin: return "odin";
    case Method::dmd: return "dmd";
  }
  return "?";
}

std::string to_string(Variant v) { return v == Variant::flat ? "flat" : "hier"; }

Method parse_method(std::string_view s) {
  if (s == "msp") return Method::msp;
  if (s == "odin") return Method::odin;
  if (s == "dmd") return Method::dmd;
  throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

Variant parse_variant(std::string_view s) {
  if (s == "flat") return Variant::flat;
  if (s == "hier") return Variant::hier;
  throw InvalidArgument("unknown variant '" + std::string(s) + "'");
}

std::string to_string(FitLabels f) { return f == FitLabels::truth ? "true" : "predicted"; }

FitLabels parse_fit_labels(std::string_view s) {
  if (s == "true") return FitLabels::truth;
  if (s == "predicted") return FitLabels::predicted;
  throw InvalidArgument("unknown DMD fit-label mode '" + std::string(s) + "'");
}

std::size_t predicted_class(const Eigen::VectorXd& probs) {
  if (probs.size() == 0) throw ShapeError("empty probability vector");
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < probs.size(); ++k)
    if (probs(k) > probs(best)) best = k;
  return static_cast<std::size_t>(best);
}

double msp_score(const Eigen::VectorXd& probs) {
  if (probs.size() == 0) throw ShapeError("empty probability vector");
  return -probs.maxCoeff();
}

double hier_score_for_label(const Eigen::VectorXd& probs, const SoftLabelMatrix& soft, std::size_t label) {
  if (static_cast<std::size_t>(probs.size()) != soft.size())
    throw ShapeError("probability vector length does not match the soft-label matrix");
  if (label >= soft.size()) throw ShapeError("label out of range");
  double score = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double w = soft(label, static_cast<std::size_t>(k));
    if (w == 0.0) continue;
    score -= w * std::log(std::max(probs(k), kProbabilityFloor));
  }
  return score;
}

double hier_score(const Eigen::VectorXd& probs, const SoftLabelMatrix& soft) {
  return hier_score_for_label(probs, soft, predicted_class(probs));
}

Eigen::VectorXd odin_perturb(const ClassifierModel& model, const Eigen::VectorXd& x, double temperature,
                             double epsilon) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("perturbation magnitude must be non-negative");
  const ForwardResult fwd = forward(model, x);
  const std::size_t yhat = predicted_class(softmax_T(fwd.logits, temperature));
  const Eigen::VectorXd grad = input_gradient(model, x, temperature, yhat);
  const Eigen::VectorXd direction = (-grad).array().sign();
  return x - epsilon * direction;
}

OdinResult odin_evaluate(const ClassifierModel& model, const Eigen::VectorXd& x, const OdinParams& params,
                         Variant variant, const SoftLabelMatrix* soft) {
  if (variant == Variant::hier && soft == nullptr)
    throw InvalidArgument("hierarchical ODIN needs a soft-label matrix");
  const Eigen::VectorXd perturbed = odin_perturb(model, x, params.temperature, params.epsilon);
  const ForwardResult original = forward(model, x);
  OdinResult out;
  out.predicted = predicted_class(softmax_T(original.logits, params.temperature));
  const Eigen::VectorXd probs = softmax_T(forward(model, perturbed).logits, params.temperature);
  out.score = variant == Variant::flat ? msp_score(probs) : hier_score_for_label(probs, *soft, out.predicted);
  return out;
}

double odin_score(const ClassifierModel& model, const Eigen::VectorXd& x, double temperature,
                  double epsilon, Variant variant, const SoftLabelMatrix* soft) {
  return odin_evaluate(model, x, {temperature, epsilon}, variant, soft).score;
}

GaussianBank dmd_fit(const Eigen::MatrixXd& features, const std::vector<std::size_t>& labels,
                     std::size_t num_classes, const DmdOptions& options) {
  const auto h = features.cols();
  if (h == 0) throw ShapeError("DMD needs at least one feature dimension");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ShapeError("features and labels differ in count");
  if (!(options.ridge_scale >= 0.0)) throw InvalidArgument("ridge scale must be non-negative");

  std::vector<std::vector<Eigen::Index>> rows(num_classes);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= num_classes) throw ShapeError("label out of range");
    rows[labels[n]].push_back(static_cast<Eigen::Index>(n));
  }

  GaussianBank bank;
  bank.fit_labels = options.fit_labels;
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (!rows[k].empty()) {
      bank.classes.push_back(k);
    } else if (!options.skip_empty_classes) {
      throw InvalidArgument("class " + std::to_string(k) + " has no samples");
    }
  }
  if (bank.classes.empty()) throw InvalidArgument("no samples to fit");

  const auto lex_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < h; ++j) {
      if (features(a, j) < features(b, j)) return true;
      if (features(b, j) < features(a, j)) return false;
    }
    return false;
  };

  bank.means.resize(static_cast<Eigen::Index>(bank.classes.size()), h);
  bank.covariance = Eigen::MatrixXd::Zero(h, h);
  for (std::size_t c = 0; c < bank.classes.size(); ++c) {
    auto& members = rows[bank.classes[c]];
    std::sort(members.begin(), members.end(), lex_less);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(h);
    for (Eigen::Index n : members) mean += features.row(n).transpose();
    mean /= static_cast<double>(members.size());
    bank.means.row(static_cast<Eigen::Index>(c)) = mean.transpose();
    for (Eigen::Index n : members) {
      const Eigen::VectorXd diff = features.row(n).transpose() - mean;
      bank.covariance.noalias() += diff * diff.transpose();
    }
  }
  bank.covariance /= static_cast<double>(labels.size());
  bank.underdetermined = static_cast<Eigen::Index>(labels.size()) <= h;

  const double mean_variance = bank.covariance.trace() / static_cast<double>(h);
  bank.ridge = options.ridge_scale * (mean_variance > 0.0 ? mean_variance : 1.0);
  const Eigen::MatrixXd regularized =
      bank.covariance + bank.ridge * Eigen::MatrixXd::Identity(h, h);
  Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("covariance is not positive definite; use a positive ridge");
  Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(h, h));
  bank.precision = 0.5 * (precision + precision.transpose());
  return bank;
}

Eigen::VectorXd mahalanobis_distances(const GaussianBank& bank, const Eigen::VectorXd& g) {
  if (static_cast<std::size_t>(g.size()) != bank.feature_dim())
    throw ShapeError("feature vector has " + std::to_string(g.size()) + " entries, bank expects " +
                     std::to_string(bank.feature_dim()));
  Eigen::VectorXd out(bank.means.rows());
  for (Eigen::Index c = 0; c < bank.means.rows(); ++c) {
    const Eigen::VectorXd diff = g - bank.means.row(c).transpose();
    out(c) = diff.dot(bank.precision * diff);
  }
  return out;
}

double dmd_score(const GaussianBank& bank, const Eigen::VectorXd& g) {
  return mahalanobis_distances(bank, g).minCoeff();
}

U1U2 u1_u2(const ClassifierModel& model, const Eigen::VectorXd& x, double temperature,
           const SoftLabelMatrix& soft) {
  if (soft.size() != model.architecture().num_classes)
    throw ShapeError("soft-label matrix does not match the model's classes");
  const Eigen::MatrixXd jac = input_log_prob_jacobian(model, x, temperature);
  U1U2 out;
  out.predicted = predicted_class(softmax_T(forward(model, x).logits, temperature));
  const auto yhat = static_cast<Eigen::Index>(out.predicted);
  const Eigen::VectorXd direction = (-jac.row(yhat)).array().sign();

  out.u1 = -soft(out.predicted, out.predicted) * jac.row(yhat).lpNorm<1>();
  for (Eigen::Index k = 0; k < jac.rows(); ++k) {
    if (k == yhat) continue;
    const double w = soft(out.predicted, static_cast<std::size_t>(k));
    out.u2 += w * direction.dot(jac.row(k).transpose());
    out.u2_lower_bound -= w * jac.row(k).lpNorm<1>();
  }
  return out;
}

void write_score_dump(const std::string& path, const std::vector<ScoreRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "sample_id,method,variant,beta,score,predicted_leaf,is_novel\n";
  for (const auto& r : records) {
    out << r.sample_id << ',' << to_string(r.method) << ',' << to_string(r.variant) << ','
        << (r.variant == Variant::flat ? std::string() : text::format_double(r.beta)) << ','
        << text::format_double(r.score) << ',' << r.predicted_leaf << ',' << (r.is_novel ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<ScoreRecord> read_score_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "sample_id,method,variant,beta,score,predicted_leaf,is_novel")
    throw IoError("'" + path + "' is not a score dump");
  std::vector<ScoreRecord> records;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (f.size() != 7) throw IoError("score dump row has " + std::to_string(f.size()) + " fields");
    ScoreRecord r;
    r.sample_id = static_cast<std::size_t>(std::stoull(f[0]));
    r.method = parse_method(f[1]);
    r.variant = parse_variant(f[2]);
    r.beta = text::trim(f[3]).empty() ? 0.0 : text::parse_double(f[3]);
    r.score = text::parse_double(f[4]);
    r.predicted_leaf = text::trim(f[5]);
    r.is_novel = text::trim(f[6]) == "1";
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace hierood
