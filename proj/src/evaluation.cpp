#include "hierood/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hierood/error.hpp"
#include "hierood/ood_scores.hpp"
#include "hierood/text_io.hpp"

namespace hierood {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " contain a non-finite value");
}

constexpr std::size_t kMaxCalibrationPasses = 100;

}  // namespace

double auroc(std::span<const double> known_scores, std::span<const double> novel_scores) {
  if (known_scores.empty() || novel_scores.empty())
    throw InvalidArgument("AUROC needs non-empty known and novel score lists");
  require_finite(known_scores, "known scores");
  require_finite(novel_scores, "novel scores");

  struct Entry {
    double score;
    bool novel;
  };
  std::vector<Entry> all;
  all.reserve(known_scores.size() + novel_scores.size());
  for (double s : known_scores) all.push_back({s, false});
  for (double s : novel_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // twice the mid-rank keeps everything integral
  long long novel_rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const long long rank_x2 = static_cast<long long>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (all[t].novel) novel_rank_sum_x2 += rank_x2;
    i = j;
  }
  const auto n1 = static_cast<long long>(novel_scores.size());
  const auto n0 = static_cast<long long>(known_scores.size());
  const long long u_x2 = novel_rank_sum_x2 - n1 * (n1 + 1);
  return static_cast<double>(u_x2) / 2.0 / static_cast<double>(n1 * n0);
}

double nearest_rank_percentile(std::span<const double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of an empty list");
  if (!(p > 0.0) || p > 1.0) throw InvalidArgument("percentile level must be in (0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // tolerance absorbs representation error in p (0.95 * 40 must give 38)
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

CalibrationResult calibrate_threshold(std::span<const double> val_scores, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw InvalidArgument("alpha must be in (0, 1)");
  if (val_scores.empty()) throw InvalidArgument("calibration needs validation scores");
  require_finite(val_scores, "validation scores");

  std::vector<double> kept(val_scores.begin(), val_scores.end());
  CalibrationResult result;
  result.alpha = alpha;
  while (result.iterations < kMaxCalibrationPasses) {
    ++result.iterations;
    result.threshold = nearest_rank_percentile(kept, 1.0 - alpha);
    const auto before = kept.size();
    std::erase_if(kept, [&](double s) { return s > result.threshold; });
    if (kept.empty()) throw InvalidArgument("calibration removed every validation sample");
    if (kept.size() == before) break;
  }
  result.removed = val_scores.size() - kept.size();
  return result;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of an empty list");
  MeanStd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::vector<double> standardize_scores(std::span<const double> scores, double val_mean, double val_std) {
  if (!(val_std > 0.0)) throw InvalidArgument("standardization needs a positive standard deviation");
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back((s - val_mean) / val_std);
  return out;
}

Summary summarize(std::span<const double> values) {
  const MeanStd ms = mean_std(values);
  Summary s;
  s.mean = ms.mean;
  s.count = values.size();
  s.half_width = 1.96 * ms.std / std::sqrt(static_cast<double>(values.size()));
  return s;
}

std::vector<RankPoint> rank_distance_points(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& distances) {
  const Eigen::Index k = probs.cols();
  if (k < 2) throw InvalidArgument("rank-distance curve needs K >= 2");
  if (distances.rows() != k || distances.cols() != k)
    throw ShapeError("distance matrix does not match the number of classes");
  if (probs.rows() == 0) throw InvalidArgument("rank-distance curve needs samples");

  std::vector<std::vector<double>> per_rank(static_cast<std::size_t>(k - 1));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  for (Eigen::Index n = 0; n < probs.rows(); ++n) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return probs(n, a) > probs(n, b); });
    for (std::size_t r = 1; r < order.size(); ++r)
      per_rank[r - 1].push_back(distances(order[r], order[0]));
  }
  std::vector<RankPoint> points;
  for (std::size_t r = 0; r < per_rank.size(); ++r) points.push_back({r + 2, summarize(per_rank[r])});
  return points;
}

RankDistanceCurve rank_distance_curve(const ClassifierModel& model, const Eigen::MatrixXd& known_features,
                                      const Eigen::MatrixXd& novel_features, const TaxonomyTree& tree) {
  if (tree.num_classes() < 2) throw InvalidArgument("rank-distance curve needs K >= 2");
  if (model.architecture().num_classes != tree.num_classes())
    throw ShapeError("model and taxonomy disagree on the number of classes");
  const Eigen::MatrixXd d = distance_matrix(tree);
  RankDistanceCurve curve;
  if (known_features.rows() > 0) curve.known = rank_distance_points(forward_batch(model, known_features).probs, d);
  if (novel_features.rows() > 0) curve.novel = rank_distance_points(forward_batch(model, novel_features).probs, d);
  return curve;
}

U1U2Summary u1u2_summary(const ClassifierModel& model, const Eigen::MatrixXd& known_features,
                         const Eigen::MatrixXd& novel_features, const SoftLabelMatrix& soft,
                         double temperature) {
  if (known_features.rows() == 0 || novel_features.rows() == 0)
    throw InvalidArgument("U1/U2 summary needs known and novel samples");
  auto collect = [&](const Eigen::MatrixXd& xs, std::vector<double>& u1, std::vector<double>& u2) {
    for (Eigen::Index n = 0; n < xs.rows(); ++n) {
      const U1U2 terms = u1_u2(model, xs.row(n).transpose(), temperature, soft);
      u1.push_back(terms.u1);
      u2.push_back(terms.u2);
    }
  };
  std::vector<double> u1k, u2k, u1n, u2n;
  collect(known_features, u1k, u2k);
  collect(novel_features, u1n, u2n);
  return {summarize(u1k), summarize(u2k), summarize(u1n), summarize(u2n)};
}

void write_rank_distance_csv(const std::string& path, const RankDistanceCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "population,rank,mean,half_width,count\n";
  auto emit = [&](const char* population, const std::vector<RankPoint>& points) {
    for (const auto& p : points)
      out << population << ',' << p.rank << ',' << text::format_double(p.distance.mean) << ','
          << text::format_double(p.distance.half_width) << ',' << p.distance.count << '\n';
  };
  emit("known", curve.known);
  emit("novel", curve.novel);
}

void write_u1u2_csv(const std::string& path, const U1U2Summary& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "population,term,mean,half_width,count\n";
  auto emit = [&](const char* population, const char* term, const Summary& v) {
    out << population << ',' << term << ',' << text::format_double(v.mean) << ','
        << text::format_double(v.half_width) << ',' << v.count << '\n';
  };
  emit("known", "u1", s.u1_known);
  emit("known", "u2", s.u2_known);
  emit("novel", "u1", s.u1_novel);
  emit("novel", "u2", s.u2_novel);
}

}  // namespace hierood
