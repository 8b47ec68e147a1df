// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hierood/error.hpp"
#include "hierood/evaluation.hpp"
#include "hierood/harness.hpp"
#include "hierood/ood_scores.hpp"
#include "hierood/taxonomy.hpp"
#include "test_util.hpp"

using namespace hierood;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates the first failing check and a short summary.
struct Checker {
  Outcome out;
  void require(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
  void note(const std::string& s) {
    if (out.pass) out.detail = s;
  }
};

std::string num(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

Outcome soft_labels() {
  Checker c;
  const TaxonomyTree fig = testutil::fig_tree();
  c.require(lca_distance(fig, 0, 1) == 0.5, "d(L11,L12) != 0.5");
  c.require(lca_distance(fig, 0, 2) == 1.0, "d(L11,L21) != 1.0");
  double worst_sum = 0.0;
  for (const TaxonomyTree& t : {fig, steel_taxonomy()})
    for (double beta : {1e-9, 0.1, 1.0, 5.0, 10.0, 100.0, 1e4}) {
      const SoftLabelMatrix s = soft_label_matrix(t, beta);
      for (std::size_t i = 0; i < s.size(); ++i) worst_sum = std::max(worst_sum, std::abs(s.row(i).sum() - 1.0));
    }
  c.require(worst_sum <= 1e-12, "row sum off by " + num(worst_sum));
  const SoftLabelMatrix flat = soft_label_matrix(steel_taxonomy(), 1e-9);
  const double uniform_gap = (flat.values().array() - 1.0 / 14.0).abs().maxCoeff();
  c.require(uniform_gap <= 1e-6, "beta=1e-9 differs from uniform by " + num(uniform_gap));
  const SoftLabelMatrix sharp = soft_label_matrix(steel_taxonomy(), 1e4);
  const double hot_gap = (sharp.values() - Eigen::MatrixXd::Identity(14, 14)).cwiseAbs().maxCoeff();
  c.require(hot_gap <= 1e-9, "beta=1e4 differs from one-hot by " + num(hot_gap));
  c.note("max row-sum error " + num(worst_sum, 3) + ", uniform gap " + num(uniform_gap, 3) + ", one-hot gap " +
         num(hot_gap, 3));
  return c.out;
}

Outcome entropy_minimum() {
  Checker c;
  std::mt19937_64 rng(101);
  const TaxonomyTree fig = testutil::fig_tree();
  const SoftLabelMatrix s = soft_label_matrix(fig, 5.0);
  double worst = 0.0;
  for (std::size_t y = 0; y < s.size(); ++y) {
    const Eigen::VectorXd l = s.row(y);
    double h = 0.0;
    for (Eigen::Index k = 0; k < l.size(); ++k) h -= l(k) * std::log(l(k));
    const double at_l = hier_score_for_label(l, s, y);
    worst = std::max(worst, std::abs(at_l - h));
    for (int i = 0; i < 100; ++i) {
      const double w = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
      const Eigen::VectorXd q = (1.0 - w) * l + w * testutil::random_simplex(l.size(), rng);
      c.require(hier_score_for_label(q, s, y) > at_l, "perturbation did not increase the score");
    }
  }
  c.require(worst <= 1e-12, "s(l) - H(l) = " + num(worst));
  c.note("max |s(l) - H(l)| " + num(worst, 3) + ", 400 perturbations all larger");
  return c.out;
}

Outcome msp_limit() {
  Checker c;
  std::mt19937_64 rng(102);
  const SoftLabelMatrix s = soft_label_matrix(steel_taxonomy(), 1e6);
  std::vector<double> hs, ms;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd p = testutil::random_simplex(14, rng);
    hs.push_back(hier_score(p, s));
    ms.push_back(-std::log(p.maxCoeff()));
    worst = std::max(worst, std::abs(hs.back() - ms.back()));
  }
  c.require(worst <= 1e-6, "pointwise gap " + num(worst));
  std::vector<std::size_t> a(hs.size()), b(hs.size());
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  std::stable_sort(a.begin(), a.end(), [&](auto i, auto j) { return hs[i] < hs[j]; });
  std::stable_sort(b.begin(), b.end(), [&](auto i, auto j) { return ms[i] < ms[j]; });
  c.require(a == b, "rank orderings differ");
  c.note("max gap " + num(worst, 3) + ", orderings identical");
  return c.out;
}

Outcome temperature_expansion() {
  Checker c;
  std::mt19937_64 rng(103);
  const std::vector<double> ts{1e2, 1e3, 1e4};
  double lo = 10.0, hi = -10.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd g = testutil::random_vector(5, rng, 2.0);
    const Eigen::Index k = rep % 5;
    std::vector<double> residual;
    for (double t : ts) {
      const double f = softmax_T(g, t)(k);
      double spread = 0.0;
      for (Eigen::Index j = 0; j < g.size(); ++j)
        if (j != k) spread += g(j) - g(k);
      residual.push_back(std::abs(f - 1.0 / (static_cast<double>(g.size()) + spread / t)));
    }
    const double slope = testutil::loglog_slope(ts, residual);
    lo = std::min(lo, slope);
    hi = std::max(hi, slope);
    c.require(std::abs(slope + 2.0) <= 0.2, "slope " + num(slope) + " on vector " + std::to_string(rep));
  }
  c.note("slopes in [" + num(lo, 4) + ", " + num(hi, 4) + "]");
  return c.out;
}

Outcome perturbation_expansion() {
  Checker c;
  std::mt19937_64 rng(104);
  const TaxonomyTree fig = testutil::fig_tree();
  const SoftLabelMatrix s = soft_label_matrix(fig, 5.0);
  const double t = 1000.0;
  const std::vector<double> eps{1e-2, 5e-3, 2.5e-3};
  double lo = 10.0, hi = -10.0;
  int outside = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const ClassifierModel m = testutil::random_model(6, {8, 6}, 4, 500 + rep);
    const Eigen::VectorXd x = testutil::random_vector(6, rng);
    const U1U2 u = u1_u2(m, x, t, s);
    c.require(u.u2 >= u.u2_lower_bound, "U2 below its bound");
    const double base = odin_score(m, x, t, 0.0, Variant::hier, &s);
    std::vector<double> residual;
    for (double e : eps)
      residual.push_back(std::abs(odin_score(m, x, t, e, Variant::hier, &s) - base - e * (u.u1 + u.u2)));
    const double slope = testutil::loglog_slope(eps, residual);
    lo = std::min(lo, slope);
    hi = std::max(hi, slope);
    const bool ok = std::abs(slope - 2.0) <= 0.2;
    outside += ok ? 0 : 1;
    c.require(ok, "slope " + num(slope) + " on draw " + std::to_string(rep));
  }
  if (outside > 0) c.out.detail += " (" + std::to_string(outside) + " of 20 draws outside 2 +- 0.2)";
  std::size_t violations = 0;
  for (std::uint64_t rep = 0; rep < 1000; ++rep) {
    const ClassifierModel m = testutil::random_model(5, {6}, 4, 10000 + rep);
    const U1U2 u = u1_u2(m, testutil::random_vector(5, rng), t, s);
    violations += u.u2 < u.u2_lower_bound ? 1 : 0;
  }
  c.require(violations == 0, std::to_string(violations) + " lower-bound violations");
  c.note("slopes in [" + num(lo, 4) + ", " + num(hi, 4) + "], bound held on 1020 draws");
  return c.out;
}

double norm_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

Outcome gradient_checks() {
  Checker c;
  std::mt19937_64 rng(105);
  double worst_param = 0.0, worst_input = 0.0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    const ClassifierModel m = testutil::random_model(4, {5, 4}, 3, 700 + rep, 0.7);
    Eigen::MatrixXd xs(6, 4), ts(6, 3);
    for (int i = 0; i < 6; ++i) {
      xs.row(i) = testutil::random_vector(4, rng).transpose();
      ts.row(i) = testutil::random_simplex(3, rng).transpose();
    }
    const Eigen::VectorXd grad = param_gradient(m, xs, ts).gradient;
    Eigen::VectorXd fd(grad.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      ClassifierModel plus = m, minus = m;
      Eigen::VectorXd p = m.parameters();
      p(i) += 1e-5;
      plus.set_parameters(p);
      p(i) -= 2e-5;
      minus.set_parameters(p);
      fd(i) = (mean_soft_ce(plus, xs, ts) - mean_soft_ce(minus, xs, ts)) / 2e-5;
    }
    worst_param = std::max(worst_param, norm_rel(grad, fd));

    const Eigen::VectorXd x = xs.row(0).transpose();
    for (double t : {1.0, 1000.0}) {
      const Eigen::MatrixXd jac = input_log_prob_jacobian(m, x, t);
      for (Eigen::Index k = 0; k < 3; ++k) {
        const double h = 1e-5;
        Eigen::VectorXd fdx(4);
        for (Eigen::Index j = 0; j < 4; ++j) {
          Eigen::VectorXd xp = x, xm = x;
          xp(j) += h;
          xm(j) -= h;
          fdx(j) = (testutil::ref_log_prob(testutil::ref_logits(m, xp), t, k) -
                    testutil::ref_log_prob(testutil::ref_logits(m, xm), t, k)) /
                   (2 * h);
        }
        worst_input = std::max(worst_input, norm_rel(jac.row(k).transpose(), fdx));
      }
    }
  }
  c.require(worst_param < 1e-5, "parameter gradient relative error " + num(worst_param));
  c.require(worst_input < 1e-5, "input gradient relative error " + num(worst_input));
  c.note("worst relative error: parameters " + num(worst_param, 3) + ", inputs " + num(worst_input, 3));
  return c.out;
}

Outcome mahalanobis_oracle() {
  Checker c;
  std::mt19937_64 rng(106);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 80, h = 5, k = 4;
    Eigen::MatrixXd f(n, h);
    std::vector<std::size_t> labels(n);
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i % k);
      f.row(i) = testutil::random_vector(h, rng).transpose() * (1.0 + 0.3 * (i % 3)) +
                 Eigen::RowVectorXd::Constant(h, 1.5 * (i % k));
    }
    const GaussianBank bank = dmd_fit(f, labels, k);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(k, h);
    for (int i = 0; i < n; ++i) mu.row(i % k) += f.row(i) / (n / k);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(h, h);
    for (int i = 0; i < n; ++i) {
      const Eigen::RowVectorXd d = f.row(i) - mu.row(i % k);
      cov += d.transpose() * d / n;
    }
    const Eigen::MatrixXd reg = cov + bank.ridge * Eigen::MatrixXd::Identity(h, h);
    for (int q = 0; q < 20; ++q) {
      const Eigen::VectorXd g = testutil::random_vector(h, rng, 3.0);
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd d = g - mu.row(j).transpose();
        best = std::min(best, d.dot(reg.colPivHouseholderQr().solve(d)));
      }
      worst = std::max(worst, std::abs(dmd_score(bank, g) - best));
    }
    for (int j = 0; j < k; ++j)
      c.require(mahalanobis_distances(bank, bank.means.row(j).transpose())(j) == 0.0, "D_k(mu_k) != 0");
  }
  c.require(worst <= 1e-8, "oracle gap " + num(worst));
  GaussianBank unit;
  unit.means = Eigen::MatrixXd::Zero(1, 2);
  unit.covariance = unit.precision = Eigen::MatrixXd::Identity(2, 2);
  unit.classes = {0};
  const double hand = dmd_score(unit, Eigen::Vector2d(3.0, 4.0));
  c.require(hand == 25.0, "hand case gave " + num(hand));
  c.note("max oracle gap " + num(worst, 3) + ", hand case 25");
  return c.out;
}

Outcome odin_degeneracy() {
  Checker c;
  std::mt19937_64 rng(107);
  const SoftLabelMatrix s = soft_label_matrix(steel_taxonomy(), 10.0);
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const ClassifierModel m = testutil::random_model(8, {10}, 14, 900 + rep);
    const Eigen::VectorXd x = testutil::random_vector(8, rng);
    const Eigen::VectorXd p = forward(m, x).probs;
    c.require(odin_score(m, x, 1.0, 0.0, Variant::flat, nullptr) == msp_score(p), "flat ODIN != MSP");
    c.require(odin_score(m, x, 1.0, 0.0, Variant::hier, &s) == hier_score(p, s), "hier ODIN != hier score");
  }
  c.note("50 draws bitwise equal");
  return c.out;
}

Outcome auroc_oracle() {
  Checker c;
  std::mt19937_64 rng(108);
  std::uniform_int_distribution<int> len(1, 100), small(0, 6);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> known(static_cast<std::size_t>(len(rng))), novel(static_cast<std::size_t>(len(rng)));
    for (auto& v : known) v = rep % 2 ? normal(rng) : small(rng);
    for (auto& v : novel) v = rep % 2 ? normal(rng) + 0.7 : small(rng) + 1;
    c.require(auroc(known, novel) == testutil::brute_auroc(known, novel), "mismatch on list " + std::to_string(rep));
  }
  const double hand = auroc(std::vector<double>{1, 3}, std::vector<double>{2, 4});
  c.require(hand == 0.75, "hand case gave " + num(hand));
  c.note("100 lists exact, hand case 0.75");
  return c.out;
}

Outcome calibration() {
  Checker c;
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  // retrace on integers: 1..m keeps ceil(19 m / 20) values
  int m = 100;
  while ((19 * m + 19) / 20 != m) m = (19 * m + 19) / 20;
  const CalibrationResult r = calibrate_threshold(v, 0.05);
  c.require(r.threshold == m, "1..100 gave " + num(r.threshold) + ", trace gives " + std::to_string(m));
  std::mt19937_64 rng(109);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s(200 + rep);
    for (auto& x : s) x = normal(rng);
    const CalibrationResult first = calibrate_threshold(s, 0.05);
    std::vector<double> kept;
    for (double x : s)
      if (x <= first.threshold) kept.push_back(x);
    const CalibrationResult again = calibrate_threshold(kept, 0.05);
    c.require(again.threshold == first.threshold && again.removed == 0, "rerun moved the threshold");
  }
  c.note("1..100 -> " + num(r.threshold) + " after " + std::to_string(r.iterations) + " passes; 50 reruns stable");
  return c.out;
}

// Shared end-to-end sweep for the directional criteria.
struct Sweep {
  std::vector<ExperimentResult> results;
  std::vector<CellFailure> failures;
  std::string error;
};

const Sweep& acceptance_sweep() {
  static const Sweep sweep = [] {
    Sweep s;
    try {
      ExperimentConfig config = load_config(HIEROOD_ACCEPTANCE_CONFIG);
      config.output_dir = (fs::path(HIEROOD_ACCEPTANCE_OUT) / "acceptance_run").string();
      fs::remove_all(config.output_dir);
      const ExperimentContext ctx = prepare_context(config);
      const ScenarioRun run = run_experiment(ctx, config);
      s.results = run.results;
      s.failures = run.failures;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    return s;
  }();
  return sweep;
}

double seed_spread(const std::vector<ExperimentResult>& rs, Method m, Variant v, double beta) {
  std::vector<double> a;
  for (const auto& r : rs)
    if (r.method == m && r.variant == v && (v == Variant::flat || r.beta == beta)) a.push_back(r.auroc);
  if (a.size() < 2) return 0.0;
  return mean_std(a).std;
}

Outcome hier_vs_flat() {
  Checker c;
  const Sweep& s = acceptance_sweep();
  c.require(s.error.empty(), "sweep failed: " + s.error);
  c.require(s.failures.empty(), std::to_string(s.failures.size()) + " cells failed");
  if (!c.out.pass) return c.out;
  std::ostringstream detail;
  for (Method m : {Method::msp, Method::odin, Method::dmd}) {
    const double f = median_auroc(s.results, m, Variant::flat);
    const double h = median_auroc(s.results, m, Variant::hier, 10.0);
    const bool ok = m == Method::dmd ? h >= f : h > f;
    c.require(ok, to_string(m) + ": hier " + num(h) + " vs flat " + num(f));
    detail << to_string(m) << " h " << num(h, 4) << " / f " << num(f, 4) << " (sd "
           << num(seed_spread(s.results, m, Variant::hier, 10.0), 2) << " / "
           << num(seed_spread(s.results, m, Variant::flat, 0.0), 2) << "); ";
  }
  if (c.out.pass) {
    c.out.detail = detail.str();
  } else {
    c.out.detail += " | " + detail.str();
  }
  return c.out;
}

Outcome low_beta() {
  Checker c;
  const Sweep& s = acceptance_sweep();
  c.require(s.error.empty(), "sweep failed: " + s.error);
  if (!c.out.pass) return c.out;
  std::ostringstream detail;
  for (Method m : {Method::msp, Method::odin, Method::dmd}) {
    const double lo = median_auroc(s.results, m, Variant::hier, 0.1);
    const double hi = median_auroc(s.results, m, Variant::hier, 10.0);
    c.require(lo < hi, to_string(m) + ": beta 0.1 " + num(lo) + " vs beta 10 " + num(hi));
    detail << to_string(m) << " " << num(lo, 4) << " < " << num(hi, 4) << "; ";
  }
  if (c.out.pass) c.out.detail = detail.str();
  return c.out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"soft labels: distances, row sums, beta limits", soft_labels},
      {"hier score minimized at the soft row (entropy)", entropy_minimum},
      {"hier score -> -log max f at large beta", msp_limit},
      {"large-temperature softmax expansion, slope -2", temperature_expansion},
      {"first-order perturbation terms U1+U2, slope 2, U2 bound", perturbation_expansion},
      {"parameter and input gradients vs finite differences", gradient_checks},
      {"Mahalanobis scores vs linear-solve oracle", mahalanobis_oracle},
      {"ODIN at T=1, eps=0 equals MSP / hier score", odin_degeneracy},
      {"AUROC vs all-pairs oracle", auroc_oracle},
      {"end-to-end: hier beats flat in median AUROC (beta=10)", hier_vs_flat},
      {"end-to-end: beta=0.1 below beta=10 in median AUROC", low_beta},
      {"threshold calibration fixed point and hand trace", calibration},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    failed += o.pass ? 0 : 1;
    std::printf("%s [%2zu] %s (%lld ms): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                static_cast<long long>(ms), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
