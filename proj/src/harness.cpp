#include "hierood/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "hierood/error.hpp"
#include "hierood/evaluation.hpp"
#include "hierood/text_io.hpp"

namespace hierood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string resolve(const std::string& path, const fs::path& base) {
  fs::path p(path);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.string();
}

void check_keys(const json& doc, std::initializer_list<const char*> allowed, const char* where) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

std::string beta_field(Variant v, double beta) {
  return v == Variant::flat ? std::string() : text::format_double(beta);
}

struct CellOutput {
  std::vector<ExperimentResult> rows;
};

std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& probs) {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index n = 0; n < probs.rows(); ++n) out.push_back(predicted_class(probs.row(n).transpose()));
  return out;
}

CellOutput run_cell(const ScenarioSpec& spec, const ExperimentConfig& config, const ScenarioData& data,
                    const CellKey& cell) {
  const auto start = std::chrono::steady_clock::now();
  const LeaveOutSplit& lo = data.leave_out;
  const DataSplit& split = data.split;
  const TaxonomyTree& tree = lo.known_tree;

  const TrainResult trained = train_cell(data, cell, config);
  const ClassifierModel& model = trained.model;
  const SoftLabelMatrix soft = cell_soft_labels(tree, cell);
  const OdinParams odin{spec.temperature, spec.epsilon};
  const auto pred_test = argmax_rows(forward_batch(model, split.test.features).probs);
  const auto pred_novel = argmax_rows(forward_batch(model, lo.novel.features).probs);

  const fs::path out_dir(config.output_dir);
  const std::string dump_rel = (fs::path("scores") / (cell.id() + ".csv")).string();
  std::vector<ScoreRecord> dump;
  std::ostringstream standardized;
  standardized << "sample_id,method,variant,beta,standardized_score,is_novel\n";

  CellOutput out;
  for (Method method : spec.detectors) {
    std::optional<GaussianBank> bank;
    if (method == Method::dmd) bank = fit_bank(model, split.train, config.dmd_labels);
    const GaussianBank* bank_ptr = bank ? &*bank : nullptr;
    const auto val = score_dataset(model, split.val, method, cell.variant, soft, odin, bank_ptr);
    const auto test = score_dataset(model, split.test, method, cell.variant, soft, odin, bank_ptr);
    const auto novel = score_dataset(model, lo.novel, method, cell.variant, soft, odin, bank_ptr);

    ExperimentResult r;
    r.scenario = cell.scenario;
    r.method = method;
    r.variant = cell.variant;
    r.beta = cell.beta;
    r.seed = cell.seed;
    r.learning_rate = cell.learning_rate;
    r.auroc = auroc(test, novel);
    r.threshold = calibrate_threshold(val, spec.alpha).threshold;
    r.score_dump = dump_rel;
    out.rows.push_back(r);

    for (std::size_t i = 0; i < test.size(); ++i)
      dump.push_back({split.test.ids[i], method, cell.variant, cell.beta, test[i], tree.leaf_name(pred_test[i]), false});
    for (std::size_t i = 0; i < novel.size(); ++i)
      dump.push_back({lo.novel.ids[i], method, cell.variant, cell.beta, novel[i], tree.leaf_name(pred_novel[i]), true});

    const MeanStd ms = mean_std(val);
    if (config.diagnostics && ms.std > 0.0) {
      const auto zt = standardize_scores(test, ms.mean, ms.std);
      const auto zn = standardize_scores(novel, ms.mean, ms.std);
      auto emit = [&](const LabeledDataset& ds, const std::vector<double>& z, int is_novel) {
        for (std::size_t i = 0; i < z.size(); ++i)
          standardized << ds.ids[i] << ',' << to_string(method) << ',' << to_string(cell.variant) << ','
                       << beta_field(cell.variant, cell.beta) << ',' << text::format_double(z[i]) << ','
                       << is_novel << '\n';
      };
      emit(split.test, zt, 0);
      emit(lo.novel, zn, 1);
    }
  }
  write_score_dump((out_dir / dump_rel).string(), dump);

  if (config.diagnostics) {
    const fs::path diag = out_dir / "diagnostics";
    write_rank_distance_csv((diag / "rank_distance" / (cell.id() + ".csv")).string(),
                            rank_distance_curve(model, split.test.features, lo.novel.features, tree));
    write_u1u2_csv((diag / "u1u2" / (cell.id() + ".csv")).string(),
                   u1u2_summary(model, split.test.features, lo.novel.features, soft, spec.temperature));
    std::ofstream std_out(diag / "standardized" / (cell.id() + ".csv"));
    std_out << standardized.str();
  }

  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  for (auto& r : out.rows) r.wall_ms = elapsed.count();
  return out;
}

std::vector<CellKey> enumerate_cells(const ScenarioSpec& spec) {
  std::vector<CellKey> cells;
  for (Variant v : spec.variants) {
    const std::vector<double> betas = v == Variant::flat ? std::vector<double>{0.0} : spec.betas;
    for (double beta : betas)
      for (std::uint64_t seed : spec.seeds)
        for (double lr : spec.learning_rates) cells.push_back({spec.left_out, v, beta, seed, lr});
  }
  return cells;
}

void write_failures(const fs::path& path, const std::vector<CellFailure>& failures) {
  std::ofstream out(path, std::ios::app);
  for (const auto& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out << f.cell.id() << ',' << f.kind << ',' << msg << '\n';
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& key) {
  return splitmix64(master_seed ^ splitmix64(fnv1a(key)));
}

ScenarioData prepare_scenario(const ExperimentContext& context, const std::string& left_out,
                              const ExperimentConfig& config) {
  const std::size_t leaf = context.tree.class_index(left_out);
  LeaveOutSplit lo = leave_out_class(context.data, context.tree, leaf);
  DataSplit split = stratified_split(lo.known, config.split, derive_seed(config.master_seed, "split|" + left_out));
  return {std::move(lo), std::move(split)};
}

TrainResult train_cell(const ScenarioData& data, const CellKey& cell, const ExperimentConfig& config) {
  const std::string stream = cell.scenario + "|" + std::to_string(cell.seed) + "|" +
                             text::format_double(cell.learning_rate);
  const TaxonomyTree& tree = data.leave_out.known_tree;
  Architecture arch{data.split.train.feature_dim(), config.training.hidden, tree.num_classes()};
  const ClassifierModel init =
      ClassifierModel::initialized(arch, derive_seed(config.master_seed, "init|" + stream));
  TrainConfig tc;
  tc.learning_rate = cell.learning_rate;
  tc.epochs = config.training.epochs;
  tc.batch_size = config.training.batch_size;
  tc.seed = derive_seed(config.master_seed, "shuffle|" + stream);
  if (cell.variant == Variant::hier) tc.beta = cell.beta;
  tc.weight_decay = config.training.weight_decay;
  tc.momentum = config.training.momentum;
  return train(init, data.split.train, data.split.val, tree, tc);
}

SoftLabelMatrix cell_soft_labels(const TaxonomyTree& known_tree, const CellKey& cell) {
  return cell.variant == Variant::hier ? soft_label_matrix(known_tree, cell.beta)
                                       : one_hot_matrix(known_tree.num_classes());
}

GaussianBank fit_bank(const ClassifierModel& model, const LabeledDataset& train_ds, FitLabels labels) {
  const BatchForward fwd = forward_batch(model, train_ds.features);
  DmdOptions opts;
  opts.fit_labels = labels;
  opts.skip_empty_classes = labels == FitLabels::predicted;
  return dmd_fit(fwd.penultimate, labels == FitLabels::truth ? train_ds.labels : argmax_rows(fwd.probs),
                 model.architecture().num_classes, opts);
}

std::vector<double> score_dataset(const ClassifierModel& model, const LabeledDataset& ds, Method method,
                                  Variant variant, const SoftLabelMatrix& soft, const OdinParams& odin,
                                  const GaussianBank* bank) {
  if (method == Method::dmd && bank == nullptr) throw InvalidArgument("DMD scoring needs a fitted bank");
  const BatchForward fwd = forward_batch(model, ds.features);
  std::vector<double> scores;
  scores.reserve(ds.size());
  for (Eigen::Index n = 0; n < fwd.probs.rows(); ++n) {
    switch (method) {
      case Method::msp: {
        const Eigen::VectorXd probs = fwd.probs.row(n).transpose();
        scores.push_back(variant == Variant::flat ? msp_score(probs) : hier_score(probs, soft));
        break;
      }
      case Method::odin:
        scores.push_back(odin_evaluate(model, ds.features.row(n).transpose(), odin, variant, &soft).score);
        break;
      case Method::dmd:
        scores.push_back(dmd_score(*bank, fwd.penultimate.row(n).transpose()));
        break;
    }
  }
  return scores;
}

std::string CellKey::id() const {
  std::string s = scenario + "__" + to_string(variant);
  if (variant == Variant::hier) s += "__b" + text::format_double(beta);
  s += "__s" + std::to_string(seed) + "__lr" + text::format_double(learning_rate);
  return s;
}

void ScenarioSpec::validate(const TaxonomyTree& tree) const {
  if (!tree.find_class(left_out)) throw ConfigError("unknown left-out leaf '" + left_out + "'");
  if (detectors.empty() || variants.empty() || seeds.empty() || learning_rates.empty())
    throw ConfigError("detector, variant, seed and learning-rate sets must be non-empty");
  const bool has_hier = std::find(variants.begin(), variants.end(), Variant::hier) != variants.end();
  if (has_hier && betas.empty()) throw ConfigError("hierarchical variant needs a non-empty beta grid");
  for (double b : betas)
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("beta values must be positive and finite");
  for (double lr : learning_rates)
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be an object");
  check_keys(doc,
             {"taxonomy", "data", "generator", "scenarios", "detectors", "variants", "betas", "seeds",
              "learning_rates", "temperature", "epsilon", "alpha", "training", "split", "dmd_labels", "seed",
              "output_dir", "threads", "diagnostics"},
             "config");
  ExperimentConfig c;
  try {
    if (doc.contains("taxonomy")) c.taxonomy_path = resolve(doc.at("taxonomy").get<std::string>(), base_dir);
    if (doc.contains("data")) c.data_path = resolve(doc.at("data").get<std::string>(), base_dir);
    if (doc.contains("generator")) {
      const json& g = doc.at("generator");
      check_keys(g, {"feature_dim", "counts", "parent_spread", "child_spread", "noise", "seed"}, "generator");
      GeneratorSpec spec;
      spec.feature_dim = get_or(g, "feature_dim", spec.feature_dim);
      spec.parent_spread = get_or(g, "parent_spread", spec.parent_spread);
      spec.child_spread = get_or(g, "child_spread", spec.child_spread);
      spec.noise = get_or(g, "noise", spec.noise);
      spec.seed = get_or(g, "seed", spec.seed);
      if (g.contains("counts")) {
        if (!g.at("counts").is_array()) throw ConfigError("generator.counts must be a list (class order)");
        spec.counts = g.at("counts").get<std::vector<std::size_t>>();
      }
      c.generator = spec;
    }
    c.scenarios = get_or(doc, "scenarios", c.scenarios);
    if (doc.contains("detectors")) {
      c.grid.detectors.clear();
      for (const auto& s : doc.at("detectors")) c.grid.detectors.push_back(parse_method(s.get<std::string>()));
    }
    if (doc.contains("variants")) {
      c.grid.variants.clear();
      for (const auto& s : doc.at("variants")) c.grid.variants.push_back(parse_variant(s.get<std::string>()));
    }
    c.grid.betas = get_or(doc, "betas", c.grid.betas);
    c.grid.seeds = get_or(doc, "seeds", c.grid.seeds);
    c.grid.learning_rates = get_or(doc, "learning_rates", c.grid.learning_rates);
    c.grid.temperature = get_or(doc, "temperature", c.grid.temperature);
    c.grid.epsilon = get_or(doc, "epsilon", c.grid.epsilon);
    c.grid.alpha = get_or(doc, "alpha", c.grid.alpha);
    if (doc.contains("training")) {
      const json& t = doc.at("training");
      check_keys(t, {"hidden", "epochs", "batch_size", "weight_decay", "momentum"}, "training");
      c.training.hidden = get_or(t, "hidden", c.training.hidden);
      c.training.epochs = get_or(t, "epochs", c.training.epochs);
      c.training.batch_size = get_or(t, "batch_size", c.training.batch_size);
      c.training.weight_decay = get_or(t, "weight_decay", c.training.weight_decay);
      c.training.momentum = get_or(t, "momentum", c.training.momentum);
    }
    if (doc.contains("split")) {
      const auto s = doc.at("split").get<std::vector<double>>();
      if (s.size() != 3) throw ConfigError("split must have three fractions");
      c.split = {s[0], s[1], s[2]};
    }
    if (doc.contains("dmd_labels")) c.dmd_labels = parse_fit_labels(doc.at("dmd_labels").get<std::string>());
    c.master_seed = get_or(doc, "seed", c.master_seed);
    if (doc.contains("output_dir")) c.output_dir = resolve(doc.at("output_dir").get<std::string>(), base_dir);
    c.threads = get_or(doc, "threads", c.threads);
    c.diagnostics = get_or(doc, "diagnostics", c.diagnostics);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (c.scenarios.empty()) throw ConfigError("config needs at least one scenario");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  ExperimentConfig config = parse_config(doc, fs::path(path).parent_path());
  if (const char* env = std::getenv("HIEROOD_SEED"); env != nullptr && *env != '\0') {
    try {
      config.master_seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("HIEROOD_SEED is not an unsigned integer: ") + env);
    }
  }
  return config;
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  if (c.taxonomy_path) doc["taxonomy"] = *c.taxonomy_path;
  if (c.data_path) doc["data"] = *c.data_path;
  if (c.generator) {
    doc["generator"] = {{"feature_dim", c.generator->feature_dim},
                        {"parent_spread", c.generator->parent_spread},
                        {"child_spread", c.generator->child_spread},
                        {"noise", c.generator->noise},
                        {"seed", c.generator->seed}};
    if (!c.generator->counts.empty()) doc["generator"]["counts"] = c.generator->counts;
  }
  doc["scenarios"] = c.scenarios;
  doc["detectors"] = json::array();
  for (Method m : c.grid.detectors) doc["detectors"].push_back(to_string(m));
  doc["variants"] = json::array();
  for (Variant v : c.grid.variants) doc["variants"].push_back(to_string(v));
  doc["betas"] = c.grid.betas;
  doc["seeds"] = c.grid.seeds;
  doc["learning_rates"] = c.grid.learning_rates;
  doc["temperature"] = c.grid.temperature;
  doc["epsilon"] = c.grid.epsilon;
  doc["alpha"] = c.grid.alpha;
  doc["training"] = {{"hidden", c.training.hidden},
                     {"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"weight_decay", c.training.weight_decay},
                     {"momentum", c.training.momentum}};
  doc["split"] = c.split;
  doc["dmd_labels"] = to_string(c.dmd_labels);
  doc["seed"] = c.master_seed;
  doc["output_dir"] = c.output_dir;
  doc["threads"] = c.threads;
  doc["diagnostics"] = c.diagnostics;
  return doc;
}

ExperimentContext prepare_context(const ExperimentConfig& config) {
  TaxonomyTree tree = config.taxonomy_path ? load_taxonomy(*config.taxonomy_path) : steel_taxonomy();
  LabeledDataset data;
  if (config.data_path) {
    data = load_csv(*config.data_path, tree);
  } else {
    GeneratorSpec spec = config.generator.value_or(default_generator_spec(tree));
    if (spec.counts.empty()) spec.counts = steel_sample_counts(tree);
    data = generate_synthetic(tree, spec);
  }
  return {std::move(tree), std::move(data)};
}

bool result_less(const ExperimentResult& a, const ExperimentResult& b) {
  return std::tie(a.scenario, a.method, a.variant, a.beta, a.seed, a.learning_rate) <
         std::tie(b.scenario, b.method, b.variant, b.beta, b.seed, b.learning_rate);
}

bool same_result_key(const ExperimentResult& a, const ExperimentResult& b) {
  return !result_less(a, b) && !result_less(b, a);
}

void write_results_csv(const std::string& path, std::vector<ExperimentResult> results) {
  std::sort(results.begin(), results.end(), result_less);
  for (std::size_t i = 1; i < results.size(); ++i)
    if (same_result_key(results[i - 1], results[i]))
      throw Error("duplicate_result", "duplicate result row for cell " + results[i].cell().id() + " / " +
                                          to_string(results[i].method));
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out << kResultsHeader << '\n';
    for (const auto& r : results)
      out << r.scenario << ',' << to_string(r.method) << ',' << to_string(r.variant) << ','
          << beta_field(r.variant, r.beta) << ',' << r.seed << ',' << text::format_double(r.learning_rate) << ','
          << text::format_double(r.auroc) << ',' << text::format_double(r.threshold) << ',' << r.wall_ms << '\n';
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

std::vector<ExperimentResult> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kResultsHeader)
    throw IoError("'" + path + "' does not start with the results header");
  std::vector<ExperimentResult> rows;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (f.size() != 9) throw IoError("results row has " + std::to_string(f.size()) + " fields, expected 9");
    ExperimentResult r;
    r.scenario = text::trim(f[0]);
    r.method = parse_method(text::trim(f[1]));
    r.variant = parse_variant(text::trim(f[2]));
    r.beta = text::trim(f[3]).empty() ? 0.0 : text::parse_double(f[3]);
    r.seed = std::stoull(f[4]);
    r.learning_rate = text::parse_double(f[5]);
    r.auroc = text::parse_double(f[6]);
    r.threshold = text::parse_double(f[7]);
    r.wall_ms = std::stoll(f[8]);
    r.score_dump = (fs::path("scores") / (r.cell().id() + ".csv")).string();
    rows.push_back(std::move(r));
  }
  return rows;
}

ScenarioRun run_scenario(const ExperimentContext& context, const ScenarioSpec& spec,
                         const ExperimentConfig& config) {
  spec.validate(context.tree);
  const ScenarioData data = prepare_scenario(context, spec.left_out, config);

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir / "scores");
  if (config.diagnostics)
    for (const char* sub : {"rank_distance", "u1u2", "standardized"})
      fs::create_directories(out_dir / "diagnostics" / sub);
  const std::string results_path = (out_dir / "results.csv").string();

  std::vector<ExperimentResult> merged;
  if (fs::exists(results_path)) merged = read_results_csv(results_path);

  auto completed = [&](const CellKey& cell) {
    std::size_t found = 0;
    for (const auto& r : merged)
      if (r.cell() == cell) ++found;
    return found == spec.detectors.size();
  };

  std::vector<CellKey> todo;
  for (const CellKey& cell : enumerate_cells(spec))
    if (!completed(cell)) todo.push_back(cell);

  ScenarioRun run;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const CellKey& cell = todo[i];
      try {
        CellOutput out = run_cell(spec, config, data, cell);
        std::lock_guard lock(mu);
        std::erase_if(merged, [&](const ExperimentResult& r) { return r.cell() == cell; });
        merged.insert(merged.end(), out.rows.begin(), out.rows.end());
        write_results_csv(results_path, merged);
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        run.failures.push_back({cell, e.kind(), e.what()});
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        run.failures.push_back({cell, "internal", e.what()});
      }
    }
  };

  std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = std::min(threads, std::max<std::size_t>(1, todo.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (!run.failures.empty()) {
    std::sort(run.failures.begin(), run.failures.end(),
              [](const CellFailure& a, const CellFailure& b) { return a.cell.id() < b.cell.id(); });
    write_failures(out_dir / "errors.csv", run.failures);
  }

  const auto cells = enumerate_cells(spec);
  for (const auto& r : merged)
    if (std::find(cells.begin(), cells.end(), r.cell()) != cells.end() &&
        std::find(spec.detectors.begin(), spec.detectors.end(), r.method) != spec.detectors.end())
      run.results.push_back(r);
  std::sort(run.results.begin(), run.results.end(), result_less);
  return run;
}

ScenarioRun sweep_beta(const ExperimentContext& context, const ScenarioSpec& spec,
                       const std::vector<double>& grid, const ExperimentConfig& config) {
  if (std::find(spec.variants.begin(), spec.variants.end(), Variant::hier) == spec.variants.end())
    throw ConfigError("a beta sweep needs the hierarchical variant");
  ScenarioSpec swept = spec;
  swept.betas = grid;
  return run_scenario(context, swept, config);
}

ScenarioRun run_experiment(const ExperimentContext& context, const ExperimentConfig& config) {
  ScenarioRun all;
  for (const auto& scenario : config.scenarios) {
    ScenarioSpec spec = config.grid;
    spec.left_out = scenario;
    ScenarioRun run = run_scenario(context, spec, config);
    all.results.insert(all.results.end(), run.results.begin(), run.results.end());
    all.failures.insert(all.failures.end(), run.failures.begin(), run.failures.end());
  }
  std::sort(all.results.begin(), all.results.end(), result_less);
  return all;
}

double median_auroc(const std::vector<ExperimentResult>& results, Method method, Variant variant,
                    std::optional<double> beta) {
  std::vector<double> values;
  for (const auto& r : results) {
    if (r.method != method || r.variant != variant) continue;
    if (variant == Variant::hier && beta && r.beta != *beta) continue;
    values.push_back(r.auroc);
  }
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace hierood
