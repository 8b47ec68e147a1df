#include "hierood/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hierood/error.hpp"
#include "hierood/evaluation.hpp"
#include "hierood/harness.hpp"
#include "hierood/report.hpp"
#include "hierood/text_io.hpp"

namespace hierood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "master seed, overrides the config and HIEROOD_SEED");
}

ExperimentConfig load_with_overrides(const CommonOptions& opts) {
  ExperimentConfig config = load_config(opts.config);
  if (opts.seed) config.master_seed = *opts.seed;
  return config;
}

struct CellOptions {
  std::string scenario;
  std::string variant = "hier";
  std::optional<double> beta;
  std::uint64_t replicate = 0;
  std::optional<double> lr;
};

void add_cell(CLI::App* cmd, CellOptions& opts) {
  cmd->add_option("--scenario", opts.scenario, "left-out leaf (default: first configured scenario)");
  cmd->add_option("--variant", opts.variant, "flat or hier")->check(CLI::IsMember({"flat", "hier"}));
  cmd->add_option("--beta", opts.beta, "soft-label beta (default: first configured beta)");
  cmd->add_option("--replicate", opts.replicate, "training seed of the cell");
  cmd->add_option("--lr", opts.lr, "learning rate (default: first configured rate)");
}

CellKey resolve_cell(const CellOptions& opts, const ExperimentConfig& config) {
  CellKey key;
  key.scenario = opts.scenario.empty() ? config.scenarios.front() : opts.scenario;
  key.variant = parse_variant(opts.variant);
  if (key.variant == Variant::hier) {
    if (opts.beta) {
      key.beta = *opts.beta;
    } else if (!config.grid.betas.empty()) {
      key.beta = config.grid.betas.front();
    } else {
      throw ConfigError("hierarchical cell needs --beta or a configured beta grid");
    }
  }
  key.seed = opts.replicate;
  if (opts.lr) {
    key.learning_rate = *opts.lr;
  } else if (!config.grid.learning_rates.empty()) {
    key.learning_rate = config.grid.learning_rates.front();
  } else {
    throw ConfigError("no learning rate configured");
  }
  return key;
}

std::vector<ScoreRecord> to_records(const LabeledDataset& ds, const std::vector<double>& scores,
                                    const std::vector<std::size_t>& predicted, const TaxonomyTree& tree,
                                    Method method, const CellKey& cell, bool novel) {
  std::vector<ScoreRecord> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.push_back({ds.ids[i], method, cell.variant, cell.beta, scores[i], tree.leaf_name(predicted[i]), novel});
  return out;
}

std::vector<std::size_t> predictions(const ClassifierModel& model, const LabeledDataset& ds) {
  const BatchForward fwd = forward_batch(model, ds.features);
  std::vector<std::size_t> out;
  for (Eigen::Index n = 0; n < fwd.probs.rows(); ++n) out.push_back(predicted_class(fwd.probs.row(n).transpose()));
  return out;
}

// Score column of a score dump or of any CSV with a "score" header, keeping
// only known (is_novel = 0) rows when that column exists.
std::vector<double> read_known_scores(const std::string& path, const std::optional<std::string>& method) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
  const auto header = text::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::trim(header[i]) == name) return i;
    return std::nullopt;
  };
  const auto score_col = column("score");
  if (!score_col) throw IoError("'" + path + "' has no score column");
  const auto novel_col = column("is_novel");
  const auto method_col = column("method");
  std::vector<double> scores;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (f.size() != header.size()) throw IoError("ragged row in '" + path + "'");
    if (novel_col && text::trim(f[*novel_col]) == "1") continue;
    if (method && method_col && text::trim(f[*method_col]) != *method) continue;
    scores.push_back(text::parse_double(f[*score_col]));
  }
  return scores;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical out-of-distribution detection experiments", "hierood"};
  app.require_subcommand(1);

  CommonOptions gen_opts;
  std::string gen_out, gen_taxonomy_out;
  auto* gen = app.add_subcommand("generate", "write the synthetic (or configured) dataset as CSV");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "dataset CSV")->required();
  gen->add_option("--taxonomy-out", gen_taxonomy_out, "also write the taxonomy JSON");

  CommonOptions train_opts;
  CellOptions train_cell_opts;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train one grid cell and save the model");
  add_common(train_cmd, train_opts);
  add_cell(train_cmd, train_cell_opts);
  train_cmd->add_option("--out", train_out, "model JSON")->required();

  CommonOptions score_opts;
  CellOptions score_cell_opts;
  std::string score_model, score_out, score_val_out;
  std::vector<std::string> score_methods;
  auto* score_cmd = app.add_subcommand("score", "score known-test and left-out samples with a saved model");
  add_common(score_cmd, score_opts);
  add_cell(score_cmd, score_cell_opts);
  score_cmd->add_option("--model", score_model, "model JSON from `train`")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--method", score_methods, "detectors (default: configured set)")
      ->check(CLI::IsMember({"msp", "odin", "dmd"}));
  score_cmd->add_option("--out", score_out, "score dump CSV")->required();
  score_cmd->add_option("--val-out", score_val_out, "validation score dump CSV (for `calibrate`)");

  std::string cal_scores;
  std::optional<std::string> cal_method;
  double cal_alpha = 0.05;
  auto* cal_cmd = app.add_subcommand("calibrate", "threshold from validation scores");
  cal_cmd->add_option("--scores", cal_scores, "CSV with a score column")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--method", cal_method, "only rows of this detector");
  cal_cmd->add_option("--alpha", cal_alpha, "significance level");

  std::string eval_scores, eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "AUROC per detector from a score dump");
  eval_cmd->add_option("--scores", eval_scores, "score dump CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "write the table here instead of stdout");

  CommonOptions sweep_opts;
  std::string sweep_out;
  std::vector<double> sweep_betas;
  std::vector<std::string> sweep_scenarios;
  std::optional<std::size_t> sweep_threads;
  bool sweep_no_report = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "run every scenario over the grid, then render the report");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--out", sweep_out, "output directory (overrides the config)");
  sweep_cmd->add_option("--betas", sweep_betas, "beta grid (overrides the config)");
  sweep_cmd->add_option("--scenario", sweep_scenarios, "left-out leaves (override the config)");
  sweep_cmd->add_option("--threads", sweep_threads, "worker threads, 0 for all cores");
  sweep_cmd->add_flag("--no-report", sweep_no_report, "skip report rendering");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "render CSV summaries and SVG pages from a results directory");
  report_cmd->add_option("--results", report_dir, "results directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    err << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig config = load_with_overrides(gen_opts);
      const ExperimentContext ctx = prepare_context(config);
      save_csv(ctx.data, gen_out);
      if (!gen_taxonomy_out.empty()) {
        std::ofstream t(gen_taxonomy_out);
        if (!t) throw IoError("cannot write '" + gen_taxonomy_out + "'");
        t << serialize_taxonomy(ctx.tree) << '\n';
      }
      out << json{{"written", gen_out}, {"samples", ctx.data.size()}, {"classes", ctx.tree.num_classes()}}.dump()
          << '\n';
    } else if (train_cmd->parsed()) {
      const ExperimentConfig config = load_with_overrides(train_opts);
      const ExperimentContext ctx = prepare_context(config);
      const CellKey cell = resolve_cell(train_cell_opts, config);
      const ScenarioData data = prepare_scenario(ctx, cell.scenario, config);
      const TrainResult result = train_cell(data, cell, config);
      save_model(result.model, train_out);
      out << json{{"written", train_out},
                  {"cell", cell.id()},
                  {"best_epoch", result.history.best_epoch},
                  {"best_val_loss", result.history.best_val_loss}}
                 .dump()
          << '\n';
    } else if (score_cmd->parsed()) {
      const ExperimentConfig config = load_with_overrides(score_opts);
      const ExperimentContext ctx = prepare_context(config);
      const CellKey cell = resolve_cell(score_cell_opts, config);
      const ScenarioData data = prepare_scenario(ctx, cell.scenario, config);
      const TaxonomyTree& tree = data.leave_out.known_tree;
      const ClassifierModel model = load_model(score_model);
      if (model.class_names != tree.leaf_names())
        throw ShapeError("model classes do not match the known classes of scenario " + cell.scenario);
      std::vector<Method> methods = config.grid.detectors;
      if (!score_methods.empty()) {
        methods.clear();
        for (const auto& m : score_methods) methods.push_back(parse_method(m));
      }
      const SoftLabelMatrix soft = cell_soft_labels(tree, cell);
      const OdinParams odin{config.grid.temperature, config.grid.epsilon};
      const auto pred_val = predictions(model, data.split.val);
      const auto pred_test = predictions(model, data.split.test);
      const auto pred_novel = predictions(model, data.leave_out.novel);
      std::vector<ScoreRecord> dump, val_dump;
      for (Method m : methods) {
        std::optional<GaussianBank> bank;
        if (m == Method::dmd) bank = fit_bank(model, data.split.train, config.dmd_labels);
        const GaussianBank* b = bank ? &*bank : nullptr;
        auto add = [&](std::vector<ScoreRecord>& dst, const LabeledDataset& ds,
                       const std::vector<std::size_t>& pred, bool novel) {
          const auto recs =
              to_records(ds, score_dataset(model, ds, m, cell.variant, soft, odin, b), pred, tree, m, cell, novel);
          dst.insert(dst.end(), recs.begin(), recs.end());
        };
        add(dump, data.split.test, pred_test, false);
        add(dump, data.leave_out.novel, pred_novel, true);
        if (!score_val_out.empty()) add(val_dump, data.split.val, pred_val, false);
      }
      write_score_dump(score_out, dump);
      if (!score_val_out.empty()) write_score_dump(score_val_out, val_dump);
      out << json{{"written", score_out}, {"rows", dump.size()}}.dump() << '\n';
    } else if (cal_cmd->parsed()) {
      const auto scores = read_known_scores(cal_scores, cal_method);
      const CalibrationResult c = calibrate_threshold(scores, cal_alpha);
      out << json{{"threshold", c.threshold},
                  {"alpha", c.alpha},
                  {"iterations", c.iterations},
                  {"removed", c.removed},
                  {"samples", scores.size()}}
                 .dump()
          << '\n';
    } else if (eval_cmd->parsed()) {
      std::map<std::tuple<Method, Variant, double>, std::pair<std::vector<double>, std::vector<double>>> groups;
      for (const auto& r : read_score_dump(eval_scores)) {
        auto& g = groups[{r.method, r.variant, r.beta}];
        (r.is_novel ? g.second : g.first).push_back(r.score);
      }
      if (groups.empty()) throw InvalidArgument("score dump '" + eval_scores + "' has no rows");
      std::ostringstream table;
      table << "method,variant,beta,known,novel,auroc\n";
      for (const auto& [key, g] : groups) {
        const auto& [m, v, beta] = key;
        table << to_string(m) << ',' << to_string(v) << ','
              << (v == Variant::flat ? std::string() : text::format_double(beta)) << ',' << g.first.size() << ','
              << g.second.size() << ',' << text::format_double(auroc(g.first, g.second)) << '\n';
      }
      if (eval_out.empty()) {
        out << table.str();
      } else {
        std::ofstream f(eval_out);
        if (!f) throw IoError("cannot write '" + eval_out + "'");
        f << table.str();
      }
    } else if (sweep_cmd->parsed()) {
      ExperimentConfig config = load_with_overrides(sweep_opts);
      if (!sweep_out.empty()) config.output_dir = sweep_out;
      if (!sweep_betas.empty()) config.grid.betas = sweep_betas;
      if (!sweep_scenarios.empty()) config.scenarios = sweep_scenarios;
      if (sweep_threads) config.threads = *sweep_threads;
      const ExperimentContext ctx = prepare_context(config);
      for (const auto& s : config.scenarios) {
        ScenarioSpec spec = config.grid;
        spec.left_out = s;
        spec.validate(ctx.tree);
      }
      fs::create_directories(config.output_dir);
      {
        std::ofstream cfg(fs::path(config.output_dir) / "config.json");
        cfg << config_to_json(config).dump(2) << '\n';
      }
      const ScenarioRun run = run_experiment(ctx, config);
      json summary = {{"results", (fs::path(config.output_dir) / "results.csv").string()},
                      {"rows", run.results.size()},
                      {"failed_cells", run.failures.size()}};
      if (!sweep_no_report && !run.results.empty()) summary["report"] = render_report(config.output_dir);
      out << summary.dump() << '\n';
      if (!run.failures.empty()) {
        for (const auto& f : run.failures) print_error(err, f.kind, f.cell.id() + ": " + f.message);
        return kExitPartial;
      }
    } else if (report_cmd->parsed()) {
      out << json{{"written", render_report(report_dir)}}.dump() << '\n';
    }
  } catch (const Error& e) {
    print_error(err, e.kind(), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kExitFailure;
  }
  return 0;
}

}  // namespace hierood
