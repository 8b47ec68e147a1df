#include "hierood/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "hierood/error.hpp"
#include "hierood/evaluation.hpp"
#include "hierood/text_io.hpp"

namespace hierood {

namespace fs = std::filesystem;

namespace {

constexpr Method kMethods[] = {Method::msp, Method::odin, Method::dmd};
constexpr Variant kVariants[] = {Variant::flat, Variant::hier};

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fmt(double v) { return text::format_double(v); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Reads a CSV with a header into rows keyed by column name.
std::vector<std::map<std::string, std::string>> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path.string() + "' is empty");
  const auto header = text::split_csv_line(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::split_csv_line(line);
    if (fields.size() != header.size()) throw IoError("ragged row in '" + path.string() + "'");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[text::trim(header[i])] = text::trim(fields[i]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CellKey> scenario_cells(const std::vector<ExperimentResult>& results, const std::string& scenario) {
  std::vector<CellKey> cells;
  for (const auto& r : results) {
    if (r.scenario != scenario) continue;
    const CellKey key = r.cell();
    if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
  }
  return cells;
}

struct CurveKey {
  Variant variant;
  double beta;
  std::string population;
  bool operator<(const CurveKey& o) const {
    return std::tie(variant, beta, population) < std::tie(o.variant, o.beta, o.population);
  }
};

// rank -> (sum of per-cell means, cells)
using Curve = std::map<std::size_t, std::pair<double, std::size_t>>;

std::map<CurveKey, Curve> gather_rank_distance(const fs::path& dir, const std::vector<CellKey>& cells) {
  std::map<CurveKey, Curve> curves;
  for (const auto& cell : cells) {
    const fs::path path = dir / "diagnostics" / "rank_distance" / (cell.id() + ".csv");
    if (!fs::exists(path)) continue;
    for (const auto& row : read_table(path)) {
      auto& slot = curves[{cell.variant, cell.beta, row.at("population")}]
                         [static_cast<std::size_t>(std::stoul(row.at("rank")))];
      slot.first += text::parse_double(row.at("mean"));
      ++slot.second;
    }
  }
  return curves;
}

struct StdKey {
  Method method;
  Variant variant;
  double beta;
  std::string population;
  bool operator<(const StdKey& o) const {
    return std::tie(method, variant, beta, population) < std::tie(o.method, o.variant, o.beta, o.population);
  }
};

std::map<StdKey, std::vector<double>> gather_standardized(const fs::path& dir, const std::vector<CellKey>& cells) {
  std::map<StdKey, std::vector<double>> out;
  for (const auto& cell : cells) {
    const fs::path path = dir / "diagnostics" / "standardized" / (cell.id() + ".csv");
    if (!fs::exists(path)) continue;
    for (const auto& row : read_table(path))
      out[{parse_method(row.at("method")), cell.variant, cell.beta, row.at("is_novel") == "1" ? "novel" : "known"}]
          .push_back(text::parse_double(row.at("standardized_score")));
  }
  return out;
}

std::string beta_text(Variant v, double beta) { return v == Variant::flat ? std::string() : fmt(beta); }

void write_svg(const fs::path& path, const std::string& scenario, const std::vector<BoxStats>& boxes,
               const std::map<CurveKey, Curve>& curves, double beta) {
  constexpr double kWidth = 960, kHeight = 440;
  constexpr double kTop = 60, kBottom = 380;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"20\" y=\"28\" font-size=\"16\">Left-out class " << xml_escape(scenario) << "</text>\n";

  // box plots, AUROC axis fitted to the data
  double lo = 1.0, hi = 0.0;
  for (const auto& b : boxes)
    if (b.count > 0) {
      lo = std::min(lo, b.min);
      hi = std::max(hi, b.max);
    }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  const double pad = std::max(0.02, 0.05 * (hi - lo));
  lo = std::max(0.0, lo - pad);
  hi = std::min(1.0, hi + pad);
  const double left = 60, right = 450;
  auto ybox = [&](double v) { return kBottom - (v - lo) / (hi - lo) * (kBottom - kTop); };
  svg << "<text x=\"" << left << "\" y=\"50\">AUROC by detector (hier at beta " << fmt(beta) << ")</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << kTop << "\" x2=\"" << left << "\" y2=\"" << kBottom
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << ybox(v) + 4 << "\" text-anchor=\"end\">"
        << fmt(std::round(v * 1000.0) / 1000.0) << "</text>\n";
  }
  const double slot = (right - left) / static_cast<double>(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const bool hier = b.group.rfind("h_", 0) == 0;
    svg << "<text x=\"" << cx << "\" y=\"" << kBottom + 18 << "\" text-anchor=\"middle\">" << b.group
        << "</text>\n";
    if (b.count == 0) continue;
    const char* fill = hier ? "#9ecae1" : "#fdae6b";
    svg << "<line x1=\"" << cx << "\" y1=\"" << ybox(b.min) << "\" x2=\"" << cx << "\" y2=\"" << ybox(b.max)
        << "\" stroke=\"black\"/>\n"
        << "<rect x=\"" << cx - slot * 0.3 << "\" y=\"" << ybox(b.q3) << "\" width=\"" << slot * 0.6
        << "\" height=\"" << std::max(0.5, ybox(b.q1) - ybox(b.q3)) << "\" fill=\"" << fill
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << cx - slot * 0.3 << "\" y1=\"" << ybox(b.median) << "\" x2=\"" << cx + slot * 0.3
        << "\" y2=\"" << ybox(b.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }

  // rank-distance curves
  const double cleft = 540, cright = 920;
  std::size_t max_rank = 2;
  for (const auto& [key, curve] : curves)
    if (!curve.empty()) max_rank = std::max(max_rank, curve.rbegin()->first);
  auto xr = [&](std::size_t r) {
    return cleft + (static_cast<double>(r) - 2.0) / std::max(1.0, static_cast<double>(max_rank) - 2.0) *
                       (cright - cleft);
  };
  auto yr = [&](double d) { return kBottom - d * (kBottom - kTop); };
  svg << "<text x=\"" << cleft << "\" y=\"50\">Mean LCA distance to the top prediction by rank</text>\n"
      << "<line x1=\"" << cleft << "\" y1=\"" << kBottom << "\" x2=\"" << cright << "\" y2=\"" << kBottom
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << cleft << "\" y1=\"" << kTop << "\" x2=\"" << cleft << "\" y2=\"" << kBottom
      << "\" stroke=\"black\"/>\n";
  for (double d : {0.0, 0.5, 1.0})
    svg << "<text x=\"" << cleft - 6 << "\" y=\"" << yr(d) + 4 << "\" text-anchor=\"end\">" << fmt(d)
        << "</text>\n";
  for (std::size_t r = 2; r <= max_rank; ++r)
    svg << "<text x=\"" << xr(r) << "\" y=\"" << kBottom + 18 << "\" text-anchor=\"middle\">" << r
        << "</text>\n";
  int legend = 0;
  bool drew = false;
  for (const auto& [key, curve] : curves) {
    if (key.variant == Variant::hier && key.beta != beta) continue;
    drew = true;
    const char* colour = key.variant == Variant::flat ? "#e6550d" : "#3182bd";
    const char* dash = key.population == "novel" ? " stroke-dasharray=\"6 3\"" : "";
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (const auto& [rank, acc] : curve) svg << xr(rank) << ',' << yr(acc.first / acc.second) << ' ';
    svg << "\"/>\n";
    const double ly = kTop + 14.0 * legend++;
    svg << "<line x1=\"" << cright - 150 << "\" y1=\"" << ly << "\" x2=\"" << cright - 125 << "\" y2=\"" << ly
        << "\" stroke=\"" << colour << "\" stroke-width=\"2\"" << dash << "/>\n"
        << "<text x=\"" << cright - 120 << "\" y=\"" << ly + 4 << "\">" << to_string(key.variant) << ' '
        << xml_escape(key.population) << "</text>\n";
  }
  if (!drew)
    svg << "<text x=\"" << (cleft + cright) / 2 << "\" y=\"" << (kTop + kBottom) / 2
        << "\" text-anchor=\"middle\">no diagnostics recorded</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << svg.str();
}

}  // namespace

std::string group_label(Method method, Variant variant) {
  return std::string(variant == Variant::flat ? "f_" : "h_") + to_string(method);
}

BoxStats box_stats(const std::string& group, std::vector<double> values) {
  BoxStats b;
  b.group = group;
  b.count = values.size();
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.min = values.front();
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  b.max = values.back();
  return b;
}

std::vector<BoxStats> scenario_box_stats(const std::vector<ExperimentResult>& results,
                                         const std::string& scenario, double beta) {
  bool has_beta = false;
  for (const auto& r : results)
    has_beta = has_beta || (r.scenario == scenario && r.variant == Variant::hier && r.beta == beta);
  std::vector<BoxStats> out;
  for (Method m : kMethods)
    for (Variant v : kVariants) {
      std::vector<double> values;
      for (const auto& r : results)
        if (r.scenario == scenario && r.method == m && r.variant == v &&
            (v == Variant::flat || !has_beta || r.beta == beta))
          values.push_back(r.auroc);
      out.push_back(box_stats(group_label(m, v), std::move(values)));
    }
  return out;
}

std::vector<std::string> render_report(const std::string& results_dir) {
  const fs::path dir(results_dir);
  const fs::path results_path = dir / "results.csv";
  if (!fs::exists(results_path)) throw IoError("no results.csv in '" + results_dir + "'");
  const auto results = read_results_csv(results_path.string());
  if (results.empty()) throw InvalidArgument("results file '" + results_path.string() + "' has no rows");

  const fs::path report = dir / "report";
  fs::create_directories(report);
  std::vector<std::string> scenarios;
  for (const auto& r : results)
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
      scenarios.push_back(r.scenario);

  std::vector<std::string> written;
  auto open = [&](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    written.push_back(p.string());
    return out;
  };

  for (const auto& scenario : scenarios) {
    const double beta = 10.0;
    bool has_beta = false;
    for (const auto& r : results)
      has_beta = has_beta || (r.scenario == scenario && r.variant == Variant::hier && r.beta == beta);

    {
      auto out = open(report / (scenario + "_boxplot.csv"));
      out << "group,seed,lr,beta,auroc\n";
      for (Method m : kMethods)
        for (Variant v : kVariants)
          for (const auto& r : results)
            if (r.scenario == scenario && r.method == m && r.variant == v &&
                (v == Variant::flat || !has_beta || r.beta == beta))
              out << group_label(m, v) << ',' << r.seed << ',' << fmt(r.learning_rate) << ','
                  << beta_text(v, r.beta) << ',' << fmt(r.auroc) << '\n';
    }
    const auto boxes = scenario_box_stats(results, scenario, beta);
    {
      auto out = open(report / (scenario + "_boxstats.csv"));
      out << "group,count,min,q1,median,q3,max\n";
      for (const auto& b : boxes) {
        out << b.group << ',' << b.count;
        if (b.count > 0)
          out << ',' << fmt(b.min) << ',' << fmt(b.q1) << ',' << fmt(b.median) << ',' << fmt(b.q3) << ','
              << fmt(b.max);
        else
          out << ",,,,,";
        out << '\n';
      }
    }
    {
      auto out = open(report / (scenario + "_beta_sensitivity.csv"));
      out << "method,variant,beta,count,min,q1,median,q3,max\n";
      for (Method m : kMethods) {
        std::map<std::pair<int, double>, std::vector<double>> by_beta;
        for (const auto& r : results)
          if (r.scenario == scenario && r.method == m)
            by_beta[{r.variant == Variant::flat ? 0 : 1, r.variant == Variant::flat ? 0.0 : r.beta}].push_back(
                r.auroc);
        for (auto& [key, values] : by_beta) {
          const Variant v = key.first == 0 ? Variant::flat : Variant::hier;
          const BoxStats b = box_stats(group_label(m, v), values);
          out << to_string(m) << ',' << to_string(v) << ',' << beta_text(v, key.second) << ',' << b.count << ','
              << fmt(b.min) << ',' << fmt(b.q1) << ',' << fmt(b.median) << ',' << fmt(b.q3) << ','
              << fmt(b.max) << '\n';
        }
      }
    }

    const auto cells = scenario_cells(results, scenario);
    const auto curves = gather_rank_distance(dir, cells);
    {
      auto out = open(report / (scenario + "_rank_distance.csv"));
      out << "variant,beta,population,rank,mean,cells\n";
      for (const auto& [key, curve] : curves)
        for (const auto& [rank, acc] : curve)
          out << to_string(key.variant) << ',' << beta_text(key.variant, key.beta) << ',' << key.population << ','
              << rank << ',' << fmt(acc.first / static_cast<double>(acc.second)) << ',' << acc.second << '\n';
    }
    {
      auto out = open(report / (scenario + "_standardized.csv"));
      out << "method,variant,beta,population,count,mean,std,median\n";
      for (const auto& [key, values] : gather_standardized(dir, cells)) {
        const MeanStd ms = mean_std(values);
        const BoxStats b = box_stats("", values);
        out << to_string(key.method) << ',' << to_string(key.variant) << ',' << beta_text(key.variant, key.beta)
            << ',' << key.population << ',' << values.size() << ',' << fmt(ms.mean) << ',' << fmt(ms.std) << ','
            << fmt(b.median) << '\n';
      }
    }
    const fs::path svg = report / (scenario + ".svg");
    write_svg(svg, scenario, boxes, curves, has_beta ? beta : (curves.empty() ? beta : curves.rbegin()->first.beta));
    written.push_back(svg.string());
  }
  return written;
}

}  // namespace hierood
