#pragma once

#include <string>
#include <vector>

#include "hierood/harness.hpp"

namespace hierood {

// Box-plot group label, e.g. "f_msp" or "h_odin".
std::string group_label(Method method, Variant variant);

struct BoxStats {
  std::string group;
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(const std::string& group, std::vector<double> values);

// Six groups in fixed order f_msp, h_msp, f_odin, h_odin, f_dmd, h_dmd. Hier
// rows use `beta` when rows at that value exist, otherwise every beta.
std::vector<BoxStats> scenario_box_stats(const std::vector<ExperimentResult>& results,
                                         const std::string& scenario, double beta = 10.0);

// Reads <results_dir>/results.csv plus the per-cell diagnostics and writes,
// under <results_dir>/report/, for every scenario S:
//   S_boxplot.csv (raw rows), S_boxstats.csv, S_beta_sensitivity.csv, S_rank_distance.csv,
//   S_standardized.csv and S.svg.
// Returns the written paths. Throws on a missing or empty results file.
std::vector<std::string> render_report(const std::string& results_dir);

}  // namespace hierood
