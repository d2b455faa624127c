#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seldr/data.hpp"
#include "seldr/estimator.hpp"
#include "seldr/inference.hpp"
#include "seldr/lgr.hpp"
#include "seldr/mc.hpp"

namespace seldr {

/// Shortest round-trip decimal representation of a double.
std::string fmt_double(double x);

// Run configuration: a flat key/value file with [section] headers. Sections
// and keys: [data] input, outcome, selection, covariates, excluded, group;
// [model] sorting, grid (either "quantiles:<lo>:<hi>:<step>" or a comma list
// of thresholds); [bootstrap] b, seed, level; [run] output_dir, threads,
// block, tolerance.
struct RunConfig {
  std::string input_path;
  std::string outcome_col;
  std::string selection_col;
  std::string group_col;  // optional
  std::vector<std::string> covariate_cols;
  std::vector<std::string> excluded_cols;

  std::vector<std::string> sorting_cols = {"intercept"};
  std::vector<double> grid_explicit;  // when nonempty, overrides the quantile grid
  double grid_tau_lo = 0.10;
  double grid_tau_hi = 0.90;
  double grid_tau_step = 0.01;

  int bootstrap_b = 200;
  std::uint64_t seed = 0;
  double level = 0.95;

  std::string output_dir = ".";
  int threads = 1;
  int warm_block = 16;
  double tolerance = 1e-9;
};

RunConfig load_config(const std::string& path);

/// Parses "quantiles:lo:hi:step" or a comma-separated threshold list into the
/// config grid fields.
void apply_grid_option(RunConfig& cfg, const std::string& text);

struct IngestResult {
  ObservationSet data;
  std::vector<std::string> group_labels;  // aligned with rows; empty if no group column
};

/// Streaming CSV ingestion: header row mandatory, comma separated, '.'
/// decimal, empty field = missing. Selected rows with a missing outcome are
/// rejected with their row numbers; unselected rows may have missing
/// outcomes. Parse failures carry line and column numbers.
IngestResult ingest(const std::string& path, const RunConfig& cfg);

/// Splits by the group label; exactly two distinct labels required. Groups
/// come back ordered by label; .first is the lexicographically larger label
/// (treated as group 1 in decompositions).
std::pair<ObservationSet, ObservationSet> split_groups(const IngestResult& in,
                                                       std::string* label1 = nullptr,
                                                       std::string* label0 = nullptr);

ModelSpec spec_from_config(const RunConfig& cfg, const ObservationSet& data);

// serialization
std::string fit_to_json(const SelectionDRFit& fit);
std::string diagnostics_to_csv(const SelectionDRFit& fit);
void write_influence_bin(const std::string& path, const SelectionDRFit& fit);
std::string band_to_csv(const UniformBand& band, const std::string& axis_name);
std::string band_sidecar_json(const UniformBand& band, const BootstrapPlan& plan,
                              const std::string& target);
std::string quantile_band_to_csv(const QuantileBand& band);
std::string identification_to_json(const IdentificationResult& result);
std::string mc_summary_to_csv(const McRunSummary& summary);
std::string mc_summary_to_json(const McRunSummary& summary);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace seldr
