// seldr: distribution regression with sample selection.
// Subcommands: estimate, bands, decompose, identify, simulate.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seldr/counterfactuals.hpp"
#include "seldr/estimator.hpp"
#include "seldr/inference.hpp"
#include "seldr/io.hpp"
#include "seldr/lgr.hpp"
#include "seldr/mc.hpp"
#include "seldr/rng.hpp"
#include "seldr/threads.hpp"

namespace fs = std::filesystem;
using namespace seldr;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string input;
  std::string output_dir;
  std::string grid;
  std::string sorting_cols;
  std::string group_col;
  int bootstrap_b = -1;
  long long seed = -1;
  double level = -1.0;
  int threads = -1;
  int warm_block = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "configuration file");
  cmd->add_option("--input", flags.input, "input CSV path");
  cmd->add_option("--output-dir", flags.output_dir, "output directory");
  cmd->add_option("--grid", flags.grid,
                  "threshold grid: quantiles:<lo>:<hi>:<step> or a comma list");
  cmd->add_option("--sorting-cols", flags.sorting_cols, "sorting index columns");
  cmd->add_option("--group-col", flags.group_col, "group column");
  cmd->add_option("--bootstrap-b", flags.bootstrap_b, "bootstrap draws");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--level", flags.level, "band level in (0,1)");
  cmd->add_option("--threads", flags.threads, "worker threads");
  cmd->add_option("--block", flags.warm_block, "warm-start block length");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = load_config(flags.config_path);
  if (!flags.input.empty()) cfg.input_path = flags.input;
  if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
  if (!flags.grid.empty()) apply_grid_option(cfg, flags.grid);
  if (!flags.sorting_cols.empty()) {
    cfg.sorting_cols.clear();
    std::string item;
    std::istringstream stream(flags.sorting_cols);
    while (std::getline(stream, item, ',')) {
      while (!item.empty() && item.front() == ' ') item.erase(item.begin());
      while (!item.empty() && item.back() == ' ') item.pop_back();
      if (!item.empty()) cfg.sorting_cols.push_back(item);
    }
  }
  if (!flags.group_col.empty()) cfg.group_col = flags.group_col;
  if (flags.bootstrap_b > 0) cfg.bootstrap_b = flags.bootstrap_b;
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.level > 0.0) cfg.level = flags.level;
  if (flags.threads > 0) cfg.threads = flags.threads;
  if (flags.warm_block > 0) cfg.warm_block = flags.warm_block;
  return cfg;
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions opts;
  opts.threads = cfg.threads;
  opts.warm_block = cfg.warm_block;
  return opts;
}

BootstrapPlan bootstrap_plan(const RunConfig& cfg) {
  BootstrapPlan plan;
  plan.b_draws = cfg.bootstrap_b;
  plan.seed = cfg.seed;
  plan.band_level = cfg.level;
  return plan;
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return fs::path(cfg.output_dir) / name;
}

GroupInputs group_from_fit(const SelectionDRFit& fit, const ObservationSet& data,
                           const std::string& label) {
  GroupInputs g;
  g.label = label;
  g.params = fit.params();
  g.z_sample = data.z;
  g.k_x = data.k_x();
  g.sorting_idx = fit.sorting_idx;
  return g;
}

int cmd_estimate(const RunConfig& cfg) {
  const IngestResult in = ingest(cfg.input_path, cfg);
  const ModelSpec spec = spec_from_config(cfg, in.data);
  const SelectionDRFit fit = fit_two_step(in.data, spec, fit_options(cfg));
  write_text_file(out_path(cfg, "fit.json").string(), fit_to_json(fit));
  write_text_file(out_path(cfg, "thresholds.csv").string(), diagnostics_to_csv(fit));
  write_influence_bin(out_path(cfg, "influence.bin").string(), fit);
  if (!fit.all_converged()) {
    std::cerr << "estimate: some thresholds failed to converge\n";
    return 1;
  }
  return 0;
}

int cmd_bands(const RunConfig& cfg, const std::string& contrast_spec,
              const std::string& functional, bool want_quantile_band) {
  const IngestResult in = ingest(cfg.input_path, cfg);
  const ModelSpec spec = spec_from_config(cfg, in.data);
  const SelectionDRFit fit = fit_two_step(in.data, spec, fit_options(cfg));
  const BootstrapPlan plan = bootstrap_plan(cfg);

  if (!contrast_spec.empty()) {
    // "<col>" or "sorting:<col>": unit contrast on the named coordinate
    Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.k_theta());
    std::string name = contrast_spec;
    if (name.rfind("sorting:", 0) == 0) {
      const std::string col = name.substr(8);
      const auto it =
          std::find(fit.spec.sorting_cols.begin(), fit.spec.sorting_cols.end(), col);
      if (it == fit.spec.sorting_cols.end()) {
        throw_error(errc::schema, "sorting column '" + col + "' not in the model");
      }
      c[in.data.k_x() + (it - fit.spec.sorting_cols.begin())] = 1.0;
    } else {
      const auto it = std::find(in.data.x_names.begin(), in.data.x_names.end(), name);
      if (it == in.data.x_names.end()) {
        throw_error(errc::schema, "outcome column '" + name + "' not in the model");
      }
      c[it - in.data.x_names.begin()] = 1.0;
    }
    const UniformBand band = uniform_band(fit, c, plan, cfg.threads);
    std::string tag = contrast_spec;
    std::replace(tag.begin(), tag.end(), ':', '_');
    write_text_file(out_path(cfg, "band_" + tag + ".csv").string(), band_to_csv(band, "y"));
    write_text_file(out_path(cfg, "band_" + tag + ".json").string(),
                    band_sidecar_json(band, plan, contrast_spec));
    if (name.rfind("sorting:", 0) == 0 && fit.spec.sorting_cols.size() == 1) {
      // intercept-only sorting: the band maps through tanh onto the
      // correlation scale, the plot-ready sorting function
      std::string csv = "y,rho,rho_lower,rho_upper\n";
      for (std::size_t j = 0; j < band.grid.size(); ++j) {
        csv += fmt_double(band.grid[j]) + "," + fmt_double(std::tanh(band.center[j])) + "," +
               fmt_double(std::tanh(band.lower[j])) + "," +
               fmt_double(std::tanh(band.upper[j])) + "\n";
      }
      write_text_file(out_path(cfg, "sorting_curve.csv").string(), csv);
    }
    return fit.all_converged() ? 0 : 1;
  }

  // functional bands: latent or observed distribution curves
  const Eigen::MatrixXd x_all = in.data.x;
  const Eigen::MatrixXd z_all = in.data.z;
  FunctionalBuilder build;
  if (functional == "latent") {
    build = [&](const SelectionDRParams& params, const Eigen::VectorXd& w) {
      return latent_distribution(params.thetas, x_all, &w).values;
    };
  } else if (functional == "observed") {
    build = [&](const SelectionDRParams& params, const Eigen::VectorXd& w) {
      GroupInputs g;
      g.params = params;
      g.z_sample = z_all;
      g.k_x = x_all.cols();
      g.sorting_idx = fit.sorting_idx;
      g.weights = w;
      return observed_distribution(g).values;
    };
  } else {
    throw_error(errc::contract, "--functional must be latent or observed");
  }
  std::vector<double> axis;
  for (const auto& t : fit.thetas) axis.push_back(t.y);
  const UniformBand band = functional_band(fit, build, axis, plan, cfg.threads);
  write_text_file(out_path(cfg, "band_" + functional + ".csv").string(), band_to_csv(band, "y"));
  write_text_file(out_path(cfg, "band_" + functional + ".json").string(),
                  band_sidecar_json(band, plan, functional));

  if (want_quantile_band) {
    DistributionCurve curve;
    curve.grid = band.grid;
    curve.values = band.center;
    curve.band_lower = band.lower;
    curve.band_upper = band.upper;
    const DistributionCurve mono = rearrange(std::move(curve));
    std::vector<double> taus;
    for (double tau = cfg.grid_tau_lo; tau <= cfg.grid_tau_hi + 1e-9; tau += cfg.grid_tau_step) {
      taus.push_back(tau);
    }
    const QuantileBand qband = quantile_band_by_inversion(mono, taus);
    write_text_file(out_path(cfg, "quantile_band_" + functional + ".csv").string(),
                    quantile_band_to_csv(qband));
  }
  return fit.all_converged() ? 0 : 1;
}

int cmd_decompose(const RunConfig& cfg, const std::string& order_text, bool two_term) {
  const IngestResult in = ingest(cfg.input_path, cfg);
  std::string label1, label0;
  const auto groups = split_groups(in, &label1, &label0);
  // a shared grid keeps the group curves comparable: pooled quantiles unless
  // the grid was given explicitly
  ModelSpec spec = spec_from_config(cfg, in.data);
  const FitOptions opts = fit_options(cfg);
  const SelectionDRFit fit1 = fit_two_step(groups.first, spec, opts);
  const SelectionDRFit fit0 = fit_two_step(groups.second, spec, opts);

  std::array<Component, 4> order = kDefaultOrder;
  if (!order_text.empty()) {
    std::vector<std::string> names;
    std::string item;
    std::istringstream stream(order_text);
    while (std::getline(stream, item, ',')) names.push_back(item);
    if (names.size() != 4) throw_error(errc::parse, "--order needs 4 component names");
    for (std::size_t i = 0; i < 4; ++i) {
      if (names[i] == "sorting") order[i] = Component::Sorting;
      else if (names[i] == "selection_structure") order[i] = Component::SelectionStructure;
      else if (names[i] == "outcome_structure") order[i] = Component::OutcomeStructure;
      else if (names[i] == "composition") order[i] = Component::Composition;
      else throw_error(errc::parse, "unknown component '" + names[i] + "'");
    }
  }

  const GroupInputs g1 = group_from_fit(fit1, groups.first, label1);
  const GroupInputs g0 = group_from_fit(fit0, groups.second, label0);
  const DecompositionReport point =
      two_term ? decompose_two(g1, g0) : decompose_four(g1, g0, order);

  // joint sup-t bands over the stacked component curves, each group
  // bootstrapped independently
  const BootstrapPlan plan = bootstrap_plan(cfg);
  const std::size_t m = point.grid.size();
  const std::size_t n_comp = point.components.size();
  const auto stack = [&](const DecompositionReport& rep) {
    std::vector<double> flat;
    flat.reserve(m * (n_comp + 1));
    for (const auto& comp : rep.components) flat.insert(flat.end(), comp.begin(), comp.end());
    flat.insert(flat.end(), rep.total.begin(), rep.total.end());
    return flat;
  };
  const std::vector<double> center = stack(point);
  std::vector<std::vector<double>> draws(plan.b_draws);
  const std::uint64_t seed1 = rng::child_seed(plan.seed, 1);
  const std::uint64_t seed0 = rng::child_seed(plan.seed, 2);
  parallel_for(static_cast<std::size_t>(plan.b_draws), cfg.threads, [&](std::size_t b) {
    const Eigen::VectorXd w1 = multiplier_weights(fit1.n, static_cast<int>(b), seed1);
    const Eigen::VectorXd w0 = multiplier_weights(fit0.n, static_cast<int>(b), seed0);
    GroupInputs g1b = g1;
    GroupInputs g0b = g0;
    g1b.params = bootstrap_params(fit1, w1);
    g0b.params = bootstrap_params(fit0, w0);
    g1b.weights = w1.array() + 1.0;
    g0b.weights = w0.array() + 1.0;
    draws[b] = stack(two_term ? decompose_two(g1b, g0b) : decompose_four(g1b, g0b, order));
  });
  std::vector<double> se(center.size(), 0.0);
  for (std::size_t j = 0; j < center.size(); ++j) {
    double mean = 0.0;
    for (const auto& d : draws) mean += d[j];
    mean /= plan.b_draws;
    double acc = 0.0;
    for (const auto& d : draws) acc += (d[j] - mean) * (d[j] - mean);
    se[j] = plan.b_draws > 1 ? std::sqrt(acc / (plan.b_draws - 1)) : 0.0;
  }
  std::vector<double> sups(plan.b_draws, 0.0);
  for (int b = 0; b < plan.b_draws; ++b) {
    double sup = 0.0;
    for (std::size_t j = 0; j < center.size(); ++j) {
      if (se[j] > 0.0) sup = std::max(sup, std::fabs(draws[b][j] - center[j]) / se[j]);
    }
    sups[b] = sup;
  }
  std::sort(sups.begin(), sups.end());
  const auto k = std::clamp<std::ptrdiff_t>(
      static_cast<std::ptrdiff_t>(std::ceil(plan.band_level * plan.b_draws)), 1,
      static_cast<std::ptrdiff_t>(plan.b_draws));
  const double cv = sups[static_cast<std::size_t>(k - 1)];

  // long-format CSV: component rows then the total
  std::string csv = "y,component,value,lower,upper\n";
  std::vector<std::string> names = point.component_names;
  names.push_back("total");
  for (std::size_t c = 0; c < names.size(); ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t flat = c * m + j;
      csv += fmt_double(point.grid[j]) + "," + names[c] + "," + fmt_double(center[flat]) + "," +
             fmt_double(center[flat] - cv * se[flat]) + "," +
             fmt_double(center[flat] + cv * se[flat]) + "\n";
    }
  }
  write_text_file(out_path(cfg, "decomposition.csv").string(), csv);

  nlohmann::ordered_json meta;
  meta["group1"] = label1;
  meta["group0"] = label0;
  meta["order"] = names;
  meta["level"] = plan.band_level;
  meta["b_draws"] = plan.b_draws;
  meta["seed"] = plan.seed;
  meta["critical_value"] = cv;
  const Eigen::Matrix2d table = employment_decomposition(g1, g0);
  meta["employment"] = {{"structure0_composition0", table(0, 0)},
                        {"structure0_composition1", table(0, 1)},
                        {"structure1_composition0", table(1, 0)},
                        {"structure1_composition1", table(1, 1)}};
  write_text_file(out_path(cfg, "decomposition.json").string(), meta.dump(2) + "\n");
  return fit1.all_converged() && fit0.all_converged() ? 0 : 1;
}

int cmd_identify(const RunConfig& cfg, double p0, double p1, double f0, double f1) {
  CellProbabilities cells{p0, p1, f0, f1};
  const IdentificationResult result = identify(cells, cfg.tolerance);
  const std::string json = identification_to_json(result);
  std::cout << json;
  if (!cfg.output_dir.empty()) {
    write_text_file(out_path(cfg, "identification.json").string(), json);
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg, int n, int reps) {
  HsmDgpConfig dgp = default_hsm_config(n, cfg.seed);
  McOptions opts;
  opts.reps = reps;
  opts.tau_lo = cfg.grid_tau_lo;
  opts.tau_hi = cfg.grid_tau_hi;
  opts.tau_step = cfg.grid_tau_step;
  opts.sorting_cols = cfg.sorting_cols;
  opts.threads = cfg.threads;
  opts.fit.warm_block = cfg.warm_block;
  const BootstrapPlan plan = bootstrap_plan(cfg);
  const McRunSummary summary = run_monte_carlo(dgp, plan, opts, default_mc_contrasts(dgp));
  write_text_file(out_path(cfg, "mc_summary.csv").string(), mc_summary_to_csv(summary));
  write_text_file(out_path(cfg, "mc_summary.json").string(), mc_summary_to_json(summary));
  std::cout << mc_summary_to_json(summary);
  // acceptance gate for the harness itself: at most 1% failed replicates
  return summary.reps_failed * 100 <= summary.reps_requested ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distribution regression with sample selection"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* estimate = app.add_subcommand("estimate", "two-step fit: probit + per-threshold DR");
  add_common(estimate, flags);

  auto* bands = app.add_subcommand("bands", "multiplier-bootstrap uniform confidence bands");
  add_common(bands, flags);
  std::string contrast_spec, functional;
  bool want_quantile_band = false;
  bands->add_option("--contrast", contrast_spec,
                    "coefficient contrast: <x column> or sorting:<column>");
  bands->add_option("--functional", functional, "distribution curve: latent or observed");
  bands->add_flag("--quantile-band", want_quantile_band,
                  "also invert the CDF band into a quantile band");

  auto* decompose = app.add_subcommand("decompose", "two-group counterfactual decomposition");
  add_common(decompose, flags);
  std::string order_text;
  bool two_term = false;
  decompose->add_option("--order", order_text,
                        "extraction order: four comma-separated component names");
  decompose->add_flag("--two-term", two_term, "latent two-term decomposition");

  auto* identify_cmd = app.add_subcommand("identify", "invert one set of cell probabilities");
  add_common(identify_cmd, flags);
  double p0 = 0, p1 = 0, f0 = 0, f1 = 0, tolerance = -1.0;
  identify_cmd->add_option("--p0", p0, "Pr(D=1 | Z=0)")->required();
  identify_cmd->add_option("--p1", p1, "Pr(D=1 | Z=1)")->required();
  identify_cmd->add_option("--f0", f0, "F_{Y,D|Z}(y,1|0)")->required();
  identify_cmd->add_option("--f1", f1, "F_{Y,D|Z}(y,1|1)")->required();
  identify_cmd->add_option("--tolerance", tolerance, "boundary classification tolerance");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on the synthetic design");
  add_common(simulate, flags);
  int sim_n = 2000, sim_reps = 200;
  simulate->add_option("--n", sim_n, "sample size per replicate");
  simulate->add_option("--reps", sim_reps, "number of replicates");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = resolve_config(flags);
    if (tolerance > 0.0) cfg.tolerance = tolerance;
    if (estimate->parsed()) return cmd_estimate(cfg);
    if (bands->parsed()) {
      if (contrast_spec.empty() == functional.empty()) {
        std::cerr << "bands: exactly one of --contrast or --functional is required\n";
        return 2;
      }
      return cmd_bands(cfg, contrast_spec, functional, want_quantile_band);
    }
    if (decompose->parsed()) return cmd_decompose(cfg, order_text, two_term);
    if (identify_cmd->parsed()) return cmd_identify(cfg, p0, p1, f0, f1);
    if (simulate->parsed()) return cmd_simulate(cfg, sim_n, sim_reps);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
