#include "seldr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace seldr {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(s);
  while (std::getline(stream, item, sep)) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw_error(errc::parse, "cannot parse number for " + what + ": '" + t + "'");
  }
  return value;
}

long parse_long(const std::string& text, const std::string& what) {
  long value = 0;
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw_error(errc::parse, "cannot parse integer for " + what + ": '" + t + "'");
  }
  return value;
}

}  // namespace

void apply_grid_option(RunConfig& cfg, const std::string& text) {
  const std::string t = trim(text);
  if (t.rfind("quantiles:", 0) == 0) {
    const auto parts = split_list(t.substr(10), ':');
    if (parts.size() != 3) {
      throw_error(errc::parse, "grid quantile spec must be quantiles:<lo>:<hi>:<step>");
    }
    cfg.grid_tau_lo = parse_double(parts[0], "grid tau lo");
    cfg.grid_tau_hi = parse_double(parts[1], "grid tau hi");
    cfg.grid_tau_step = parse_double(parts[2], "grid tau step");
    cfg.grid_explicit.clear();
    return;
  }
  cfg.grid_explicit.clear();
  for (const auto& item : split_list(t)) {
    cfg.grid_explicit.push_back(parse_double(item, "grid threshold"));
  }
  if (cfg.grid_explicit.empty()) throw_error(errc::parse, "grid option is empty");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(errc::parse, "cannot open config file '" + path + "'");
  RunConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw_error(errc::parse, "config line " + std::to_string(lineno) + ": bad section");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw_error(errc::parse, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section == "data") {
      if (key == "input") cfg.input_path = value;
      else if (key == "outcome") cfg.outcome_col = value;
      else if (key == "selection") cfg.selection_col = value;
      else if (key == "group") cfg.group_col = value;
      else if (key == "covariates") cfg.covariate_cols = split_list(value);
      else if (key == "excluded") cfg.excluded_cols = split_list(value);
      else throw_error(errc::parse, "unknown [data] key '" + key + "'");
    } else if (section == "model") {
      if (key == "sorting") cfg.sorting_cols = split_list(value);
      else if (key == "grid") apply_grid_option(cfg, value);
      else throw_error(errc::parse, "unknown [model] key '" + key + "'");
    } else if (section == "bootstrap") {
      if (key == "b") cfg.bootstrap_b = static_cast<int>(parse_long(value, "bootstrap b"));
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value, "seed"));
      else if (key == "level") cfg.level = parse_double(value, "level");
      else throw_error(errc::parse, "unknown [bootstrap] key '" + key + "'");
    } else if (section == "run") {
      if (key == "output_dir") cfg.output_dir = value;
      else if (key == "threads") cfg.threads = static_cast<int>(parse_long(value, "threads"));
      else if (key == "block") cfg.warm_block = static_cast<int>(parse_long(value, "block"));
      else if (key == "tolerance") cfg.tolerance = parse_double(value, "tolerance");
      else throw_error(errc::parse, "unknown [run] key '" + key + "'");
    } else {
      throw_error(errc::parse, "config line " + std::to_string(lineno) + ": key outside section");
    }
  }
  return cfg;
}

IngestResult ingest(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw_error(errc::parse, "cannot open input file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw_error(errc::parse, "input file is empty (no header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_list(line);
  if (header.empty()) throw_error(errc::parse, "header row is empty");

  const auto col_index = [&](const std::string& name, bool required) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw_error(errc::schema, "column '" + name + "' not in header");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };

  // role conflicts
  {
    std::set<std::string> outcome_set(cfg.covariate_cols.begin(), cfg.covariate_cols.end());
    for (const auto& c : cfg.excluded_cols) {
      if (outcome_set.count(c)) {
        throw_error(errc::schema, "column '" + c + "' assigned to both covariates and excluded");
      }
    }
    if (outcome_set.count(cfg.outcome_col) ||
        std::count(cfg.excluded_cols.begin(), cfg.excluded_cols.end(), cfg.outcome_col)) {
      throw_error(errc::schema, "outcome column also plays a covariate role");
    }
  }

  const int sel_idx = col_index(cfg.selection_col, true);
  const int out_idx = col_index(cfg.outcome_col, true);
  const int grp_idx = cfg.group_col.empty() ? -1 : col_index(cfg.group_col, true);
  std::vector<int> cov_idx, exc_idx;
  for (const auto& c : cfg.covariate_cols) cov_idx.push_back(col_index(c, true));
  for (const auto& c : cfg.excluded_cols) exc_idx.push_back(col_index(c, true));

  const Eigen::Index k_x = 1 + static_cast<Eigen::Index>(cov_idx.size());
  const Eigen::Index k_z = k_x + static_cast<Eigen::Index>(exc_idx.size());

  std::vector<int> d_col;
  std::vector<double> y_col;
  std::vector<double> x_flat, z1_flat;
  std::vector<std::string> groups;
  std::vector<long> missing_outcome_rows;

  std::vector<std::string> fields;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                     : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != header.size()) {
      throw_error(errc::parse, "line " + std::to_string(lineno) + ": expected " +
                                   std::to_string(header.size()) + " fields, found " +
                                   std::to_string(fields.size()));
    }
    const auto cell = [&](int col) -> std::string { return trim(fields[col]); };
    const auto numeric = [&](int col, const char* role) -> double {
      const std::string text = cell(col);
      if (text.empty()) {
        throw_error(errc::parse, "line " + std::to_string(lineno) + ", column " +
                                     header[col] + ": missing " + role + " value");
      }
      double value = 0.0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw_error(errc::parse, "line " + std::to_string(lineno) + ", column " + header[col] +
                                     ": cannot parse '" + text + "'");
      }
      return value;
    };

    const double d_raw = numeric(sel_idx, "selection");
    if (d_raw != 0.0 && d_raw != 1.0) {
      throw_error(errc::parse,
                  "line " + std::to_string(lineno) + ": selection indicator must be 0 or 1");
    }
    const int d = static_cast<int>(d_raw);
    const std::string y_text = cell(out_idx);
    double y = std::numeric_limits<double>::quiet_NaN();
    if (y_text.empty()) {
      if (d == 1) missing_outcome_rows.push_back(lineno);
    } else {
      y = numeric(out_idx, "outcome");
    }
    d_col.push_back(d);
    y_col.push_back(y);
    x_flat.push_back(1.0);
    for (const int c : cov_idx) x_flat.push_back(numeric(c, "covariate"));
    for (const int c : exc_idx) z1_flat.push_back(numeric(c, "excluded covariate"));
    if (grp_idx >= 0) groups.push_back(cell(grp_idx));
  }

  if (!missing_outcome_rows.empty()) {
    std::string rows;
    const std::size_t shown = std::min<std::size_t>(missing_outcome_rows.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
      if (i) rows += ", ";
      rows += std::to_string(missing_outcome_rows[i]);
    }
    if (missing_outcome_rows.size() > shown) rows += ", ...";
    throw_error(errc::malformed_input,
                "selected rows with missing outcome at lines: " + rows);
  }

  const auto n = static_cast<Eigen::Index>(d_col.size());
  if (n == 0) throw_error(errc::empty_sample, "input file has no data rows");

  IngestResult out;
  out.data.d.resize(n);
  out.data.y.resize(n);
  out.data.x.resize(n, k_x);
  out.data.z.resize(n, k_z);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.data.d[i] = d_col[i];
    out.data.y[i] = y_col[i];
    for (Eigen::Index j = 0; j < k_x; ++j) out.data.x(i, j) = x_flat[i * k_x + j];
    out.data.z.row(i).head(k_x) = out.data.x.row(i);
    for (Eigen::Index j = 0; j + k_x < k_z; ++j) {
      out.data.z(i, k_x + j) = z1_flat[i * (k_z - k_x) + j];
    }
  }
  out.data.x_names = {"intercept"};
  for (const auto& c : cfg.covariate_cols) out.data.x_names.push_back(c);
  out.data.z_names = out.data.x_names;
  for (const auto& c : cfg.excluded_cols) out.data.z_names.push_back(c);
  out.group_labels = std::move(groups);
  out.data.validate();
  return out;
}

std::pair<ObservationSet, ObservationSet> split_groups(const IngestResult& in,
                                                       std::string* label1, std::string* label0) {
  if (in.group_labels.empty()) {
    throw_error(errc::schema, "no group column was ingested");
  }
  std::set<std::string> labels(in.group_labels.begin(), in.group_labels.end());
  if (labels.size() != 2) {
    throw_error(errc::malformed_input, "group column must take exactly two values, found " +
                                           std::to_string(labels.size()));
  }
  const std::string lab0 = *labels.begin();
  const std::string lab1 = *std::next(labels.begin());
  if (label1) *label1 = lab1;
  if (label0) *label0 = lab0;

  const auto build = [&](const std::string& label) {
    ObservationSet g;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < in.group_labels.size(); ++i) {
      if (in.group_labels[i] == label) rows.push_back(static_cast<Eigen::Index>(i));
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    g.d.resize(m);
    g.y.resize(m);
    g.x.resize(m, in.data.k_x());
    g.z.resize(m, in.data.k_z());
    for (Eigen::Index r = 0; r < m; ++r) {
      g.d[r] = in.data.d[rows[r]];
      g.y[r] = in.data.y[rows[r]];
      g.x.row(r) = in.data.x.row(rows[r]);
      g.z.row(r) = in.data.z.row(rows[r]);
    }
    g.x_names = in.data.x_names;
    g.z_names = in.data.z_names;
    g.validate();
    return g;
  };
  return {build(lab1), build(lab0)};
}

ModelSpec spec_from_config(const RunConfig& cfg, const ObservationSet& data) {
  ModelSpec spec;
  spec.outcome_cols = cfg.covariate_cols;
  spec.excluded_cols = cfg.excluded_cols;
  spec.sorting_cols = cfg.sorting_cols;
  if (!cfg.grid_explicit.empty()) {
    spec.grid.y = cfg.grid_explicit;
    std::sort(spec.grid.y.begin(), spec.grid.y.end());
    spec.grid.y.erase(std::unique(spec.grid.y.begin(), spec.grid.y.end()), spec.grid.y.end());
  } else {
    std::vector<double> selected;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.d[i] == 1) selected.push_back(data.y[i]);
    }
    spec.grid = quantile_grid(selected, cfg.grid_tau_lo, cfg.grid_tau_hi, cfg.grid_tau_step);
  }
  spec.validate();
  return spec;
}

std::string fit_to_json(const SelectionDRFit& fit) {
  ordered_json doc;
  doc["n"] = fit.n;
  doc["spec"] = {{"outcome_cols", fit.spec.outcome_cols},
                 {"excluded_cols", fit.spec.excluded_cols},
                 {"sorting_cols", fit.spec.sorting_cols},
                 {"grid", fit.spec.grid.y}};
  doc["first_stage"] = {
      {"pi", std::vector<double>(fit.first.pi_hat.begin(), fit.first.pi_hat.end())},
      {"converged", fit.first.converged},
      {"iterations", fit.first.iterations},
      {"gradient_norm", fit.first.gradient_norm},
      {"separation_warning", fit.first.separation_warning}};
  doc["thresholds"] = ordered_json::array();
  for (std::size_t j = 0; j < fit.thetas.size(); ++j) {
    ordered_json t;
    t["y"] = fit.thetas[j].y;
    t["beta"] = std::vector<double>(fit.thetas[j].beta.begin(), fit.thetas[j].beta.end());
    t["delta"] = std::vector<double>(fit.thetas[j].delta.begin(), fit.thetas[j].delta.end());
    doc["thresholds"].push_back(t);
  }
  doc["diagnostics"] = ordered_json::array();
  for (const auto& d : fit.diagnostics) {
    doc["diagnostics"].push_back({{"y", d.y},
                                  {"converged", d.converged},
                                  {"iterations", d.iterations},
                                  {"gradient_norm", d.gradient_norm},
                                  {"boundary", d.boundary},
                                  {"skipped", d.skipped},
                                  {"cells_clamped", d.cells_clamped},
                                  {"hessian_ridged", d.hessian_ridged}});
  }
  return doc.dump(2) + "\n";
}

std::string diagnostics_to_csv(const SelectionDRFit& fit) {
  std::string out = "y,converged,iterations,gradient_norm,boundary,skipped,cells_clamped,"
                    "hessian_ridged\n";
  for (const auto& d : fit.diagnostics) {
    out += fmt_double(d.y);
    out += d.converged ? ",1," : ",0,";
    out += std::to_string(d.iterations) + "," + fmt_double(d.gradient_norm);
    out += d.boundary ? ",1" : ",0";
    out += d.skipped ? ",1" : ",0";
    out += d.cells_clamped ? ",1" : ",0";
    out += d.hessian_ridged ? ",1\n" : ",0\n";
  }
  return out;
}

void write_influence_bin(const std::string& path, const SelectionDRFit& fit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(errc::parse, "cannot open '" + path + "' for writing");
  const char magic[8] = {'S', 'E', 'L', 'D', 'R', 'I', 'F', '1'};
  out.write(magic, 8);
  const std::int64_t n = fit.n;
  const std::int64_t k = fit.k_theta();
  const std::int64_t m = static_cast<std::int64_t>(fit.psi.size());
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&k), 8);
  out.write(reinterpret_cast<const char*>(&m), 8);
  for (const auto& theta : fit.thetas) {
    out.write(reinterpret_cast<const char*>(&theta.y), 8);
  }
  for (const auto& psi : fit.psi) {
    for (Eigen::Index i = 0; i < psi.rows(); ++i) {
      for (Eigen::Index j = 0; j < psi.cols(); ++j) {
        const double v = psi(i, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  }
}

std::string band_to_csv(const UniformBand& band, const std::string& axis_name) {
  std::string out = axis_name + ",center,lower,upper,se,kept\n";
  for (std::size_t j = 0; j < band.grid.size(); ++j) {
    out += fmt_double(band.grid[j]) + "," + fmt_double(band.center[j]) + "," +
           fmt_double(band.lower[j]) + "," + fmt_double(band.upper[j]) + "," +
           fmt_double(band.se[j]) + "," + (band.kept[j] ? "1" : "0") + "\n";
  }
  return out;
}

std::string band_sidecar_json(const UniformBand& band, const BootstrapPlan& plan,
                              const std::string& target) {
  ordered_json doc;
  doc["target"] = target;
  doc["b_draws"] = plan.b_draws;
  doc["seed"] = plan.seed;
  doc["level"] = plan.band_level;
  doc["critical_value"] = band.critical_value;
  doc["dropped_zero_se"] =
      std::count(band.kept.begin(), band.kept.end(), static_cast<std::uint8_t>(0));
  return doc.dump(2) + "\n";
}

std::string quantile_band_to_csv(const QuantileBand& band) {
  std::string out = "tau,point,lower,upper,truncated\n";
  for (std::size_t j = 0; j < band.taus.size(); ++j) {
    out += fmt_double(band.taus[j]) + "," + fmt_double(band.point[j]) + "," +
           fmt_double(band.lower[j]) + "," + fmt_double(band.upper[j]) + "," +
           (band.truncated[j] ? "1" : "0") + "\n";
  }
  return out;
}

std::string identification_to_json(const IdentificationResult& result) {
  ordered_json doc;
  doc["case"] = result.case_id;
  doc["rho"] = result.rho;
  doc["rho_point_identified"] = result.rho_point_identified;
  doc["mu_point_identified"] = result.mu_point_identified;
  if (result.mu_is_interval) {
    doc["mu_interval"] = {
        {"lower", std::isinf(result.mu_lower) ? ordered_json() : ordered_json(result.mu_lower)},
        {"upper", std::isinf(result.mu_upper) ? ordered_json() : ordered_json(result.mu_upper)}};
  } else {
    doc["mu"] = result.mu;
  }
  if (result.case_id == 7) {
    doc["solver"] = {{"iterations", result.iterations},
                     {"residual_norm", result.residual_norm},
                     {"jacobian_det", result.jacobian_det},
                     {"used_bisection_fallback", result.used_bisection_fallback}};
  }
  return doc.dump(2) + "\n";
}

std::string mc_summary_to_csv(const McRunSummary& summary) {
  std::string out = "contrast,tau,bias,sd,rmse,se_over_sd\n";
  for (const auto& cs : summary.contrasts) {
    for (std::size_t j = 0; j < summary.tau_index.size(); ++j) {
      out += cs.name + "," + fmt_double(summary.tau_index[j]) + "," + fmt_double(cs.bias[j]) +
             "," + fmt_double(cs.sd[j]) + "," + fmt_double(cs.rmse[j]) + "," +
             fmt_double(cs.se_over_sd[j]) + "\n";
    }
  }
  return out;
}

std::string mc_summary_to_json(const McRunSummary& summary) {
  ordered_json doc;
  doc["reps_requested"] = summary.reps_requested;
  doc["reps_failed"] = summary.reps_failed;
  doc["table"] = ordered_json::array();
  for (const auto& cs : summary.contrasts) {
    doc["table"].push_back({{"contrast", cs.name},
                            {"average_length", cs.avg_band_length},
                            {"average_critical_value", cs.avg_critical_value},
                            {"coverage_uniform", cs.coverage_uniform},
                            {"coverage_pointwise", cs.coverage_pointwise},
                            {"average_se_over_sd", cs.avg_se_over_sd}});
  }
  return doc.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(errc::parse, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(errc::parse, "cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace seldr
