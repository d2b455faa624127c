#include "seldr/mc.hpp"

#include <algorithm>
#include <cmath>

#include "seldr/normal.hpp"
#include "seldr/rng.hpp"
#include "seldr/threads.hpp"

namespace seldr {

namespace {

enum Stream : std::uint64_t { kEdu = 1, kMarried, kContinuous, kExcluded, kOutcomeU, kSelectionW };

}  // namespace

std::vector<std::string> CovariateDesign::x_names() const {
  if (fixed_z) {
    std::vector<std::string> names;
    names.reserve(fixed_k_x);
    for (Eigen::Index j = 0; j < fixed_k_x; ++j) {
      names.push_back(j == 0 ? "intercept" : "x" + std::to_string(j));
    }
    return names;
  }
  std::vector<std::string> names = {"intercept"};
  for (std::size_t j = 0; j < edu_freq.size(); ++j) names.push_back("educ" + std::to_string(j + 1));
  names.push_back("married");
  names.push_back("cont");
  return names;
}

std::vector<std::string> CovariateDesign::z_names() const {
  std::vector<std::string> names = x_names();
  if (fixed_z) {
    for (Eigen::Index j = fixed_k_x; j < fixed_z->cols(); ++j) {
      names.push_back("z" + std::to_string(j));
    }
  } else {
    names.push_back("benefit");
  }
  return names;
}

Eigen::Index CovariateDesign::k_x() const {
  return fixed_z ? fixed_k_x : static_cast<Eigen::Index>(edu_freq.size()) + 3;
}

Eigen::Index CovariateDesign::k_z() const { return fixed_z ? fixed_z->cols() : k_x() + 1; }

void HsmDgpConfig::validate() const {
  if (!(sigma > 0.0)) throw_error(errc::malformed_input, "sigma must be positive");
  if (!(std::fabs(rho) < 1.0)) throw_error(errc::malformed_input, "|rho| must be < 1");
  if (n < 1) throw_error(errc::malformed_input, "n must be positive");
  if (beta.size() != design.k_x() || pi.size() != design.k_z()) {
    throw_error(errc::schema, "beta/pi dimensions do not match the covariate design");
  }
}

HsmDgpConfig default_hsm_config(int n, std::uint64_t seed) {
  HsmDgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.sigma = 0.5;
  cfg.rho = -0.4;
  cfg.beta.resize(8);
  cfg.beta << 2.2, 0.07, 0.17, 0.21, 0.37, 0.26, -0.10, 0.10;
  cfg.pi.resize(9);
  cfg.pi << 0.45, 0.06, 0.20, 0.16, 0.28, 0.15, 0.10, 0.08, -0.70;
  return cfg;
}

ObservationSet hsm_generate(const HsmDgpConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = cfg.n;
  const Eigen::Index k_x = cfg.design.k_x();
  const Eigen::Index k_z = cfg.design.k_z();

  ObservationSet data;
  data.x.resize(n, k_x);
  data.z.resize(n, k_z);
  data.d.resize(n);
  data.y.resize(n);
  data.x_names = cfg.design.x_names();
  data.z_names = cfg.design.z_names();

  std::vector<double> cum;
  if (!cfg.design.fixed_z) {
    double acc = 1.0;
    for (const double f : cfg.design.edu_freq) acc -= f;
    cum.push_back(std::max(acc, 0.0));  // base-category mass first
    for (const double f : cfg.design.edu_freq) cum.push_back(cum.back() + f);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (cfg.design.fixed_z) {
      data.z.row(i) = cfg.design.fixed_z->row(i % cfg.design.fixed_z->rows());
    } else {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(k_z);
      z[0] = 1.0;
      const double ue = rng::uniform(cfg.seed, kEdu, i);
      for (std::size_t c = 0; c + 1 < cum.size(); ++c) {
        if (ue >= cum[c] && ue < cum[c + 1]) z[1 + static_cast<Eigen::Index>(c)] = 1.0;
      }
      z[k_x - 2] = rng::uniform(cfg.seed, kMarried, i) < cfg.design.married_rate ? 1.0 : 0.0;
      z[k_x - 1] = rng::normal(cfg.seed, kContinuous, i);
      z[k_z - 1] = rng::normal(cfg.seed, kExcluded, i);
      data.z.row(i) = z;
    }
    data.x.row(i) = data.z.row(i).head(k_x);

    const double u = rng::normal(cfg.seed, kOutcomeU, i);
    const double w = rng::normal(cfg.seed, kSelectionW, i);
    const double v = cfg.rho * u + std::sqrt(1.0 - cfg.rho * cfg.rho) * w;
    const double latent = data.x.row(i).dot(cfg.beta) + cfg.sigma * u;
    data.d[i] = data.z.row(i).dot(cfg.pi) + v > 0.0 ? 1 : 0;
    data.y[i] = data.d[i] == 1 ? latent : std::numeric_limits<double>::quiet_NaN();
  }
  return data;
}

ThetaAtY hsm_true_theta(const HsmDgpConfig& cfg, double y, const std::vector<int>& sorting_idx) {
  ThetaAtY theta;
  theta.y = y;
  theta.beta = cfg.beta / cfg.sigma;
  theta.beta[0] = (cfg.beta[0] - y) / cfg.sigma;
  theta.delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sorting_idx.size()));
  bool has_intercept = false;
  for (std::size_t j = 0; j < sorting_idx.size(); ++j) {
    if (sorting_idx[j] == 0) {
      theta.delta[j] = std::atanh(cfg.rho);
      has_intercept = true;
    }
  }
  if (!has_intercept) {
    throw_error(errc::contract, "hsm_true_theta: sorting columns must include the intercept");
  }
  return theta;
}

HeckmanFit heckman_two_step(const ObservationSet& data) {
  data.validate();
  const FirstStageFit first = fit_probit(data);
  const Eigen::Index k_x = data.k_x();

  long n1 = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) n1 += data.d[i];
  Eigen::MatrixXd design(n1, k_x + 1);
  Eigen::VectorXd outcome(n1);
  Eigen::VectorXd mills(n1), delta_term(n1);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d[i] != 1) continue;
    const double idx = data.z.row(i).dot(first.pi_hat);
    const double lambda = std::exp(norm_log_pdf(idx) - norm_log_cdf(idx));
    design.row(row).head(k_x) = data.x.row(i);
    design(row, k_x) = lambda;
    mills[row] = lambda;
    delta_term[row] = lambda * (lambda + idx);
    outcome[row] = data.y[i];
    ++row;
  }

  HeckmanFit fit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-8);
  fit.collinearity_warning = qr.rank() < design.cols();
  const Eigen::VectorXd coef = qr.solve(outcome);
  fit.beta = coef.head(k_x);
  fit.mills_coef = coef[k_x];

  const Eigen::VectorXd resid = outcome - design * coef;
  const double sigma2 = resid.squaredNorm() / static_cast<double>(n1) +
                        fit.mills_coef * fit.mills_coef * delta_term.mean();
  fit.sigma = std::sqrt(std::max(sigma2, 1e-12));
  fit.rho = std::clamp(fit.mills_coef / fit.sigma, -1.0, 1.0);
  fit.beta_over_sigma = fit.beta / fit.sigma;
  return fit;
}

std::vector<McContrast> default_mc_contrasts(const HsmDgpConfig& cfg) {
  // theta = (beta over X, delta = sorting intercept); layout of the default
  // design: intercept, educ1..educ5, married, cont | sorting intercept
  const Eigen::Index k_x = cfg.design.k_x();
  const Eigen::Index k_t = k_x + 1;
  std::vector<McContrast> contrasts;
  const auto unit = [&](Eigen::Index pos) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(k_t);
    c[pos] = 1.0;
    return c;
  };
  contrasts.push_back({"college", unit(4), cfg.beta[4] / cfg.sigma});
  contrasts.push_back({"married", unit(k_x - 2), cfg.beta[k_x - 2] / cfg.sigma});
  contrasts.push_back({"sorting", unit(k_x), std::atanh(cfg.rho)});
  return contrasts;
}

McRunSummary run_monte_carlo(const HsmDgpConfig& cfg, const BootstrapPlan& plan,
                             const McOptions& opts, const std::vector<McContrast>& contrasts) {
  if (opts.reps < 1) throw_error(errc::malformed_input, "reps must be >= 1");
  cfg.validate();

  const int grid_points =
      static_cast<int>(std::floor((opts.tau_hi - opts.tau_lo) / opts.tau_step + 1e-9)) + 1;
  const std::size_t n_c = contrasts.size();

  struct RepRecord {
    bool ok = false;
    // [contrast][grid]
    std::vector<std::vector<double>> est, se;
    std::vector<double> cv, length;
    std::vector<std::uint8_t> covered_uniform, covered_pointwise;
  };
  std::vector<RepRecord> records(opts.reps);

  parallel_for(static_cast<std::size_t>(opts.reps), opts.threads, [&](std::size_t r) {
    RepRecord& rec = records[r];
    try {
      HsmDgpConfig rep_cfg = cfg;
      rep_cfg.seed = rng::child_seed(cfg.seed, r);
      const ObservationSet data = hsm_generate(rep_cfg);

      std::vector<double> selected;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (data.d[i] == 1) selected.push_back(data.y[i]);
      }
      ModelSpec spec;
      spec.outcome_cols.assign(data.x_names.begin() + 1, data.x_names.end());
      spec.excluded_cols.assign(data.z_names.begin() + data.k_x(), data.z_names.end());
      spec.sorting_cols = opts.sorting_cols;
      spec.grid = quantile_grid(selected, opts.tau_lo, opts.tau_hi, opts.tau_step);
      if (static_cast<int>(spec.grid.y.size()) != grid_points) return;  // duplicate quantiles

      FitOptions fit_opts = opts.fit;
      fit_opts.threads = 1;  // replicates parallelize at the outer level
      const SelectionDRFit fit = fit_two_step(data, spec, fit_opts);
      if (!fit.all_converged() || static_cast<int>(fit.thetas.size()) != grid_points) return;

      rec.est.assign(n_c, std::vector<double>(grid_points));
      rec.se.assign(n_c, std::vector<double>(grid_points));
      rec.cv.resize(n_c);
      rec.length.resize(n_c);
      rec.covered_uniform.resize(n_c);
      rec.covered_pointwise.resize(n_c);

      for (std::size_t c = 0; c < n_c; ++c) {
        BootstrapPlan rep_plan = plan;
        rep_plan.seed = rng::child_seed(rep_cfg.seed, 1000 + c);
        const UniformBand band = uniform_band(fit, contrasts[c].c, rep_plan, 1);
        bool covered = true, covered_pw = true;
        double length = 0.0;
        int kept = 0;
        for (int j = 0; j < grid_points; ++j) {
          rec.est[c][j] = band.center[j];
          rec.se[c][j] = band.se[j];
          if (!band.kept[j]) continue;
          ++kept;
          const double truth = contrasts[c].true_value;
          if (truth < band.lower[j] || truth > band.upper[j]) covered = false;
          if (std::fabs(band.center[j] - truth) > 1.96 * band.se[j]) covered_pw = false;
          length += band.upper[j] - band.lower[j];
        }
        rec.cv[c] = band.critical_value;
        rec.length[c] = kept > 0 ? length / kept : 0.0;
        rec.covered_uniform[c] = covered ? 1 : 0;
        rec.covered_pointwise[c] = covered_pw ? 1 : 0;
      }
      rec.ok = true;
    } catch (const Error&) {
      rec.ok = false;
    }
  });

  McRunSummary summary;
  summary.reps_requested = opts.reps;
  for (int j = 0; j < grid_points; ++j) summary.tau_index.push_back(opts.tau_lo + j * opts.tau_step);

  std::vector<const RepRecord*> ok;
  for (const auto& rec : records) {
    if (rec.ok) ok.push_back(&rec);
  }
  summary.reps_failed = opts.reps - static_cast<int>(ok.size());
  if (ok.empty()) throw_error(errc::numeric_failure, "all Monte Carlo replicates failed");
  const double n_ok = static_cast<double>(ok.size());

  for (std::size_t c = 0; c < n_c; ++c) {
    McContrastSummary cs;
    cs.name = contrasts[c].name;
    const double truth = contrasts[c].true_value;
    const double denom = std::fabs(truth) > 1e-12 ? std::fabs(truth) : 1.0;
    double cov_u = 0.0, cov_p = 0.0, cvs = 0.0, lens = 0.0;
    for (const auto* rec : ok) {
      cov_u += rec->covered_uniform[c];
      cov_p += rec->covered_pointwise[c];
      cvs += rec->cv[c];
      lens += rec->length[c];
    }
    cs.coverage_uniform = cov_u / n_ok;
    cs.coverage_pointwise = cov_p / n_ok;
    cs.avg_critical_value = cvs / n_ok;
    cs.avg_band_length = lens / n_ok;

    for (int j = 0; j < grid_points; ++j) {
      double mean = 0.0;
      for (const auto* rec : ok) mean += rec->est[c][j];
      mean /= n_ok;
      double var = 0.0, se_mean = 0.0;
      for (const auto* rec : ok) {
        var += (rec->est[c][j] - mean) * (rec->est[c][j] - mean);
        se_mean += rec->se[c][j];
      }
      var /= n_ok;  // population variance keeps rmse^2 = bias^2 + sd^2 exact
      se_mean /= n_ok;
      const double bias = mean - truth;
      const double sd = std::sqrt(var);
      cs.bias.push_back(bias / denom);
      cs.sd.push_back(sd / denom);
      cs.rmse.push_back(std::sqrt(bias * bias + var) / denom);
      cs.se_over_sd.push_back(sd > 0.0 ? se_mean / sd : 0.0);
    }
    double agg = 0.0;
    for (const double v : cs.se_over_sd) agg += v;
    cs.avg_se_over_sd = agg / grid_points;
    summary.contrasts.push_back(std::move(cs));
  }
  return summary;
}

}  // namespace seldr
