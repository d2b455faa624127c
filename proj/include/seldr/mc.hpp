#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seldr/data.hpp"
#include "seldr/estimator.hpp"
#include "seldr/inference.hpp"

namespace seldr {

// Synthetic covariate generator: five mutually exclusive education-like
// dummies (plus an implicit base category), a married-like indicator, one
// continuous covariate, and one continuous excluded covariate. A fixed design
// matrix can be supplied instead; its rows are cycled to length n.
struct CovariateDesign {
  std::vector<double> edu_freq = {0.31, 0.18, 0.04, 0.09, 0.05};
  double married_rate = 0.76;
  std::optional<Eigen::MatrixXd> fixed_z;  // full [X, excluded] layout
  Eigen::Index fixed_k_x = 0;

  std::vector<std::string> x_names() const;
  std::vector<std::string> z_names() const;
  Eigen::Index k_x() const;
  Eigen::Index k_z() const;
};

struct HsmDgpConfig {
  Eigen::VectorXd beta;  // outcome-level coefficients over X
  double sigma = 1.0;
  Eigen::VectorXd pi;  // selection coefficients over Z
  double rho = 0.0;    // corr(U, V)
  int n = 0;
  std::uint64_t seed = 0;
  CovariateDesign design;

  void validate() const;
};

/// Shipped default configuration: a synthetic employment-and-wages-flavored
/// design with employment-like selection rates and an
/// excluded covariate strong enough to move Pr(D=1|Z) across roughly
/// [0.4, 0.9].
HsmDgpConfig default_hsm_config(int n, std::uint64_t seed);

/// Draws (U,V) bivariate normal with correlation rho, Y* = X'beta + sigma U,
/// D = 1(Z'pi + V > 0), Y observed only when D = 1. Deterministic in seed.
ObservationSet hsm_generate(const HsmDgpConfig& cfg);

/// True DR parameter curve implied by the HSM at threshold y:
/// beta_1(y) = (beta_1 - y)/sigma on the intercept, beta_j/sigma elsewhere,
/// sorting intercept atanh(rho).
ThetaAtY hsm_true_theta(const HsmDgpConfig& cfg, double y,
                        const std::vector<int>& sorting_idx);

struct HeckmanFit {
  Eigen::VectorXd beta;             // level coefficients
  Eigen::VectorXd beta_over_sigma;  // normalization comparable to the DR fit
  double sigma = 0.0;
  double rho = 0.0;
  double mills_coef = 0.0;
  bool collinearity_warning = false;
};

/// Classic two-step benchmark: probit first stage, then least squares of Y on
/// X and the inverse Mills ratio among the selected.
HeckmanFit heckman_two_step(const ObservationSet& data);

struct McContrast {
  std::string name;
  Eigen::VectorXd c;   // contrast over theta = (beta, delta)
  double true_value = 0.0;
};

struct McContrastSummary {
  std::string name;
  // per grid index, as fractions of the true value
  std::vector<double> bias;
  std::vector<double> sd;
  std::vector<double> rmse;
  std::vector<double> se_over_sd;
  double coverage_uniform = 0.0;
  double coverage_pointwise = 0.0;  // 1.96 pointwise band covering the whole curve
  double avg_band_length = 0.0;
  double avg_critical_value = 0.0;
  double avg_se_over_sd = 0.0;
};

struct McOptions {
  int reps = 200;
  double tau_lo = 0.10;
  double tau_hi = 0.90;
  double tau_step = 0.01;
  std::vector<std::string> sorting_cols = {"intercept"};
  FitOptions fit;
  int threads = 1;
};

struct McRunSummary {
  std::vector<double> tau_index;  // quantile indexes of the per-replicate grids
  std::vector<McContrastSummary> contrasts;
  int reps_requested = 0;
  int reps_failed = 0;
};

/// Full replication loop: generate, fit, band per contrast, aggregate.
/// Per-replicate seeds derive from (cfg.seed, replicate index); failures are
/// counted and excluded, never silently dropped.
McRunSummary run_monte_carlo(const HsmDgpConfig& cfg, const BootstrapPlan& plan,
                             const McOptions& opts, const std::vector<McContrast>& contrasts);

/// The three default contrasts of the simulation table: the college-like and
/// married-like outcome coefficients and the sorting intercept (atanh scale).
std::vector<McContrast> default_mc_contrasts(const HsmDgpConfig& cfg);

}  // namespace seldr
