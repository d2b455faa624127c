#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seldr/errors.hpp"

namespace seldr {

// Column conventions used throughout: the outcome design X carries an
// explicit leading intercept column named "intercept"; the selection design
// is Z = [X, excluded columns]. Sorting covariates are a subset of X's
// columns addressed by index.

struct ThresholdGrid {
  std::vector<double> y;

  bool strictly_increasing() const;
  void validate() const;  // errc::malformed_input unless strictly increasing, nonempty
};

/// Sample-quantile grid over the selected outcomes at indexes
/// {tau_lo, tau_lo+step, ..., tau_hi}; duplicate order statistics collapsed.
ThresholdGrid quantile_grid(std::vector<double> selected_y, double tau_lo = 0.10,
                            double tau_hi = 0.90, double step = 0.01);

struct ModelSpec {
  std::vector<std::string> outcome_cols;   // X columns, intercept excluded
  std::vector<std::string> excluded_cols;  // Z1 columns
  std::vector<std::string> sorting_cols;   // subset of {"intercept"} + outcome_cols
  ThresholdGrid grid;

  void validate() const;
};

/// Maps sorting column names to indexes into an X design whose columns are
/// x_names. Throws errc::schema on unknown names.
std::vector<int> resolve_sorting(const std::vector<std::string>& sorting_cols,
                                 const std::vector<std::string>& x_names);

struct ThetaAtY {
  double y = 0.0;
  Eigen::VectorXd beta;   // outcome-equation coefficients over X
  Eigen::VectorXd delta;  // sorting coefficients over the sorting columns
};

struct SelectionDRParams {
  Eigen::VectorXd pi;           // selection coefficients over Z
  std::vector<ThetaAtY> thetas; // one per grid threshold, ordered
};

struct RhoLink {
  double rho = 0.0;  // tanh(u)
  double d1 = 0.0;   // 1 - tanh(u)^2
  double d2 = 0.0;   // -2 tanh(u) (1 - tanh(u)^2)
};

/// The sorting link rho(u) = tanh(u) with its first two derivatives.
RhoLink rho_link(double u);

struct CellProbs {
  double d0 = 0.0;        // Pr(D=0 | z)
  double d1_below = 0.0;  // Pr(Y <= y, D=1 | z)
  double d1_above = 0.0;  // Pr(Y > y, D=1 | z), complement within the selected mass
};

/// Cell probabilities at index level: xb = x'beta(y), zp = z'pi, u = x'delta(y).
/// d1_above is formed as Phi(zp) - d1_below so the three cells sum to one up
/// to rounding.
CellProbs cell_probs_at(double xb, double zp, double u);

double sorting_index(const Eigen::VectorXd& delta, const Eigen::Ref<const Eigen::VectorXd>& x_row,
                     const std::vector<int>& sorting_idx);

CellProbs cell_probs(const ThetaAtY& theta, const Eigen::VectorXd& pi,
                     const Eigen::Ref<const Eigen::VectorXd>& x_row,
                     const Eigen::Ref<const Eigen::VectorXd>& z_row,
                     const std::vector<int>& sorting_idx);

/// Log-likelihood of one observation (D, I_y) given covariates. i_y must be
/// -1 (absent) when d = 0 and 0/1 when d = 1; anything else is a contract
/// error. Cell probabilities are clamped at 1e-300, so the value is finite.
double loglik_row(const ThetaAtY& theta, const Eigen::VectorXd& pi, int d, int i_y,
                  const Eigen::Ref<const Eigen::VectorXd>& x_row,
                  const Eigen::Ref<const Eigen::VectorXd>& z_row,
                  const std::vector<int>& sorting_idx);

/// Latent conditional CDF F_{Y*}(y | Z=z) = Phi(-x'beta(y)).
double conditional_latent_cdf(const ThetaAtY& theta,
                              const Eigen::Ref<const Eigen::VectorXd>& x_row);

}  // namespace seldr
