#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seldr/model.hpp"

namespace seldr {

// A distribution estimate on the threshold grid. No interpolation between
// grid points anywhere: quantiles snap to the grid.
struct DistributionCurve {
  std::vector<double> grid;
  std::vector<double> values;
  bool monotone = false;
  std::optional<std::vector<double>> band_lower;
  std::optional<std::vector<double>> band_upper;
};

/// Parameter blocks and covariate sample of one population group. z_sample
/// columns are [X, excluded] with X's leading intercept; sorting_idx indexes
/// into the X prefix. weights, when nonempty, are sampling weights attached
/// to the empirical covariate distribution (the bootstrap uses 1 + w_i).
struct GroupInputs {
  std::string label;
  SelectionDRParams params;
  Eigen::MatrixXd z_sample;
  Eigen::Index k_x = 0;
  std::vector<int> sorting_idx;
  Eigen::VectorXd weights;

  Eigen::Block<const Eigen::MatrixXd> x_sample() const {
    return z_sample.topLeftCorner(z_sample.rows(), k_x);
  }
  const Eigen::VectorXd* weights_ptr() const { return weights.size() ? &weights : nullptr; }
};

/// F_hat_{Y*}(y) = weighted average of Phi(-x'beta(y)) over the sample.
/// Null weights mean equal weights; weights are bootstrap sampling weights
/// (may be negative, must not sum to zero).
DistributionCurve latent_distribution(const std::vector<ThetaAtY>& thetas,
                                      const Eigen::Ref<const Eigen::MatrixXd>& x_sample,
                                      const Eigen::VectorXd* weights = nullptr);

/// Model-based observed-outcome distribution (ratio-of-averages form).
DistributionCurve observed_distribution(const GroupInputs& g);

/// Average selection probability integral Phi(z'pi) dF_Z.
double selection_probability(const Eigen::VectorXd& pi,
                             const Eigen::Ref<const Eigen::MatrixXd>& z_sample,
                             const Eigen::VectorXd* weights = nullptr);

/// Latent counterfactual: beta curve from one group, covariates (and their
/// sampling weights) from another.
DistributionCurve counterfactual_latent(const GroupInputs& beta_from, const GroupInputs& x_from);

/// Observed counterfactual F_{Y<t,s,r,k>}: sorting from t, selection
/// structure from s, outcome structure from r, covariates from k.
DistributionCurve counterfactual_observed(const GroupInputs& delta_from,
                                          const GroupInputs& pi_from,
                                          const GroupInputs& beta_from, const GroupInputs& z_from);

/// Nondecreasing rearrangement of the value sequence on the fixed grid.
/// Idempotent; preserves the multiset of values. Bands, when present, are
/// rearranged the same way.
DistributionCurve rearrange(DistributionCurve curve);

struct QuantileResult {
  double value = 0.0;
  bool above_grid = false;  // tau exceeds max(curve); value is the last grid point
};

/// Left inverse on the grid: smallest grid y with F(y) >= tau. The curve must
/// be monotone (errc::contract otherwise). tau below min(curve) returns the
/// first grid point; tau above max(curve) sets the above_grid flag.
QuantileResult quantile(const DistributionCurve& curve, double tau);

enum class Component { Sorting, SelectionStructure, OutcomeStructure, Composition };
std::string component_name(Component c);

struct DecompositionReport {
  std::vector<double> grid;
  std::vector<double> total;
  std::vector<std::string> component_names;        // extraction order
  std::vector<std::vector<double>> components;     // aligned with names
  /// Sum of the sorting and selection-structure components, present for
  /// four-way decompositions.
  std::optional<std::vector<double>> aggregate_selection;
};

/// Two-term latent decomposition: structure (beta) then composition (F_X).
DecompositionReport decompose_two(const GroupInputs& g1, const GroupInputs& g0);

extern const std::array<Component, 4> kDefaultOrder;

/// Four-component telescoping decomposition of the observed distribution in
/// the requested extraction order.
DecompositionReport decompose_four(const GroupInputs& g1, const GroupInputs& g0,
                                   const std::array<Component, 4>& order = kDefaultOrder);

/// 2x2 employment table: rows = structure (pi) source, cols = composition
/// (F_Z) source; entry (s, k) = selection_probability(pi_s, Z_k).
Eigen::Matrix2d employment_decomposition(const GroupInputs& g1, const GroupInputs& g0);

struct Remark2Signs {
  double d_rho = 0.0;  // strictly negative
  double d_pi = 0.0;   // sign matches sign(rho)
};

/// Comparative statics of the no-covariate observed distribution
/// F_Y = Phi_2(-beta, pi; -rho) / Phi(pi) with respect to rho and pi.
Remark2Signs remark2_signs(double beta, double pi, double rho);

}  // namespace seldr
