#include "seldr/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seldr/normal.hpp"

namespace seldr {

bool ThresholdGrid::strictly_increasing() const {
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (!(y[i] > y[i - 1])) return false;
  }
  return true;
}

void ThresholdGrid::validate() const {
  if (y.empty()) throw_error(errc::malformed_input, "threshold grid is empty");
  if (!strictly_increasing()) {
    throw_error(errc::malformed_input, "threshold grid must be strictly increasing");
  }
}

ThresholdGrid quantile_grid(std::vector<double> selected_y, double tau_lo, double tau_hi,
                            double step) {
  if (selected_y.empty()) throw_error(errc::empty_sample, "quantile_grid: no selected outcomes");
  if (!(step > 0.0) || !(tau_lo > 0.0) || !(tau_hi < 1.0) || !(tau_lo <= tau_hi)) {
    throw_error(errc::malformed_input, "quantile_grid: invalid index range");
  }
  std::sort(selected_y.begin(), selected_y.end());
  const auto n = static_cast<std::ptrdiff_t>(selected_y.size());
  ThresholdGrid grid;
  const int steps = static_cast<int>(std::floor((tau_hi - tau_lo) / step + 1e-9));
  for (int k = 0; k <= steps; ++k) {
    const double tau = tau_lo + k * step;
    // left-inverse order statistic; the epsilon guards accumulated tau error
    std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(std::ceil(tau * n - 1e-9)) - 1;
    idx = std::clamp<std::ptrdiff_t>(idx, 0, n - 1);
    const double value = selected_y[idx];
    if (grid.y.empty() || value > grid.y.back()) grid.y.push_back(value);
  }
  return grid;
}

void ModelSpec::validate() const {
  if (excluded_cols.empty()) {
    throw_error(errc::malformed_input, "at least one excluded covariate is required");
  }
  const std::set<std::string> outcome(outcome_cols.begin(), outcome_cols.end());
  for (const auto& c : excluded_cols) {
    if (outcome.count(c)) {
      throw_error(errc::malformed_input, "column '" + c + "' is both outcome and excluded");
    }
  }
  for (const auto& c : sorting_cols) {
    if (c != "intercept" && !outcome.count(c)) {
      throw_error(errc::malformed_input,
                  "sorting column '" + c + "' is not the intercept or an outcome column");
    }
  }
  grid.validate();
}

std::vector<int> resolve_sorting(const std::vector<std::string>& sorting_cols,
                                 const std::vector<std::string>& x_names) {
  std::vector<int> idx;
  idx.reserve(sorting_cols.size());
  for (const auto& c : sorting_cols) {
    const auto it = std::find(x_names.begin(), x_names.end(), c);
    if (it == x_names.end()) {
      throw_error(errc::schema, "sorting column '" + c + "' not found in the X design");
    }
    idx.push_back(static_cast<int>(it - x_names.begin()));
  }
  return idx;
}

RhoLink rho_link(double u) {
  RhoLink link;
  link.rho = std::tanh(u);
  link.d1 = 1.0 - link.rho * link.rho;
  link.d2 = -2.0 * link.rho * link.d1;
  return link;
}

CellProbs cell_probs_at(double xb, double zp, double u) {
  const double rho = std::tanh(u);
  CellProbs cells;
  cells.d0 = norm_cdf(-zp);
  const double phi_zp = norm_cdf(zp);
  cells.d1_below = std::clamp(bvn_cdf(-xb, zp, -rho), 0.0, phi_zp);
  cells.d1_above = phi_zp - cells.d1_below;
  return cells;
}

double sorting_index(const Eigen::VectorXd& delta, const Eigen::Ref<const Eigen::VectorXd>& x_row,
                     const std::vector<int>& sorting_idx) {
  if (delta.size() != static_cast<Eigen::Index>(sorting_idx.size())) {
    throw_error(errc::schema, "sorting coefficient length does not match sorting columns");
  }
  double u = 0.0;
  for (std::size_t j = 0; j < sorting_idx.size(); ++j) u += delta[j] * x_row[sorting_idx[j]];
  return u;
}

CellProbs cell_probs(const ThetaAtY& theta, const Eigen::VectorXd& pi,
                     const Eigen::Ref<const Eigen::VectorXd>& x_row,
                     const Eigen::Ref<const Eigen::VectorXd>& z_row,
                     const std::vector<int>& sorting_idx) {
  if (theta.beta.size() != x_row.size() || pi.size() != z_row.size()) {
    throw_error(errc::schema, "coefficient/design dimension mismatch");
  }
  return cell_probs_at(x_row.dot(theta.beta), z_row.dot(pi),
                       sorting_index(theta.delta, x_row, sorting_idx));
}

double loglik_row(const ThetaAtY& theta, const Eigen::VectorXd& pi, int d, int i_y,
                  const Eigen::Ref<const Eigen::VectorXd>& x_row,
                  const Eigen::Ref<const Eigen::VectorXd>& z_row,
                  const std::vector<int>& sorting_idx) {
  if (d != 0 && d != 1) throw_error(errc::contract, "loglik_row: d must be 0 or 1");
  if (d == 0) {
    if (i_y != -1) throw_error(errc::contract, "loglik_row: i_y must be absent when d = 0");
    return norm_log_cdf(-z_row.dot(pi));
  }
  if (i_y != 0 && i_y != 1) {
    throw_error(errc::contract, "loglik_row: i_y must be 0 or 1 when d = 1");
  }
  const CellProbs cells = cell_probs(theta, pi, x_row, z_row, sorting_idx);
  const double p = i_y == 1 ? cells.d1_below : cells.d1_above;
  return std::log(std::max(p, 1e-300));
}

double conditional_latent_cdf(const ThetaAtY& theta,
                              const Eigen::Ref<const Eigen::VectorXd>& x_row) {
  if (theta.beta.size() != x_row.size()) {
    throw_error(errc::schema, "coefficient/design dimension mismatch");
  }
  return norm_cdf(-x_row.dot(theta.beta));
}

}  // namespace seldr
