#include "seldr/counterfactuals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seldr/normal.hpp"

namespace seldr {

namespace {

void check_same_grid(const std::vector<ThetaAtY>& a, const std::vector<ThetaAtY>& b) {
  if (a.size() != b.size()) throw_error(errc::schema, "groups have different threshold grids");
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].y != b[j].y) throw_error(errc::schema, "groups have different threshold grids");
  }
}

void check_same_layout(const GroupInputs& a, const GroupInputs& b) {
  if (a.k_x != b.k_x || a.z_sample.cols() != b.z_sample.cols() ||
      a.sorting_idx != b.sorting_idx) {
    throw_error(errc::schema, "group column layouts do not match");
  }
  check_same_grid(a.params.thetas, b.params.thetas);
}

double weight_at(const Eigen::VectorXd* weights, Eigen::Index i) {
  return weights ? (*weights)[i] : 1.0;
}

double weight_total(const Eigen::VectorXd* weights, Eigen::Index n) {
  return weights ? weights->sum() : static_cast<double>(n);
}

}  // namespace

DistributionCurve latent_distribution(const std::vector<ThetaAtY>& thetas,
                                      const Eigen::Ref<const Eigen::MatrixXd>& x_sample,
                                      const Eigen::VectorXd* weights) {
  const Eigen::Index n = x_sample.rows();
  if (n == 0) throw_error(errc::empty_sample, "latent_distribution: empty sample");
  const double total = weight_total(weights, n);
  if (total == 0.0) throw_error(errc::malformed_input, "weights sum to zero");
  DistributionCurve curve;
  curve.grid.reserve(thetas.size());
  curve.values.reserve(thetas.size());
  for (const auto& theta : thetas) {
    const Eigen::VectorXd xb = x_sample * theta.beta;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += weight_at(weights, i) * norm_cdf(-xb[i]);
    curve.grid.push_back(theta.y);
    curve.values.push_back(acc / total);
  }
  curve.monotone = std::is_sorted(curve.values.begin(), curve.values.end());
  return curve;
}

double selection_probability(const Eigen::VectorXd& pi,
                             const Eigen::Ref<const Eigen::MatrixXd>& z_sample,
                             const Eigen::VectorXd* weights) {
  const Eigen::Index n = z_sample.rows();
  if (n == 0) throw_error(errc::empty_sample, "selection_probability: empty sample");
  const Eigen::VectorXd zp = z_sample * pi;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += weight_at(weights, i) * norm_cdf(zp[i]);
  return acc / weight_total(weights, n);
}

DistributionCurve counterfactual_observed(const GroupInputs& delta_from,
                                          const GroupInputs& pi_from,
                                          const GroupInputs& beta_from, const GroupInputs& z_from) {
  check_same_layout(delta_from, beta_from);
  check_same_layout(pi_from, z_from);
  check_same_layout(delta_from, z_from);

  const Eigen::MatrixXd& zs = z_from.z_sample;
  const Eigen::VectorXd* weights = z_from.weights_ptr();
  const Eigen::Index n = zs.rows();
  if (n == 0) throw_error(errc::empty_sample, "counterfactual_observed: empty sample");
  const auto xs = z_from.x_sample();
  const Eigen::VectorXd zp = zs * pi_from.params.pi;

  double denom = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) denom += weight_at(weights, i) * norm_cdf(zp[i]);
  if (!(denom > 0.0)) {
    throw_error(errc::malformed_input,
                "degenerate selection: average selection probability is zero");
  }

  const auto& thetas_b = beta_from.params.thetas;
  const auto& thetas_d = delta_from.params.thetas;
  DistributionCurve curve;
  curve.grid.reserve(thetas_b.size());
  curve.values.reserve(thetas_b.size());
  for (std::size_t j = 0; j < thetas_b.size(); ++j) {
    const Eigen::VectorXd xb = xs * thetas_b[j].beta;
    double numer = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = sorting_index(thetas_d[j].delta, xs.row(i), z_from.sorting_idx);
      numer += weight_at(weights, i) * bvn_cdf(-xb[i], zp[i], -std::tanh(u));
    }
    curve.grid.push_back(thetas_b[j].y);
    curve.values.push_back(numer / denom);
  }
  curve.monotone = std::is_sorted(curve.values.begin(), curve.values.end());
  return curve;
}

DistributionCurve observed_distribution(const GroupInputs& g) {
  return counterfactual_observed(g, g, g, g);
}

DistributionCurve counterfactual_latent(const GroupInputs& beta_from, const GroupInputs& x_from) {
  check_same_layout(beta_from, x_from);
  return latent_distribution(beta_from.params.thetas, x_from.x_sample(), x_from.weights_ptr());
}

DistributionCurve rearrange(DistributionCurve curve) {
  std::sort(curve.values.begin(), curve.values.end());
  if (curve.band_lower) std::sort(curve.band_lower->begin(), curve.band_lower->end());
  if (curve.band_upper) std::sort(curve.band_upper->begin(), curve.band_upper->end());
  curve.monotone = true;
  return curve;
}

QuantileResult quantile(const DistributionCurve& curve, double tau) {
  if (curve.grid.empty()) throw_error(errc::empty_sample, "quantile: empty curve");
  if (!(tau > 0.0 && tau < 1.0)) throw_error(errc::domain, "quantile: tau must be in (0,1)");
  if (!curve.monotone || !std::is_sorted(curve.values.begin(), curve.values.end())) {
    throw_error(errc::contract, "quantile requires a monotone curve; rearrange first");
  }
  QuantileResult res;
  const auto it = std::lower_bound(curve.values.begin(), curve.values.end(), tau);
  if (it == curve.values.end()) {
    res.value = curve.grid.back();
    res.above_grid = true;
    return res;
  }
  res.value = curve.grid[static_cast<std::size_t>(it - curve.values.begin())];
  return res;
}

std::string component_name(Component c) {
  switch (c) {
    case Component::Sorting: return "sorting";
    case Component::SelectionStructure: return "selection_structure";
    case Component::OutcomeStructure: return "outcome_structure";
    case Component::Composition: return "composition";
  }
  return "";
}

const std::array<Component, 4> kDefaultOrder = {Component::Sorting, Component::SelectionStructure,
                                                Component::OutcomeStructure,
                                                Component::Composition};

DecompositionReport decompose_two(const GroupInputs& g1, const GroupInputs& g0) {
  check_same_layout(g1, g0);
  const DistributionCurve f11 = counterfactual_latent(g1, g1);
  const DistributionCurve f01 = counterfactual_latent(g0, g1);
  const DistributionCurve f00 = counterfactual_latent(g0, g0);

  DecompositionReport rep;
  rep.grid = f11.grid;
  const std::size_t m = rep.grid.size();
  rep.total.resize(m);
  rep.component_names = {"outcome_structure", "composition"};
  rep.components.assign(2, std::vector<double>(m));
  for (std::size_t j = 0; j < m; ++j) {
    rep.total[j] = f11.values[j] - f00.values[j];
    rep.components[0][j] = f11.values[j] - f01.values[j];
    rep.components[1][j] = f01.values[j] - f00.values[j];
  }
  return rep;
}

DecompositionReport decompose_four(const GroupInputs& g1, const GroupInputs& g0,
                                   const std::array<Component, 4>& order) {
  check_same_layout(g1, g0);
  {
    std::array<bool, 4> seen{};
    for (const Component c : order) seen[static_cast<int>(c)] = true;
    if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
      throw_error(errc::malformed_input, "decompose_four: order must be a permutation");
    }
  }

  // group index per slot (t, s, r, k), flipped to group 0 one slot at a time
  std::array<int, 4> slot = {1, 1, 1, 1};
  const auto evaluate = [&](const std::array<int, 4>& s) {
    const GroupInputs& t = s[0] ? g1 : g0;
    const GroupInputs& sel = s[1] ? g1 : g0;
    const GroupInputs& r = s[2] ? g1 : g0;
    const GroupInputs& k = s[3] ? g1 : g0;
    return counterfactual_observed(t, sel, r, k);
  };

  DecompositionReport rep;
  DistributionCurve current = evaluate(slot);
  rep.grid = current.grid;
  const std::size_t m = rep.grid.size();
  const std::vector<double> first = current.values;
  std::vector<double> sorting_part(m, 0.0), structure_part(m, 0.0);
  for (const Component c : order) {
    slot[static_cast<int>(c)] = 0;
    const DistributionCurve next = evaluate(slot);
    std::vector<double> diff(m);
    for (std::size_t j = 0; j < m; ++j) diff[j] = current.values[j] - next.values[j];
    if (c == Component::Sorting) sorting_part = diff;
    if (c == Component::SelectionStructure) structure_part = diff;
    rep.component_names.push_back(component_name(c));
    rep.components.push_back(std::move(diff));
    current = next;
  }
  rep.total.resize(m);
  std::vector<double> agg(m);
  for (std::size_t j = 0; j < m; ++j) {
    rep.total[j] = first[j] - current.values[j];
    agg[j] = sorting_part[j] + structure_part[j];
  }
  rep.aggregate_selection = std::move(agg);
  return rep;
}

Eigen::Matrix2d employment_decomposition(const GroupInputs& g1, const GroupInputs& g0) {
  check_same_layout(g1, g0);
  Eigen::Matrix2d table;
  const GroupInputs* groups[2] = {&g0, &g1};
  for (int s = 0; s < 2; ++s) {
    for (int k = 0; k < 2; ++k) {
      table(s, k) = selection_probability(groups[s]->params.pi, groups[k]->z_sample,
                                          groups[k]->weights_ptr());
    }
  }
  return table;
}

Remark2Signs remark2_signs(double beta, double pi, double rho) {
  if (!(std::fabs(rho) < 1.0)) {
    throw_error(errc::singular_correlation, "remark2_signs requires |rho| < 1");
  }
  const double phi_pi = norm_cdf(pi);
  Remark2Signs out;
  out.d_rho = -bvn_pdf(-beta, pi, -rho) / phi_pi;
  const auto grad = bvn_cdf_partials(-beta, pi, -rho);
  const double numerator = grad.d_nu * phi_pi - norm_pdf(pi) * bvn_cdf(-beta, pi, -rho);
  out.d_pi = numerator / (phi_pi * phi_pi);
  return out;
}

}  // namespace seldr
