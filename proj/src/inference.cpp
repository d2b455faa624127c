#include "seldr/inference.hpp"

#include <algorithm>
#include <cmath>

#include "seldr/rng.hpp"
#include "seldr/threads.hpp"

namespace seldr {

namespace {

constexpr std::uint64_t kWeightStreamBase = 0x9d2c5680u;

double order_statistic_quantile(std::vector<double> values, double p) {
  // ceil(p * B) order statistic, 1-based
  const auto b = static_cast<std::ptrdiff_t>(values.size());
  std::ptrdiff_t k = static_cast<std::ptrdiff_t>(std::ceil(p * static_cast<double>(b)));
  k = std::clamp<std::ptrdiff_t>(k, 1, b);
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

}  // namespace

Eigen::VectorXd multiplier_weights(Eigen::Index n, int b_index, std::uint64_t seed) {
  if (n < 2) throw_error(errc::malformed_input, "multiplier_weights: n must be >= 2");
  Eigen::VectorXd w(n);
  const std::uint64_t stream = kWeightStreamBase + static_cast<std::uint64_t>(b_index);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = rng::normal(seed, stream, static_cast<std::uint64_t>(i));
  }
  w.array() -= w.mean();
  return w;
}

std::vector<Eigen::VectorXd> bootstrap_theta(const SelectionDRFit& fit,
                                             const Eigen::VectorXd& weights) {
  if (weights.size() != fit.n) throw_error(errc::schema, "weight length != sample size");
  std::vector<Eigen::VectorXd> out;
  out.reserve(fit.thetas.size());
  const double n = static_cast<double>(fit.n);
  for (std::size_t j = 0; j < fit.thetas.size(); ++j) {
    Eigen::VectorXd theta(fit.k_theta());
    theta << fit.thetas[j].beta, fit.thetas[j].delta;
    theta.noalias() += fit.psi[j].transpose() * weights / n;
    out.push_back(std::move(theta));
  }
  return out;
}

UniformBand uniform_band(const SelectionDRFit& fit, const Eigen::VectorXd& contrast,
                         const BootstrapPlan& plan, int threads) {
  plan.validate();
  if (contrast.size() != fit.k_theta()) {
    throw_error(errc::schema, "contrast length != parameter dimension");
  }
  const std::size_t m = fit.thetas.size();
  if (m == 0) throw_error(errc::contract, "uniform_band: no kept thresholds");
  const double n = static_cast<double>(fit.n);

  UniformBand band;
  band.grid.resize(m);
  band.center.resize(m);
  band.se.resize(m);
  band.kept.assign(m, 1);

  // projected influence rows v_j = psi_j c give both SE and the bootstrap
  // perturbations c'(theta^b - theta) = v_j'w / n
  Eigen::MatrixXd v(fit.n, m);
  for (std::size_t j = 0; j < m; ++j) {
    band.grid[j] = fit.thetas[j].y;
    Eigen::VectorXd theta(fit.k_theta());
    theta << fit.thetas[j].beta, fit.thetas[j].delta;
    band.center[j] = contrast.dot(theta);
    v.col(j) = fit.psi[j] * contrast;
    band.se[j] = v.col(j).norm() / n;
    if (band.se[j] == 0.0) band.kept[j] = 0;
  }
  if (std::none_of(band.kept.begin(), band.kept.end(), [](std::uint8_t k) { return k == 1; })) {
    throw_error(errc::no_variation, "uniform_band: all standard errors are zero");
  }

  std::vector<double> sups(plan.b_draws);
  parallel_for(static_cast<std::size_t>(plan.b_draws), threads, [&](std::size_t b) {
    const Eigen::VectorXd w = multiplier_weights(fit.n, static_cast<int>(b), plan.seed);
    const Eigen::VectorXd perturb = v.transpose() * w / n;
    double sup = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!band.kept[j]) continue;
      sup = std::max(sup, std::fabs(perturb[j]) / band.se[j]);
    }
    sups[b] = sup;
  });

  band.critical_value = order_statistic_quantile(std::move(sups), plan.band_level);
  band.lower.resize(m);
  band.upper.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    band.lower[j] = band.center[j] - band.critical_value * band.se[j];
    band.upper[j] = band.center[j] + band.critical_value * band.se[j];
  }
  return band;
}

SelectionDRParams bootstrap_params(const SelectionDRFit& fit, const Eigen::VectorXd& weights) {
  if (weights.size() != fit.n) throw_error(errc::schema, "weight length != sample size");
  const double n = static_cast<double>(fit.n);
  SelectionDRParams params;
  // pi^b = pi - H1^-1 (sum_i w_i S1_i)/n
  params.pi = fit.first.pi_hat -
              fit.first.h1_hat.ldlt().solve(fit.first.score_rows.transpose() * weights) / n;
  const std::vector<Eigen::VectorXd> thetas_b = bootstrap_theta(fit, weights);
  params.thetas.resize(fit.thetas.size());
  const Eigen::Index k_x = fit.thetas.empty() ? 0 : fit.thetas.front().beta.size();
  for (std::size_t j = 0; j < fit.thetas.size(); ++j) {
    params.thetas[j].y = fit.thetas[j].y;
    params.thetas[j].beta = thetas_b[j].head(k_x);
    params.thetas[j].delta = thetas_b[j].tail(thetas_b[j].size() - k_x);
  }
  return params;
}

std::vector<double> bootstrap_functional(const SelectionDRFit& fit,
                                         const Eigen::VectorXd& weights,
                                         const FunctionalBuilder& build) {
  const SelectionDRParams params = bootstrap_params(fit, weights);
  const Eigen::VectorXd sampling = weights.array() + 1.0;  // weighted empirical F_Z
  return build(params, sampling);
}

UniformBand functional_band(const SelectionDRFit& fit, const FunctionalBuilder& build,
                            const std::vector<double>& axis, const BootstrapPlan& plan,
                            int threads) {
  plan.validate();
  const std::size_t m = axis.size();
  UniformBand band;
  band.grid = axis;
  band.center = build(fit.params(), Eigen::VectorXd::Ones(fit.n));
  if (band.center.size() != m) {
    throw_error(errc::schema, "functional builder returned a curve off the axis");
  }

  std::vector<std::vector<double>> draws(plan.b_draws);
  parallel_for(static_cast<std::size_t>(plan.b_draws), threads, [&](std::size_t b) {
    const Eigen::VectorXd w = multiplier_weights(fit.n, static_cast<int>(b), plan.seed);
    draws[b] = bootstrap_functional(fit, w, build);
  });

  band.se.assign(m, 0.0);
  band.kept.assign(m, 1);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (const auto& d : draws) mean += d[j];
    mean /= plan.b_draws;
    double acc = 0.0;
    for (const auto& d : draws) acc += (d[j] - mean) * (d[j] - mean);
    band.se[j] = plan.b_draws > 1 ? std::sqrt(acc / (plan.b_draws - 1)) : 0.0;
    if (band.se[j] == 0.0) band.kept[j] = 0;
  }
  if (std::none_of(band.kept.begin(), band.kept.end(), [](std::uint8_t k) { return k == 1; })) {
    throw_error(errc::no_variation, "functional_band: all standard errors are zero");
  }

  std::vector<double> sups(plan.b_draws, 0.0);
  for (int b = 0; b < plan.b_draws; ++b) {
    double sup = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!band.kept[j]) continue;
      sup = std::max(sup, std::fabs(draws[b][j] - band.center[j]) / band.se[j]);
    }
    sups[b] = sup;
  }
  band.critical_value = order_statistic_quantile(std::move(sups), plan.band_level);
  band.lower.resize(m);
  band.upper.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    band.lower[j] = band.center[j] - band.critical_value * band.se[j];
    band.upper[j] = band.center[j] + band.critical_value * band.se[j];
  }
  return band;
}

QuantileBand quantile_band_by_inversion(const DistributionCurve& cdf_band,
                                        const std::vector<double>& taus) {
  if (!cdf_band.band_lower || !cdf_band.band_upper) {
    throw_error(errc::contract, "quantile_band_by_inversion: curve carries no band");
  }
  const auto monotone = [](const std::vector<double>& v) {
    return std::is_sorted(v.begin(), v.end());
  };
  if (!monotone(cdf_band.values) || !monotone(*cdf_band.band_lower) ||
      !monotone(*cdf_band.band_upper)) {
    throw_error(errc::contract, "quantile_band_by_inversion: curves must be rearranged first");
  }

  DistributionCurve center{cdf_band.grid, cdf_band.values, true, std::nullopt, std::nullopt};
  DistributionCurve lower_cdf{cdf_band.grid, *cdf_band.band_lower, true, std::nullopt,
                              std::nullopt};
  DistributionCurve upper_cdf{cdf_band.grid, *cdf_band.band_upper, true, std::nullopt,
                              std::nullopt};

  QuantileBand out;
  out.taus = taus;
  out.point.reserve(taus.size());
  out.lower.reserve(taus.size());
  out.upper.reserve(taus.size());
  out.truncated.reserve(taus.size());
  for (const double tau : taus) {
    const QuantileResult p = quantile(center, tau);
    const QuantileResult lo = quantile(upper_cdf, tau);  // upper CDF inverts low
    const QuantileResult hi = quantile(lower_cdf, tau);  // lower CDF inverts high
    out.point.push_back(p.value);
    out.lower.push_back(lo.value);
    out.upper.push_back(hi.value);
    out.truncated.push_back((p.above_grid || lo.above_grid || hi.above_grid) ? 1 : 0);
  }
  return out;
}

}  // namespace seldr
