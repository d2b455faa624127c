#include <array>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "seldr/counterfactuals.hpp"
#include "seldr/mc.hpp"
#include "seldr/normal.hpp"
#include "seldr/rng.hpp"

using namespace seldr;

namespace {

// group built from a classical-model configuration: true DR parameter curves
// on a shared grid plus a generated covariate sample
GroupInputs make_group(const HsmDgpConfig& cfg, const std::vector<double>& grid,
                       const std::string& label) {
  GroupInputs g;
  g.label = label;
  g.sorting_idx = {0};
  g.k_x = cfg.design.k_x();
  const ObservationSet data = hsm_generate(cfg);
  g.z_sample = data.z;
  g.params.pi = cfg.pi;
  for (const double y : grid) g.params.thetas.push_back(hsm_true_theta(cfg, y, g.sorting_idx));
  return g;
}

std::vector<double> default_grid() {
  std::vector<double> grid;
  for (double y = 1.6; y <= 3.2; y += 0.1) grid.push_back(y);
  return grid;
}

}  // namespace

TEST_CASE("latent distribution basics") {
  // single row with x'beta = 0 for every threshold: flat 0.5
  std::vector<ThetaAtY> thetas;
  for (double y : {0.0, 1.0, 2.0}) {
    ThetaAtY t;
    t.y = y;
    t.beta = Eigen::VectorXd::Zero(2);
    t.delta = Eigen::VectorXd::Zero(1);
    thetas.push_back(t);
  }
  Eigen::MatrixXd x(1, 2);
  x << 1.0, 0.4;
  const auto curve = latent_distribution(thetas, x);
  for (const double v : curve.values) CHECK(v == 0.5);
  CHECK(curve.monotone);

  // beta decreasing in y coordinatewise against positive x: nondecreasing CDF
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    thetas[j].beta[0] = 1.0 - static_cast<double>(j);
    thetas[j].beta[1] = 0.5 - 0.25 * static_cast<double>(j);
  }
  const auto inc = latent_distribution(thetas, x);
  CHECK(inc.monotone);
  CHECK(std::is_sorted(inc.values.begin(), inc.values.end()));

  CHECK_THROWS_AS(latent_distribution(thetas, Eigen::MatrixXd(0, 2)), Error);
}

TEST_CASE("latent distribution matches the closed-form mixture") {
  const HsmDgpConfig cfg = default_hsm_config(4000, 23);
  const auto grid = default_grid();
  const GroupInputs g = make_group(cfg, grid, "g");
  const auto curve = latent_distribution(g.params.thetas, g.x_sample());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double expect = 0.0;
    for (Eigen::Index i = 0; i < g.z_sample.rows(); ++i) {
      expect += norm_cdf((grid[j] - g.x_sample().row(i).dot(cfg.beta)) / cfg.sigma);
    }
    expect /= static_cast<double>(g.z_sample.rows());
    CHECK(curve.values[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("selection probability") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(10, 1);
  CHECK(selection_probability(Eigen::VectorXd::Zero(1), z) == 0.5);
  CHECK(selection_probability(Eigen::VectorXd::Constant(1, norm_quantile(0.74)), z) ==
        doctest::Approx(0.74).epsilon(1e-12));
}

TEST_CASE("observed distribution: no-sorting limit and stochastic dominance") {
  // rho = 0 and constant selection probability: observed equals latent exactly
  {
    HsmDgpConfig cfg = default_hsm_config(4000, 29);
    cfg.rho = 0.0;
    cfg.pi.setZero();
    cfg.pi[0] = 0.4;
    const auto grid = default_grid();
    const GroupInputs g = make_group(cfg, grid, "g");
    const auto observed = observed_distribution(g);
    const auto latent = latent_distribution(g.params.thetas, g.x_sample());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      CHECK(observed.values[j] == doctest::Approx(latent.values[j]).epsilon(1e-12));
    }
  }
  // rho = 0 with selection driven only by the excluded covariate: equal up to
  // the finite-sample covariance between Phi(z'pi) and the latent CDF
  {
    HsmDgpConfig cfg = default_hsm_config(20000, 29);
    cfg.rho = 0.0;
    cfg.pi.head(8).setZero();
    cfg.pi[0] = 0.4;
    cfg.pi[8] = -0.7;
    const auto grid = default_grid();
    const GroupInputs g = make_group(cfg, grid, "g");
    const auto observed = observed_distribution(g);
    const auto latent = latent_distribution(g.params.thetas, g.x_sample());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      CHECK(observed.values[j] == doctest::Approx(latent.values[j]).epsilon(5e-3));
    }
  }
  const auto grid = default_grid();

  // no-covariate model: larger rho shifts the observed distribution right
  for (double beta : {-0.5, 0.2, 1.0}) {
    for (double pi0 : {-0.3, 0.4}) {
      GroupInputs lo, hi;
      lo.k_x = hi.k_x = 1;
      lo.sorting_idx = hi.sorting_idx = {0};
      lo.z_sample = hi.z_sample = Eigen::MatrixXd::Ones(1, 1);
      lo.params.pi = hi.params.pi = Eigen::VectorXd::Constant(1, pi0);
      ThetaAtY t;
      t.y = 0.0;
      t.beta = Eigen::VectorXd::Constant(1, beta);
      t.delta = Eigen::VectorXd::Constant(1, std::atanh(0.1));
      lo.params.thetas = {t};
      t.delta[0] = std::atanh(0.6);
      hi.params.thetas = {t};
      const double f_lo = observed_distribution(lo).values[0];
      const double f_hi = observed_distribution(hi).values[0];
      CHECK(f_hi < f_lo);
    }
  }
}

TEST_CASE("observed distribution vs empirical CDF on generated data") {
  const HsmDgpConfig cfg = default_hsm_config(20000, 31);
  const ObservationSet data = hsm_generate(cfg);
  std::vector<double> sel;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d[i]) sel.push_back(data.y[i]);
  }
  std::sort(sel.begin(), sel.end());
  const auto grid = quantile_grid(sel, 0.10, 0.90, 0.05);

  GroupInputs g = make_group(cfg, grid.y, "g");
  const auto curve = observed_distribution(g);
  double sup_gap = 0.0;
  for (std::size_t j = 0; j < grid.y.size(); ++j) {
    const double ecdf =
        static_cast<double>(std::upper_bound(sel.begin(), sel.end(), grid.y[j]) - sel.begin()) /
        static_cast<double>(sel.size());
    sup_gap = std::fmax(sup_gap, std::fabs(curve.values[j] - ecdf));
  }
  CHECK(sup_gap <= 0.02);
}

TEST_CASE("counterfactual consistency and structure isolation") {
  const auto grid = default_grid();
  const GroupInputs g1 = make_group(default_hsm_config(3000, 37), grid, "g1");
  HsmDgpConfig cfg0 = default_hsm_config(3000, 41);
  cfg0.beta[4] += 0.3;
  cfg0.rho = 0.1;
  const GroupInputs g0 = make_group(cfg0, grid, "g0");

  // homogeneous sources reproduce the observed distribution exactly
  const auto obs = observed_distribution(g1);
  const auto cf = counterfactual_observed(g1, g1, g1, g1);
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(cf.values[j] == obs.values[j]);

  // j = k gives the actual latent curve
  const auto actual = latent_distribution(g1.params.thetas, g1.x_sample());
  const auto same = counterfactual_latent(g1, g1);
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(same.values[j] == actual.values[j]);

  // beta swap with identical covariates isolates the structure effect
  const auto swapped = counterfactual_latent(g0, g1);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double direct = 0.0;
    for (Eigen::Index i = 0; i < g1.z_sample.rows(); ++i) {
      direct += norm_cdf(-g1.x_sample().row(i).dot(g0.params.thetas[j].beta));
    }
    direct /= static_cast<double>(g1.z_sample.rows());
    CHECK(swapped.values[j] == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("rearrange and quantile operators") {
  DistributionCurve curve;
  curve.grid = {1.0, 2.0, 3.0};
  curve.values = {0.3, 0.2, 0.5};
  const auto sorted = rearrange(curve);
  CHECK(sorted.values == std::vector<double>{0.2, 0.3, 0.5});
  CHECK(sorted.monotone);

  // idempotence on random curves, multiset preserved
  for (int trial = 0; trial < 50; ++trial) {
    DistributionCurve random_curve;
    for (int j = 0; j < 12; ++j) {
      random_curve.grid.push_back(j);
      random_curve.values.push_back(rng::uniform(81, trial, j));
    }
    const auto once = rearrange(random_curve);
    const auto twice = rearrange(once);
    CHECK(once.values == twice.values);
    auto original = random_curve.values;
    std::sort(original.begin(), original.end());
    CHECK(once.values == original);
  }

  // left-inverse conventions
  DistributionCurve step;
  step.grid = {0.0, 1.0, 2.0};
  step.values = {0.0, 1.0, 1.0};
  step.monotone = true;
  CHECK(quantile(step, 0.3).value == 1.0);
  CHECK(quantile(step, 0.999).value == 1.0);

  DistributionCurve smooth;
  smooth.grid = {1.0, 2.0, 3.0};
  smooth.values = {0.2, 0.5, 0.8};
  smooth.monotone = true;
  CHECK(quantile(smooth, 0.5).value == 2.0);  // tau hit exactly
  CHECK(quantile(smooth, 0.1).value == 1.0);  // below min: first grid point
  const auto above = quantile(smooth, 0.9);
  CHECK(above.above_grid);
  CHECK(above.value == 3.0);

  DistributionCurve nonmono;
  nonmono.grid = {1.0, 2.0};
  nonmono.values = {0.5, 0.4};
  nonmono.monotone = false;
  CHECK_THROWS_AS(quantile(nonmono, 0.5), Error);

  // quantile of a rearranged curve is nondecreasing in tau
  DistributionCurve wiggly;
  for (int j = 0; j < 20; ++j) {
    wiggly.grid.push_back(j);
    wiggly.values.push_back(rng::uniform(83, 1, j));
  }
  const auto mono = rearrange(wiggly);
  double prev = -1e300;
  for (double tau = 0.05; tau < 1.0; tau += 0.05) {
    const double q = quantile(mono, tau).value;
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("decompositions: telescoping, order invariance, zero cases") {
  const auto grid = default_grid();
  const GroupInputs g1 = make_group(default_hsm_config(2500, 47), grid, "g1");
  HsmDgpConfig cfg0 = default_hsm_config(2500, 53);
  cfg0.beta[4] += 0.25;
  cfg0.pi[8] = -0.5;
  cfg0.rho = 0.0;
  const GroupInputs g0 = make_group(cfg0, grid, "g0");

  // identical groups: all components vanish
  const auto zero2 = decompose_two(g1, g1);
  const auto zero4 = decompose_four(g1, g1);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(std::fabs(zero2.total[j]) <= 1e-15);
    for (const auto& comp : zero4.components) CHECK(std::fabs(comp[j]) <= 1e-15);
  }

  // two-term: identical covariate samples kill the composition term
  {
    GroupInputs g0_samex = g0;
    g0_samex.z_sample = g1.z_sample;
    const auto rep = decompose_two(g1, g0_samex);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      CHECK(std::fabs(rep.components[1][j]) <= 1e-15);
      CHECK(rep.total[j] ==
            doctest::Approx(rep.components[0][j] + rep.components[1][j]).epsilon(1e-12));
    }
  }

  // four-way: only delta differs => only the sorting component is nonzero
  {
    GroupInputs g_rho = g1;
    for (auto& t : g_rho.params.thetas) t.delta[0] = std::atanh(0.2);
    const auto rep = decompose_four(g1, g_rho);
    bool sorting_nonzero = false;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      sorting_nonzero = sorting_nonzero || std::fabs(rep.components[0][j]) > 1e-6;
      CHECK(std::fabs(rep.components[1][j]) <= 1e-14);
      CHECK(std::fabs(rep.components[2][j]) <= 1e-14);
      CHECK(std::fabs(rep.components[3][j]) <= 1e-14);
    }
    CHECK(sorting_nonzero);
  }

  // telescoping exactness and total invariance across every extraction order
  std::array<Component, 4> order = kDefaultOrder;
  std::sort(order.begin(), order.end());
  const auto base = decompose_four(g1, g0);
  do {
    const auto rep = decompose_four(g1, g0, order);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double sum = 0.0;
      for (const auto& comp : rep.components) sum += comp[j];
      CHECK(std::fabs(sum - rep.total[j]) <= 1e-12);
      CHECK(rep.total[j] == doctest::Approx(base.total[j]).epsilon(1e-13));
    }
  } while (std::next_permutation(order.begin(), order.end()));

  // aggregate selection effect = sorting + selection structure
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK((*base.aggregate_selection)[j] ==
          doctest::Approx(base.components[0][j] + base.components[1][j]).epsilon(1e-14));
  }
}

TEST_CASE("employment decomposition table") {
  const auto grid = default_grid();
  const GroupInputs g1 = make_group(default_hsm_config(2000, 59), grid, "g1");
  HsmDgpConfig cfg0 = default_hsm_config(2000, 61);
  cfg0.pi[0] = 0.2;
  const GroupInputs g0 = make_group(cfg0, grid, "g0");

  const Eigen::Matrix2d same = employment_decomposition(g1, g1);
  CHECK(same(0, 0) == same(0, 1));
  CHECK(same(0, 0) == same(1, 0));

  const Eigen::Matrix2d table = employment_decomposition(g1, g0);
  CHECK(table(0, 0) == doctest::Approx(selection_probability(g0.params.pi, g0.z_sample))
                           .epsilon(1e-15));
  CHECK(table(1, 1) == doctest::Approx(selection_probability(g1.params.pi, g1.z_sample))
                           .epsilon(1e-15));
  CHECK(table(1, 0) == doctest::Approx(selection_probability(g1.params.pi, g0.z_sample))
                           .epsilon(1e-15));
  // pi swap with identical covariates isolates the structure difference
  CHECK(std::fabs(table(1, 0) - table(0, 0)) > 1e-3);
}

TEST_CASE("remark-2 comparative statics") {
  {
    const auto s = remark2_signs(0.4, 0.1, 0.0);
    CHECK(std::fabs(s.d_pi) <= 1e-10);
    CHECK(s.d_rho < 0.0);
  }
  CHECK(remark2_signs(0.7, -0.2, 0.5).d_pi > 0.0);
  CHECK(remark2_signs(-0.3, 0.6, -0.5).d_pi < 0.0);

  // finite-difference agreement at a reference point
  {
    const auto s = remark2_signs(0.3, 0.2, -0.4);
    const auto f_rho = [&](double r) { return bvn_cdf(-0.3, 0.2, -r) / norm_cdf(0.2); };
    const auto f_pi = [&](double p) { return bvn_cdf(-0.3, p, 0.4) / norm_cdf(p); };
    const double fd_rho = oracle::central_diff(f_rho, -0.4, 1e-6);
    const double fd_pi = oracle::central_diff(f_pi, 0.2, 1e-6);
    CHECK(std::fabs(s.d_rho - fd_rho) <= 1e-6 * std::fabs(fd_rho));
    CHECK(std::fabs(s.d_pi - fd_pi) <= 1e-6 * std::fabs(fd_pi));
  }

  // trichotomy on random triples
  for (int i = 0; i < 1000; ++i) {
    const double beta = -1.5 + 3.0 * rng::uniform(97, 1, i);
    const double pi = -1.5 + 3.0 * rng::uniform(97, 2, i);
    const double rho = -0.9 + 1.8 * rng::uniform(97, 3, i);
    const auto s = remark2_signs(beta, pi, rho);
    CHECK(s.d_rho < 0.0);
    if (rho > 1e-3) CHECK(s.d_pi > 0.0);
    if (rho < -1e-3) CHECK(s.d_pi < 0.0);
  }
  CHECK_THROWS_AS(remark2_signs(0.0, 0.0, 1.0), Error);
}
