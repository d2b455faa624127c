#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "seldr/mc.hpp"
#include "seldr/normal.hpp"

using namespace seldr;

TEST_CASE("hsm_generate: determinism, selection rate, selection bias formula") {
  HsmDgpConfig cfg = default_hsm_config(60000, 5);
  const ObservationSet a = hsm_generate(cfg);
  const ObservationSet b = hsm_generate(cfg);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.d - b.d).lpNorm<Eigen::Infinity>() == 0);

  // intercept-only selection at Phi^-1(0.66): employment-like rate
  {
    HsmDgpConfig flat = cfg;
    flat.pi.setZero();
    flat.pi[0] = norm_quantile(0.66);
    const ObservationSet data = hsm_generate(flat);
    const double rate = data.d.cast<double>().mean();
    CHECK(std::fabs(rate - 0.66) <= 3.0 * std::sqrt(0.66 * 0.34 / flat.n));
  }

  // E[Y | D=1, z] = x'beta + sigma*rho*lambda(z'pi): Heckman correction oracle
  {
    double acc_obs = 0.0, acc_pred = 0.0;
    long n1 = 0;
    for (Eigen::Index i = 0; i < a.n(); ++i) {
      if (a.d[i] != 1) continue;
      const double idx = a.z.row(i).dot(cfg.pi);
      const double lambda = norm_pdf(idx) / norm_cdf(idx);
      acc_obs += a.y[i];
      acc_pred += a.x.row(i).dot(cfg.beta) + cfg.sigma * cfg.rho * lambda;
      ++n1;
    }
    CHECK(acc_obs / n1 == doctest::Approx(acc_pred / n1).epsilon(0.01));
  }

  // the default config moves Pr(D=1|Z) across a wide range
  {
    std::vector<double> probs;
    for (Eigen::Index i = 0; i < a.n(); ++i) probs.push_back(norm_cdf(a.z.row(i).dot(cfg.pi)));
    std::sort(probs.begin(), probs.end());
    CHECK(probs[probs.size() / 100] <= 0.45);
    CHECK(probs[probs.size() * 99 / 100] >= 0.85);
    const double rate = a.d.cast<double>().mean();
    CHECK(rate > 0.55);
    CHECK(rate < 0.80);
  }

  // rho = 0: observed outcomes show no selection correction
  {
    HsmDgpConfig indep = cfg;
    indep.rho = 0.0;
    const ObservationSet data = hsm_generate(indep);
    double acc_obs = 0.0, acc_lin = 0.0;
    long n1 = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.d[i] != 1) continue;
      acc_obs += data.y[i];
      acc_lin += data.x.row(i).dot(indep.beta);
      ++n1;
    }
    CHECK(std::fabs(acc_obs / n1 - acc_lin / n1) <= 3.0 * indep.sigma / std::sqrt(n1));
  }
}

TEST_CASE("hsm_true_theta encodes the classical-model nesting") {
  const HsmDgpConfig cfg = default_hsm_config(100, 1);
  const std::vector<int> sorting = {0};
  const ThetaAtY t1 = hsm_true_theta(cfg, 2.0, sorting);
  const ThetaAtY t2 = hsm_true_theta(cfg, 2.5, sorting);
  // intercept slope -1/sigma, other coordinates constant
  CHECK((t2.beta[0] - t1.beta[0]) / 0.5 == doctest::Approx(-1.0 / cfg.sigma).epsilon(1e-12));
  for (Eigen::Index j = 1; j < t1.beta.size(); ++j) CHECK(t1.beta[j] == t2.beta[j]);
  CHECK(std::tanh(t1.delta[0]) == doctest::Approx(cfg.rho).epsilon(1e-12));
  CHECK_THROWS_AS(hsm_true_theta(cfg, 2.0, std::vector<int>{1}), Error);
}

TEST_CASE("heckman_two_step benchmark") {
  // rho = 0: the Mills coefficient vanishes
  {
    HsmDgpConfig cfg = default_hsm_config(50000, 77);
    cfg.rho = 0.0;
    const ObservationSet data = hsm_generate(cfg);
    const HeckmanFit fit = heckman_two_step(data);
    CHECK(std::fabs(fit.mills_coef) <= 0.03);
    CHECK(std::fabs(fit.rho) <= 0.06);
    CHECK(fit.sigma == doctest::Approx(cfg.sigma).epsilon(0.02));
  }
  // classical DGP recovery
  {
    const HsmDgpConfig cfg = default_hsm_config(50000, 78);
    const ObservationSet data = hsm_generate(cfg);
    const HeckmanFit fit = heckman_two_step(data);
    CHECK(fit.sigma == doctest::Approx(cfg.sigma).epsilon(0.03));
    CHECK(fit.rho == doctest::Approx(cfg.rho).epsilon(0.15));
    for (Eigen::Index j = 0; j < cfg.beta.size(); ++j) {
      CHECK(std::fabs(fit.beta[j] - cfg.beta[j]) <= 0.05);
    }
    CHECK((fit.beta_over_sigma - fit.beta / fit.sigma).lpNorm<Eigen::Infinity>() <= 1e-14);
  }
}

TEST_CASE("DR intercept curve slope matches -1/sigma") {
  const HsmDgpConfig cfg = default_hsm_config(20000, 91);
  const ObservationSet data = hsm_generate(cfg);
  std::vector<double> sel;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d[i]) sel.push_back(data.y[i]);
  }
  const auto grid = quantile_grid(sel, 0.30, 0.70, 0.40);  // two thresholds
  REQUIRE(grid.y.size() == 2);
  ModelSpec spec;
  spec.outcome_cols.assign(data.x_names.begin() + 1, data.x_names.end());
  spec.excluded_cols = {"benefit"};
  spec.sorting_cols = {"intercept"};
  spec.grid = grid;
  const auto fit = fit_two_step(data, spec);
  REQUIRE(fit.thetas.size() == 2);
  const double slope =
      (fit.thetas[1].beta[0] - fit.thetas[0].beta[0]) / (grid.y[1] - grid.y[0]);
  CHECK(slope == doctest::Approx(-1.0 / cfg.sigma).epsilon(0.08));
  // sorting recovers atanh(rho) roughly at this n
  CHECK(std::tanh(fit.thetas[0].delta[0]) == doctest::Approx(cfg.rho).epsilon(0.5));
}

TEST_CASE("run_monte_carlo: identities, determinism, degenerate reps") {
  HsmDgpConfig cfg = default_hsm_config(800, 303);
  BootstrapPlan plan;
  plan.b_draws = 50;
  plan.seed = 1;
  McOptions opts;
  opts.reps = 8;
  opts.tau_lo = 0.20;
  opts.tau_hi = 0.80;
  opts.tau_step = 0.15;
  opts.threads = 2;
  const auto contrasts = default_mc_contrasts(cfg);
  const McRunSummary sum = run_monte_carlo(cfg, plan, opts, contrasts);

  CHECK(sum.reps_requested == 8);
  CHECK(sum.reps_failed <= 1);
  REQUIRE(sum.contrasts.size() == 3);
  for (const auto& cs : sum.contrasts) {
    REQUIRE(cs.bias.size() == sum.tau_index.size());
    for (std::size_t j = 0; j < cs.bias.size(); ++j) {
      // rmse^2 = bias^2 + sd^2, definitional
      CHECK(std::fabs(cs.rmse[j] * cs.rmse[j] - cs.bias[j] * cs.bias[j] - cs.sd[j] * cs.sd[j]) <=
            1e-10);
    }
    CHECK(cs.coverage_uniform >= 0.0);
    CHECK(cs.coverage_uniform <= 1.0);
    CHECK(cs.coverage_uniform >= cs.coverage_pointwise);  // sup-t cv >= 1.96 here
    CHECK(cs.avg_critical_value > 1.5);
  }

  // identical inputs reproduce the summary exactly, regardless of threads
  McOptions opts1 = opts;
  opts1.threads = 1;
  const McRunSummary again = run_monte_carlo(cfg, plan, opts1, contrasts);
  for (std::size_t c = 0; c < sum.contrasts.size(); ++c) {
    CHECK(sum.contrasts[c].coverage_uniform == again.contrasts[c].coverage_uniform);
    CHECK(sum.contrasts[c].avg_critical_value == again.contrasts[c].avg_critical_value);
    for (std::size_t j = 0; j < sum.contrasts[c].bias.size(); ++j) {
      CHECK(sum.contrasts[c].bias[j] == again.contrasts[c].bias[j]);
      CHECK(sum.contrasts[c].sd[j] == again.contrasts[c].sd[j]);
    }
  }

  // single replicate: coverage is 0 or 1
  McOptions one = opts;
  one.reps = 1;
  const McRunSummary single = run_monte_carlo(cfg, plan, one, contrasts);
  for (const auto& cs : single.contrasts) {
    CHECK((cs.coverage_uniform == 0.0 || cs.coverage_uniform == 1.0));
  }
}
