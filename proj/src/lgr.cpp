#include "seldr/lgr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace seldr {

namespace {

constexpr double kMuBox = 40.0;      // |mu| beyond this is numerically +/-inf
constexpr double kRhoGuard = 1e-12;  // keeps the solver strictly inside (-1,1)

struct System {
  double nu0, nu1, q0, q1;

  Eigen::Vector2d residual(double mu, double rho) const {
    return {bvn_cdf(mu, nu1, rho) - q1, bvn_cdf(mu, nu0, rho) - q0};
  }
  Eigen::Matrix2d jacobian(double mu, double rho) const {
    const auto g1 = bvn_cdf_partials(mu, nu1, rho);
    const auto g0 = bvn_cdf_partials(mu, nu0, rho);
    Eigen::Matrix2d j;
    j << g1.d_mu, g1.d_rho, g0.d_mu, g0.d_rho;
    return j;
  }
};

// Inner solve of Phi_2(mu, nu1; rho) = q1 in mu (strictly increasing).
double solve_mu_given_rho(const System& sys, double rho) {
  double lo = -kMuBox, hi = kMuBox;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (bvn_cdf(mid, sys.nu1, rho) < sys.q1) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

// Nested bisection fallback: g(rho) = Phi_2(mu(rho), nu0; rho) - q0 is
// strictly increasing along the first-equation manifold (det J > 0).
void nested_bisection(const System& sys, double& mu, double& rho) {
  double lo = -1.0 + kRhoGuard, hi = 1.0 - kRhoGuard;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double m = solve_mu_given_rho(sys, mid);
    if (bvn_cdf(m, sys.nu0, mid) < sys.q0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  rho = 0.5 * (lo + hi);
  mu = solve_mu_given_rho(sys, rho);
}

}  // namespace

void CellProbabilities::validate(double tol) const {
  const auto in_unit = [&](double p) { return p >= -tol && p <= 1.0 + tol; };
  if (!in_unit(p_d1_z0) || !in_unit(p_d1_z1) || !in_unit(f_y_z0) || !in_unit(f_y_z1)) {
    throw_error(errc::malformed_input, "cell probabilities must lie in [0, 1]");
  }
  if (!(p_d1_z0 < p_d1_z1 && p_d1_z1 < 1.0)) {
    throw_error(errc::malformed_input,
                "relevance violated: need Pr(D=1|Z=0) < Pr(D=1|Z=1) < 1");
  }
  if (p_d1_z0 <= 0.0) {
    throw_error(errc::malformed_input, "Pr(D=1|Z=0) must be positive");
  }
  if (f_y_z0 < 1.0 - p_d1_z0 - tol || f_y_z1 < 1.0 - p_d1_z1 - tol) {
    throw_error(errc::malformed_input,
                "joint CDF below the D=0 mass: F_{Y,D|Z}(y,1|z) >= 1 - Pr(D=1|Z=z) required");
  }
  if (f_y_z0 > 1.0 + tol || f_y_z1 > 1.0 + tol) {
    throw_error(errc::malformed_input, "joint CDF exceeds 1");
  }
}

double lgr_rho_solve(double u, double v, double p) {
  if (!(u > 0.0 && u < 1.0) || !(v > 0.0 && v < 1.0)) {
    throw_error(errc::degenerate_marginal, "marginals must lie strictly inside (0, 1)");
  }
  const double lower = std::max(u + v - 1.0, 0.0);
  const double upper = std::min(u, v);
  const double slack = 1e-14;
  if (p < lower - slack || p > upper + slack) {
    throw_error(errc::infeasible_probability,
                "joint probability outside the Frechet-Hoeffding bounds");
  }
  if (p >= upper) return 1.0;
  if (p <= lower) return -1.0;

  const double mu = norm_quantile(u);
  const double nu = norm_quantile(v);
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (bvn_cdf(mu, nu, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 4e-17) break;
  }
  return 0.5 * (lo + hi);
}

int classify_case(const CellProbabilities& c, double tol) {
  c.validate(std::max(tol, 1e-12));
  const double q0 = c.q0();
  const double q1 = c.q1();
  if (c.f_y_z0 >= 1.0 - tol) {
    return (c.f_y_z1 >= 1.0 - tol) ? 3 : 2;
  }
  if (std::fabs(q1 - q0) <= tol && q0 > tol) return 1;
  if (q0 <= tol) {
    return (q1 <= tol) ? 6 : 4;
  }
  if (std::fabs(c.f_y_z1 - c.f_y_z0) <= tol) return 5;
  return 7;
}

IdentificationResult solve_mu_rho(const CellProbabilities& c, double tol) {
  if (classify_case(c, tol) != 7) {
    throw_error(errc::wrong_case, "solve_mu_rho requires an interior (case 7) input");
  }
  System sys{c.nu0(), c.nu1(), c.q0(), c.q1()};

  // start: pooled conditional cell mean, local independence
  const double pooled =
      std::clamp(0.5 * (sys.q0 / c.p_d1_z0 + sys.q1 / c.p_d1_z1), 1e-10, 1.0 - 1e-10);
  double mu = norm_quantile(pooled);
  double rho = 0.0;

  IdentificationResult out;
  out.case_id = 7;
  Eigen::Vector2d res = sys.residual(mu, rho);
  double best = res.lpNorm<Eigen::Infinity>();
  const double target = 1e-13;
  int it = 0;
  for (; it < 50 && best > target; ++it) {
    const Eigen::Matrix2d jac = sys.jacobian(mu, rho);
    const Eigen::Vector2d step = jac.fullPivLu().solve(res);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      const double mu_try = std::clamp(mu - scale * step[0], -kMuBox, kMuBox);
      const double rho_try =
          std::clamp(rho - scale * step[1], -1.0 + kRhoGuard, 1.0 - kRhoGuard);
      const Eigen::Vector2d res_try = sys.residual(mu_try, rho_try);
      const double norm_try = res_try.lpNorm<Eigen::Infinity>();
      if (norm_try < best) {
        mu = mu_try;
        rho = rho_try;
        res = res_try;
        best = norm_try;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  if (best > 1e-11) {
    nested_bisection(sys, mu, rho);
    res = sys.residual(mu, rho);
    best = res.lpNorm<Eigen::Infinity>();
    out.used_bisection_fallback = true;
    for (int p = 0; p < 5 && best > target; ++p) {
      const Eigen::Matrix2d jac = sys.jacobian(mu, rho);
      const Eigen::Vector2d step = jac.fullPivLu().solve(res);
      const double mu_try = std::clamp(mu - step[0], -kMuBox, kMuBox);
      const double rho_try = std::clamp(rho - step[1], -1.0 + kRhoGuard, 1.0 - kRhoGuard);
      const Eigen::Vector2d res_try = sys.residual(mu_try, rho_try);
      if (res_try.lpNorm<Eigen::Infinity>() >= best) break;
      mu = mu_try;
      rho = rho_try;
      res = res_try;
      best = res.lpNorm<Eigen::Infinity>();
    }
  }
  if (best > 1e-11) {
    throw_error(errc::numeric_failure,
                "identification solver did not converge; residual inf-norm " +
                    std::to_string(best));
  }
  out.mu = mu;
  out.rho = rho;
  out.iterations = it;
  out.residual_norm = best;
  out.jacobian_det = sys.jacobian(mu, rho).determinant();
  return out;
}

IdentificationResult identify(const CellProbabilities& c, double tol) {
  const int id = classify_case(c, tol);
  IdentificationResult out;
  out.case_id = id;
  switch (id) {
    case 1:
    case 2:
      out.rho = 1.0;
      out.mu = norm_quantile(std::clamp(c.q1(), 1e-300, 1.0 - 1e-16));
      break;
    case 3:
      out.rho = 1.0;
      out.mu_is_interval = true;
      out.mu_point_identified = false;
      out.mu_lower = norm_quantile(c.p_d1_z1);
      out.mu_upper = std::numeric_limits<double>::infinity();
      out.mu = out.mu_lower;
      break;
    case 4:
    case 5:
      out.rho = -1.0;
      out.mu = norm_quantile(std::clamp(c.f_y_z1, 1e-300, 1.0 - 1e-16));
      break;
    case 6:
      out.rho = -1.0;
      out.mu_is_interval = true;
      out.mu_point_identified = false;
      out.mu_lower = -std::numeric_limits<double>::infinity();
      out.mu_upper = norm_quantile(std::clamp(c.f_y_z1, 1e-300, 1.0 - 1e-16));
      out.mu = out.mu_upper;
      break;
    default:
      out = solve_mu_rho(c, tol);
      break;
  }
  return out;
}

CellProbabilities lgr_forward_cells(double mu, double rho, double nu0, double nu1) {
  CellProbabilities c;
  c.p_d1_z0 = norm_cdf(nu0);
  c.p_d1_z1 = norm_cdf(nu1);
  c.f_y_z0 = bvn_cdf(mu, nu0, rho) + (1.0 - c.p_d1_z0);
  c.f_y_z1 = bvn_cdf(mu, nu1, rho) + (1.0 - c.p_d1_z1);
  return c;
}

}  // namespace seldr
