#pragma once

#include "seldr/errors.hpp"

namespace seldr {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;  // 1/sqrt(2*pi)
inline constexpr double kSqrt2Pi = 2.5066282746310005024;
inline constexpr double kTwoPi = 6.2831853071795864769;

/// Standard normal density exp(-x^2/2)/sqrt(2*pi).
double norm_pdf(double x);
double norm_log_pdf(double x);

/// Standard normal CDF, total on the extended reals (Phi(-inf)=0, Phi(+inf)=1).
double norm_cdf(double x);

/// log Phi(x) with an asymptotic branch for the deep left tail.
double norm_log_cdf(double x);

/// Inverse standard normal CDF on (0,1). Throws errc::domain at p in {0,1};
/// the message names which boundary was hit.
double norm_quantile(double p);

/// Evaluation point of the bivariate normal CDF Phi_2(mu, nu; rho).
struct BvnPoint {
  double mu = 0.0;
  double nu = 0.0;
  double rho = 0.0;
};

/// Phi_2(mu, nu; rho): P(X <= mu, Y <= nu) for standard bivariate normal X, Y
/// with correlation rho in [-1, 1]. Accepts +/-inf sentinels in mu, nu; the
/// comonotone limits at rho = +/-1 are evaluated in closed form. The result is
/// clipped to the Frechet-Hoeffding bounds.
double bvn_cdf(double mu, double nu, double rho);
inline double bvn_cdf(const BvnPoint& p) { return bvn_cdf(p.mu, p.nu, p.rho); }

/// Bivariate normal density phi_2(mu, nu; rho). Throws errc::singular_correlation
/// at |rho| = 1.
double bvn_pdf(double mu, double nu, double rho);
inline double bvn_pdf(const BvnPoint& p) { return bvn_pdf(p.mu, p.nu, p.rho); }
double bvn_log_pdf(double mu, double nu, double rho);

struct BvnGradient {
  double d_mu = 0.0;   // Phi((nu - rho*mu)/s) * phi(mu), s = sqrt(1 - rho^2)
  double d_nu = 0.0;   // Phi((mu - rho*nu)/s) * phi(nu)
  double d_rho = 0.0;  // phi_2(mu, nu; rho)
};

/// All first partial derivatives of Phi_2. Requires |rho| < 1 and finite mu, nu
/// except that +/-inf arguments yield the marginal limits.
BvnGradient bvn_cdf_partials(double mu, double nu, double rho);
inline BvnGradient bvn_cdf_partials(const BvnPoint& p) {
  return bvn_cdf_partials(p.mu, p.nu, p.rho);
}

struct BvnHessian {
  double mu_mu = 0.0;
  double mu_nu = 0.0;
  double mu_rho = 0.0;
  double nu_nu = 0.0;
  double nu_rho = 0.0;
  double rho_rho = 0.0;
};

/// All second partial derivatives of Phi_2; |rho| < 1, finite arguments.
BvnHessian bvn_cdf_second_partials(double mu, double nu, double rho);

/// G1(u) = phi(u) / (Phi(u) * Phi(-u)), evaluated in log space.
double g1_ratio(double u);

struct GRatios {
  double g1_at_nu = 0.0;  // G1 evaluated at the selection index nu
  double g2 = 0.0;        // d_mu Phi_2 / (Phi_2 * (Phi(nu) - Phi_2))
  double g3 = 0.0;        // d_rho Phi_2 / (Phi_2 * (Phi(nu) - Phi_2))
};

/// Ratio functions of the selection-corrected likelihood. The cell
/// probabilities Phi_2 and Phi(nu) - Phi_2 must be strictly positive; a
/// vanished cell raises errc::degenerate_cell naming the cell. Intermediate
/// quantities are clamped to [1e-300, 1] and combined in log space.
GRatios g_ratios(double mu, double nu, double rho);
inline GRatios g_ratios(const BvnPoint& p) { return g_ratios(p.mu, p.nu, p.rho); }

}  // namespace seldr
