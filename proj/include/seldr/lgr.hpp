#pragma once

#include "seldr/errors.hpp"
#include "seldr/normal.hpp"

namespace seldr {

// Observable cell probabilities that identify the local Gaussian
// representation at one outcome threshold. f_y_z is the joint CDF
// F_{Y,D|Z}(y,1|z), which carries the whole D=0 mass, so
// 1 - p_d1_z <= f_y_z <= 1.
struct CellProbabilities {
  double p_d1_z0 = 0.0;  // Pr(D=1 | Z=0)
  double p_d1_z1 = 0.0;  // Pr(D=1 | Z=1)
  double f_y_z0 = 0.0;   // F_{Y,D|Z}(y,1|0)
  double f_y_z1 = 0.0;   // F_{Y,D|Z}(y,1|1)

  // Throws errc::malformed_input on invariant violations (monotonicity of the
  // joint CDF, relevance p0 < p1 < 1).
  void validate(double tol = 1e-12) const;

  // Selection-adjusted cells q_z = f_y_z - Pr(D=0|Z=z) = Pr(Y<=y, D=1|Z=z).
  double q0() const { return f_y_z0 - (1.0 - p_d1_z0); }
  double q1() const { return f_y_z1 - (1.0 - p_d1_z1); }
  double nu0() const { return norm_quantile(p_d1_z0); }
  double nu1() const { return norm_quantile(p_d1_z1); }
};

struct IdentificationResult {
  int case_id = 0;          // identification case 1..7
  double mu = 0.0;          // point value, or the finite endpoint for cases 3 and 6
  bool mu_is_interval = false;  // true for cases 3 and 6
  double mu_lower = 0.0;    // half line [mu_lower, +inf) in case 3
  double mu_upper = 0.0;    // half line (-inf, mu_upper] in case 6
  double rho = 0.0;
  bool mu_point_identified = true;
  bool rho_point_identified = true;  // rho is point identified in every case
  // case-7 solver diagnostics
  int iterations = 0;
  double residual_norm = 0.0;
  double jacobian_det = 0.0;
  bool used_bisection_fallback = false;
};

/// Unique rho with Phi_2(Phi^-1(u), Phi^-1(v); rho) = p, for marginals
/// u, v in (0,1) and p inside the Frechet bounds. Residual <= 1e-12;
/// returns exactly +/-1 at the bounds.
double lgr_rho_solve(double u, double v, double p);

/// Classifies the identification case (1-7) with boundary tolerance tol.
int classify_case(const CellProbabilities& c, double tol = 1e-9);

/// Interior (case 7) Newton solver for the two-equation system
/// q_z = Phi_2(mu, nu(z); rho). Requires classify_case(c) == 7.
IdentificationResult solve_mu_rho(const CellProbabilities& c, double tol = 1e-9);

/// Full identification dispatch: closed forms for the boundary cases,
/// solve_mu_rho for the interior case.
IdentificationResult identify(const CellProbabilities& c, double tol = 1e-9);

/// Forward map used by tests and the round-trip properties: cell
/// probabilities generated by interior parameters (mu, rho, nu0, nu1).
CellProbabilities lgr_forward_cells(double mu, double rho, double nu0, double nu1);

}  // namespace seldr
