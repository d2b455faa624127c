#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "seldr/data.hpp"
#include "seldr/model.hpp"

namespace seldr {

struct FirstStageFit {
  Eigen::VectorXd pi_hat;
  Eigen::MatrixXd h1_hat;      // expected-Hessian estimate -(1/n) sum G1 phi z z'
  Eigen::MatrixXd score_rows;  // n x k_z individual scores S_1i(pi_hat)
  bool converged = false;
  int iterations = 0;
  bool separation_warning = false;
  double gradient_norm = 0.0;
};

struct ThresholdDiagnostics {
  double y = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool boundary = false;        // parameter box contact at the optimum
  bool skipped = false;         // degenerate threshold, excluded from the fit
  bool cells_clamped = false;   // some cell probability hit the clamp floor
  bool hessian_ridged = false;  // near-singular Hessian stabilized by a ridge
};

struct SelectionDRFit {
  ModelSpec spec;
  std::vector<int> sorting_idx;  // resolved against x_names
  FirstStageFit first;
  std::vector<ThetaAtY> thetas;            // kept thresholds only
  std::vector<Eigen::MatrixXd> psi;        // per threshold: n x k_theta influence rows
  std::vector<ThresholdDiagnostics> diagnostics;  // one per grid point, kept or skipped
  Eigen::Index n = 0;

  Eigen::Index k_theta() const {
    return thetas.empty() ? 0 : thetas.front().beta.size() + thetas.front().delta.size();
  }
  bool all_converged() const;
  SelectionDRParams params() const;
};

struct FitOptions {
  double probit_tol = 1e-10;
  double dr_tol = 1e-6;       // convergence declared at this gradient inf-norm
  double dr_polish_tol = 1e-12;  // iteration continues to here while steps help
  int max_iterations = 200;
  int max_halvings = 30;
  double box = 30.0;          // compact parameter box [-box, box] per coordinate
  int threads = 1;
  int warm_block = 16;        // contiguous warm-start block length; <=0 derives
                              // grid_size / threads
};

/// First-stage probit by Newton scoring. Throws errc::singular_design naming
/// offending columns; separation is reported as a warning flag with the
/// estimate clamped to the parameter box.
FirstStageFit fit_probit(const ObservationSet& data, const FitOptions& opts = {});

/// Per-observation second-stage score rows and the exact averaged Hessian
/// blocks at (theta, pi): d2 L2 / dtheta dtheta' and d2 L2 / dtheta dpi'.
struct ScoreBlocks {
  Eigen::MatrixXd s2_rows;  // n x k_theta
  Eigen::MatrixXd h2;       // k_theta x k_theta
  Eigen::MatrixXd j21;      // k_theta x k_z
  bool cells_clamped = false;
};
ScoreBlocks scores_and_blocks(const ThetaAtY& theta, const Eigen::VectorXd& pi,
                              const ObservationSet& data, const std::vector<int>& sorting_idx,
                              bool want_j21 = true);

/// One selection-corrected distribution regression at threshold y.
ThetaAtY fit_dr_at_threshold(const ObservationSet& data, const FirstStageFit& first, double y,
                             const std::vector<int>& sorting_idx,
                             const std::optional<ThetaAtY>& warm, ThresholdDiagnostics& diag,
                             const FitOptions& opts = {});

/// Algorithm: probit first stage, then one DR per grid threshold with warm
/// starts chained inside contiguous blocks (cold start at block heads), then
/// influence functions. Degenerate thresholds are recorded and excluded.
SelectionDRFit fit_two_step(const ObservationSet& data, const ModelSpec& spec,
                            const FitOptions& opts = {});

/// Influence-function rows psi_i = -H2^-1 (S2_i - J21 H1^-1 S1_i) for one
/// threshold. Near-singular H2 is stabilized by a 1e-10 * trace ridge and
/// flagged.
Eigen::MatrixXd influence_rows(const ScoreBlocks& blocks, const FirstStageFit& first,
                               bool* ridged = nullptr);

/// Covariance estimate between theta estimates at two thresholds,
/// n^-2 sum_i psi_i(y) psi_i(y2)'.
Eigen::MatrixXd covariance_at(const SelectionDRFit& fit, double y, double y2);

/// Index of a threshold in the kept set; errc::contract if absent.
std::size_t threshold_index(const SelectionDRFit& fit, double y);

}  // namespace seldr
