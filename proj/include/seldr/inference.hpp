#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "seldr/counterfactuals.hpp"
#include "seldr/estimator.hpp"

namespace seldr {

struct BootstrapPlan {
  int b_draws = 200;
  std::uint64_t seed = 0;
  double band_level = 0.95;

  void validate() const {
    if (b_draws < 1) throw_error(errc::malformed_input, "b_draws must be >= 1");
    if (!(band_level > 0.0 && band_level < 1.0)) {
      throw_error(errc::malformed_input, "band_level must lie in (0,1)");
    }
  }
};

struct UniformBand {
  std::vector<double> grid;      // threshold (or tau) axis
  std::vector<double> center;
  std::vector<double> se;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::uint8_t> kept;  // 0 where SE = 0 (dropped from the sup)
  double critical_value = 0.0;
};

/// Centered standard-normal multipliers: a pure function of (seed, b_index),
/// independent of draw order and thread count; the weights sum to zero
/// exactly up to rounding.
Eigen::VectorXd multiplier_weights(Eigen::Index n, int b_index, std::uint64_t seed);

/// Linear bootstrap perturbation theta_y^b = theta_y + mean_i(w_i psi_i) per
/// kept threshold; no re-optimization.
std::vector<Eigen::VectorXd> bootstrap_theta(const SelectionDRFit& fit,
                                             const Eigen::VectorXd& weights);

/// Sup-t uniform confidence band for the contrast c'theta_y over the kept
/// grid. Critical value is the ceil(p*B) order statistic of the bootstrap sup
/// statistics. Thresholds with zero SE are dropped with a kept=0 flag;
/// errc::no_variation when every SE is zero.
UniformBand uniform_band(const SelectionDRFit& fit, const Eigen::VectorXd& contrast,
                         const BootstrapPlan& plan, int threads = 1);

/// A plug-in functional of (pi, theta_., F_Z): given (possibly perturbed)
/// parameters and per-unit sampling weights, returns the functional curve on
/// a fixed axis. The builder must be a pure function of its arguments.
using FunctionalBuilder =
    std::function<std::vector<double>(const SelectionDRParams&, const Eigen::VectorXd&)>;

/// Bootstrap draw of the full parameter tuple: pi perturbed through its
/// influence expansion, theta_y perturbed linearly.
SelectionDRParams bootstrap_params(const SelectionDRFit& fit, const Eigen::VectorXd& weights);

/// One multiplier-bootstrap draw of a plug-in functional: perturbs pi by its
/// influence expansion, theta_y linearly, and reweights the empirical
/// distribution by (1 + w_i); no re-optimization.
std::vector<double> bootstrap_functional(const SelectionDRFit& fit,
                                         const Eigen::VectorXd& weights,
                                         const FunctionalBuilder& build);

/// Sup-t band for a functional curve. Per-point SE is the bootstrap draw
/// standard deviation (B-1 denominator).
UniformBand functional_band(const SelectionDRFit& fit, const FunctionalBuilder& build,
                            const std::vector<double>& axis, const BootstrapPlan& plan,
                            int threads = 1);

struct QuantileBand {
  std::vector<double> taus;
  std::vector<double> point;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::uint8_t> truncated;  // some branch ran off the grid at this tau
};

/// Inverts a monotone CDF band into a quantile band: the lower quantile band
/// is the left inverse of the upper CDF curve and vice versa. All three
/// curves must be monotone (errc::contract otherwise); bands may be
/// asymmetric around the point curve.
QuantileBand quantile_band_by_inversion(const DistributionCurve& cdf_band,
                                        const std::vector<double>& taus);

}  // namespace seldr
