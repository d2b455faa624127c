#include "seldr/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seldr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre abscissae and weights on [-1,1] (positive half listed),
// the 6/12/20-point rules of the standard double-precision BVN algorithm.
constexpr double kGlX6[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
constexpr double kGlW6[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};

constexpr double kGlX12[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                              0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
constexpr double kGlW12[6] = {4.717533638651177e-2, 0.1069393259953183, 0.1600783285433464,
                              0.2031674267230659, 0.2334925365383547, 0.2491470458134029};

constexpr double kGlX20[10] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                               0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                               0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                               7.652652113349733e-2};
constexpr double kGlW20[10] = {1.761400713915212e-2, 4.060142980038694e-2, 6.267204833410906e-2,
                               8.327674157670475e-2, 0.1019301198172404, 0.1181945319615184,
                               0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                               0.1527533871307259};

// P(X > h, Y > k) for |r| < 1, via the Drezner-Wesolowsky single integral
// with the transformed branch above |r| = 0.925.
double bvn_upper(double h, double k, double r) {
  const double* xg;
  const double* wg;
  int lg;
  const double ar = std::fabs(r);
  if (ar < 0.3) {
    lg = 3;
    xg = kGlX6;
    wg = kGlW6;
  } else if (ar < 0.75) {
    lg = 6;
    xg = kGlX12;
    wg = kGlW12;
  } else {
    lg = 10;
    xg = kGlX20;
    wg = kGlW20;
  }

  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    if (ar > 0.0) {
      const double hs = (h * h + k * k) / 2.0;
      const double asr = std::asin(r);
      for (int i = 0; i < lg; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double sn = std::sin(asr * (is * xg[i] + 1.0) / 2.0);
          bvn += wg[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
      }
      bvn *= asr / (2.0 * kTwoPi);
    }
    bvn += norm_cdf(-h) * norm_cdf(-k);
    return bvn;
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) *
            (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    }
    if (-hk < 100.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * kSqrt2Pi * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < lg; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        double xs = a * (is * xg[i] + 1.0);
        xs = xs * xs;
        const double rs = std::sqrt(1.0 - xs);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          bvn += a * wg[i] * std::exp(asr) *
                 (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                  (1.0 + c * xs * (1.0 + d * xs)));
        }
      }
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) {
    bvn += norm_cdf(-std::max(h, k));
  } else {
    bvn = -bvn;
    if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
  }
  return bvn;
}

void require_valid_rho(double rho) {
  if (std::isnan(rho) || rho < -1.0 || rho > 1.0) {
    throw_error(errc::domain, "correlation must lie in [-1, 1]");
  }
}

void require_interior_rho(double rho) {
  require_valid_rho(rho);
  if (std::fabs(rho) == 1.0) {
    throw_error(errc::singular_correlation, "correlation at +/-1 is singular here");
  }
}

}  // namespace

double norm_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_log_pdf(double x) { return -0.5 * x * x - 0.91893853320467274178; }

double norm_cdf(double x) {
  if (std::isnan(x)) throw_error(errc::domain, "norm_cdf: NaN argument");
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

double norm_log_cdf(double x) {
  if (x == kInf) return 0.0;
  if (x > -36.0) return std::log(norm_cdf(x));
  // asymptotic expansion of the Mills ratio in the deep left tail
  const double x2 = x * x;
  const double series =
      1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
  return norm_log_pdf(x) - std::log(-x) + std::log(series);
}

namespace {

// Wichura's AS 241 rational approximations (PPND16).
double quantile_core(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) *
                 r +
             4.5921953931549871457e+4) *
                r +
            1.3731693765509461125e+4) *
               r +
           1.9715909503065514427e+3) *
              r +
          1.3314166789178437745e+2) *
             r +
         3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) *
                 r +
             2.1213794301586595867e+4) *
                r +
            5.3941960214247511077e+3) *
               r +
           6.8718700749205790830e+2) *
              r +
          4.2313330701600911252e+1) *
             r +
         1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) *
                 r +
             1.27045825245236838258e+0) *
                r +
            3.64784832476320460504e+0) *
               r +
           5.76949722146069140550e+0) *
              r +
          4.63033784615654529590e+0) *
             r +
         1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) *
                 r +
             1.48103976427480074590e-1) *
                r +
            6.89767334985100004550e-1) *
               r +
           1.67638483018380384940e+0) *
              r +
          2.05319162663775882187e+0) *
             r +
         1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) *
                 r +
             2.65321895265761230930e-2) *
                r +
            2.96560571828504891230e-1) *
               r +
           1.78482653991729133580e+0) *
              r +
          5.46378491116411436990e+0) *
             r +
         6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) *
                 r +
             7.86869131145613259100e-4) *
                r +
            1.48753612908506148525e-2) *
               r +
           1.36929880922735805310e-1) *
              r +
          5.99832206555887937690e-1) *
             r +
         1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

}  // namespace

double norm_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    throw_error(errc::domain, "norm_quantile: p outside [0, 1]");
  }
  if (p == 0.0) throw_error(errc::domain, "norm_quantile: p at lower boundary 0");
  if (p == 1.0) throw_error(errc::domain, "norm_quantile: p at upper boundary 1");
  double x = quantile_core(p);
  // one Halley step against the erfc-based CDF
  if (std::fabs(x) < 37.0) {
    const double e = norm_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double bvn_cdf(double mu, double nu, double rho) {
  require_valid_rho(rho);
  if (std::isnan(mu) || std::isnan(nu)) throw_error(errc::domain, "bvn_cdf: NaN argument");
  if (mu == -kInf || nu == -kInf) return 0.0;
  if (mu == kInf && nu == kInf) return 1.0;
  if (mu == kInf) return norm_cdf(nu);
  if (nu == kInf) return norm_cdf(mu);
  if (rho == 1.0) return std::min(norm_cdf(mu), norm_cdf(nu));
  if (rho == -1.0) return std::max(norm_cdf(mu) + norm_cdf(nu) - 1.0, 0.0);

  const double p = bvn_upper(-mu, -nu, rho);
  const double lower = std::max(norm_cdf(mu) + norm_cdf(nu) - 1.0, 0.0);
  const double upper = std::min(norm_cdf(mu), norm_cdf(nu));
  return std::clamp(p, lower, upper);
}

double bvn_log_pdf(double mu, double nu, double rho) {
  require_interior_rho(rho);
  const double s2 = (1.0 - rho) * (1.0 + rho);
  return -(mu * mu - 2.0 * rho * mu * nu + nu * nu) / (2.0 * s2) -
         std::log(kTwoPi) - 0.5 * std::log(s2);
}

double bvn_pdf(double mu, double nu, double rho) {
  if (std::isinf(mu) || std::isinf(nu)) {
    require_interior_rho(rho);
    return 0.0;
  }
  return std::exp(bvn_log_pdf(mu, nu, rho));
}

BvnGradient bvn_cdf_partials(double mu, double nu, double rho) {
  require_interior_rho(rho);
  BvnGradient g;
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  if (std::isinf(mu) || std::isinf(nu)) {
    // marginal limits: a +inf argument saturates its factor, -inf kills all
    g.d_mu = (nu == kInf) ? norm_pdf(mu) : (std::isinf(mu) ? 0.0 : norm_cdf((nu - rho * mu) / s) * norm_pdf(mu));
    g.d_nu = (mu == kInf) ? norm_pdf(nu) : (std::isinf(nu) ? 0.0 : norm_cdf((mu - rho * nu) / s) * norm_pdf(nu));
    g.d_rho = 0.0;
    if (mu == -kInf || nu == -kInf) {
      g.d_mu = (nu == -kInf) ? 0.0 : g.d_mu;
      g.d_nu = (mu == -kInf) ? 0.0 : g.d_nu;
    }
    return g;
  }
  g.d_mu = norm_cdf((nu - rho * mu) / s) * norm_pdf(mu);
  g.d_nu = norm_cdf((mu - rho * nu) / s) * norm_pdf(nu);
  g.d_rho = bvn_pdf(mu, nu, rho);
  return g;
}

BvnHessian bvn_cdf_second_partials(double mu, double nu, double rho) {
  require_interior_rho(rho);
  if (std::isinf(mu) || std::isinf(nu)) {
    throw_error(errc::domain, "bvn_cdf_second_partials: arguments must be finite");
  }
  const double s2 = (1.0 - rho) * (1.0 + rho);
  const double s = std::sqrt(s2);
  const double qn = (nu - rho * mu) / s;  // conditional argument given mu
  const double qm = (mu - rho * nu) / s;
  const double pdf2 = bvn_pdf(mu, nu, rho);
  BvnHessian h;
  h.mu_mu = -norm_pdf(mu) * (rho * norm_pdf(qn) / s + mu * norm_cdf(qn));
  h.nu_nu = -norm_pdf(nu) * (rho * norm_pdf(qm) / s + nu * norm_cdf(qm));
  h.mu_nu = pdf2;
  h.mu_rho = pdf2 * (rho * nu - mu) / s2;
  h.nu_rho = pdf2 * (rho * mu - nu) / s2;
  h.rho_rho =
      pdf2 * (rho * s2 + mu * nu * (1.0 + rho * rho) - rho * (mu * mu + nu * nu)) / (s2 * s2);
  return h;
}

double g1_ratio(double u) {
  return std::exp(norm_log_pdf(u) - norm_log_cdf(u) - norm_log_cdf(-u));
}

GRatios g_ratios(double mu, double nu, double rho) {
  require_interior_rho(rho);
  const double phi_nu = norm_cdf(nu);
  const double p = bvn_cdf(mu, nu, rho);
  const double q = phi_nu - p;
  if (p <= 0.0) throw_error(errc::degenerate_cell, "g_ratios: lower cell Phi_2 vanished");
  if (q <= 0.0) {
    throw_error(errc::degenerate_cell, "g_ratios: upper cell Phi(nu) - Phi_2 vanished");
  }
  const double log_p = std::log(std::clamp(p, 1e-300, 1.0));
  const double log_q = std::log(std::clamp(q, 1e-300, 1.0));
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  const double log_dmu = norm_log_cdf((nu - rho * mu) / s) + norm_log_pdf(mu);
  GRatios g;
  g.g1_at_nu = g1_ratio(nu);
  g.g2 = std::exp(log_dmu - log_p - log_q);
  g.g3 = std::exp(bvn_log_pdf(mu, nu, rho) - log_p - log_q);
  return g;
}

}  // namespace seldr
