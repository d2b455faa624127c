#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "seldr/normal.hpp"
#include "seldr/rng.hpp"

using namespace seldr;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("norm_cdf basics") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_cdf(kInf) == 1.0);
  CHECK(norm_cdf(-kInf) == 0.0);
  // frozen from the quadrature oracle: oracle::norm_cdf(1.959963985) = 0.9750000000...
  CHECK(std::fabs(norm_cdf(1.959963985) - 0.975) < 1e-9);
  for (double x : {-8.0, -5.5, -2.4, -1.0, -0.3, 0.7, 1.9, 3.3, 6.1, 8.2}) {
    CHECK(std::fabs(norm_cdf(x) - oracle::norm_cdf(x)) < 1e-15);
  }
}

TEST_CASE("norm_pdf and norm_log_cdf") {
  CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804).epsilon(1e-9));
  CHECK(norm_pdf(2.0) == doctest::Approx(std::exp(-2.0) / kSqrt2Pi).epsilon(1e-14));
  CHECK(norm_log_pdf(1.3) == doctest::Approx(std::log(norm_pdf(1.3))).epsilon(1e-13));
  // deep-tail branch continuity and agreement with direct log
  for (double x : {-35.9, -36.1, -40.0, -100.0}) {
    const double direct = norm_log_pdf(x) - std::log(-x) +
                          std::log1p(-1.0 / (x * x) + 3.0 / std::pow(x, 4));
    CHECK(norm_log_cdf(x) == doctest::Approx(direct).epsilon(1e-6));
  }
  CHECK(norm_log_cdf(-10.0) == doctest::Approx(std::log(norm_cdf(-10.0))).epsilon(1e-12));
}

TEST_CASE("norm_quantile examples and round trip") {
  CHECK(norm_quantile(0.5) == 0.0);
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-9));
  CHECK(std::fabs(norm_quantile(0.975) - oracle::norm_quantile(0.975)) < 1e-12);
  CHECK_THROWS_AS(norm_quantile(0.0), Error);
  CHECK_THROWS_AS(norm_quantile(1.0), Error);
  try {
    norm_quantile(0.0);
  } catch (const Error& e) {
    CHECK(e.code() == errc::domain);
    CHECK(std::string(e.what()).find("lower") != std::string::npos);
  }
  try {
    norm_quantile(1.0);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("upper") != std::string::npos);
  }

  // Round trip. Beyond |x| ~ 4.2 the spacing of representable p near 1 exceeds
  // what a 1e-12 reconstruction needs, so the right tail is held to the
  // information-theoretic bound ulp(Phi(x))/phi(x) instead.
  for (double x = -6.0; x <= 6.0 + 1e-9; x += 0.25) {
    const double p = norm_cdf(x);
    const double back = norm_quantile(p);
    const double ulp_bound =
        (std::nextafter(p, 2.0) - p) / norm_pdf(x) + (std::fabs(x) + 1.0) * 1e-14;
    CHECK(std::fabs(back - x) <= std::fmax(1e-12, ulp_bound));
    if (x <= 4.0) CHECK(std::fabs(back - x) <= 1e-12);
  }
}

TEST_CASE("bvn_cdf trivial values") {
  CHECK(bvn_cdf(0.0, 0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(bvn_cdf(0.0, 0.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(bvn_cdf(0.7, kInf, 0.3) == doctest::Approx(norm_cdf(0.7)).epsilon(1e-15));
  CHECK(bvn_cdf(kInf, -0.4, -0.8) == doctest::Approx(norm_cdf(-0.4)).epsilon(1e-15));
  CHECK(bvn_cdf(-kInf, 0.4, 0.2) == 0.0);
  CHECK(bvn_cdf(kInf, kInf, 0.9) == 1.0);
  // comonotone limits
  CHECK(bvn_cdf(0.3, -0.2, 1.0) == std::fmin(norm_cdf(0.3), norm_cdf(-0.2)));
  CHECK(bvn_cdf(0.3, -0.2, -1.0) == std::fmax(norm_cdf(0.3) + norm_cdf(-0.2) - 1.0, 0.0));
  CHECK(bvn_cdf(-1.0, -1.0, -1.0) == 0.0);
}

TEST_CASE("bvn_cdf vs quadrature oracle") {
  // spec example point
  const double expect = oracle::bvn_cdf(0.5, -0.2, 0.4);
  CHECK(std::fabs(bvn_cdf(0.5, -0.2, 0.4) - expect) < 1e-10);
  // random sweep incl. the high-|rho| branch
  for (int i = 0; i < 400; ++i) {
    const double mu = -4.0 + 8.0 * rng::uniform(7, 1, i);
    const double nu = -4.0 + 8.0 * rng::uniform(7, 2, i);
    const double rho = -0.999 + 1.998 * rng::uniform(7, 3, i);
    CHECK(std::fabs(bvn_cdf(mu, nu, rho) - oracle::bvn_cdf(mu, nu, rho)) < 1e-12);
  }
}

TEST_CASE("bvn_cdf arcsine identity") {
  for (int i = 0; i <= 40; ++i) {
    const double rho = -1.0 + i * 0.05;
    const double expect = 0.25 + std::asin(rho) / kTwoPi;
    CHECK(std::fabs(bvn_cdf(0.0, 0.0, rho) - expect) <= 1e-13);
  }
}

TEST_CASE("bvn_cdf Frechet bounds and rho monotonicity") {
  for (double mu = -4.0; mu <= 4.01; mu += 1.0) {
    for (double nu = -4.0; nu <= 4.01; nu += 1.0) {
      double prev = -1.0;
      for (double rho = -0.99; rho <= 0.991; rho += 0.055) {
        const double p = bvn_cdf(mu, nu, rho);
        const double lo = std::fmax(norm_cdf(mu) + norm_cdf(nu) - 1.0, 0.0);
        const double hi = std::fmin(norm_cdf(mu), norm_cdf(nu));
        CHECK(p >= lo);
        CHECK(p <= hi);
        CHECK(p >= prev - 5e-16);  // nondecreasing within rounding
        // strict increase wherever the increment is representable
        if (prev - lo > 1e-10 && p < hi - 1e-10 && std::fabs(mu) <= 2.0 &&
            std::fabs(nu) <= 2.0) {
          CHECK(p > prev);
        }
        prev = p;
      }
    }
  }
}

TEST_CASE("bvn_cdf symmetry and complement identity") {
  for (int i = 0; i < 200; ++i) {
    const double mu = -3.0 + 6.0 * rng::uniform(11, 1, i);
    const double nu = -3.0 + 6.0 * rng::uniform(11, 2, i);
    const double rho = -0.98 + 1.96 * rng::uniform(11, 3, i);
    CHECK(bvn_cdf(mu, nu, rho) == doctest::Approx(bvn_cdf(nu, mu, rho)).epsilon(1e-13));
    const double lhs = bvn_cdf(-mu, nu, -rho);
    const double rhs = norm_cdf(nu) - bvn_cdf(mu, nu, rho);
    CHECK(std::fabs(lhs - rhs) < 1e-14);
  }
}

TEST_CASE("bvn_pdf") {
  CHECK(bvn_pdf(0.0, 0.0, 0.0) == doctest::Approx(1.0 / kTwoPi).epsilon(1e-14));
  CHECK(bvn_pdf(0.0, 0.0, 0.5) ==
        doctest::Approx(1.0 / (kTwoPi * std::sqrt(0.75))).epsilon(1e-14));
  // direct formula cross-checked by finite differences of bvn_cdf in rho
  const double fd = oracle::central_diff([](double r) { return bvn_cdf(1.0, -1.0, r); }, 0.3, 1e-5);
  CHECK(bvn_pdf(1.0, -1.0, 0.3) == doctest::Approx(fd).epsilon(1e-8));
  const double direct = std::exp(-(1.0 + 2.0 * 0.3 + 1.0) / (2.0 * 0.91)) / (kTwoPi * std::sqrt(0.91));
  CHECK(bvn_pdf(1.0, -1.0, 0.3) == doctest::Approx(direct).epsilon(1e-13));
  CHECK_THROWS_AS(bvn_pdf(0.0, 0.0, 1.0), Error);
  CHECK_THROWS_AS(bvn_pdf(0.0, 0.0, -1.0), Error);
}

TEST_CASE("bvn_cdf_partials examples") {
  const auto g0 = bvn_cdf_partials(0.0, 0.0, 0.0);
  CHECK(g0.d_mu == doctest::Approx(0.19947).epsilon(1e-4));
  CHECK(g0.d_nu == doctest::Approx(0.19947).epsilon(1e-4));
  CHECK(g0.d_rho == doctest::Approx(0.15915).epsilon(1e-4));
  const auto ginf = bvn_cdf_partials(0.8, kInf, 0.4);
  CHECK(ginf.d_mu == doctest::Approx(norm_pdf(0.8)).epsilon(1e-14));
  CHECK(ginf.d_rho == 0.0);
  CHECK_THROWS_AS(bvn_cdf_partials(0.0, 0.0, 1.0), Error);
}

TEST_CASE("bvn derivative consistency vs finite differences") {
  for (int i = 0; i < 1000; ++i) {
    const double mu = -2.5 + 5.0 * rng::uniform(13, 1, i);
    const double nu = -2.5 + 5.0 * rng::uniform(13, 2, i);
    const double rho = -0.9 + 1.8 * rng::uniform(13, 3, i);
    const auto g = bvn_cdf_partials(mu, nu, rho);
    const double h = 1e-5;
    const double fd_mu =
        oracle::central_diff([&](double m) { return bvn_cdf(m, nu, rho); }, mu, h);
    const double fd_nu =
        oracle::central_diff([&](double n) { return bvn_cdf(mu, n, rho); }, nu, h);
    const double fd_rho =
        oracle::central_diff([&](double r) { return bvn_cdf(mu, nu, r); }, rho, h);
    CHECK(std::fabs(g.d_mu - fd_mu) <= 1e-6 * std::fmax(std::fabs(fd_mu), 1e-4));
    CHECK(std::fabs(g.d_nu - fd_nu) <= 1e-6 * std::fmax(std::fabs(fd_nu), 1e-4));
    CHECK(std::fabs(g.d_rho - fd_rho) <= 1e-6 * std::fmax(std::fabs(fd_rho), 1e-4));
  }
}

TEST_CASE("bvn second partials vs finite differences of partials") {
  for (int i = 0; i < 250; ++i) {
    const double mu = -2.0 + 4.0 * rng::uniform(17, 1, i);
    const double nu = -2.0 + 4.0 * rng::uniform(17, 2, i);
    const double rho = -0.85 + 1.7 * rng::uniform(17, 3, i);
    const auto h2 = bvn_cdf_second_partials(mu, nu, rho);
    const double h = 1e-5;
    const auto fd = [&](auto pick, int arg) {
      return oracle::central_diff(
          [&](double t) {
            const double m = arg == 0 ? t : mu;
            const double n = arg == 1 ? t : nu;
            const double r = arg == 2 ? t : rho;
            return pick(bvn_cdf_partials(m, n, r));
          },
          arg == 0 ? mu : (arg == 1 ? nu : rho), h);
    };
    const double tol = 2e-6;
    CHECK(std::fabs(h2.mu_mu - fd([](auto g) { return g.d_mu; }, 0)) <
          tol * std::fmax(1.0, std::fabs(h2.mu_mu)));
    CHECK(std::fabs(h2.mu_nu - fd([](auto g) { return g.d_mu; }, 1)) <
          tol * std::fmax(1.0, std::fabs(h2.mu_nu)));
    CHECK(std::fabs(h2.mu_rho - fd([](auto g) { return g.d_mu; }, 2)) <
          tol * std::fmax(1.0, std::fabs(h2.mu_rho)));
    CHECK(std::fabs(h2.nu_nu - fd([](auto g) { return g.d_nu; }, 1)) <
          tol * std::fmax(1.0, std::fabs(h2.nu_nu)));
    CHECK(std::fabs(h2.nu_rho - fd([](auto g) { return g.d_nu; }, 2)) <
          tol * std::fmax(1.0, std::fabs(h2.nu_rho)));
    CHECK(std::fabs(h2.rho_rho - fd([](auto g) { return g.d_rho; }, 2)) <
          tol * std::fmax(1.0, std::fabs(h2.rho_rho)));
  }
}

TEST_CASE("g ratios") {
  CHECK(g1_ratio(0.0) == doctest::Approx(norm_pdf(0.0) / 0.25).epsilon(1e-12));
  CHECK(g1_ratio(0.0) == doctest::Approx(1.5957691).epsilon(1e-7));

  const auto g = g_ratios(0.0, 0.0, 0.0);
  CHECK(g.g1_at_nu == doctest::Approx(1.5957691).epsilon(1e-7));
  CHECK(g.g2 == doctest::Approx(norm_cdf(0.0) * norm_pdf(0.0) / (0.25 * 0.25)).epsilon(1e-12));
  CHECK(g.g2 == doctest::Approx(3.19154).epsilon(1e-5));
  CHECK(g.g3 == doctest::Approx((1.0 / kTwoPi) / (0.25 * 0.25)).epsilon(1e-12));

  // compose oracle values at the derived spec point
  const double mu = 0.5, nu = -0.2, rho = 0.4;
  const double p = oracle::bvn_cdf(mu, nu, rho);
  const double phi_nu = oracle::norm_cdf(nu);
  const double s = std::sqrt(1.0 - rho * rho);
  const double dmu = oracle::norm_cdf((nu - rho * mu) / s) * norm_pdf(mu);
  const double drho = bvn_pdf(mu, nu, rho);
  const auto got = g_ratios(mu, nu, rho);
  CHECK(std::fabs(got.g2 - dmu / (p * (phi_nu - p))) < 1e-8);
  CHECK(std::fabs(got.g3 - drho / (p * (phi_nu - p))) < 1e-8);
  CHECK(got.g2 > 0.0);
  CHECK(got.g3 > 0.0);

  // tail stability: log-space evaluation stays finite
  const auto tail = g_ratios(-8.0, -8.0, 0.2);
  CHECK(std::isfinite(tail.g2));
  CHECK(tail.g2 > 0.0);
  CHECK(std::isfinite(tail.g3));

  CHECK_THROWS_AS(g_ratios(-40.0, 3.0, 0.0), Error);  // lower cell vanishes
  try {
    g_ratios(40.0, 3.0, 0.0);  // upper cell vanishes
  } catch (const Error& e) {
    CHECK(e.code() == errc::degenerate_cell);
    CHECK(std::string(e.what()).find("upper") != std::string::npos);
  }
}

TEST_CASE("counter rng determinism and distribution") {
  CHECK(rng::normal(42, 3, 17) == rng::normal(42, 3, 17));
  CHECK(rng::normal(42, 3, 17) != rng::normal(42, 3, 18));
  CHECK(rng::normal(42, 4, 17) != rng::normal(42, 3, 17));
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double w = rng::normal(99, 1, i);
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}
