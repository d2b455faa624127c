#include "seldr/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seldr/normal.hpp"
#include "seldr/threads.hpp"

namespace seldr {

namespace {

constexpr double kCellFloor = 1e-300;

// Generic probit Newton scoring with the expected-information Hessian.
struct ProbitResult {
  Eigen::VectorXd coef;
  bool converged = false;
  int iterations = 0;
  bool separation = false;
  double gradient_norm = 0.0;
};

double probit_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXi& response,
                     const Eigen::VectorXd& coef) {
  const Eigen::VectorXd idx = design * coef;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < idx.size(); ++i) {
    ll += response[i] == 1 ? norm_log_cdf(idx[i]) : norm_log_cdf(-idx[i]);
  }
  return ll / static_cast<double>(idx.size());
}

ProbitResult probit_newton(const Eigen::MatrixXd& design, const Eigen::VectorXi& response,
                           double tol, int max_iter, double box) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  ProbitResult res;
  res.coef = Eigen::VectorXd::Zero(k);
  // fast start when a leading intercept column is present
  if ((design.col(0).array() == 1.0).all()) {
    const double rate =
        std::clamp(response.cast<double>().mean(), 1e-6, 1.0 - 1e-6);
    res.coef[0] = norm_quantile(rate);
  }
  double ll = probit_loglik(design, response, res.coef);
  Eigen::VectorXd grad(k);
  Eigen::MatrixXd info(k, k);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const Eigen::VectorXd idx = design * res.coef;
    grad.setZero();
    info.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = idx[i];
      const double log_phi = norm_log_pdf(v);
      const double log_cdf = norm_log_cdf(v);
      const double log_sf = norm_log_cdf(-v);
      const double g1 = std::exp(log_phi - log_cdf - log_sf);
      const double w = std::exp(2.0 * log_phi - log_cdf - log_sf);
      grad.noalias() += g1 * (response[i] - norm_cdf(v)) * design.row(i).transpose();
      info.noalias() += w * design.row(i).transpose() * design.row(i);
    }
    grad /= static_cast<double>(n);
    info /= static_cast<double>(n);
    res.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.gradient_norm <= tol) {
      res.converged = true;
      break;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      info.diagonal().array() += 1e-10 * info.trace();
      llt.compute(info);
    }
    const Eigen::VectorXd dir = llt.solve(grad);
    if (dir.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + res.coef.lpNorm<Eigen::Infinity>())) {
      res.converged = res.gradient_norm <= tol;
      break;
    }
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      Eigen::VectorXd trial = res.coef + scale * dir;
      trial = trial.cwiseMax(-box).cwiseMin(box);
      const double ll_try = probit_loglik(design, response, trial);
      // in the quadratic zone objective improvements underflow; take the
      // full step as long as it is not a real decrease
      const bool ok = res.gradient_norm < 1e-6 ? ll_try >= ll - 1e-12 * (1.0 + std::fabs(ll))
                                               : ll_try > ll;
      if (ok) {
        res.coef = trial;
        ll = ll_try;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
    if (res.coef.cwiseAbs().maxCoeff() >= box - 1e-9) {
      res.separation = true;
      break;
    }
  }
  return res;
}

struct PackedTheta {
  ThetaAtY theta;

  static PackedTheta from_vector(const Eigen::VectorXd& v, double y, Eigen::Index k_x,
                                 Eigen::Index k_s) {
    PackedTheta p;
    p.theta.y = y;
    p.theta.beta = v.head(k_x);
    p.theta.delta = v.tail(k_s);
    return p;
  }
  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(theta.beta.size() + theta.delta.size());
    v << theta.beta, theta.delta;
    return v;
  }
};

// Average second-stage log-likelihood over all n rows at threshold theta.y.
double dr_loglik(const ThetaAtY& theta, const Eigen::VectorXd& pi, const ObservationSet& data,
                 const std::vector<int>& sorting_idx) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d[i] != 1) continue;
    const double xb = data.x.row(i).dot(theta.beta);
    const double zp = data.z.row(i).dot(pi);
    const double u = sorting_index(theta.delta, data.x.row(i), sorting_idx);
    const double rho = std::tanh(u);
    const double phi_zp = norm_cdf(zp);
    const double p =
        std::clamp(bvn_cdf(-xb, zp, -rho), kCellFloor, std::max(phi_zp, 2.0 * kCellFloor));
    const double cell = data.y[i] <= theta.y ? p : std::max(phi_zp - p, kCellFloor);
    ll += std::log(cell);
  }
  return ll / static_cast<double>(data.n());
}

}  // namespace

bool SelectionDRFit::all_converged() const {
  for (const auto& d : diagnostics) {
    if (!d.skipped && !d.converged) return false;
  }
  return first.converged;
}

SelectionDRParams SelectionDRFit::params() const {
  SelectionDRParams p;
  p.pi = first.pi_hat;
  p.thetas = thetas;
  return p;
}

FirstStageFit fit_probit(const ObservationSet& data, const FitOptions& opts) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index k = data.k_z();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.z);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    const auto perm = qr.colsPermutation().indices();
    std::string names;
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      const int col = perm[j];
      if (!names.empty()) names += ", ";
      names += data.z_names.empty() ? "column " + std::to_string(col) : data.z_names[col];
    }
    throw_error(errc::singular_design, "selection design is rank deficient: " + names);
  }

  const ProbitResult res =
      probit_newton(data.z, data.d, opts.probit_tol, opts.max_iterations, opts.box);

  FirstStageFit fit;
  fit.pi_hat = res.coef;
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.separation_warning = res.separation;
  fit.gradient_norm = res.gradient_norm;
  fit.score_rows.resize(n, k);
  fit.h1_hat = Eigen::MatrixXd::Zero(k, k);
  const Eigen::VectorXd idx = data.z * res.coef;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = idx[i];
    const double log_phi = norm_log_pdf(v);
    const double log_cdf = norm_log_cdf(v);
    const double log_sf = norm_log_cdf(-v);
    const double g1 = std::exp(log_phi - log_cdf - log_sf);
    fit.score_rows.row(i) = g1 * (data.d[i] - norm_cdf(v)) * data.z.row(i);
    fit.h1_hat.noalias() -=
        std::exp(2.0 * log_phi - log_cdf - log_sf) * data.z.row(i).transpose() * data.z.row(i);
  }
  fit.h1_hat /= static_cast<double>(n);
  return fit;
}

ScoreBlocks scores_and_blocks(const ThetaAtY& theta, const Eigen::VectorXd& pi,
                              const ObservationSet& data, const std::vector<int>& sorting_idx,
                              bool want_j21) {
  const Eigen::Index n = data.n();
  const Eigen::Index k_x = data.k_x();
  const Eigen::Index k_z = data.k_z();
  const auto k_s = static_cast<Eigen::Index>(sorting_idx.size());
  const Eigen::Index k_t = k_x + k_s;
  if (theta.beta.size() != k_x || theta.delta.size() != k_s || pi.size() != k_z) {
    throw_error(errc::schema, "scores_and_blocks: dimension mismatch");
  }

  ScoreBlocks out;
  out.s2_rows = Eigen::MatrixXd::Zero(n, k_t);
  out.h2 = Eigen::MatrixXd::Zero(k_t, k_t);
  out.j21 = Eigen::MatrixXd::Zero(want_j21 ? k_t : 0, want_j21 ? k_z : 0);

  Eigen::VectorXd xs(k_s);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.d[i] != 1) continue;
    const auto x = data.x.row(i);
    const auto z = data.z.row(i);
    const double m = -x.dot(theta.beta);
    const double v = z.dot(pi);
    const double u = sorting_index(theta.delta, x, sorting_idx);
    const RhoLink link = rho_link(u);
    // tanh saturates to exactly +/-1 in double precision around |u| = 19;
    // the Phi_2 derivatives need a correlation strictly inside (-1, 1)
    const double r = std::clamp(-link.rho, -1.0 + 1e-15, 1.0 - 1e-15);

    const double phi_v = norm_cdf(v);
    double p = bvn_cdf(m, v, r);
    double q = phi_v - p;
    // derivative-side floor: keeps T/U finite when the line search explores
    // parameter regions where a cell underflows; inactive at interior optima
    const double derivative_floor = 1e-12;
    if (p < derivative_floor || q < derivative_floor) {
      out.cells_clamped = true;
      p = std::max(p, derivative_floor);
      q = std::max(q, derivative_floor);
    }
    const auto grad = bvn_cdf_partials(m, v, r);
    const auto hess = bvn_cdf_second_partials(m, v, r);
    const double iy = data.y[i] <= theta.y ? 1.0 : 0.0;

    const double t = iy / p - (1.0 - iy) / q;
    const double t_arg = -iy / (p * p) - (1.0 - iy) / (q * q);
    const double t_v = -iy * grad.d_nu / (p * p) +
                       (1.0 - iy) * (norm_pdf(v) - grad.d_nu) / (q * q);

    for (Eigen::Index j = 0; j < k_s; ++j) xs[j] = x[sorting_idx[j]];

    // score: s_beta = -t * dP/dmu * x, s_delta = -t * dP/drho * rho' * xs
    const double sb = -t * grad.d_mu;
    const double sd = -t * grad.d_rho * link.d1;
    out.s2_rows.row(i).head(k_x) = sb * x;
    out.s2_rows.row(i).tail(k_s) = sd * xs.transpose();

    // exact Hessian blocks
    const double c_bb = t * hess.mu_mu + t_arg * grad.d_mu * grad.d_mu;
    const double c_bd = link.d1 * (t * hess.mu_rho + t_arg * grad.d_mu * grad.d_rho);
    const double c_dd = link.d1 * link.d1 * (t * hess.rho_rho + t_arg * grad.d_rho * grad.d_rho) -
                        link.d2 * t * grad.d_rho;
    out.h2.topLeftCorner(k_x, k_x).noalias() += c_bb * x.transpose() * x;
    out.h2.topRightCorner(k_x, k_s).noalias() += c_bd * x.transpose() * xs.transpose();
    out.h2.bottomRightCorner(k_s, k_s).noalias() += c_dd * xs * xs.transpose();

    if (want_j21) {
      const double c_bc = -(t * hess.mu_nu + t_v * grad.d_mu);
      const double c_dc = -link.d1 * (t * hess.nu_rho + t_v * grad.d_rho);
      out.j21.topRows(k_x).noalias() += c_bc * x.transpose() * z;
      out.j21.bottomRows(k_s).noalias() += c_dc * xs * z;
    }
  }
  out.h2.bottomLeftCorner(k_s, k_x) = out.h2.topRightCorner(k_x, k_s).transpose();
  out.h2 /= static_cast<double>(n);
  if (want_j21) out.j21 /= static_cast<double>(n);
  return out;
}

ThetaAtY fit_dr_at_threshold(const ObservationSet& data, const FirstStageFit& first, double y,
                             const std::vector<int>& sorting_idx,
                             const std::optional<ThetaAtY>& warm, ThresholdDiagnostics& diag,
                             const FitOptions& opts) {
  const Eigen::Index k_x = data.k_x();
  const auto k_s = static_cast<Eigen::Index>(sorting_idx.size());
  diag = ThresholdDiagnostics{};
  diag.y = y;

  // both cells must be populated among the selected rows
  long below = 0, above = 0, selected_rows = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d[i] != 1) continue;
    ++selected_rows;
    (data.y[i] <= y ? below : above) += 1;
  }
  if (below == 0 || above == 0) {
    throw_error(errc::degenerate_threshold,
                "threshold " + std::to_string(y) + ": all selected indicators equal");
  }

  ThetaAtY theta;
  theta.y = y;
  if (warm) {
    theta.beta = warm->beta;
    theta.delta = warm->delta;
  } else {
    // cold start: plain probit of I_y on X among the selected, no sorting
    Eigen::MatrixXd xsel(selected_rows, k_x);
    Eigen::VectorXi isel(selected_rows);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.d[i] != 1) continue;
      xsel.row(row) = data.x.row(i);
      isel[row] = data.y[i] <= y ? 1 : 0;
      ++row;
    }
    const ProbitResult start = probit_newton(xsel, isel, 1e-8, 60, opts.box);
    // model parameterization has Phi(-x'beta) as the below-probability
    theta.beta = -start.coef;
    theta.delta = Eigen::VectorXd::Zero(k_s);
  }

  Eigen::VectorXd param = PackedTheta{theta}.to_vector();
  double ll = dr_loglik(theta, first.pi_hat, data, sorting_idx);

  // KKT residual over the compact box: gradient components pointing outward
  // at active bounds do not count
  const auto projected_norm = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& grad) {
    double norm = 0.0;
    for (Eigen::Index j = 0; j < at.size(); ++j) {
      double g = grad[j];
      if (at[j] >= opts.box - 1e-9 && g > 0.0) g = 0.0;
      if (at[j] <= -opts.box + 1e-9 && g < 0.0) g = 0.0;
      norm = std::max(norm, std::fabs(g));
    }
    return norm;
  };

  double lm_ridge = 0.0;  // Levenberg damping, persisted across iterations
  double last_progress = std::numeric_limits<double>::infinity();
  bool plateau_stop = false;
  for (diag.iterations = 0; diag.iterations < opts.max_iterations; ++diag.iterations) {
    const ThetaAtY current = PackedTheta::from_vector(param, y, k_x, k_s).theta;
    const ScoreBlocks blocks =
        scores_and_blocks(current, first.pi_hat, data, sorting_idx, /*want_j21=*/false);
    diag.cells_clamped = diag.cells_clamped || blocks.cells_clamped;
    const Eigen::VectorXd grad = blocks.s2_rows.colwise().mean();
    if (!grad.allFinite() || !blocks.h2.allFinite()) {
      throw_error(errc::numeric_failure,
                  "threshold " + std::to_string(y) + ": non-finite derivatives");
    }
    diag.gradient_norm = projected_norm(param, grad);
    if (diag.gradient_norm <= opts.dr_polish_tol) break;

    // damped Newton: -H2 + lm_ridge I, raising the damping (and recomputing
    // the direction) whenever the line search cannot make progress
    bool accepted = false;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Eigen::MatrixXd a = -blocks.h2;
      if (lm_ridge > 0.0) a.diagonal().array() += lm_ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      double pd_fix = 1e-8 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
      for (int tries = 0; llt.info() != Eigen::Success && tries < 60; ++tries) {
        a.diagonal().array() += pd_fix;
        pd_fix *= 10.0;
        llt.compute(a);
      }
      if (llt.info() != Eigen::Success) {
        throw_error(errc::numeric_failure,
                    "threshold " + std::to_string(y) + ": curvature factorization failed");
      }
      const Eigen::VectorXd dir = llt.solve(grad);
      if (dir.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + param.lpNorm<Eigen::Infinity>())) {
        break;
      }
      double scale = 1.0;
      for (int h = 0; h < opts.max_halvings; ++h) {
        Eigen::VectorXd trial = param + scale * dir;
        trial = trial.cwiseMax(-opts.box).cwiseMin(opts.box);
        const ThetaAtY theta_try = PackedTheta::from_vector(trial, y, k_x, k_s).theta;
        const double ll_try = dr_loglik(theta_try, first.pi_hat, data, sorting_idx);
        // ascent line search; full steps pass once improvements underflow in
        // the quadratic zone
        const bool ok = diag.gradient_norm < 1e-7
                            ? ll_try >= ll - 1e-12 * (1.0 + std::fabs(ll))
                            : ll_try > ll;
        if (ok) {
          last_progress = ll_try - ll;
          param = trial;
          ll = ll_try;
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
      if (accepted) {
        lm_ridge /= 4.0;
        if (lm_ridge < 1e-10) lm_ridge = 0.0;
      } else {
        const double base = std::max(1e-6, blocks.h2.diagonal().cwiseAbs().maxCoeff() * 1e-4);
        lm_ridge = lm_ridge == 0.0 ? base : lm_ridge * 10.0;
        if (lm_ridge > 1e12) break;
      }
    }
    if (!accepted) {
      // No improving direction at any damping. When the objective has already
      // plateaued at double resolution and the sorting link is saturated (the
      // likelihood maximum sits at rho(y) = +/-1, the effective parameter
      // boundary) this is a boundary optimum, not a solver failure.
      if (last_progress <= 1e-11 * (1.0 + std::fabs(ll))) {
        const ThetaAtY at = PackedTheta::from_vector(param, y, k_x, k_s).theta;
        double max_index = 0.0;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
          if (data.d[i] != 1) continue;
          max_index = std::max(max_index,
                               std::fabs(sorting_index(at.delta, data.x.row(i), sorting_idx)));
        }
        const bool box_active = param.cwiseAbs().maxCoeff() >= opts.box - 1e-9;
        if (max_index >= 18.0 || box_active) plateau_stop = true;
      }
      break;
    }
  }

  theta = PackedTheta::from_vector(param, y, k_x, k_s).theta;
  if (diag.iterations == opts.max_iterations) {
    // the last accepted step postdates the last gradient evaluation
    const ScoreBlocks blocks =
        scores_and_blocks(theta, first.pi_hat, data, sorting_idx, /*want_j21=*/false);
    diag.gradient_norm =
        projected_norm(param, blocks.s2_rows.colwise().mean());
  }
  diag.boundary = plateau_stop || param.cwiseAbs().maxCoeff() >= opts.box - 1e-9;
  diag.converged = diag.gradient_norm <= opts.dr_tol || plateau_stop;
  if (!diag.converged) {
    throw_error(errc::numeric_failure,
                "threshold " + std::to_string(y) + ": projected gradient inf-norm " +
                    std::to_string(diag.gradient_norm) + " above tolerance");
  }
  return theta;
}

Eigen::MatrixXd influence_rows(const ScoreBlocks& blocks, const FirstStageFit& first,
                               bool* ridged) {
  Eigen::MatrixXd h2 = blocks.h2;
  const Eigen::Index k_t = h2.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h2);
  const double max_abs = eig.eigenvalues().cwiseAbs().maxCoeff();
  bool need_ridge = false;
  for (Eigen::Index j = 0; j < k_t; ++j) {
    if (std::fabs(eig.eigenvalues()[j]) < 1e-12 * std::max(max_abs, 1e-12)) need_ridge = true;
  }
  if (need_ridge) {
    h2.diagonal().array() -= 1e-10 * std::fabs(h2.trace());
  }
  if (ridged) *ridged = need_ridge;

  // psi_i' = -h2^-1 (s2_i - j21 h1^-1 s1_i); computed row-wise via solves
  const Eigen::MatrixXd correction =
      first.score_rows * first.h1_hat.ldlt().solve(blocks.j21.transpose());
  const Eigen::MatrixXd centered = blocks.s2_rows - correction;
  return -h2.ldlt().solve(centered.transpose()).transpose();
}

SelectionDRFit fit_two_step(const ObservationSet& data, const ModelSpec& spec,
                            const FitOptions& opts) {
  spec.validate();
  data.validate();
  // spec columns must resolve against the dataset
  for (const auto& c : spec.outcome_cols) {
    if (std::find(data.x_names.begin(), data.x_names.end(), c) == data.x_names.end()) {
      throw_error(errc::schema, "outcome column '" + c + "' not in dataset");
    }
  }
  for (const auto& c : spec.excluded_cols) {
    if (std::find(data.z_names.begin(), data.z_names.end(), c) == data.z_names.end()) {
      throw_error(errc::schema, "excluded column '" + c + "' not in dataset");
    }
  }

  SelectionDRFit fit;
  fit.spec = spec;
  fit.n = data.n();
  fit.sorting_idx = resolve_sorting(spec.sorting_cols, data.x_names);
  fit.first = fit_probit(data, opts);

  const auto grid_size = spec.grid.y.size();
  const int block =
      opts.warm_block > 0
          ? opts.warm_block
          : std::max<int>(1, static_cast<int>((grid_size + opts.threads - 1) /
                                              std::max(1, opts.threads)));
  const std::size_t n_blocks = (grid_size + block - 1) / block;

  std::vector<std::optional<ThetaAtY>> results(grid_size);
  std::vector<ThresholdDiagnostics> diags(grid_size);

  parallel_for(n_blocks, opts.threads, [&](std::size_t b) {
    std::optional<ThetaAtY> warm;  // cold start at every block head
    const std::size_t begin = b * block;
    const std::size_t end = std::min(grid_size, begin + block);
    for (std::size_t g = begin; g < end; ++g) {
      const double y = spec.grid.y[g];
      try {
        try {
          results[g] =
              fit_dr_at_threshold(data, fit.first, y, fit.sorting_idx, warm, diags[g], opts);
        } catch (const Error& e) {
          // a poisoned warm start must not take the threshold down with it
          if (e.code() != errc::numeric_failure || !warm.has_value()) throw;
          results[g] = fit_dr_at_threshold(data, fit.first, y, fit.sorting_idx, std::nullopt,
                                           diags[g], opts);
        }
        // boundary solutions (rho at +/-1 or box contact) are kept and
        // flagged but make poor warm starts
        warm = diags[g].boundary ? std::nullopt : results[g];
      } catch (const Error& e) {
        if (e.code() == errc::degenerate_threshold) {
          diags[g].y = y;
          diags[g].skipped = true;  // recorded and excluded, grid not re-indexed
        } else if (e.code() == errc::numeric_failure) {
          diags[g].y = y;
          diags[g].converged = false;  // excluded; surfaces through all_converged()
          warm = std::nullopt;
        } else {
          throw;
        }
      }
    }
  });

  fit.diagnostics = diags;
  std::vector<std::size_t> kept;
  for (std::size_t g = 0; g < grid_size; ++g) {
    if (results[g]) {
      kept.push_back(g);
      fit.thetas.push_back(*results[g]);
    }
  }

  fit.psi.resize(kept.size());
  parallel_for(kept.size(), opts.threads, [&](std::size_t j) {
    const ScoreBlocks blocks =
        scores_and_blocks(fit.thetas[j], fit.first.pi_hat, data, fit.sorting_idx, true);
    bool ridged = false;
    fit.psi[j] = influence_rows(blocks, fit.first, &ridged);
    fit.diagnostics[kept[j]].hessian_ridged = ridged;
    fit.diagnostics[kept[j]].cells_clamped =
        fit.diagnostics[kept[j]].cells_clamped || blocks.cells_clamped;
  });
  return fit;
}

std::size_t threshold_index(const SelectionDRFit& fit, double y) {
  for (std::size_t j = 0; j < fit.thetas.size(); ++j) {
    if (fit.thetas[j].y == y) return j;
  }
  throw_error(errc::contract, "threshold " + std::to_string(y) + " not in the kept grid");
}

Eigen::MatrixXd covariance_at(const SelectionDRFit& fit, double y, double y2) {
  const std::size_t a = threshold_index(fit, y);
  const std::size_t b = threshold_index(fit, y2);
  const double n2 = static_cast<double>(fit.n) * static_cast<double>(fit.n);
  return (fit.psi[a].transpose() * fit.psi[b]) / n2;
}

}  // namespace seldr
