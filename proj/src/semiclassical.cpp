#include "bdq/semiclassical.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "bdq/gff.hpp"
#include "bdq/parallel.hpp"
#include "bdq/rng.hpp"
#include "bdq/stats.hpp"

namespace bdq {

namespace {

double total_objective(const LatticeSpec& lat, const Observable& f,
                       const InteractionSpec& spec, const Field& phi) {
  return f.value(lat, phi) + rate_function_J(lat, spec, phi);
}

Field total_gradient(const LatticeSpec& lat, const Observable& f,
                     const InteractionSpec& spec, const Field& phi) {
  return f.gradient(lat, phi) + grad_rate_function_J(lat, spec, phi);
}

}  // namespace

MinimizeResult deterministic_minimize(const LatticeSpec& lat,
                                      const Observable& f,
                                      const InteractionSpec& spec, double tol,
                                      const Field& start, int max_iter) {
  if (spec.kind != InteractionKind::phi4 &&
      spec.kind != InteractionKind::none) {
    throw std::invalid_argument(
        "deterministic_minimize: bare-quartic rate function only");
  }
  MinimizeResult res;
  res.phi = start;
  double value = total_objective(lat, f, spec, res.phi);
  res.trace.push_back(value);

  for (int it = 0; it < max_iter; ++it) {
    const Field grad = total_gradient(lat, f, spec, res.phi);
    res.el_residual_norm = lp_norm(lat, grad, 2.0);
    if (res.el_residual_norm < tol) {
      res.converged = true;
      res.iterations = it;
      res.value = value;
      return res;
    }
    // Descent preconditioned by the free operator.
    const Field dir = -apply_spectral(lat, -1.0, grad);
    const double slope = inner_product(lat, grad, dir);
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Field cand = res.phi + step * dir;
      const double cand_value = total_objective(lat, f, spec, cand);
      if (cand_value <= value + 1e-4 * step * slope) {
        res.phi = cand;
        value = cand_value;
        res.trace.push_back(value);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.iterations = it;
      res.value = value;
      return res;  // line search stalled; caller sees converged = false
    }
  }
  res.iterations = max_iter;
  res.value = value;
  return res;
}

MinimizeResult deterministic_minimize(const LatticeSpec& lat,
                                      const Observable& f,
                                      const InteractionSpec& spec, double tol) {
  return deterministic_minimize(lat, f, spec, tol,
                                Field::Zero(lat.size(), lat.size()), 5000);
}

Field gaussian_minimizer_solve(const LatticeSpec& lat, const Observable& f,
                               double tol) {
  // (H + A) phi = H phi_hat with H the observable Hessian, A = m^2 - Delta.
  auto apply = [&](const Field& x) {
    return Field(f.hessian_apply(lat, x) + apply_spectral(lat, 1.0, x));
  };
  const Field rhs = f.hessian_apply(lat, f.quadratic_target());
  Field x = Field::Zero(lat.size(), lat.size());
  Field r = rhs - apply(x);
  Field p = r;
  double rs = inner_product(lat, r, r);
  const double stop = tol * tol * std::max(inner_product(lat, rhs, rhs), 1e-300);
  for (int it = 0; it < 10000 && rs > stop; ++it) {
    const Field ap = apply(p);
    const double alpha = rs / inner_product(lat, p, ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = inner_product(lat, r, r);
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return x;
}

Eigen::MatrixXd dense_operator(const LatticeSpec& lat,
                               const std::function<Field(const Field&)>& op) {
  const int n = lat.n_sites();
  const int L = lat.size();
  Eigen::MatrixXd m(n, n);
  for (int c = 0; c < n; ++c) {
    Field e = Field::Zero(L, L);
    e.data()[c] = 1.0;
    const Field col = op(e);
    for (int r = 0; r < n; ++r) m(r, c) = col.data()[r];
  }
  return m;
}

double gaussian_hbar_closed_form(const LatticeSpec& lat, const Observable& f,
                                 double hbar) {
  const int n = lat.n_sites();
  const double a2 = lat.cell_area();
  // Raw precision of theta^hbar and raw Hessian of f.
  const Eigen::MatrixXd a_raw =
      dense_operator(lat, [&](const Field& x) { return apply_spectral(lat, 1.0, x); });
  const Eigen::MatrixXd q_raw =
      a2 * dense_operator(lat, [&](const Field& x) { return f.hessian_apply(lat, x); });
  const Eigen::MatrixXd p_raw = (a2 / hbar) * a_raw;

  Eigen::VectorXd phi_hat(n);
  for (int i = 0; i < n; ++i) phi_hat(i) = f.quadratic_target().data()[i];

  // -log E[e^{-f/hbar}] for f = 1/2 (phi - phi_hat)' Q (phi - phi_hat).
  const Eigen::MatrixXd pq = p_raw + q_raw / hbar;
  const Eigen::LLT<Eigen::MatrixXd> llt_p(p_raw);
  const Eigen::LLT<Eigen::MatrixXd> llt_pq(pq);
  double logdet = 0.0;
  {
    const auto& lp = llt_p.matrixL();
    const auto& lpq = llt_pq.matrixL();
    for (int i = 0; i < n; ++i) {
      logdet += std::log(lpq(i, i)) - std::log(lp(i, i));
    }
  }
  const Eigen::VectorXd b = q_raw * phi_hat / hbar;
  const double quad = 0.5 * phi_hat.dot(b) - 0.5 * b.dot(llt_pq.solve(b));
  return hbar * (logdet + quad);
}

namespace {

// A_G = -log E_{theta^hbar}[e^{-G/hbar}] by exact re-centering at `shift`.
LogMeanExp recentered_estimate(const LatticeSpec& lat,
                               const std::function<double(const Field&)>& g,
                               double hbar, const Field& shift, int n_samples,
                               std::uint64_t seed) {
  const NoiseEnsemble ens(seed, n_samples);
  const Field a_shift = apply_spectral(lat, 1.0, shift);
  const double shift_energy = 0.5 * inner_product(lat, shift, a_shift);
  std::vector<double> exponents(n_samples);
  const double sq = std::sqrt(hbar);
  parallel_for(n_samples, [&](int i) {
    const Field w =
        sq * apply_spectral(lat, -0.5,
                            ens.normal_field(lat, i, 0, NoiseStream::kDirect) /
                                lat.spacing());
    exponents[i] = -(g(w + shift) + inner_product(lat, a_shift, w) +
                     shift_energy) /
                   hbar;
  });
  return neg_log_mean_exp(exponents);
}

}  // namespace

HbarSweepReport hbar_sweep(const LatticeSpec& lat, const Observable& f,
                           const InteractionSpec& spec,
                           const std::vector<double>& hbar_list, int n_samples,
                           std::uint64_t seed, double tol) {
  for (std::size_t i = 1; i < hbar_list.size(); ++i) {
    if (hbar_list[i] >= hbar_list[i - 1]) {
      throw std::invalid_argument("hbar_sweep: hbar_list must decrease");
    }
  }
  HbarSweepReport rep;
  const MinimizeResult det = deterministic_minimize(lat, f, spec, tol);
  rep.deterministic_value = det.value;
  rep.phi_star = det.phi;

  const double g0 = gff_variance(lat);
  for (std::size_t k = 0; k < hbar_list.size(); ++k) {
    const double hbar = hbar_list[k];
    const double s2 = hbar * g0;
    auto v_pot = [&](const Field& phi) {
      return spec.kind == InteractionKind::phi4
                 ? potential_phi4_direct(lat, spec, phi, s2)
                 : 0.0;
    };
    auto g_full = [&](const Field& phi) { return f.value(lat, phi) + v_pot(phi); };

    const LogMeanExp a_full = recentered_estimate(lat, g_full, hbar, det.phi,
                                                  n_samples, seed + 2 * k);
    const Field zero = Field::Zero(lat.size(), lat.size());
    const LogMeanExp a_v = recentered_estimate(lat, v_pot, hbar, zero,
                                               n_samples, seed + 2 * k + 1);
    HbarRow row;
    row.hbar = hbar;
    row.w_value = hbar * (a_full.value - a_v.value);
    row.se = hbar * std::sqrt(a_full.se * a_full.se + a_v.se * a_v.se);
    row.ess = std::min(a_full.ess, a_v.ess);
    row.gap = std::abs(row.w_value - rep.deterministic_value);
    rep.rows.push_back(row);
  }
  rep.gaps_decreasing = true;
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    if (rep.rows[k].gap > rep.rows[k - 1].gap) rep.gaps_decreasing = false;
  }
  return rep;
}

DerivChainReport semiclassical_derivative_chain(
    const LatticeSpec& lat, const Observable& f, const InteractionSpec& spec,
    const std::vector<double>& alpha_list, const std::vector<double>& hbar_list,
    int n_samples, std::uint64_t seed, double fd_delta) {
  DerivChainReport rep;
  const double g0 = gff_variance(lat);
  for (double alpha : alpha_list) {
    const MinimizeResult det =
        deterministic_minimize(lat, f.scaled(alpha), spec, 1e-9);
    const double f_at_phi = f.value(lat, det.phi);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < hbar_list.size(); ++k) {
      const double hbar = hbar_list[k];
      const double s2 = hbar * g0;
      auto make_g = [&](double a) {
        return [&, a](const Field& phi) {
          const double v = spec.kind == InteractionKind::phi4
                               ? potential_phi4_direct(lat, spec, phi, s2)
                               : 0.0;
          return a * f.value(lat, phi) + v;
        };
      };
      // Central difference in alpha on shared draws and a shared shift.
      const LogMeanExp plus = recentered_estimate(
          lat, make_g(alpha + fd_delta), hbar, det.phi, n_samples, seed + 7 * k);
      const LogMeanExp minus = recentered_estimate(
          lat, make_g(alpha - fd_delta), hbar, det.phi, n_samples, seed + 7 * k);
      DerivChainRow row;
      row.hbar = hbar;
      row.alpha = alpha;
      row.dw_dalpha = hbar * (plus.value - minus.value) / (2.0 * fd_delta);
      row.se = hbar * std::sqrt(plus.se * plus.se + minus.se * minus.se) /
               (2.0 * fd_delta);
      row.f_at_phi = f_at_phi;
      row.gap = std::abs(row.dw_dalpha - f_at_phi);
      if (row.gap > prev_gap) rep.gaps_shrinking = false;
      prev_gap = row.gap;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace bdq
