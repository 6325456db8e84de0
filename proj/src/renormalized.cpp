#include "bdq/renormalized.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bdq/parallel.hpp"
#include "bdq/stats.hpp"

namespace bdq {

namespace {

struct HTildePieces {
  double cross_energy;  // 2 E(Z, K)
  double k_energy;      // E(K)
  std::vector<Field> k;
  SampleRecord rec;
  EnhancedGFFPath path;
};

HTildePieces perturbation_pieces(const PerturbedEnsemble& pe, int sample) {
  const ControlledEnsemble& ce = *pe.base;
  EnhancedGFFPath path = sample_path(ce.lattice(), ce.grid(), ce.noise(), sample);
  SampleRecord rec = ce.simulate(*pe.theta, path);
  std::vector<Field> k = control_path(ce, *pe.theta, path, rec, pe.k);
  const double cross = 2.0 * bilinear_energy(ce.lattice(), ce.grid(), rec.z, k);
  const double ek = path_energy(ce.lattice(), ce.grid(), k);
  return {cross, ek, std::move(k), std::move(rec), std::move(path)};
}

}  // namespace

ValueSE h_tilde_phi4(const PerturbedEnsemble& pe) {
  const ControlledEnsemble& ce = *pe.base;
  const InteractionSpec& is = ce.interaction();
  if (is.kind != InteractionKind::phi4) {
    throw std::invalid_argument("h_tilde_phi4: phi4 interaction required");
  }
  const LatticeSpec& lat = ce.lattice();
  std::vector<double> vals(ce.n_samples());
  parallel_for(ce.n_samples(), [&](int i) {
    const HTildePieces p = perturbation_pieces(pe, i);
    const Field& z1 = p.rec.z.back();
    const Field& k1 = p.k.back();
    const EnhancedFields enh = enhanced_at(p.path, ce.grid().n_steps, is.hbar);
    // Wick powers of Y = W + Z by the binomial assembly.
    const Field y = enh.w + z1;
    const Field wick2_y = enh.wick2 + 2.0 * enh.w * z1 + z1.square();
    const Field wick3_y =
        enh.wick3 + 3.0 * enh.wick2 * z1 + 3.0 * enh.w * z1.square() + z1.cube();
    const Field integrand = 4.0 * wick3_y * k1 + 6.0 * wick2_y * k1.square() +
                            4.0 * y * k1.cube() + k1.square().square();
    vals[i] = p.cross_energy + p.k_energy +
              is.lambda * lat.cell_area() * (is.cutoff * integrand).sum();
  });
  const MeanSE ms = mean_se(vals);
  return {ms.mean, ms.se};
}

HTildeExpReport h_tilde_exp(const PerturbedEnsemble& pe) {
  const ControlledEnsemble& ce = *pe.base;
  const InteractionSpec& is = ce.interaction();
  if (is.kind != InteractionKind::exponential) {
    throw std::invalid_argument("h_tilde_exp: exponential interaction required");
  }
  const LatticeSpec& lat = ce.lattice();
  const int n = ce.n_samples();
  std::vector<double> raw(n), simp(n), gap(n);
  std::vector<char> nonneg(n, 1);
  parallel_for(n, [&](int i) {
    const HTildePieces p = perturbation_pieces(pe, i);
    const Field& z1 = p.rec.z.back();
    const Field& k1 = p.k.back();
    const double sq = std::sqrt(is.hbar);
    const double s2 = is.hbar * p.path.sigma2(ce.grid().n_steps);
    const Field gmc =
        (is.beta * sq * p.path.w1() - 0.5 * is.beta * is.beta * s2).exp();

    const double v_zk = potential_exp(lat, is, gmc, z1 + k1);
    const double v_z = potential_exp(lat, is, gmc, z1);
    raw[i] = p.cross_energy + p.k_energy + (v_zk - v_z);

    // e^{bK} - 1 - bK >= 0 pointwise; expm1 keeps it exact for small K.
    const Field bk = is.beta * k1;
    Field convex(lat.size(), lat.size());
    for (int c = 0; c < convex.size(); ++c) {
      convex.data()[c] = std::expm1(bk.data()[c]) - bk.data()[c];
    }
    if ((convex < 0.0).any()) nonneg[i] = 0;
    const double integral =
        is.lambda * lat.cell_area() *
        (is.cutoff * (is.beta * z1).exp() * gmc * convex).sum();
    simp[i] = p.k_energy + integral;
    gap[i] = raw[i] - simp[i];
  });
  HTildeExpReport rep;
  const MeanSE mr = mean_se(raw), msp = mean_se(simp), mg = mean_se(gap);
  rep.raw = {mr.mean, mr.se};
  rep.simplified = {msp.mean, msp.se};
  rep.gap = {mg.mean, mg.se};
  for (char c : nonneg) {
    if (!c) rep.simplified_nonneg_pathwise = false;
  }
  return rep;
}

ValueSE expected_observable(const ControlledEnsemble& ce,
                            const DriftParameters& theta, const Observable& f) {
  std::vector<double> vals(ce.n_samples());
  parallel_for(ce.n_samples(), [&](int i) {
    vals[i] = f.value(ce.lattice(), ce.simulate(theta, i).y1);
  });
  const MeanSE ms = mean_se(vals);
  return {ms.mean, ms.se};
}

namespace {

// Forward/adjoint pair for the perturbation drift K around a frozen base
// drift Z. The K features read the combined state W, Z + K.
struct PerturbationEvaluator {
  const ControlledEnsemble* ce;
  const DriftParameters* theta;  // frozen base
  const Observable* f;           // perturbation observable

  // Returns f(W+Z+K) + V(W+Z+K) + E(Z+K) - [V(W+Z) + E(Z)] for one sample.
  double forward(const DriftParameters& kappa, int sample,
                 Eigen::MatrixXd* grad) const {
    const LatticeSpec& lat = ce->lattice();
    const TimeGrid& tg = ce->grid();
    const InteractionSpec& is = ce->interaction();
    const int L = lat.size();
    const int nf = kappa.n_features();
    const double dt = tg.dt();
    const double a2 = lat.cell_area();

    const EnhancedGFFPath path = sample_path(lat, tg, ce->noise(), sample);
    const SampleRecord base = ce->simulate(*theta, path);

    // Combined drift D = Z + K with K driven by kappa on the state D.
    std::vector<Field> d(1, Field::Zero(L, L));
    std::vector<std::vector<Field>> feats(tg.n_steps);
    std::vector<Field> u_tot(tg.n_steps);
    double energy_d = 0.0;
    for (int j = 0; j < tg.n_steps; ++j) {
      // Base source recovered from the stored Z path.
      const Field zdot = (base.z[j + 1] - base.z[j]) / dt;
      const Field u_base = -apply_spectral(lat, 1.0, zdot);
      const EnhancedFields enh = enhanced_at(path, j, is.hbar);
      Field u = u_base;
      feats[j].reserve(nf);
      for (int fi = 0; fi < nf; ++fi) {
        feats[j].push_back(perturbation_feature(kappa.features[fi], enh, path, j,
                                                d[j], lat));
        u += kappa.coeffs(j, fi) * feats[j][fi];
      }
      const Field v = apply_spectral(lat, -1.0, u);
      energy_d += 0.5 * dt * inner_product(lat, u, v);
      d.push_back(d[j] - dt * v);
      u_tot[j] = std::move(u);
    }
    const Field yc = std::sqrt(is.hbar) * path.w1() + d.back();
    const double g_pert = f->value(lat, yc) + ce->terminal_potential(path, d.back()) +
                          energy_d;
    const double g_base = base.v_value + base.energy;

    if (grad) {
      Field lam = a2 * (f->gradient(lat, yc) +
                        ce->terminal_potential_grad(path, d.back()));
      *grad = Eigen::MatrixXd::Zero(tg.n_steps, nf);
      for (int j = tg.n_steps - 1; j >= 0; --j) {
        const Field ubar = dt * apply_spectral(lat, -1.0, a2 * u_tot[j] - lam);
        const EnhancedFields enh = enhanced_at(path, j, is.hbar);
        for (int fi = 0; fi < nf; ++fi) {
          (*grad)(j, fi) = (feats[j][fi] * ubar).sum();
          const double c = kappa.coeffs(j, fi);
          if (c != 0.0) {
            lam += perturbation_feature_adjoint(kappa.features[fi], c, enh, path,
                                                j, d[j], ubar, lat);
          }
        }
      }
    }
    return g_pert - g_base;
  }

  Field perturbation_feature(FeatureKind k, const EnhancedFields& enh,
                             const EnhancedGFFPath& path, int j, const Field& d,
                             const LatticeSpec& lat) const {
    const InteractionSpec& is = ce->interaction();
    switch (k) {
      case FeatureKind::Wick3:
        return is.cutoff * enh.wick3;
      case FeatureKind::Wick2Z:
        return is.cutoff * enh.wick2 * d;
      case FeatureKind::WZ2:
        return is.cutoff * enh.w * d.square();
      case FeatureKind::Z3:
        return is.cutoff * d.cube();
      case FeatureKind::Z:
        return d;
      case FeatureKind::Const:
        return Field::Ones(lat.size(), lat.size());
      case FeatureKind::GradF:
        return f->gradient(lat, enh.w + d);
      case FeatureKind::ExpShamov: {
        const double s2 = is.hbar * path.sigma2(j);
        const Field gmc =
            (is.beta * enh.w - 0.5 * is.beta * is.beta * s2).exp();
        return is.cutoff * (is.beta * d).exp() * gmc;
      }
    }
    return Field::Zero(lat.size(), lat.size());
  }

  Field perturbation_feature_adjoint(FeatureKind k, double c,
                                     const EnhancedFields& enh,
                                     const EnhancedGFFPath& path, int j,
                                     const Field& d, const Field& ubar,
                                     const LatticeSpec& lat) const {
    const InteractionSpec& is = ce->interaction();
    switch (k) {
      case FeatureKind::Wick3:
      case FeatureKind::Const:
        return Field::Zero(lat.size(), lat.size());
      case FeatureKind::Wick2Z:
        return c * is.cutoff * enh.wick2 * ubar;
      case FeatureKind::WZ2:
        return c * 2.0 * is.cutoff * enh.w * d * ubar;
      case FeatureKind::Z3:
        return c * 3.0 * is.cutoff * d.square() * ubar;
      case FeatureKind::Z:
        return c * ubar;
      case FeatureKind::GradF:
        return c * f->hessian_apply(lat, ubar);
      case FeatureKind::ExpShamov: {
        const double s2 = is.hbar * path.sigma2(j);
        const Field gmc =
            (is.beta * enh.w - 0.5 * is.beta * is.beta * s2).exp();
        return c * is.beta * is.cutoff * (is.beta * d).exp() * gmc * ubar;
      }
    }
    return Field::Zero(lat.size(), lat.size());
  }
};

}  // namespace

PerturbationSolve optimize_perturbation(const ControlledEnsemble& ce,
                                        const DriftParameters& theta,
                                        const Observable& f,
                                        const OptConfig& cfg) {
  PerturbationEvaluator ev{&ce, &theta, &f};
  DriftParameters kappa = DriftParameters::zero(
      feature_library(ce.interaction(), f), ce.grid().n_steps);

  const int n = ce.n_samples();
  auto evaluate = [&](const DriftParameters& k, double* se,
                      Eigen::MatrixXd* grad) {
    std::vector<Eigen::MatrixXd> slots(grad ? n : 0);
    std::vector<double> vals(n);
    parallel_for(n, [&](int i) {
      if (grad) {
        Eigen::MatrixXd g;
        vals[i] = ev.forward(k, i, &g);
        slots[i] = std::move(g);
      } else {
        vals[i] = ev.forward(k, i, nullptr);
      }
    });
    for (double v : vals) {
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    }
    if (grad) {
      *grad = Eigen::MatrixXd::Zero(k.n_steps(), k.n_features());
      for (int i = 0; i < n; ++i) *grad += slots[i];
      *grad /= n;
    }
    const MeanSE ms = mean_se(vals);
    if (se) *se = ms.se;
    return ms.mean;
  };

  double step = cfg.step;
  PerturbationSolve out;
  Eigen::MatrixXd grad;
  double se = 0.0;
  double value = evaluate(kappa, &se, &grad);
  for (int it = 0; it < cfg.iterations; ++it) {
    out.trace.push_back({it, value, se, grad.norm(), step});
    DriftParameters cand = kappa;
    cand.coeffs -= step * grad;
    Eigen::MatrixXd cand_grad;
    double cand_se = 0.0;
    const double cand_value = evaluate(cand, &cand_se, &cand_grad);
    if (cand_value <= value) {
      kappa = std::move(cand);
      value = cand_value;
      se = cand_se;
      grad = std::move(cand_grad);
      step *= cfg.decay;
    } else {
      step *= 0.5;
    }
  }
  out.kappa = std::move(kappa);
  out.value = {value, se};
  out.trace.push_back({static_cast<int>(out.trace.size()), value, se,
                       grad.norm(), step});
  return out;
}

TwoWayReport two_way_value(const LatticeSpec& lat, const TimeGrid& tg,
                           const NoiseEnsemble& ens,
                           const InteractionSpec& inter, const Observable& f,
                           const OptConfig& base_cfg, const OptConfig& pert_cfg) {
  const Observable zero = Observable::zero();
  const OptimizedValue base_v = solve_bd(lat, tg, ens, inter, zero, base_cfg);
  const OptimizedValue base_fv = solve_bd(lat, tg, ens, inter, f, base_cfg);

  const ControlledEnsemble ce_v(lat, tg, ens, inter, zero);
  const ControlledEnsemble ce_fv(lat, tg, ens, inter, f);

  TwoWayReport rep;
  rep.via_difference =
      paired_difference(ce_fv, base_fv.theta, ce_v, base_v.theta);
  const PerturbationSolve ps =
      optimize_perturbation(ce_v, base_v.theta, f, pert_cfg);
  rep.via_perturbation = ps.value;
  rep.gap.value = rep.via_difference.value - rep.via_perturbation.value;
  rep.gap.se = std::sqrt(rep.via_difference.se * rep.via_difference.se +
                         rep.via_perturbation.se * rep.via_perturbation.se);
  return rep;
}

SandwichReport sandwich_check(const LatticeSpec& lat, const TimeGrid& tg,
                              const NoiseEnsemble& ens,
                              const InteractionSpec& inter, const Observable& f,
                              const OptConfig& cfg) {
  const Observable zero = Observable::zero();
  const OptimizedValue opt_v = solve_bd(lat, tg, ens, inter, zero, cfg);
  const OptimizedValue opt_fv = solve_bd(lat, tg, ens, inter, f, cfg);

  const ControlledEnsemble ce_v(lat, tg, ens, inter, zero);
  const ControlledEnsemble ce_fv(lat, tg, ens, inter, f);

  SandwichReport rep;
  rep.lower = expected_observable(ce_fv, opt_fv.theta, f);
  rep.middle = paired_difference(ce_fv, opt_fv.theta, ce_v, opt_v.theta);
  rep.upper = expected_observable(ce_v, opt_v.theta, f);
  const double tol_lo =
      3.0 * std::sqrt(rep.lower.se * rep.lower.se + rep.middle.se * rep.middle.se);
  const double tol_hi =
      3.0 * std::sqrt(rep.upper.se * rep.upper.se + rep.middle.se * rep.middle.se);
  rep.pass = rep.lower.value <= rep.middle.value + tol_lo &&
             rep.middle.value <= rep.upper.value + tol_hi;
  return rep;
}

DerivativeReport derivative_identity(const LatticeSpec& lat, const TimeGrid& tg,
                                     const NoiseEnsemble& ens,
                                     const InteractionSpec& inter,
                                     const Observable& f,
                                     const std::vector<double>& alpha_grid,
                                     const OptConfig& cfg) {
  if (alpha_grid.size() < 3) {
    throw std::invalid_argument("derivative_identity: need >= 3 alpha points");
  }
  const std::size_t n = alpha_grid.size();
  std::vector<OptimizedValue> opts;
  std::vector<ControlledEnsemble> ces;
  opts.reserve(n);
  ces.reserve(n);

  // Warm-started sweep over alpha.
  DriftParameters warm = DriftParameters::zero(
      feature_library(inter, f.scaled(alpha_grid[0])), tg.n_steps);
  for (std::size_t g = 0; g < n; ++g) {
    const Observable fg = f.scaled(alpha_grid[g]);
    const ControlledEnsemble ce(lat, tg, ens, inter, fg);
    OptResult r = optimize(ce, warm, cfg);
    warm = r.theta;
    OptimizedValue ov;
    ov.value = r.trace.back().objective;
    ov.se = r.trace.back().se;
    ov.theta = std::move(r.theta);
    opts.push_back(std::move(ov));
    ces.push_back(ce);
  }

  DerivativeReport rep;
  // W^V(alpha f) relative to the alpha = 0 problem on shared noise.
  for (std::size_t g = 0; g < n; ++g) {
    DerivativeRow row;
    row.alpha = alpha_grid[g];
    const ValueSE w =
        paired_difference(ces[g], opts[g].theta, ces[0], opts[0].theta);
    row.w_value = w.value;
    row.w_se = w.se;
    const ValueSE ef = expected_observable(ces[g], opts[g].theta, f);
    row.ef = ef.value;
    row.ef_se = ef.se;
    rep.rows.push_back(row);
  }
  for (std::size_t g = 1; g + 1 < n; ++g) {
    DerivativeRow& row = rep.rows[g];
    const double da = alpha_grid[g + 1] - alpha_grid[g - 1];
    row.fd = (rep.rows[g + 1].w_value - rep.rows[g - 1].w_value) / da;
    row.fd_se = std::sqrt(rep.rows[g + 1].w_se * rep.rows[g + 1].w_se +
                          rep.rows[g - 1].w_se * rep.rows[g - 1].w_se) /
                da;
    row.z = z_score(row.fd, row.fd_se, row.ef, row.ef_se);
    row.interior = true;
    rep.max_interior_z = std::max(rep.max_interior_z, std::abs(row.z));
  }

  // Integral form over [0, 1] when the grid covers it.
  double integral = 0.0, var = 0.0;
  for (std::size_t g = 0; g + 1 < n; ++g) {
    const double h = alpha_grid[g + 1] - alpha_grid[g];
    integral += 0.5 * h * (rep.rows[g].ef + rep.rows[g + 1].ef);
    var += 0.25 * h * h *
           (rep.rows[g].ef_se * rep.rows[g].ef_se +
            rep.rows[g + 1].ef_se * rep.rows[g + 1].ef_se);
  }
  rep.integral = integral;
  rep.integral_se = std::sqrt(var);
  rep.w_of_f = {rep.rows.back().w_value, rep.rows.back().w_se};

  // O(grid^2) trapezoid bias from the curvature of alpha -> E[f].
  double max_curv = 0.0;
  for (std::size_t g = 1; g + 1 < n; ++g) {
    const double h = alpha_grid[g + 1] - alpha_grid[g];
    const double second =
        std::abs(rep.rows[g + 1].ef - 2.0 * rep.rows[g].ef + rep.rows[g - 1].ef) /
        (h * h);
    max_curv = std::max(max_curv, second);
  }
  const double span = alpha_grid.back() - alpha_grid.front();
  const double h0 = alpha_grid[1] - alpha_grid[0];
  rep.grid_bias_bound = max_curv * h0 * h0 * span / 12.0;
  return rep;
}

}  // namespace bdq
