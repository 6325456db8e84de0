#include "bdq/control.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bdq/parallel.hpp"
#include "bdq/stats.hpp"

namespace bdq {

std::string feature_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::Wick3: return "wick3";
    case FeatureKind::Wick2Z: return "wick2_z";
    case FeatureKind::WZ2: return "w_z2";
    case FeatureKind::Z3: return "z3";
    case FeatureKind::Z: return "z";
    case FeatureKind::Const: return "const";
    case FeatureKind::GradF: return "grad_f";
    case FeatureKind::ExpShamov: return "exp_shamov";
  }
  return "?";
}

std::vector<FeatureKind> feature_library(const InteractionSpec& spec,
                                         const Observable& f) {
  std::vector<FeatureKind> feats;
  switch (spec.kind) {
    case InteractionKind::phi4:
      feats = {FeatureKind::Wick3, FeatureKind::Wick2Z, FeatureKind::WZ2,
               FeatureKind::Z3, FeatureKind::Z, FeatureKind::Const};
      break;
    case InteractionKind::exponential:
      feats = {FeatureKind::ExpShamov, FeatureKind::Z, FeatureKind::Const};
      break;
    case InteractionKind::none:
      feats = {FeatureKind::Z, FeatureKind::Const};
      break;
  }
  if (!f.is_zero()) feats.push_back(FeatureKind::GradF);
  return feats;
}

DriftParameters DriftParameters::zero(std::vector<FeatureKind> feats,
                                      int n_steps) {
  DriftParameters p;
  p.features = std::move(feats);
  p.coeffs = Eigen::MatrixXd::Zero(n_steps, static_cast<int>(p.features.size()));
  return p;
}

double path_energy(const LatticeSpec& lat, const TimeGrid& tg,
                   const std::vector<Field>& zpath) {
  double acc = 0.0;
  for (int j = 0; j < tg.n_steps; ++j) {
    const Field dz = zpath[j + 1] - zpath[j];
    acc += inner_product(lat, dz, apply_spectral(lat, 1.0, dz));
  }
  return 0.5 * acc / tg.dt();
}

double bilinear_energy(const LatticeSpec& lat, const TimeGrid& tg,
                       const std::vector<Field>& zpath,
                       const std::vector<Field>& kpath) {
  double acc = 0.0;
  for (int j = 0; j < tg.n_steps; ++j) {
    const Field dz = zpath[j + 1] - zpath[j];
    const Field dk = kpath[j + 1] - kpath[j];
    acc += inner_product(lat, dz, apply_spectral(lat, 1.0, dk));
  }
  return 0.5 * acc / tg.dt();
}

namespace {

// Effective (hbar-scaled) state at one time step.
struct StepContext {
  Field w;
  Field wick2;
  Field wick3;
  Field gmc;  // exponential model only
};

StepContext make_context(const EnhancedGFFPath& path, int j,
                         const InteractionSpec& inter) {
  StepContext sc;
  const double sq = std::sqrt(inter.hbar);
  sc.w = sq * path.w(j);
  sc.wick2 = inter.hbar * path.wick2(j);
  sc.wick3 = inter.hbar * sq * path.wick3(j);
  if (inter.kind == InteractionKind::exponential) {
    const double s2 = inter.hbar * path.sigma2(j);
    sc.gmc = (inter.beta * sc.w - 0.5 * inter.beta * inter.beta * s2).exp();
  }
  return sc;
}

Field feature_value(FeatureKind k, const StepContext& sc, const Field& z,
                    const InteractionSpec& inter, const Observable& obs,
                    const LatticeSpec& lat) {
  switch (k) {
    case FeatureKind::Wick3:
      return inter.cutoff * sc.wick3;
    case FeatureKind::Wick2Z:
      return inter.cutoff * sc.wick2 * z;
    case FeatureKind::WZ2:
      return inter.cutoff * sc.w * z.square();
    case FeatureKind::Z3:
      return inter.cutoff * z.cube();
    case FeatureKind::Z:
      return z;
    case FeatureKind::Const:
      return Field::Ones(lat.size(), lat.size());
    case FeatureKind::GradF:
      return obs.gradient(lat, sc.w + z);
    case FeatureKind::ExpShamov:
      return inter.cutoff * (inter.beta * z).exp() * sc.gmc;
  }
  return Field::Zero(lat.size(), lat.size());
}

// (d u_j / d Z_j)^T applied to the adjoint field.
Field feature_adjoint(FeatureKind k, double coeff, const StepContext& sc,
                      const Field& z, const Field& ubar,
                      const InteractionSpec& inter, const Observable& obs,
                      const LatticeSpec& lat) {
  switch (k) {
    case FeatureKind::Wick3:
    case FeatureKind::Const:
      return Field::Zero(lat.size(), lat.size());
    case FeatureKind::Wick2Z:
      return coeff * inter.cutoff * sc.wick2 * ubar;
    case FeatureKind::WZ2:
      return coeff * 2.0 * inter.cutoff * sc.w * z * ubar;
    case FeatureKind::Z3:
      return coeff * 3.0 * inter.cutoff * z.square() * ubar;
    case FeatureKind::Z:
      return coeff * ubar;
    case FeatureKind::GradF:
      return coeff * obs.hessian_apply(lat, ubar);
    case FeatureKind::ExpShamov:
      return coeff * inter.beta * inter.cutoff * (inter.beta * z).exp() *
             sc.gmc * ubar;
  }
  return Field::Zero(lat.size(), lat.size());
}

}  // namespace

ControlledEnsemble::ControlledEnsemble(const LatticeSpec& lat,
                                       const TimeGrid& tg,
                                       const NoiseEnsemble& ens,
                                       const InteractionSpec& inter,
                                       const Observable& f)
    : lat_(&lat), tg_(tg), ens_(ens), inter_(inter), obs_(f) {}

double ControlledEnsemble::terminal_potential(const EnhancedGFFPath& path,
                                              const Field& z1) const {
  switch (inter_.kind) {
    case InteractionKind::none:
      return 0.0;
    case InteractionKind::phi4:
      return potential_phi4_expanded(*lat_, inter_,
                                     enhanced_at(path, tg_.n_steps, inter_.hbar),
                                     z1);
    case InteractionKind::exponential: {
      const StepContext sc = make_context(path, tg_.n_steps, inter_);
      return potential_exp(*lat_, inter_, sc.gmc, z1);
    }
  }
  return 0.0;
}

Field ControlledEnsemble::terminal_potential_grad(const EnhancedGFFPath& path,
                                                  const Field& z1) const {
  switch (inter_.kind) {
    case InteractionKind::none:
      return Field::Zero(lat_->size(), lat_->size());
    case InteractionKind::phi4:
      return grad_potential_phi4(*lat_, inter_,
                                 enhanced_at(path, tg_.n_steps, inter_.hbar), z1);
    case InteractionKind::exponential: {
      const StepContext sc = make_context(path, tg_.n_steps, inter_);
      return grad_potential_exp(*lat_, inter_, sc.gmc, z1);
    }
  }
  return Field::Zero(lat_->size(), lat_->size());
}

SampleRecord ControlledEnsemble::simulate(const DriftParameters& theta,
                                          int sample) const {
  const EnhancedGFFPath path = sample_path(*lat_, tg_, ens_, sample);
  return simulate(theta, path);
}

SampleRecord ControlledEnsemble::simulate(const DriftParameters& theta,
                                          const EnhancedGFFPath& path) const {
  if (theta.n_steps() != tg_.n_steps) {
    throw std::invalid_argument("drift parameters do not match the time grid");
  }
  const int L = lat_->size();
  const double dt = tg_.dt();
  SampleRecord rec;
  rec.z.reserve(tg_.n_steps + 1);
  rec.z.push_back(Field::Zero(L, L));
  for (int j = 0; j < tg_.n_steps; ++j) {
    const StepContext sc = make_context(path, j, inter_);
    Field u = Field::Zero(L, L);
    for (int f = 0; f < theta.n_features(); ++f) {
      const double c = theta.coeffs(j, f);
      if (c == 0.0) continue;
      u += c * feature_value(theta.features[f], sc, rec.z[j], inter_, obs_, *lat_);
    }
    const Field v = apply_spectral(*lat_, -1.0, u);
    rec.energy += 0.5 * dt * inner_product(*lat_, u, v);
    rec.z.push_back(rec.z[j] - dt * v);
  }
  rec.y1 = std::sqrt(inter_.hbar) * path.w1() + rec.z.back();
  rec.f_value = obs_.value(*lat_, rec.y1);
  rec.v_value = terminal_potential(path, rec.z.back());
  rec.objective = rec.f_value + rec.v_value + rec.energy;
  return rec;
}

SampleRecord ControlledEnsemble::simulate_with_grad(const DriftParameters& theta,
                                                    int sample,
                                                    Eigen::MatrixXd& grad) const {
  const EnhancedGFFPath path = sample_path(*lat_, tg_, ens_, sample);
  const int L = lat_->size();
  const int nf = theta.n_features();
  const double dt = tg_.dt();
  const double a2 = lat_->cell_area();

  SampleRecord rec;
  rec.z.reserve(tg_.n_steps + 1);
  rec.z.push_back(Field::Zero(L, L));
  std::vector<StepContext> ctx;
  std::vector<std::vector<Field>> feats(tg_.n_steps);
  std::vector<Field> us;
  ctx.reserve(tg_.n_steps);
  us.reserve(tg_.n_steps);

  for (int j = 0; j < tg_.n_steps; ++j) {
    ctx.push_back(make_context(path, j, inter_));
    Field u = Field::Zero(L, L);
    feats[j].reserve(nf);
    for (int f = 0; f < nf; ++f) {
      feats[j].push_back(
          feature_value(theta.features[f], ctx[j], rec.z[j], inter_, obs_, *lat_));
      u += theta.coeffs(j, f) * feats[j][f];
    }
    const Field v = apply_spectral(*lat_, -1.0, u);
    rec.energy += 0.5 * dt * inner_product(*lat_, u, v);
    rec.z.push_back(rec.z[j] - dt * v);
    us.push_back(std::move(u));
  }
  rec.y1 = std::sqrt(inter_.hbar) * path.w1() + rec.z.back();
  rec.f_value = obs_.value(*lat_, rec.y1);
  rec.v_value = terminal_potential(path, rec.z.back());
  rec.objective = rec.f_value + rec.v_value + rec.energy;

  // Adjoint sweep: lam_j = d(objective)/d(Z_j) as raw partials.
  grad = Eigen::MatrixXd::Zero(tg_.n_steps, nf);
  Field lam = a2 * (obs_.gradient(*lat_, rec.y1) +
                    terminal_potential_grad(path, rec.z.back()));
  for (int j = tg_.n_steps - 1; j >= 0; --j) {
    const Field ubar = dt * apply_spectral(*lat_, -1.0, a2 * us[j] - lam);
    for (int f = 0; f < nf; ++f) {
      grad(j, f) = (feats[j][f] * ubar).sum();
      const double c = theta.coeffs(j, f);
      if (c != 0.0) {
        lam += feature_adjoint(theta.features[f], c, ctx[j], rec.z[j], ubar,
                               inter_, obs_, *lat_);
      }
    }
  }
  return rec;
}

ObjectiveEstimate objective(const ControlledEnsemble& ce,
                            const DriftParameters& theta) {
  ObjectiveEstimate est;
  est.per_sample.resize(ce.n_samples());
  parallel_for(ce.n_samples(), [&](int i) {
    est.per_sample[i] = ce.simulate(theta, i).objective;
  });
  for (int i = 0; i < ce.n_samples(); ++i) {
    if (!std::isfinite(est.per_sample[i])) {
      throw std::runtime_error("objective: non-finite value at sample " +
                               std::to_string(i));
    }
  }
  const MeanSE ms = mean_se(est.per_sample);
  est.value = ms.mean;
  est.se = ms.se;
  return est;
}

Eigen::MatrixXd objective_gradient(const ControlledEnsemble& ce,
                                   const DriftParameters& theta,
                                   GradientMode mode, double fd_step) {
  const int n = ce.n_samples();
  if (mode == GradientMode::reverse) {
    std::vector<Eigen::MatrixXd> slots(n);
    parallel_for(n, [&](int i) {
      Eigen::MatrixXd g;
      ce.simulate_with_grad(theta, i, g);
      slots[i] = std::move(g);
    });
    Eigen::MatrixXd acc =
        Eigen::MatrixXd::Zero(theta.n_steps(), theta.n_features());
    for (int i = 0; i < n; ++i) acc += slots[i];
    return acc / n;
  }
  // Coefficientwise central differences: the slow oracle.
  Eigen::MatrixXd g(theta.n_steps(), theta.n_features());
  for (int j = 0; j < theta.n_steps(); ++j) {
    for (int f = 0; f < theta.n_features(); ++f) {
      DriftParameters tp = theta, tm = theta;
      tp.coeffs(j, f) += fd_step;
      tm.coeffs(j, f) -= fd_step;
      g(j, f) =
          (objective(ce, tp).value - objective(ce, tm).value) / (2.0 * fd_step);
    }
  }
  return g;
}

namespace {

// Objective that maps non-finite samples to +inf instead of throwing;
// used inside the optimizer loop.
double lenient_objective(const ControlledEnsemble& ce,
                         const DriftParameters& theta, double* se,
                         std::vector<double>* per_sample) {
  std::vector<double> vals(ce.n_samples());
  parallel_for(ce.n_samples(), [&](int i) {
    vals[i] = ce.simulate(theta, i).objective;
  });
  for (double v : vals) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
  }
  const MeanSE ms = mean_se(vals);
  if (se) *se = ms.se;
  if (per_sample) *per_sample = std::move(vals);
  return ms.mean;
}

}  // namespace

namespace {

// One full-batch pass: objective (or +inf when any sample is non-finite)
// and its reverse-mode gradient.
double evaluate_with_grad(const ControlledEnsemble& ce,
                          const DriftParameters& theta, double* se,
                          Eigen::MatrixXd& grad) {
  const int n = ce.n_samples();
  std::vector<Eigen::MatrixXd> slots(n);
  std::vector<double> vals(n);
  parallel_for(n, [&](int i) {
    Eigen::MatrixXd g;
    vals[i] = ce.simulate_with_grad(theta, i, g).objective;
    slots[i] = std::move(g);
  });
  grad = Eigen::MatrixXd::Zero(theta.n_steps(), theta.n_features());
  bool finite = true;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(vals[i])) finite = false;
    grad += slots[i];
  }
  grad /= n;
  if (!finite) return std::numeric_limits<double>::infinity();
  const MeanSE ms = mean_se(vals);
  if (se) *se = ms.se;
  return ms.mean;
}

}  // namespace

OptResult optimize(const ControlledEnsemble& ce, const DriftParameters& theta0,
                   const OptConfig& cfg) {
  OptResult res;
  res.theta = theta0;
  double step = cfg.step;
  int rising = 0;

  // Descent with geometric decay; a step that raises the objective on the
  // fixed ensemble is rejected and the step halved, so the trace never
  // increases (exact under CRN).
  Eigen::MatrixXd grad;
  double se = 0.0;
  double value;
  if (cfg.mode == GradientMode::reverse) {
    value = evaluate_with_grad(ce, res.theta, &se, grad);
  } else {
    value = lenient_objective(ce, res.theta, &se, nullptr);
    grad = objective_gradient(ce, res.theta, GradientMode::finite_difference,
                              cfg.fd_step);
  }
  for (int it = 0; it < cfg.iterations; ++it) {
    const double gnorm = grad.norm();
    res.trace.push_back({it, value, se, gnorm, step});
    if (cfg.grad_tol > 0.0 && gnorm < cfg.grad_tol) {
      res.grad_converged = true;
      break;
    }
    DriftParameters cand = res.theta;
    cand.coeffs -= step * grad;
    Eigen::MatrixXd cand_grad;
    double cand_se = 0.0;
    double cand_value;
    if (cfg.mode == GradientMode::reverse) {
      cand_value = evaluate_with_grad(ce, cand, &cand_se, cand_grad);
    } else {
      cand_value = lenient_objective(ce, cand, &cand_se, nullptr);
      if (std::isfinite(cand_value)) {
        cand_grad = objective_gradient(
            ce, cand, GradientMode::finite_difference, cfg.fd_step);
      }
    }
    if (cand_value <= value) {
      res.theta = std::move(cand);
      value = cand_value;
      se = cand_se;
      grad = std::move(cand_grad);
      step *= cfg.decay;
      rising = 0;
    } else {
      step *= 0.5;
      if (++rising >= 50) {
        throw std::runtime_error(
            "optimize: objective increased for 50 consecutive steps "
            "(diverged at iteration " + std::to_string(it) + ")");
      }
    }
  }

  res.trace.push_back({static_cast<int>(res.trace.size()), value, se,
                       grad.size() > 0 ? grad.norm() : 0.0, step});
  res.improved = value <= res.trace.front().objective;
  return res;
}

OptimizedValue solve_bd(const LatticeSpec& lat, const TimeGrid& tg,
                        const NoiseEnsemble& ens, const InteractionSpec& inter,
                        const Observable& f, const OptConfig& cfg) {
  const ControlledEnsemble ce(lat, tg, ens, inter, f);
  const DriftParameters theta0 =
      DriftParameters::zero(feature_library(inter, f), tg.n_steps);
  OptResult res = optimize(ce, theta0, cfg);
  OptimizedValue out;
  out.value = res.trace.back().objective;
  out.se = res.trace.back().se;
  out.theta = std::move(res.theta);
  out.trace = std::move(res.trace);
  return out;
}

ValueSE paired_difference(const ControlledEnsemble& a,
                          const DriftParameters& theta_a,
                          const ControlledEnsemble& b,
                          const DriftParameters& theta_b) {
  if (a.n_samples() != b.n_samples()) {
    throw std::invalid_argument("paired_difference: ensemble size mismatch");
  }
  std::vector<double> d(a.n_samples());
  parallel_for(a.n_samples(), [&](int i) {
    d[i] = a.simulate(theta_a, i).objective - b.simulate(theta_b, i).objective;
  });
  const MeanSE ms = mean_se(d);
  return {ms.mean, ms.se};
}

TestControl bump_control(const LatticeSpec& lat, double radius, double height) {
  TestControl tc;
  tc.kind = TestControl::Kind::bump;
  tc.name = "bump";
  tc.profile = bump_field(lat, radius, height);
  return tc;
}

TestControl frozen_random_control() {
  TestControl tc;
  tc.kind = TestControl::Kind::frozen_random;
  tc.name = "frozen_random";
  return tc;
}

TestControl rho_z_control(const WeightSpec& w) {
  TestControl tc;
  tc.kind = TestControl::Kind::rho_z;
  tc.name = "rho_z";
  tc.weight = w;
  return tc;
}

TestControl grad_probe_control(double eta) {
  TestControl tc;
  tc.kind = TestControl::Kind::grad_probe;
  tc.name = "grad_probe";
  tc.eta = eta;
  return tc;
}

TestControl explicit_control(std::vector<Field> path, std::string name) {
  TestControl tc;
  tc.kind = TestControl::Kind::explicit_path;
  tc.name = std::move(name);
  tc.path = std::move(path);
  return tc;
}

std::vector<TestControl> standard_test_controls(const LatticeSpec& lat,
                                                const WeightSpec& w) {
  return {bump_control(lat, lat.side_length() / 4.0), frozen_random_control(),
          rho_z_control(w), grad_probe_control(1.0)};
}

std::vector<Field> control_path(const ControlledEnsemble& ce,
                                const DriftParameters& theta,
                                const EnhancedGFFPath& path,
                                const SampleRecord& rec, const TestControl& tc) {
  const LatticeSpec& lat = ce.lattice();
  const TimeGrid& tg = ce.grid();
  const int L = lat.size();
  std::vector<Field> k;
  k.reserve(tg.n_steps + 1);
  switch (tc.kind) {
    case TestControl::Kind::bump: {
      for (int j = 0; j <= tg.n_steps; ++j) k.push_back(tg.time(j) * tc.profile);
      break;
    }
    case TestControl::Kind::frozen_random: {
      if (tg.n_steps < 2) {
        throw std::invalid_argument("frozen_random control needs n_t >= 2");
      }
      // Smooth field built from the first-step noise, ramped in afterwards.
      const Field raw = path.x_increment(0);
      const Field r = apply_spectral(lat, -1.0, raw);
      const double t1 = tg.time(1);
      k.push_back(Field::Zero(L, L));
      for (int j = 1; j <= tg.n_steps; ++j) {
        k.push_back(((tg.time(j) - t1) / (1.0 - t1)) * r);
      }
      break;
    }
    case TestControl::Kind::rho_z: {
      const Field rho = rho_field(tc.weight, lat);
      for (int j = 0; j <= tg.n_steps; ++j) k.push_back(rho * rec.z[j]);
      break;
    }
    case TestControl::Kind::grad_probe: {
      k.push_back(Field::Zero(L, L));
      for (int j = 0; j < tg.n_steps; ++j) {
        Field source = Field::Zero(L, L);
        const double sq = std::sqrt(ce.interaction().hbar);
        const Field y = sq * path.w(j) + rec.z[j];
        if (ce.interaction().kind == InteractionKind::phi4) {
          source = grad_potential_phi4(lat, ce.interaction(),
                                       enhanced_at(path, j, ce.interaction().hbar),
                                       rec.z[j]);
        } else if (ce.interaction().kind == InteractionKind::exponential) {
          const InteractionSpec& is = ce.interaction();
          const double s2 = is.hbar * path.sigma2(j);
          const Field gmc =
              (is.beta * sq * path.w(j) - 0.5 * is.beta * is.beta * s2).exp();
          source = grad_potential_exp(lat, is, gmc, rec.z[j]);
        }
        if (!ce.observable().is_zero()) {
          source += ce.observable().gradient(lat, y);
        }
        k.push_back(k.back() -
                    tg.dt() * tc.eta * apply_spectral(lat, -1.0, source));
      }
      break;
    }
    case TestControl::Kind::explicit_path: {
      if (static_cast<int>(tc.path.size()) != tg.n_steps + 1) {
        throw std::invalid_argument("explicit control path length mismatch");
      }
      k = tc.path;
      break;
    }
  }
  return k;
}

namespace {

struct PairingResult {
  std::vector<double> terms;
};

// E[grad G(W+Z).H + 2 E(Z,K->H)] sample terms; decay_weight turns K into
// H = rho^{-2N} K before pairing.
std::vector<double> residual_samples(
    const ControlledEnsemble& ce, const DriftParameters& theta,
    const TestControl& tc,
    const std::optional<std::pair<WeightSpec, double>>& decay_weight) {
  const LatticeSpec& lat = ce.lattice();
  std::vector<double> out(ce.n_samples());
  std::optional<Field> wfield;
  if (decay_weight) {
    wfield = rho_power(decay_weight->first, lat, -2.0 * decay_weight->second);
  }
  parallel_for(ce.n_samples(), [&](int i) {
    const EnhancedGFFPath path = sample_path(lat, ce.grid(), ce.noise(), i);
    const SampleRecord rec = ce.simulate(theta, path);
    std::vector<Field> k = control_path(ce, theta, path, rec, tc);
    if (wfield) {
      for (Field& f : k) f *= *wfield;
    }
    const Field grad_g = ce.observable().gradient(lat, rec.y1) +
                         ce.terminal_potential_grad(path, rec.z.back());
    out[i] = inner_product(lat, grad_g, k.back()) +
             2.0 * bilinear_energy(lat, ce.grid(), rec.z, k);
  });
  return out;
}

}  // namespace

ValueSE gateaux(const ControlledEnsemble& ce, const DriftParameters& theta,
                const TestControl& tc) {
  const std::vector<double> s = residual_samples(ce, theta, tc, std::nullopt);
  const MeanSE ms = mean_se(s);
  return {ms.mean, ms.se};
}

ValueSE el_residual(const ControlledEnsemble& ce, const DriftParameters& theta,
                    const TestControl& tc,
                    std::optional<std::pair<WeightSpec, double>> decay_weight) {
  const std::vector<double> s = residual_samples(ce, theta, tc, decay_weight);
  const MeanSE ms = mean_se(s);
  return {ms.mean, ms.se};
}

ValueSE gateaux_fd(const ControlledEnsemble& ce, const DriftParameters& theta,
                   const TestControl& tc, double sigma) {
  const LatticeSpec& lat = ce.lattice();
  std::vector<double> diffs(ce.n_samples());
  parallel_for(ce.n_samples(), [&](int i) {
    const EnhancedGFFPath path = sample_path(lat, ce.grid(), ce.noise(), i);
    const SampleRecord rec = ce.simulate(theta, path);
    const std::vector<Field> k = control_path(ce, theta, path, rec, tc);
    auto eval = [&](double s) {
      std::vector<Field> zp(rec.z.size());
      for (std::size_t j = 0; j < rec.z.size(); ++j) zp[j] = rec.z[j] + s * k[j];
      const Field y = std::sqrt(ce.interaction().hbar) * path.w1() + zp.back();
      return ce.observable().value(lat, y) +
             ce.terminal_potential(path, zp.back()) +
             path_energy(lat, ce.grid(), zp);
    };
    diffs[i] = (eval(sigma) - eval(-sigma)) / (2.0 * sigma);
  });
  const MeanSE ms = mean_se(diffs);
  return {ms.mean, ms.se};
}

ValueSE second_variation(const ControlledEnsemble& ce,
                         const DriftParameters& theta, const TestControl& tc) {
  const LatticeSpec& lat = ce.lattice();
  std::vector<double> vals(ce.n_samples());
  parallel_for(ce.n_samples(), [&](int i) {
    const EnhancedGFFPath path = sample_path(lat, ce.grid(), ce.noise(), i);
    const SampleRecord rec = ce.simulate(theta, path);
    const std::vector<Field> k = control_path(ce, theta, path, rec, tc);
    const Field& k1 = k.back();
    double hess = 0.0;
    const InteractionSpec& is = ce.interaction();
    if (is.kind == InteractionKind::phi4) {
      const EnhancedFields enh = enhanced_at(path, ce.grid().n_steps, is.hbar);
      const Field h = 12.0 * is.lambda * is.cutoff *
                      (enh.wick2 + 2.0 * enh.w * rec.z.back() +
                       rec.z.back().square());
      hess = lat.cell_area() * (h * k1.square()).sum();
    } else if (is.kind == InteractionKind::exponential) {
      const Field g = ce.terminal_potential_grad(path, rec.z.back());
      hess = lat.cell_area() * (is.beta * g * k1.square()).sum();
    }
    if (!ce.observable().is_zero()) {
      hess += inner_product(lat, k1, ce.observable().hessian_apply(lat, k1));
    }
    vals[i] = hess + 2.0 * path_energy(lat, ce.grid(), k);
  });
  const MeanSE ms = mean_se(vals);
  return {ms.mean, ms.se};
}

AprioriReport apriori_bound(const ControlledEnsemble& ce,
                            const DriftParameters& theta, const WeightSpec& w) {
  const LatticeSpec& lat = ce.lattice();
  const InteractionSpec& is = ce.interaction();
  if (is.kind != InteractionKind::phi4) {
    throw std::invalid_argument("apriori_bound: phi4 interaction required");
  }
  const Field rho = rho_field(w, lat);
  const Field sqrt_rho = rho_power(w, lat, 0.5);
  const int n = ce.n_samples();
  std::vector<double> lhs(n), comm(n), gradf(n), wick(n);
  parallel_for(n, [&](int i) {
    const EnhancedGFFPath path = sample_path(lat, ce.grid(), ce.noise(), i);
    const SampleRecord rec = ce.simulate(theta, path);
    const Field& z1 = rec.z.back();

    std::vector<Field> weighted(rec.z.size()), rho_z(rec.z.size());
    for (std::size_t j = 0; j < rec.z.size(); ++j) {
      weighted[j] = sqrt_rho * rec.z[j];
      rho_z[j] = rho * rec.z[j];
    }
    const double e_weighted = path_energy(lat, ce.grid(), weighted);
    const double quartic = 2.0 * is.lambda * lat.cell_area() *
                           (is.cutoff * rho * z1.square().square()).sum();
    lhs[i] = quartic + e_weighted;

    comm[i] = -0.5 * (2.0 * bilinear_energy(lat, ce.grid(), rec.z, rho_z) -
                      2.0 * e_weighted);
    gradf[i] = ce.observable().is_zero()
                   ? 0.0
                   : -0.5 * inner_product(
                         lat, ce.observable().gradient(lat, rec.y1), rho * z1);
    const EnhancedFields enh = enhanced_at(path, ce.grid().n_steps, is.hbar);
    wick[i] = -0.5 * is.lambda * lat.cell_area() *
              (is.cutoff * rho *
               (4.0 * enh.wick3 * z1 + 12.0 * enh.wick2 * z1.square() +
                12.0 * enh.w * z1.cube()))
                  .sum();
  });
  AprioriReport rep;
  const MeanSE ml = mean_se(lhs);
  rep.lhs = ml.mean;
  rep.lhs_se = ml.se;
  rep.rhs_terms["commutator"] = mean_se(comm).mean;
  rep.rhs_terms["grad_f"] = mean_se(gradf).mean;
  rep.rhs_terms["wick"] = mean_se(wick).mean;
  double denom = 1.0;
  for (const auto& [k, v] : rep.rhs_terms) denom += std::abs(v);
  rep.ratio = rep.lhs / denom;
  return rep;
}

SignReport sign_diagnostic_exp(const ControlledEnsemble& ce,
                               const DriftParameters& theta, double tol) {
  if (ce.interaction().kind != InteractionKind::exponential) {
    throw std::invalid_argument("sign_diagnostic_exp: exponential model only");
  }
  const int n = ce.n_samples();
  std::vector<double> site_means(n), maxima(n), frac(n);
  parallel_for(n, [&](int i) {
    const SampleRecord rec = ce.simulate(theta, i);
    const Field& z1 = rec.z.back();
    site_means[i] = z1.mean();
    maxima[i] = z1.maxCoeff();
    frac[i] = static_cast<double>((z1 > tol).count()) / z1.size();
  });
  SignReport rep;
  const MeanSE ms = mean_se(site_means);
  rep.mean_site_mean = ms.mean;
  rep.se_site_mean = ms.se;
  rep.mean_z1_max = mean_se(maxima).mean;
  rep.frac_positive = mean_se(frac).mean;
  rep.pass = rep.mean_site_mean <= 2.0 * rep.se_site_mean;
  return rep;
}

}  // namespace bdq
