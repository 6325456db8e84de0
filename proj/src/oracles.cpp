#include "bdq/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bdq/gff.hpp"
#include "bdq/parallel.hpp"
#include "bdq/rng.hpp"
#include "bdq/stats.hpp"

namespace bdq {

PotentialTarget gibbs_potential(const LatticeSpec& lat,
                                const InteractionSpec& spec) {
  PotentialTarget t;
  switch (spec.kind) {
    case InteractionKind::none:
      t.value = [](const Field&) { return 0.0; };
      t.grad = [&lat](const Field&) {
        return Field::Zero(lat.size(), lat.size());
      };
      break;
    case InteractionKind::phi4: {
      const double s2 = spec.hbar * gff_variance(lat);
      t.value = [&lat, spec, s2](const Field& phi) {
        return potential_phi4_direct(lat, spec, phi, s2);
      };
      t.grad = [spec, s2](const Field& phi) {
        return Field(spec.lambda * spec.cutoff *
                     (4.0 * phi.cube() - 12.0 * s2 * phi));
      };
      break;
    }
    case InteractionKind::exponential: {
      const double s2 = spec.hbar * gff_variance(lat);
      const double shift = -0.5 * spec.beta * spec.beta * s2;
      t.value = [&lat, spec, shift](const Field& phi) {
        return spec.lambda * lat.cell_area() *
               (spec.cutoff * (spec.beta * phi + shift).exp()).sum();
      };
      t.grad = [spec, shift](const Field& phi) {
        return Field(spec.lambda * spec.beta * spec.cutoff *
                     (spec.beta * phi + shift).exp());
      };
      break;
    }
  }
  return t;
}

namespace {

// Exact free-field draw via the spectral square root.
Field gff_draw(const LatticeSpec& lat, const NoiseEnsemble& ens, int sample,
               int step, NoiseStream stream) {
  return apply_spectral(lat, -0.5,
                        ens.normal_field(lat, sample, step, stream) /
                            lat.spacing());
}

struct ChainOutput {
  std::vector<Field> samples;
  std::vector<double> phi2_trace;
  double acceptance = 0.0;
};

ChainOutput run_chain_pcn(const LatticeSpec& lat, const PotentialTarget& target,
                          const MCMCConfig& cfg, int chain) {
  const NoiseEnsemble ens(cfg.seed, cfg.n_chains);
  const double s = cfg.step_size;
  const double keep = std::sqrt(std::max(0.0, 1.0 - s * s));

  // Overdispersed start: alternate chains start from a widened free draw.
  Field phi = gff_draw(lat, ens, chain, 0, NoiseStream::kMcmc);
  if (chain % 2 == 1) phi *= 2.0;
  double v = target.value(phi);

  ChainOutput out;
  const int total = cfg.burn_in + cfg.n_samples * cfg.thin;
  long accepted = 0;
  for (int it = 1; it <= total; ++it) {
    const Field prop =
        keep * phi + s * gff_draw(lat, ens, chain, 4 * it, NoiseStream::kMcmc);
    const double vp = target.value(prop);
    const double u =
        u01(counter_hash(cfg.seed ^ 0x9e1full, chain, 4 * it + 1, 0));
    if (std::log(u) < -(vp - v)) {
      phi = prop;
      v = vp;
      ++accepted;
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.samples.push_back(phi);
      out.phi2_trace.push_back(lat.cell_area() * phi.square().sum());
    }
  }
  out.acceptance = static_cast<double>(accepted) / total;
  return out;
}

ChainOutput run_chain_hmc(const LatticeSpec& lat, const PotentialTarget& target,
                          const MCMCConfig& cfg, int chain) {
  const NoiseEnsemble ens(cfg.seed, cfg.n_chains);
  const double a2 = lat.cell_area();

  auto action = [&](const Field& phi) {
    return target.value(phi) +
           0.5 * inner_product(lat, phi, apply_spectral(lat, 1.0, phi));
  };
  // Raw-coordinate gradient of the action.
  auto action_grad = [&](const Field& phi) {
    return Field(a2 * (apply_spectral(lat, 1.0, phi) + target.grad(phi)));
  };

  Field phi = gff_draw(lat, ens, chain, 0, NoiseStream::kMcmc);
  if (chain % 2 == 1) phi *= 2.0;

  ChainOutput out;
  const int total = cfg.burn_in + cfg.n_samples * cfg.thin;
  long accepted = 0;
  for (int it = 1; it <= total; ++it) {
    // Momentum with covariance M = a^2 (m^2 - Delta) in raw coordinates.
    Field p = lat.spacing() * apply_spectral(lat, 0.5,
                                             ens.normal_field(lat, chain, 4 * it,
                                                              NoiseStream::kMcmc));
    const Field phi0 = phi;
    auto kinetic = [&](const Field& mom) {
      return 0.5 / a2 *
             (mom * apply_spectral(lat, -1.0, mom)).sum();
    };
    const double h0 = action(phi0) + kinetic(p);

    Field q = phi0;
    const double eps = cfg.step_size;
    p -= 0.5 * eps * action_grad(q);
    for (int l = 0; l < cfg.leapfrog_steps; ++l) {
      q += eps / a2 * apply_spectral(lat, -1.0, p);
      if (l + 1 < cfg.leapfrog_steps) p -= eps * action_grad(q);
    }
    p -= 0.5 * eps * action_grad(q);
    const double h1 = action(q) + kinetic(p);

    const double u =
        u01(counter_hash(cfg.seed ^ 0x9e1full, chain, 4 * it + 1, 0));
    if (std::isfinite(h1) && std::log(u) < -(h1 - h0)) {
      phi = q;
      ++accepted;
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.samples.push_back(phi);
      out.phi2_trace.push_back(lat.cell_area() * phi.square().sum());
    }
  }
  out.acceptance = static_cast<double>(accepted) / total;
  return out;
}

}  // namespace

MCMCResult mcmc_sample(const LatticeSpec& lat, const PotentialTarget& target,
                       const MCMCConfig& cfg) {
  std::vector<ChainOutput> chains(cfg.n_chains);
  parallel_for(cfg.n_chains, [&](int c) {
    chains[c] = cfg.algorithm == MCMCConfig::Algorithm::rwm
                    ? run_chain_pcn(lat, target, cfg, c)
                    : run_chain_hmc(lat, target, cfg, c);
  });
  MCMCResult res;
  double acc = 0.0;
  std::vector<std::vector<double>> traces;
  for (const auto& c : chains) {
    res.samples.insert(res.samples.end(), c.samples.begin(), c.samples.end());
    acc += c.acceptance;
    traces.push_back(c.phi2_trace);
  }
  res.acceptance = acc / cfg.n_chains;
  if (res.acceptance == 0.0) {
    throw std::runtime_error("mcmc_sample: zero acceptance after burn-in");
  }
  res.acceptance_warning =
      res.acceptance < cfg.accept_low || res.acceptance > cfg.accept_high;
  res.r_hat = gelman_rubin(traces);
  return res;
}

MCMCResult mcmc_sample(const LatticeSpec& lat, const InteractionSpec& spec,
                       const MCMCConfig& cfg) {
  return mcmc_sample(lat, gibbs_potential(lat, spec), cfg);
}

Estimate log_partition_mc(const LatticeSpec& lat,
                          const std::function<double(const Field&)>& potential,
                          int n_samples, std::uint64_t seed) {
  if (n_samples < 1000) {
    throw std::invalid_argument("log_partition_mc: need >= 1e3 samples");
  }
  const NoiseEnsemble ens(seed, n_samples);
  std::vector<double> exponents(n_samples);
  parallel_for(n_samples, [&](int i) {
    const Field w = gff_draw(lat, ens, i, 0, NoiseStream::kDirect);
    exponents[i] = -potential(w);
  });
  bool any_finite = false;
  for (double e : exponents) {
    if (std::isfinite(e) && e > -700.0) any_finite = true;
  }
  if (!any_finite) throw std::runtime_error("log_partition_mc: all weights zero");
  const LogMeanExp lme = neg_log_mean_exp(exponents);
  Estimate est;
  est.value = lme.value;
  est.se = lme.se;
  est.ess = lme.ess;
  est.bias_warning = lme.ess < 0.05 * n_samples;
  return est;
}

Estimate log_partition_mc(const LatticeSpec& lat, const InteractionSpec& spec,
                          int n_samples, std::uint64_t seed) {
  const PotentialTarget t = gibbs_potential(lat, spec);
  return log_partition_mc(lat, t.value, n_samples, seed);
}

CouplingFamily coupling_family(const LatticeSpec& lat,
                               const InteractionSpec& spec) {
  CouplingFamily fam;
  InteractionSpec unit = spec;
  unit.lambda = 1.0;
  const PotentialTarget t = gibbs_potential(lat, unit);
  fam.value = [t](const Field& phi, double c) { return c * t.value(phi); };
  fam.dvalue = [t](const Field& phi, double) { return t.value(phi); };
  fam.grad = [t](const Field& phi, double c) { return Field(c * t.grad(phi)); };
  return fam;
}

TIEstimate log_partition_ti(const LatticeSpec& lat, const CouplingFamily& fam,
                            const std::vector<double>& grid,
                            const MCMCConfig& cfg) {
  if (grid.size() < 5 || grid.front() != 0.0) {
    throw std::invalid_argument(
        "log_partition_ti: coupling grid needs >= 5 points starting at 0");
  }
  const std::size_t n = grid.size();
  std::vector<double> means(n), ses(n);
  for (std::size_t g = 0; g < n; ++g) {
    const double c = grid[g];
    PotentialTarget t;
    t.value = [&fam, c](const Field& phi) { return fam.value(phi, c); };
    t.grad = [&fam, c](const Field& phi) { return fam.grad(phi, c); };
    MCMCConfig point_cfg = cfg;
    point_cfg.seed = cfg.seed + g;
    const MCMCResult res = mcmc_sample(lat, t, point_cfg);
    std::vector<double> vals(res.samples.size());
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
      vals[i] = fam.dvalue(res.samples[i], c);
    }
    means[g] = mean_se(vals).mean;
    ses[g] = batch_means_se(vals);
  }
  TIEstimate est;
  est.integrand = means;
  double value = 0.0, var = 0.0;
  for (std::size_t g = 0; g + 1 < n; ++g) {
    const double h = grid[g + 1] - grid[g];
    value += 0.5 * h * (means[g] + means[g + 1]);
    var += 0.25 * h * h * (ses[g] * ses[g] + ses[g + 1] * ses[g + 1]);
  }
  est.value = value;
  est.se = std::sqrt(var);
  for (std::size_t g = 0; g + 1 < n; ++g) {
    if (means[g + 1] < means[g] - 3.0 * (ses[g] + ses[g + 1])) est.monotone = false;
  }
  return est;
}

Estimate laplace_mc(const LatticeSpec& lat, const InteractionSpec& spec,
                    const Observable& f, const MCMCConfig& cfg) {
  const MCMCResult res = mcmc_sample(lat, spec, cfg);
  std::vector<double> exponents(res.samples.size());
  for (std::size_t i = 0; i < res.samples.size(); ++i) {
    exponents[i] = -f.value(lat, res.samples[i]);
  }
  const double emax = *std::max_element(exponents.begin(), exponents.end());
  std::vector<double> shifted(exponents.size());
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    shifted[i] = std::exp(exponents[i] - emax);
  }
  const MeanSE ms = mean_se(shifted);
  Estimate est;
  est.value = -(emax + std::log(ms.mean));
  est.se = batch_means_se(shifted) / ms.mean;
  double s = 0.0, s2 = 0.0;
  for (double r : shifted) {
    s += r;
    s2 += r * r;
  }
  est.ess = s2 > 0.0 ? s * s / s2 : 0.0;
  est.bias_warning = est.ess < 0.05 * exponents.size();
  return est;
}

std::vector<MomentObservable> standard_moment_observables(
    const LatticeSpec& lat, const WeightSpec& rho_w, const Field& mask,
    const std::vector<std::pair<int, int>>& offsets, const Field& bump) {
  std::vector<MomentObservable> obs;
  obs.push_back({"site_mean", [](const Field& phi) { return phi.mean(); }});
  const Field rho = rho_field(rho_w, lat);
  const double a2 = lat.cell_area();
  obs.push_back({"rho_phi2", [rho, a2](const Field& phi) {
                   return a2 * (rho * phi.square()).sum();
                 }});
  const int L = lat.size();
  for (auto [dx, dy] : offsets) {
    obs.push_back({"two_point_" + std::to_string(dx) + "_" + std::to_string(dy),
                   [dx, dy, L](const Field& phi) {
                     double acc = 0.0;
                     for (int j = 0; j < L; ++j) {
                       for (int i = 0; i < L; ++i) {
                         acc += phi(i, j) * phi((i + dx) % L, (j + dy) % L);
                       }
                     }
                     return acc / (L * L);
                   }});
  }
  const double s2 = gff_variance(lat);
  obs.push_back({"masked_wick4", [mask, a2, s2](const Field& phi) {
                   const Field p2 = phi.square();
                   return a2 * (mask * (p2.square() - 6.0 * s2 * p2 +
                                        3.0 * s2 * s2))
                                   .sum();
                 }});
  obs.push_back({"bump_average", [bump, a2](const Field& phi) {
                   return a2 * (bump * phi).sum();
                 }});
  return obs;
}

MomentReport moment_compare(const std::vector<Field>& a, bool a_correlated,
                            const std::vector<Field>& b, bool b_correlated,
                            const std::vector<MomentObservable>& observables) {
  MomentReport rep;
  for (const auto& o : observables) {
    std::vector<double> va(a.size()), vb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) va[i] = o.eval(a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) vb[i] = o.eval(b[i]);
    MomentRow row;
    row.id = o.id;
    row.value_a = mean_se(va).mean;
    row.se_a = a_correlated ? batch_means_se(va) : mean_se(va).se;
    row.value_b = mean_se(vb).mean;
    row.se_b = b_correlated ? batch_means_se(vb) : mean_se(vb).se;
    row.z = z_score(row.value_a, row.se_a, row.value_b, row.se_b);
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<ExpMomentRow> exp_moment_probe(
    const LatticeSpec& lat, const std::vector<Field>& ensemble,
    const WeightSpec& w, const std::vector<std::pair<double, double>>& norms,
    double delta) {
  std::vector<ExpMomentRow> rows;
  for (auto [s, p] : norms) {
    ExpMomentRow row;
    row.s = s;
    row.p = p;
    std::vector<double> vals;
    vals.reserve(ensemble.size());
    for (const Field& phi : ensemble) {
      const double nrm = weighted_sobolev_norm(lat, phi, w, s, p);
      const double v = std::exp(delta * std::pow(nrm, p));
      if (!std::isfinite(v)) {
        row.overflow = true;
        break;
      }
      vals.push_back(v);
    }
    if (!row.overflow) {
      const MeanSE ms = mean_se(vals);
      row.value = ms.mean;
      row.se = ms.se;
      double sum = 0.0, sum2 = 0.0;
      for (double v : vals) {
        sum += v;
        sum2 += v * v;
      }
      row.ess = sum2 > 0.0 ? sum * sum / sum2 : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bdq
