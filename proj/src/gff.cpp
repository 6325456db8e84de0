#include "bdq/gff.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "bdq/stats.hpp"

namespace bdq {

double gff_variance(const LatticeSpec& lat) {
  const double m2 = lat.mass() * lat.mass();
  const double ell2 = lat.side_length() * lat.side_length();
  return (1.0 / (m2 + lat.mode_eigenvalues())).sum() / ell2;
}

double wick_sigma(const LatticeSpec& lat, double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("wick_sigma: t in [0,1]");
  return t * gff_variance(lat);
}

EnhancedGFFPath::EnhancedGFFPath(const LatticeSpec& lat, const TimeGrid& tg,
                                 std::vector<Field> x_increments)
    : lat_(&lat), tg_(tg), g0_(gff_variance(lat)), xinc_(std::move(x_increments)) {
  if (static_cast<int>(xinc_.size()) != tg_.n_steps) {
    throw std::invalid_argument("path needs one X increment per step");
  }
  w_.reserve(tg_.n_steps + 1);
  w_.push_back(Field::Zero(lat.size(), lat.size()));
  for (int j = 0; j < tg_.n_steps; ++j) {
    w_.push_back(w_.back() + apply_spectral(lat, -0.5, xinc_[j]));
  }
}

double EnhancedGFFPath::sigma2(int j) const { return tg_.time(j) * g0_; }

Field EnhancedGFFPath::wick2(int j) const {
  return w_[j].square() - sigma2(j);
}

Field EnhancedGFFPath::wick3(int j) const {
  return w_[j].cube() - 3.0 * sigma2(j) * w_[j];
}

EnhancedGFFPath sample_path(const LatticeSpec& lat, const TimeGrid& tg,
                            const NoiseEnsemble& ens, int sample) {
  if (sample < 0 || sample >= ens.n_samples()) {
    throw std::out_of_range("sample index outside ensemble");
  }
  const double scale = std::sqrt(tg.dt()) / lat.spacing();
  std::vector<Field> inc;
  inc.reserve(tg.n_steps);
  for (int j = 0; j < tg.n_steps; ++j) {
    inc.push_back(scale * ens.normal_field(lat, sample, j));
  }
  return EnhancedGFFPath(lat, tg, std::move(inc));
}

std::pair<Field, Field> enhance(const EnhancedGFFPath& path, int j) {
  return {path.wick2(j), path.wick3(j)};
}

Field gmc_density(const LatticeSpec& lat, const Field& w1, double beta) {
  if (!w1.allFinite()) {
    throw std::invalid_argument("gmc_density: non-finite field");
  }
  if (beta * beta >= 8.0 * std::numbers::pi) {
    static std::once_flag warned;
    std::call_once(warned, [] {
      std::cerr << "gmc_density: beta^2 >= 8*pi, supercritical diagnostic run\n";
    });
  }
  const double s2 = gff_variance(lat);
  return (beta * w1 - 0.5 * beta * beta * s2).exp();
}

GmcScalingReport gmc_scaling_experiment(const LatticeSpec& lat,
                                        const NoiseEnsemble& ens, double beta,
                                        double p,
                                        const std::vector<double>& radii) {
  if (radii.size() < 3) {
    throw std::invalid_argument("gmc scaling needs >= 3 radii");
  }
  if (!(p > 1.0) || (beta != 0.0 && !(p < 8.0 * std::numbers::pi / (beta * beta)))) {
    throw std::invalid_argument("gmc scaling needs 1 < p < 8*pi/beta^2");
  }
  const int L = lat.size();
  const int n_r = static_cast<int>(radii.size());

  // Grid balls; the heavy-tailed p-th moments are translation averaged over
  // all ball centers via a convolution in mode space.
  std::vector<Spectrum> mask_spectra(n_r);
  std::vector<int> mask_counts(n_r);
  for (int r = 0; r < n_r; ++r) {
    const Field mask = [&] {
      Field m = Field::Zero(L, L);
      for (int j = 0; j < L; ++j) {
        for (int i = 0; i < L; ++i) {
          if (lat.periodic_dist2(i, j, 0, 0) < radii[r] * radii[r]) m(i, j) = 1.0;
        }
      }
      return m;
    }();
    mask_counts[r] = static_cast<int>(mask.sum());
    if (mask_counts[r] == 0) throw std::invalid_argument("empty scaling ball");
    mask_spectra[r] = forward_fft(mask);
  }

  const TimeGrid tg{1};
  std::vector<std::vector<double>> powers(n_r,
                                          std::vector<double>(ens.n_samples()));
  for (int s = 0; s < ens.n_samples(); ++s) {
    const EnhancedGFFPath path = sample_path(lat, tg, ens, s);
    const Field m = gmc_density(lat, path.w1(), beta);
    const Spectrum mf = forward_fft(m);
    for (int r = 0; r < n_r; ++r) {
      Spectrum prod = mf * mask_spectra[r];
      fft2(prod, true);
      const Field masses = lat.cell_area() * prod.real();
      powers[r][s] = masses.abs().pow(p).mean();
    }
  }

  GmcScalingReport rep;
  rep.theory_slope = 2.0 - (p - 1.0) * beta * beta / (4.0 * std::numbers::pi);
  std::vector<double> xs, ys;
  for (int r = 0; r < n_r; ++r) {
    const MeanSE ms = mean_se(powers[r]);
    GmcScalingRow row;
    row.radius = radii[r];
    row.radius_eff =
        std::sqrt(mask_counts[r] * lat.cell_area() / std::numbers::pi);
    row.moment = std::pow(ms.mean, 1.0 / p);
    row.se = ms.se / p * std::pow(ms.mean, 1.0 / p - 1.0);
    rep.rows.push_back(row);
    xs.push_back(std::log(row.radius_eff));
    ys.push_back(std::log(row.moment));
  }
  rep.slope = linear_fit(xs, ys).slope;
  return rep;
}

CovarianceReport covariance_check(const NoiseEnsemble& ens,
                                  const LatticeSpec& lat, const TimeGrid& tg,
                                  const std::vector<std::pair<int, int>>& offsets) {
  if (ens.n_samples() < 1000) {
    throw std::invalid_argument("covariance_check: need >= 1e3 samples");
  }
  const int L = lat.size();
  const int jmid = tg.n_steps / 2;
  const double tmid = tg.time(jmid);
  const Field green = green_function(lat);

  // Per-sample translation-averaged products, three statistics per offset.
  const std::size_t n_off = offsets.size();
  std::vector<std::vector<double>> full_full(n_off), mid_full(n_off);
  std::vector<double> incr_corr;
  for (int s = 0; s < ens.n_samples(); ++s) {
    const EnhancedGFFPath path = sample_path(lat, tg, ens, s);
    const Field& w1 = path.w1();
    const Field& wm = path.w(jmid);
    for (std::size_t o = 0; o < n_off; ++o) {
      const auto [dx, dy] = offsets[o];
      double acc11 = 0.0, accm1 = 0.0;
      for (int j = 0; j < L; ++j) {
        for (int i = 0; i < L; ++i) {
          const int is = (i + dx) % L;
          const int js = (j + dy) % L;
          acc11 += w1(i, j) * w1(is, js);
          accm1 += wm(i, j) * w1(is, js);
        }
      }
      full_full[o].push_back(acc11 / (L * L));
      mid_full[o].push_back(accm1 / (L * L));
    }
    incr_corr.push_back((wm * (w1 - wm)).sum() / (L * L));
  }

  CovarianceReport rep;
  auto add_row = [&rep](const std::string& name, const MeanSE& ms, double theory) {
    CovarianceRow row;
    row.name = name;
    row.empirical = ms.mean;
    row.theory = theory;
    row.se = ms.se;
    row.z = ms.se > 0.0 ? (ms.mean - theory) / ms.se : 0.0;
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
    rep.rows.push_back(row);
  };
  for (std::size_t o = 0; o < n_off; ++o) {
    const auto [dx, dy] = offsets[o];
    const double g = green(dx % L, dy % L);
    add_row("W1W1_r" + std::to_string(dx) + "_" + std::to_string(dy),
            mean_se(full_full[o]), g);
    add_row("Wmid W1_r" + std::to_string(dx) + "_" + std::to_string(dy),
            mean_se(mid_full[o]), tmid * g);
  }
  add_row("increment_independence", mean_se(incr_corr), 0.0);
  return rep;
}

}  // namespace bdq
