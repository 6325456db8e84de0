#include "bdq/weight.hpp"

#include <cmath>
#include <stdexcept>

#include "bdq/rng.hpp"

namespace bdq {

Field rho_field(const WeightSpec& w, const LatticeSpec& lat) {
  const int L = lat.size();
  Field rho(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      const double d2 = lat.periodic_dist2(i, j, w.center_i, w.center_j);
      rho(i, j) = std::pow(1.0 + d2, -w.gamma);
    }
  }
  return rho;
}

Field rho_power(const WeightSpec& w, const LatticeSpec& lat, double alpha) {
  WeightSpec scaled = w;
  scaled.gamma = w.gamma * alpha;
  return rho_field(scaled, lat);
}

namespace {

inline int wrap(int i, int L) { return (i % L + L) % L; }

}  // namespace

Field discrete_laplacian(const LatticeSpec& lat, const Field& f) {
  const int L = lat.size();
  const double inv_a2 = 1.0 / lat.cell_area();
  Field out(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      out(i, j) = inv_a2 * (f(wrap(i + 1, L), j) + f(wrap(i - 1, L), j) +
                            f(i, wrap(j + 1, L)) + f(i, wrap(j - 1, L)) -
                            4.0 * f(i, j));
    }
  }
  return out;
}

Field gradient_magnitude(const LatticeSpec& lat, const Field& f) {
  const int L = lat.size();
  const double inv_2a = 0.5 / lat.spacing();
  Field out(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      const double gx = inv_2a * (f(wrap(i + 1, L), j) - f(wrap(i - 1, L), j));
      const double gy = inv_2a * (f(i, wrap(j + 1, L)) - f(i, wrap(j - 1, L)));
      out(i, j) = std::hypot(gx, gy);
    }
  }
  return out;
}

WeightReport validate_weight(const WeightSpec& w, double eps,
                             const LatticeSpec& lat, std::uint64_t probe_seed,
                             int n_probe_fields) {
  WeightReport rep;
  const Field sqrt_rho = rho_power(w, lat, 0.5);
  const Field lap = discrete_laplacian(lat, sqrt_rho);
  const Field grad = gradient_magnitude(lat, sqrt_rho);
  rep.max_ratio = ((lap.abs() + grad) / sqrt_rho).maxCoeff();

  // Commutator check: ||[Delta, rho^1/2] f||_L2 against the H^1(rho^1/2)
  // norm, on random probe fields.
  double worst = 0.0;
  for (int n = 0; n < n_probe_fields; ++n) {
    const Field f = standard_normal_field(lat, probe_seed, n);
    const Field comm =
        discrete_laplacian(lat, sqrt_rho * f) - sqrt_rho * discrete_laplacian(lat, f);
    const double num = lp_norm(lat, comm, 2.0);
    const double den = lp_norm(lat, sqrt_rho * f, 2.0) +
                       lp_norm(lat, sqrt_rho * gradient_magnitude(lat, f), 2.0);
    if (den > 0.0) worst = std::max(worst, num / den);
  }
  rep.commutator_ratio = worst;
  rep.pass = rep.max_ratio <= eps && rep.commutator_ratio <= eps;
  return rep;
}

double weighted_sobolev_norm(const LatticeSpec& lat, const Field& f,
                             const WeightSpec& w, double s, double p) {
  if (p < 1.0) throw std::invalid_argument("weighted_sobolev_norm: p >= 1");
  Field g = f;
  if (s != 0.0) {
    const Eigen::ArrayXXd mult = (1.0 + lat.mode_eigenvalues()).pow(s / 2.0);
    g = apply_mode_multiplier(lat, mult, f);
  }
  return lp_norm(lat, rho_power(w, lat, w.alpha) * g, p);
}

namespace {

// Symmetrized integer frequency magnitude per mode.
double mode_radius(int k, int L) {
  const int kk = (k <= L / 2) ? k : k - L;
  return static_cast<double>(kk < 0 ? -kk : kk);
}

}  // namespace

Eigen::ArrayXXi besov_shell_table(const LatticeSpec& lat) {
  const int L = lat.size();
  Eigen::ArrayXXi shell(L, L);
  for (int k2 = 0; k2 < L; ++k2) {
    for (int k1 = 0; k1 < L; ++k1) {
      const double r1 = mode_radius(k1, L);
      const double r2 = mode_radius(k2, L);
      const double r = std::sqrt(r1 * r1 + r2 * r2);
      if (r <= 1.0) {
        shell(k1, k2) = -1;
      } else {
        shell(k1, k2) = static_cast<int>(std::ceil(std::log2(r))) - 1;
      }
    }
  }
  return shell;
}

int n_besov_shells(const LatticeSpec& lat) {
  return besov_shell_table(lat).maxCoeff() + 2;  // shells -1 .. max
}

Field besov_shell_project(const LatticeSpec& lat, const Field& f, int shell) {
  const Eigen::ArrayXXi table = besov_shell_table(lat);
  Spectrum s = forward_fft(f);
  for (int k2 = 0; k2 < lat.size(); ++k2) {
    for (int k1 = 0; k1 < lat.size(); ++k1) {
      if (table(k1, k2) != shell) s(k1, k2) = 0.0;
    }
  }
  fft2(s, true);
  return s.real();
}

double besov_norm(const LatticeSpec& lat, const Field& f, const WeightSpec& w,
                  double s, double p, double q) {
  const Field g = rho_power(w, lat, w.alpha) * f;
  const Eigen::ArrayXXi table = besov_shell_table(lat);
  const int max_shell = table.maxCoeff();

  const Spectrum spec = forward_fft(g);
  double acc = 0.0;
  double sup = 0.0;
  for (int shell = -1; shell <= max_shell; ++shell) {
    Spectrum proj = spec;
    for (int k2 = 0; k2 < lat.size(); ++k2) {
      for (int k1 = 0; k1 < lat.size(); ++k1) {
        if (table(k1, k2) != shell) proj(k1, k2) = 0.0;
      }
    }
    fft2(proj, true);
    const double term = std::pow(2.0, shell * s) * lp_norm(lat, proj.real(), p);
    if (std::isinf(q)) {
      sup = std::max(sup, term);
    } else {
      acc += std::pow(term, q);
    }
  }
  return std::isinf(q) ? sup : std::pow(acc, 1.0 / q);
}

}  // namespace bdq
