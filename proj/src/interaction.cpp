#include "bdq/interaction.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace bdq {

namespace {

void check_common(const InteractionSpec& spec) {
  if (spec.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(spec.hbar > 0.0) || spec.hbar > 1.0) {
    throw std::invalid_argument("hbar must lie in (0, 1]");
  }
  if ((spec.cutoff < 0.0).any()) {
    throw std::invalid_argument("cutoff must be >= 0");
  }
}

}  // namespace

InteractionSpec make_free_interaction(const LatticeSpec& lat) {
  InteractionSpec s;
  s.kind = InteractionKind::none;
  s.cutoff = Field::Zero(lat.size(), lat.size());
  return s;
}

InteractionSpec make_phi4(const LatticeSpec& lat, double lambda, Field mask,
                          double hbar) {
  InteractionSpec s;
  s.kind = InteractionKind::phi4;
  s.lambda = lambda;
  s.hbar = hbar;
  s.cutoff = std::move(mask);
  if (s.cutoff.rows() != lat.size()) {
    throw std::invalid_argument("mask size mismatch");
  }
  check_common(s);
  return s;
}

InteractionSpec make_exponential(const LatticeSpec& lat, double lambda,
                                 double beta, Field xi) {
  InteractionSpec s;
  s.kind = InteractionKind::exponential;
  s.lambda = lambda;
  s.beta = beta;
  s.cutoff = std::move(xi);
  if (s.cutoff.rows() != lat.size()) {
    throw std::invalid_argument("xi size mismatch");
  }
  const double b2 = beta * beta;
  if (!(b2 > 0.0) || !(b2 < 8.0 * std::numbers::pi)) {
    throw std::invalid_argument("exponential model needs beta^2 in (0, 8*pi)");
  }
  check_common(s);
  return s;
}

InteractionSpec semiclassical_rescale(const InteractionSpec& spec, double hbar) {
  if (!(hbar > 0.0) || hbar > 1.0) {
    throw std::invalid_argument("hbar must lie in (0, 1]");
  }
  InteractionSpec out = spec;
  out.hbar = hbar;
  return out;
}

Field full_mask(const LatticeSpec& lat) {
  return Field::Ones(lat.size(), lat.size());
}

Field disk_mask(const LatticeSpec& lat, double radius, int ci, int cj) {
  const int L = lat.size();
  Field m = Field::Zero(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      if (lat.periodic_dist2(i, j, ci, cj) < radius * radius) m(i, j) = 1.0;
    }
  }
  return m;
}

Field bump_field(const LatticeSpec& lat, double radius, double height, int ci,
                 int cj) {
  const int L = lat.size();
  Field b = Field::Zero(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      const double q = lat.periodic_dist2(i, j, ci, cj) / (radius * radius);
      if (q < 1.0) b(i, j) = height * std::exp(1.0 - 1.0 / (1.0 - q));
    }
  }
  return b;
}

EnhancedFields enhanced_at(const EnhancedGFFPath& path, int j, double hbar) {
  const double sq = std::sqrt(hbar);
  return EnhancedFields{sq * path.w(j), hbar * path.wick2(j),
                        hbar * sq * path.wick3(j)};
}

double potential_phi4_expanded(const LatticeSpec& lat,
                               const InteractionSpec& spec,
                               const EnhancedFields& enh, const Field& z) {
  if (spec.kind != InteractionKind::phi4) {
    throw std::invalid_argument("potential_phi4_expanded: wrong kind");
  }
  const Field integrand =
      4.0 * enh.wick3 * z + 6.0 * enh.wick2 * z.square() +
      4.0 * enh.w * z.cube() + z.square().square();
  return spec.lambda * lat.cell_area() * (spec.cutoff * integrand).sum();
}

double potential_phi4_direct(const LatticeSpec& lat,
                             const InteractionSpec& spec, const Field& phi,
                             double sigma2) {
  if (spec.kind != InteractionKind::phi4) {
    throw std::invalid_argument("potential_phi4_direct: wrong kind");
  }
  const Field p2 = phi.square();
  const Field integrand = p2.square() - 6.0 * sigma2 * p2 + 3.0 * sigma2 * sigma2;
  return spec.lambda * lat.cell_area() * (spec.cutoff * integrand).sum();
}

Field grad_potential_phi4(const LatticeSpec& lat, const InteractionSpec& spec,
                          const EnhancedFields& enh, const Field& z) {
  if (spec.kind != InteractionKind::phi4) {
    throw std::invalid_argument("grad_potential_phi4: wrong kind");
  }
  return spec.lambda * spec.cutoff *
         (4.0 * enh.wick3 + 12.0 * enh.wick2 * z + 12.0 * enh.w * z.square() +
          4.0 * z.cube());
}

double potential_exp(const LatticeSpec& lat, const InteractionSpec& spec,
                     const Field& gmc, const Field& z1) {
  if (spec.kind != InteractionKind::exponential) {
    throw std::invalid_argument("potential_exp: wrong kind");
  }
  if ((gmc < 0.0).any()) throw std::invalid_argument("potential_exp: gmc < 0");
  const Field bz = spec.beta * z1;
  if (bz.maxCoeff() <= 100.0) {
    return spec.lambda * lat.cell_area() * (spec.cutoff * bz.exp() * gmc).sum();
  }
  // Shifted accumulation so drift excursions cannot overflow intermediates.
  const int L = lat.size();
  double emax = -std::numeric_limits<double>::infinity();
  Field expo(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      const double e = bz(i, j) + std::log(std::max(gmc(i, j), 1e-300));
      expo(i, j) = e;
      if (spec.cutoff(i, j) > 0.0 && gmc(i, j) > 0.0) emax = std::max(emax, e);
    }
  }
  if (!std::isfinite(emax)) return 0.0;
  double acc = 0.0;
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      if (spec.cutoff(i, j) > 0.0 && gmc(i, j) > 0.0) {
        acc += spec.cutoff(i, j) * std::exp(expo(i, j) - emax);
      }
    }
  }
  return spec.lambda * lat.cell_area() * std::exp(emax) * acc;
}

Field grad_potential_exp(const LatticeSpec& lat, const InteractionSpec& spec,
                         const Field& gmc, const Field& z1) {
  if (spec.kind != InteractionKind::exponential) {
    throw std::invalid_argument("grad_potential_exp: wrong kind");
  }
  return spec.lambda * spec.beta * spec.cutoff * (spec.beta * z1).exp() * gmc;
}

double rate_function_J(const LatticeSpec& lat, const InteractionSpec& spec,
                       const Field& phi) {
  const double quartic =
      spec.lambda * lat.cell_area() * phi.square().square().sum();
  return quartic + 0.5 * inner_product(lat, phi, apply_spectral(lat, 1.0, phi));
}

Field grad_rate_function_J(const LatticeSpec& lat, const InteractionSpec& spec,
                           const Field& phi) {
  return 4.0 * spec.lambda * phi.cube() + apply_spectral(lat, 1.0, phi);
}

}  // namespace bdq
