#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ntk/activation_kernels.hpp"
#include "ntk/quadrature.hpp"

namespace ntk {

/// Surface area of the unit sphere in R^d: 2 pi^{d/2} / Gamma(d/2).
double surface_area(int d);

/// Number of linearly independent spherical harmonics of degree k on S^{p-1}.
/// Throws NumericError if the value does not fit in 64 bits.
std::uint64_t harmonic_dim(int p, int k);

/// Degree-k Legendre (Gegenbauer) polynomial in dimension p, normalized so
/// P_k(1) = 1, by the upward three-term recurrence.
double legendre(int p, int k, double t);

/// All of P_0..P_kmax at t.
std::vector<double> legendre_all(int p, int kmax, double t);

/// Gauss–Jacobi rule for the weight (1 - t^2)^{(p-3)/2} on [-1, 1], p >= 3.
/// Weights sum to omega_{p-1} / omega_{p-2}.
QuadratureRule jacobi_rule(int p, int node_count);

/// Rule for the probability measure (omega_{p-2}/omega_{p-1}) (1-t^2)^{(p-3)/2} dt
/// obtained by Gauss–Legendre in the angle t = cos(theta). Integrands that are
/// analytic in theta (arccos kernels included) converge geometrically.
QuadratureRule sphere_angle_rule(int p, int node_count);

/// Node count used for degree k: max(512, 4k + 64).
int funk_hecke_nodes(int k);

/// Funk–Hecke coefficient mu_k = (omega_{p-2}/omega_{p-1}) int kappa(t) P_k(t) (1-t^2)^{(p-3)/2} dt,
/// verified by node doubling (relative change < 1e-7 or absolute < 1e-14).
double mu_k(const DotProductKernel& kernel, int p, int k);

/// mu_k on a caller-supplied sphere-angle rule (no convergence check).
double mu_k_on_rule(const DotProductKernel& kernel, int p, int k, const QuadratureRule& sphere_rule);

struct SpectrumRow {
  int k = 0;
  double mu = 0.0;
  std::uint64_t multiplicity = 0;
};

struct SpectrumTable {
  int p = 3;
  std::vector<SpectrumRow> rows;

  /// sum_k mu_k N(p, k) over the table, the truncated value of kappa(1).
  [[nodiscard]] double trace() const;
};

/// mu_0..mu_kmax with per-degree doubling verification.
SpectrumTable compute_spectrum(const DotProductKernel& kernel, int p, int kmax);

/// CSV with header `k,mu,multiplicity`, 17 significant digits.
void write_spectrum_csv(std::ostream& out, const SpectrumTable& table);

/// |quadrature of int P_k^2 w - (omega_{p-1}/omega_{p-2}) / N(p,k)| relative to the closed form.
double legendre_norm_check(int p, int k, const QuadratureRule& jacobi);

enum class Parity { even, odd, all };

/// Least-squares slope of log mu_k against log k over k in [k_min, k_max]
/// with the given parity and mu_k > 0. Needs at least 5 such rows.
double decay_fit(const SpectrumTable& table, int k_min, int k_max, Parity parity);

/// Maximum violation, relative to the magnitude of the terms, of
///   mu_k = k/(2k+p-2) mu0_{k-1} + (k+p-2)/(2k+p-2) mu0_{k+1} + mu1_k   (k >= 1)
///   mu_0 = mu0_1 + mu1_0
/// with mu, mu0, mu1 the spectra of kappa, kappa0, kappa1 computed independently.
/// The relative scale is floored at 1e-8 mu_0 so that vanishing odd terms compare absolutely.
double ntk_recurrence_check(int p, int k_max);

}  // namespace ntk
