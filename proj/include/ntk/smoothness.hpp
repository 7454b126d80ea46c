#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ntk/activation_kernels.hpp"
#include "ntk/conv_ntk.hpp"

namespace ntk {

/// (2 - 2 kappa0(u)) / sqrt(2 - 2u) for u in [-1, 1): the squared phi0 distance
/// over the input distance on the sphere.
double phi0_holder_ratio(double u);

/// (2 kappa(1) - 2 kappa(u)) / (2 - 2u) for u in [-1, 1): squared NTK feature
/// distance over squared input distance on the sphere. Unbounded as u -> 1.
double ntk_nonlip_ratio(double u);

struct RatioProbe {
  std::vector<double> u_grid;
  std::vector<double> values;
  double sup = 0.0;
};

/// u = 1 - 10^{-j} for j = 0..12 followed by a uniform grid of `uniform_points` on [-1, 0.9].
std::vector<double> probe_grid(int uniform_points = 191);

RatioProbe probe_ratio(double (*ratio)(double), std::span<const double> grid);

/// CSV `u,ratio`.
void write_probe_csv(std::ostream& out, const RatioProbe& probe);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  [[nodiscard]] bool holds(double slack = 1e-10) const { return lhs <= rhs + slack; }
};

/// lhs = ||Phi(x) - Phi(y)|| for the two-layer NTK, rhs = sqrt(min(||x||,||y||) ||x-y||) + 2||x-y||.
BoundCheck holder_bound_check(std::span<const double> x, std::span<const double> y);

/// lhs = ||M(x,y) - M(x',y')|| from per-position inner products,
/// rhs = sqrt(min(||y||,||y'||) ||x-x'||) + ||x-x'|| + ||y-y'||.
BoundCheck m_smoothness_check(const ImageSignal& x, const ImageSignal& y, const ImageSignal& x2,
                              const ImageSignal& y2);

/// |K(a x, b y) - a b K(x, y)| / |a b K(x, y)| for the two-layer NTK; 0 when K(x,y) ~ 0.
double homogeneity_check(std::span<const double> x, std::span<const double> y, double a, double b);

struct LipSweep {
  double max_ratio = 0.0;
  double bound = 0.0;
  std::array<double, 3> gammas{};
};

/// Max of ||Phi_sigma(x) - Phi_sigma(y)|| / ||x - y|| over `n_pairs` random
/// unit pairs in dimension `dim`, drawn deterministically from `seed`, with
/// the Lipschitz bound from quadrature gammas.
LipSweep smooth_activation_lip_check(const ActivationProfile& activation, int n_pairs, std::uint64_t seed,
                                     int dim = 5, int threads = 1);

/// Ratio ||Phi_sigma(x) - Phi_sigma(y)|| / ||x - y|| for unit vectors at cosine c.
double smooth_activation_ratio(const ActivationProfile& activation, double c);

}  // namespace ntk
