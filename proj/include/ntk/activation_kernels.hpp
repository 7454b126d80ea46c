#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ntk {

/// Cosines may exceed [-1, 1] by this much from rounding and are clamped;
/// anything further out is an upstream normalization bug.
inline constexpr double kCosineTolerance = 1e-9;

/// Norms below this are treated as the zero vector (kernel value 0).
inline constexpr double kZeroNorm = 1e-30;

/// Clamps a cosine to [-1, 1], throwing DomainError beyond kCosineTolerance.
double clamp_cosine(double u);

/// Arc-cosine kernel of degree 0: (pi - arccos u) / pi.
double kappa0(double u);

/// Arc-cosine kernel of degree 1: (u (pi - arccos u) + sqrt(1 - u^2)) / pi.
double kappa1(double u);

/// Two-layer ReLU NTK on the sphere: u kappa0(u) + kappa1(u). kappa(1) = 2.
double ntk_kappa(double u);

/// A scalar dot-product kernel on [-1, 1].
struct DotProductKernel {
  std::function<double(double)> eval;
  int homogeneity_degree = 1;
  std::string name;

  double operator()(double u) const { return eval(u); }
};

DotProductKernel ntk_dot_kernel();
DotProductKernel arccos0_kernel();
DotProductKernel arccos1_kernel();

/// "ntk", "kappa0"/"arccos0", "kappa1"/"arccos1". Throws ConfigError otherwise.
DotProductKernel kernel_by_name(const std::string& name);

/// ||x|| ||y|| kappa(<x,y> / ||x|| ||y||); 0 when either norm is below kZeroNorm.
double two_layer_ntk(std::span<const double> x, std::span<const double> y);

/// An activation with up to two derivatives. `kinks` lists points where the
/// activation or its derivatives are non-smooth; quadrature splits there.
struct ActivationProfile {
  std::string name;
  std::function<double(double)> sigma;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  std::vector<double> kinks;

  /// sigma^{(order)}; throws CapabilityError when unavailable.
  const std::function<double(double)>& derivative(int order) const;
};

ActivationProfile relu_activation();
/// sigma(u) = exp(u - shift). shift = 1 gives gamma_j = 1 for every j.
ActivationProfile exp_activation(double shift = 1.0);
/// sigma(u) = log(1 + e^u).
ActivationProfile softplus_activation();

/// "relu", "exp" (shift 1), "softplus".
ActivationProfile activation_by_name(const std::string& name);

/// gamma_j = E_{u~N(0,1)}[(sigma^{(j)}(u))^2] by Gauss–Hermite with a
/// node-doubling convergence check (relative change < 1e-8).
double dual_gamma(const ActivationProfile& activation, int order, int node_count = 256);

std::array<double, 3> dual_gammas(const ActivationProfile& activation, int node_count = 256);

/// sqrt((g0 + g1) max(1, (2 g1 + g2) / (g0 + g1))), the Lipschitz constant of
/// the two-layer kernel mapping of a smooth activation on the sphere.
double smooth_lipschitz_bound(double gamma0, double gamma1, double gamma2);

/// E[f(u) g(v)] for (u, v) standard bivariate normal with correlation c.
///
/// Nested integral over u and v | u ~ N(c u, 1 - c^2), each by panelled
/// Gauss–Legendre on +-12 standard deviations split at `kinks`. The node count
/// per panel is doubled once and the two estimates must agree.
double gaussian_pair_expectation(const std::function<double(double)>& f,
                                 const std::function<double(double)>& g, double c,
                                 std::span<const double> kinks, int panel_nodes = 64);

/// c E[sigma'(u) sigma'(v)] + E[sigma(u) sigma(v)] at correlation c.
double generic_two_layer_ntk_cos(const ActivationProfile& activation, double c);

/// Two-layer NTK for a general activation on unit vectors (no factor-2 scaling:
/// for ReLU this is ntk_kappa / 2).
double generic_two_layer_ntk(const ActivationProfile& activation, std::span<const double> x,
                             std::span<const double> y);

}  // namespace ntk
