#include "ntk/activation_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ntk/error.hpp"
#include "ntk/quadrature.hpp"
#include "ntk/vec.hpp"

namespace ntk {

namespace {

constexpr double kPi = std::numbers::pi;

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace

double clamp_cosine(double u) {
  if (!(u >= -1.0 - kCosineTolerance && u <= 1.0 + kCosineTolerance)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "cosine " << u << " outside [-1, 1] beyond tolerance";
    throw DomainError(msg.str());
  }
  return std::clamp(u, -1.0, 1.0);
}

double kappa0(double u) {
  u = clamp_cosine(u);
  return (kPi - std::acos(u)) / kPi;
}

double kappa1(double u) {
  u = clamp_cosine(u);
  return (u * (kPi - std::acos(u)) + std::sqrt(1.0 - u * u)) / kPi;
}

double ntk_kappa(double u) {
  u = clamp_cosine(u);
  return u * kappa0(u) + kappa1(u);
}

DotProductKernel ntk_dot_kernel() { return {ntk_kappa, 1, "ntk"}; }
DotProductKernel arccos0_kernel() { return {kappa0, 0, "kappa0"}; }
DotProductKernel arccos1_kernel() { return {kappa1, 1, "kappa1"}; }

DotProductKernel kernel_by_name(const std::string& name) {
  if (name == "ntk") return ntk_dot_kernel();
  if (name == "kappa0" || name == "arccos0") return arccos0_kernel();
  if (name == "kappa1" || name == "arccos1" || name == "ckn") return arccos1_kernel();
  throw ConfigError("unknown kernel '" + name + "' (expected ntk, kappa0, kappa1)");
}

double two_layer_ntk(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("two_layer_ntk: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("two_layer_ntk: non-finite input");
  }
  const double nx = norm(x);
  const double ny = norm(y);
  if (nx < kZeroNorm || ny < kZeroNorm) return 0.0;
  return nx * ny * ntk_kappa(dot(x, y) / (nx * ny));
}

const std::function<double(double)>& ActivationProfile::derivative(int order) const {
  const std::function<double(double)>* f = nullptr;
  switch (order) {
    case 0: f = &sigma; break;
    case 1: f = &d1; break;
    case 2: f = &d2; break;
    default: break;
  }
  if (f == nullptr || !*f) {
    throw CapabilityError("activation '" + name + "' has no derivative of order " + std::to_string(order));
  }
  return *f;
}

ActivationProfile relu_activation() {
  ActivationProfile a;
  a.name = "relu";
  a.sigma = [](double u) { return u > 0.0 ? u : 0.0; };
  a.d1 = [](double u) { return u > 0.0 ? 1.0 : 0.0; };
  a.kinks = {0.0};
  return a;
}

ActivationProfile exp_activation(double shift) {
  ActivationProfile a;
  a.name = "exp";
  auto f = [shift](double u) { return std::exp(u - shift); };
  a.sigma = f;
  a.d1 = f;
  a.d2 = f;
  return a;
}

ActivationProfile softplus_activation() {
  ActivationProfile a;
  a.name = "softplus";
  a.sigma = [](double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); };
  a.d1 = sigmoid;
  a.d2 = [](double u) {
    const double s = sigmoid(u);
    return s * (1.0 - s);
  };
  return a;
}

ActivationProfile activation_by_name(const std::string& name) {
  if (name == "relu") return relu_activation();
  if (name == "exp") return exp_activation(1.0);
  if (name == "softplus") return softplus_activation();
  throw ConfigError("unknown activation '" + name + "' (expected relu, exp, softplus)");
}

double dual_gamma(const ActivationProfile& activation, int order, int node_count) {
  if (node_count < 64) throw DomainError("dual_gamma: need at least 64 Gauss-Hermite nodes");
  const auto& f = activation.derivative(order);
  auto second_moment = [&f](int n) {
    return gauss_hermite(n).integrate([&f](double u) {
      const double v = f(u);
      return v * v;
    });
  };
  const double coarse = second_moment(node_count);
  const double fine = second_moment(2 * node_count);
  if (!std::isfinite(fine) || std::abs(fine - coarse) > 1e-8 * std::abs(fine)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "dual_gamma(" << activation.name << ", " << order << "): no convergence (" << coarse << " vs " << fine
        << ")";
    throw NumericError(msg.str());
  }
  return fine;
}

std::array<double, 3> dual_gammas(const ActivationProfile& activation, int node_count) {
  return {dual_gamma(activation, 0, node_count), dual_gamma(activation, 1, node_count),
          dual_gamma(activation, 2, node_count)};
}

double smooth_lipschitz_bound(double gamma0, double gamma1, double gamma2) {
  if (!(gamma0 > 0.0)) throw DomainError("smooth_lipschitz_bound: gamma0 must be > 0");
  if (gamma1 < 0.0 || gamma2 < 0.0) throw DomainError("smooth_lipschitz_bound: gammas must be >= 0");
  const double s = gamma0 + gamma1;
  return std::sqrt(s * std::max(1.0, (2.0 * gamma1 + gamma2) / s));
}

namespace {

constexpr double kGaussianSpan = 12.0;

// Panel breakpoints of [lo, hi] split at kinks strictly inside.
std::vector<double> panel_edges(double lo, double hi, std::span<const double> kinks) {
  std::vector<double> edges{lo};
  for (double k : kinks) {
    if (k > lo && k < hi) edges.push_back(k);
  }
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());
  return edges;
}

double pair_expectation_at(const std::function<double(double)>& f, const std::function<double(double)>& g,
                           double c, std::span<const double> kinks, const QuadratureRule& unit_rule) {
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * kPi);

  // Integrates h against the normal density N(mean, sd^2), restricted to +-12 sd.
  auto gaussian_integral = [&](double mean, double sd, auto&& h) {
    const auto edges = panel_edges(mean - kGaussianSpan * sd, mean + kGaussianSpan * sd, kinks);
    double acc = 0.0;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double half = 0.5 * (edges[p + 1] - edges[p]);
      const double mid = 0.5 * (edges[p + 1] + edges[p]);
      for (std::size_t i = 0; i < unit_rule.size(); ++i) {
        const double t = mid + half * unit_rule.nodes[i];
        const double z = (t - mean) / sd;
        acc += unit_rule.weights[i] * half * h(t) * std::exp(-0.5 * z * z) * inv_sqrt_2pi / sd;
      }
    }
    return acc;
  };

  return gaussian_integral(0.0, 1.0, [&](double u) {
    const double fu = f(u);
    if (fu == 0.0) return 0.0;
    if (s == 0.0) return fu * g(c * u);
    return fu * gaussian_integral(c * u, s, g);
  });
}

}  // namespace

double gaussian_pair_expectation(const std::function<double(double)>& f, const std::function<double(double)>& g,
                                 double c, std::span<const double> kinks, int panel_nodes) {
  c = clamp_cosine(c);
  const double coarse = pair_expectation_at(f, g, c, kinks, gauss_legendre(panel_nodes));
  const double fine = pair_expectation_at(f, g, c, kinks, gauss_legendre(2 * panel_nodes));
  if (!std::isfinite(fine) || std::abs(fine - coarse) > 1e-9 * std::max(1.0, std::abs(fine))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "gaussian_pair_expectation: no convergence at c=" << c << " (" << coarse << " vs " << fine << ")";
    throw NumericError(msg.str());
  }
  return fine;
}

double generic_two_layer_ntk_cos(const ActivationProfile& activation, double c) {
  const auto& s0 = activation.derivative(0);
  const auto& s1 = activation.derivative(1);
  return c * gaussian_pair_expectation(s1, s1, c, activation.kinks) +
         gaussian_pair_expectation(s0, s0, c, activation.kinks);
}

double generic_two_layer_ntk(const ActivationProfile& activation, std::span<const double> x,
                             std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("generic_two_layer_ntk: dimension mismatch");
  if (std::abs(norm(x) - 1.0) > 1e-9 || std::abs(norm(y) - 1.0) > 1e-9) {
    throw DomainError("generic_two_layer_ntk: inputs must be unit vectors");
  }
  return generic_two_layer_ntk_cos(activation, dot(x, y));
}

}  // namespace ntk
