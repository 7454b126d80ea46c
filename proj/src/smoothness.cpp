#include "ntk/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "ntk/error.hpp"
#include "ntk/fc_ntk.hpp"
#include "ntk/parallel.hpp"
#include "ntk/quadrature.hpp"
#include "ntk/vec.hpp"

namespace ntk {

double phi0_holder_ratio(double u) {
  u = clamp_cosine(u);
  if (u >= 1.0) throw DomainError("phi0_holder_ratio: undefined at u = 1");
  return (2.0 - 2.0 * kappa0(u)) / std::sqrt(2.0 - 2.0 * u);
}

double ntk_nonlip_ratio(double u) {
  u = clamp_cosine(u);
  if (u >= 1.0) throw DomainError("ntk_nonlip_ratio: undefined at u = 1");
  return (2.0 * ntk_kappa(1.0) - 2.0 * ntk_kappa(u)) / (2.0 - 2.0 * u);
}

std::vector<double> probe_grid(int uniform_points) {
  std::vector<double> grid;
  for (int j = 0; j <= 12; ++j) grid.push_back(1.0 - std::pow(10.0, -j));
  for (int i = 0; i < uniform_points; ++i) {
    grid.push_back(-1.0 + 1.9 * i / std::max(1, uniform_points - 1));
  }
  return grid;
}

RatioProbe probe_ratio(double (*ratio)(double), std::span<const double> grid) {
  RatioProbe probe;
  probe.u_grid.assign(grid.begin(), grid.end());
  probe.sup = -std::numeric_limits<double>::infinity();
  for (double u : grid) {
    const double v = ratio(u);
    probe.values.push_back(v);
    probe.sup = std::max(probe.sup, v);
  }
  return probe;
}

void write_probe_csv(std::ostream& out, const RatioProbe& probe) {
  const auto old = out.precision(17);
  out << "u,ratio\n";
  for (std::size_t i = 0; i < probe.u_grid.size(); ++i) out << probe.u_grid[i] << ',' << probe.values[i] << '\n';
  out.precision(old);
}

BoundCheck holder_bound_check(std::span<const double> x, std::span<const double> y) {
  const double nx = norm(x);
  const double ny = norm(y);
  if (nx < kZeroNorm || ny < kZeroNorm) throw DomainError("holder_bound_check: inputs must be nonzero");
  const double kxx = two_layer_ntk(x, x);
  const double kyy = two_layer_ntk(y, y);
  const double kxy = two_layer_ntk(x, y);
  const double scale = std::max(kxx, kyy);
  const double d = distance(x, y);
  return {std::sqrt(clamp_radicand(kxx + kyy - 2.0 * kxy, 1e-12 * scale)),
          std::sqrt(std::min(nx, ny) * d) + 2.0 * d};
}

namespace {

// <M(x,y)(u), M(x',y')(u)> = kappa0(cos) <y(u), y'(u)> + ||x(u)|| ||x'(u)|| kappa1(cos),
// zero when either x(u) vanishes.
double m_inner(std::span<const double> x, std::span<const double> y, std::span<const double> x2,
               std::span<const double> y2) {
  const double n1 = norm(x);
  const double n2 = norm(x2);
  if (n1 < kZeroNorm || n2 < kZeroNorm) return 0.0;
  const double c = clamp_cosine(dot(x, x2) / (n1 * n2));
  return kappa0(c) * dot(y, y2) + n1 * n2 * kappa1(c);
}

double signal_distance(const ImageSignal& a, const ImageSignal& b) { return distance(a.data, b.data); }

}  // namespace

BoundCheck m_smoothness_check(const ImageSignal& x, const ImageSignal& y, const ImageSignal& x2,
                              const ImageSignal& y2) {
  if (!x.same_shape(x2) || !y.same_shape(y2) || x.height != y.height || x.width != y.width) {
    throw ConfigError("m_smoothness_check: shape mismatch");
  }
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      const auto xa = x.pixel(i, j);
      const auto ya = y.pixel(i, j);
      const auto xb = x2.pixel(i, j);
      const auto yb = y2.pixel(i, j);
      aa += m_inner(xa, ya, xa, ya);
      bb += m_inner(xb, yb, xb, yb);
      ab += m_inner(xa, ya, xb, yb);
    }
  }
  const double scale = std::max({aa, bb, 1.0});
  const double dx = signal_distance(x, x2);
  const double dy = signal_distance(y, y2);
  const double ny = std::sqrt(y.squared_norm());
  const double ny2 = std::sqrt(y2.squared_norm());
  return {std::sqrt(clamp_radicand(aa + bb - 2.0 * ab, 1e-12 * scale)),
          std::sqrt(std::min(ny, ny2) * dx) + dx + dy};
}

double homogeneity_check(std::span<const double> x, std::span<const double> y, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("homogeneity_check: scales must be positive");
  std::vector<double> ax(x.begin(), x.end());
  std::vector<double> by(y.begin(), y.end());
  for (double& v : ax) v *= a;
  for (double& v : by) v *= b;
  const double base = a * b * two_layer_ntk(x, y);
  if (std::abs(base) < kZeroNorm) return 0.0;
  return std::abs(two_layer_ntk(ax, by) - base) / std::abs(base);
}

namespace {

// ||Phi(x) - Phi(y)||^2 / ||x - y||^2 = (K(1) - K(c)) / (1 - c) on the sphere.
// Close to c = 1 the difference cancels catastrophically, so it is replaced by
// the mean of K'(t) = 2 E[s'(u) s'(v)] + t E[s''(u) s''(v)] over [c, 1].
double squared_ratio(const ActivationProfile& activation, double c, double k11) {
  if (1.0 - c > 1e-3) {
    const double kc = generic_two_layer_ntk_cos(activation, c);
    return clamp_radicand(k11 - kc, 1e-12 * std::abs(k11)) / (1.0 - c);
  }
  const auto& s1 = activation.derivative(1);
  const auto& s2 = activation.derivative(2);
  const auto rule = gauss_legendre(8, c, 1.0);
  const double integral = rule.integrate([&](double t) {
    return 2.0 * gaussian_pair_expectation(s1, s1, t, activation.kinks) +
           t * gaussian_pair_expectation(s2, s2, t, activation.kinks);
  });
  return integral / (1.0 - c);
}

}  // namespace

double smooth_activation_ratio(const ActivationProfile& activation, double c) {
  c = clamp_cosine(c);
  if (c >= 1.0) throw DomainError("smooth_activation_ratio: identical inputs");
  return std::sqrt(squared_ratio(activation, c, generic_two_layer_ntk_cos(activation, 1.0)));
}

LipSweep smooth_activation_lip_check(const ActivationProfile& activation, int n_pairs, std::uint64_t seed, int dim,
                                     int threads) {
  if (n_pairs < 1 || dim < 2) throw DomainError("smooth_activation_lip_check: need n_pairs >= 1 and dim >= 2");
  LipSweep sweep;
  sweep.gammas = dual_gammas(activation);
  sweep.bound = smooth_lipschitz_bound(sweep.gammas[0], sweep.gammas[1], sweep.gammas[2]);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> cosines(static_cast<std::size_t>(n_pairs));
  std::vector<double> x(static_cast<std::size_t>(dim));
  std::vector<double> y(static_cast<std::size_t>(dim));
  for (auto& c : cosines) {
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    c = std::min(dot(x, y) / (norm(x) * norm(y)), 1.0 - 1e-12);
  }

  const double k11 = generic_two_layer_ntk_cos(activation, 1.0);
  std::vector<double> ratios(cosines.size());
  parallel_for(0, cosines.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      ratios[i] = std::sqrt(squared_ratio(activation, cosines[i], k11));
    }
  });
  sweep.max_ratio = *std::max_element(ratios.begin(), ratios.end());
  return sweep;
}

}  // namespace ntk
