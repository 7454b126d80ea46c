#include "ntk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ntk/error.hpp"

namespace ntk {

double surface_area(int d) {
  if (d < 1) throw DomainError("surface_area: dimension must be >= 1");
  const double half = 0.5 * d;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

std::uint64_t harmonic_dim(int p, int k) {
  if (p < 2 || k < 0) throw DomainError("harmonic_dim: need p >= 2 and k >= 0");
  if (k == 0) return 1;
  if (p == 2) return 2;
  // (2k + p - 2)/k * C(k + p - 3, p - 2), with C built incrementally in 128 bits.
  const unsigned n = static_cast<unsigned>(k + p - 3);
  const unsigned r = static_cast<unsigned>(p - 2);
  unsigned __int128 c = 1;
  for (unsigned i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  const unsigned __int128 value = c * static_cast<unsigned>(2 * k + p - 2) / static_cast<unsigned>(k);
  if (value > static_cast<unsigned __int128>(UINT64_MAX)) throw NumericError("harmonic_dim: overflow");
  return static_cast<std::uint64_t>(value);
}

std::vector<double> legendre_all(int p, int kmax, double t) {
  if (p < 2 || kmax < 0) throw DomainError("legendre: need p >= 2 and k >= 0");
  if (!(std::abs(t) <= 1.0 + 1e-9)) throw DomainError("legendre: |t| > 1");
  t = std::clamp(t, -1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(kmax + 1));
  out[0] = 1.0;
  if (kmax >= 1) out[1] = t;
  for (int k = 1; k < kmax; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out[i + 1] = ((2.0 * k + p - 2) * t * out[i] - k * out[i - 1]) / (k + p - 2.0);
  }
  return out;
}

double legendre(int p, int k, double t) { return legendre_all(p, k, t).back(); }

QuadratureRule jacobi_rule(int p, int node_count) {
  if (p < 3) throw DomainError("jacobi_rule: need p >= 3");
  if (node_count < 8) throw DomainError("jacobi_rule: need at least 8 nodes");
  const double a = 0.5 * (p - 3);
  std::vector<double> b2(static_cast<std::size_t>(node_count - 1));
  for (std::size_t j = 0; j < b2.size(); ++j) {
    const double k = static_cast<double>(j + 1);
    b2[j] = k * (k + 2.0 * a) / ((2.0 * k + 2.0 * a + 1.0) * (2.0 * k + 2.0 * a - 1.0));
  }
  const double mass = surface_area(p) / surface_area(p - 1);
  return golub_welsch_symmetric(b2, mass);
}

QuadratureRule sphere_angle_rule(int p, int node_count) {
  if (p < 3) throw DomainError("sphere_angle_rule: need p >= 3");
  QuadratureRule theta = gauss_legendre(node_count, 0.0, std::numbers::pi);
  const double norm = surface_area(p - 1) / surface_area(p);
  QuadratureRule rule;
  rule.nodes.resize(theta.size());
  rule.weights.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    rule.nodes[i] = std::cos(theta.nodes[i]);
    rule.weights[i] = norm * theta.weights[i] * std::pow(std::sin(theta.nodes[i]), p - 2);
  }
  return rule;
}

int funk_hecke_nodes(int k) { return std::max(512, 4 * k + 64); }

double mu_k_on_rule(const DotProductKernel& kernel, int p, int k, const QuadratureRule& sphere_rule) {
  return sphere_rule.integrate([&](double t) { return kernel(t) * legendre(p, k, t); });
}

namespace {

void check_converged(double coarse, double fine, int k) {
  if (std::abs(fine - coarse) <= 1e-7 * std::abs(fine) || std::abs(fine - coarse) < 1e-14) return;
  std::ostringstream msg;
  msg.precision(17);
  msg << "mu_k: no convergence at k=" << k << " (" << coarse << " vs " << fine << ")";
  throw NumericError(msg.str());
}

// mu_0..mu_kmax on one rule, evaluating the Legendre recurrence once per node.
std::vector<double> spectrum_on_rule(const DotProductKernel& kernel, int p, int kmax, const QuadratureRule& rule) {
  std::vector<double> mu(static_cast<std::size_t>(kmax + 1), 0.0);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double wk = rule.weights[i] * kernel(rule.nodes[i]);
    const auto pk = legendre_all(p, kmax, rule.nodes[i]);
    for (std::size_t k = 0; k < mu.size(); ++k) mu[k] += wk * pk[k];
  }
  return mu;
}

}  // namespace

double mu_k(const DotProductKernel& kernel, int p, int k) {
  if (k < 0) throw DomainError("mu_k: degree must be >= 0");
  const int n = funk_hecke_nodes(k);
  const double coarse = mu_k_on_rule(kernel, p, k, sphere_angle_rule(p, n));
  const double fine = mu_k_on_rule(kernel, p, k, sphere_angle_rule(p, 2 * n));
  check_converged(coarse, fine, k);
  return fine;
}

double SpectrumTable::trace() const {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.mu * static_cast<double>(r.multiplicity);
  return acc;
}

SpectrumTable compute_spectrum(const DotProductKernel& kernel, int p, int kmax) {
  if (kmax < 0) throw DomainError("compute_spectrum: kmax must be >= 0");
  const int n = funk_hecke_nodes(kmax);
  const auto coarse = spectrum_on_rule(kernel, p, kmax, sphere_angle_rule(p, n));
  const auto fine = spectrum_on_rule(kernel, p, kmax, sphere_angle_rule(p, 2 * n));
  SpectrumTable table;
  table.p = p;
  for (int k = 0; k <= kmax; ++k) {
    const auto i = static_cast<std::size_t>(k);
    check_converged(coarse[i], fine[i], k);
    table.rows.push_back({k, fine[i], harmonic_dim(p, k)});
  }
  return table;
}

void write_spectrum_csv(std::ostream& out, const SpectrumTable& table) {
  const auto old = out.precision(17);
  out << "k,mu,multiplicity\n";
  for (const auto& r : table.rows) out << r.k << ',' << r.mu << ',' << r.multiplicity << '\n';
  out.precision(old);
}

double legendre_norm_check(int p, int k, const QuadratureRule& jacobi) {
  const double quad = jacobi.integrate([&](double t) {
    const double v = legendre(p, k, t);
    return v * v;
  });
  const double exact = surface_area(p) / surface_area(p - 1) / static_cast<double>(harmonic_dim(p, k));
  return std::abs(quad - exact) / exact;
}

double decay_fit(const SpectrumTable& table, int k_min, int k_max, Parity parity) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& r : table.rows) {
    if (r.k < k_min || r.k > k_max || r.k < 1) continue;
    if (parity == Parity::even && r.k % 2 != 0) continue;
    if (parity == Parity::odd && r.k % 2 == 0) continue;
    if (!(r.mu > 0.0)) continue;
    xs.push_back(std::log(static_cast<double>(r.k)));
    ys.push_back(std::log(r.mu));
  }
  if (xs.size() < 5) {
    throw InsufficientData("decay_fit: fewer than 5 positive eigenvalues in range (" + std::to_string(xs.size()) +
                           ")");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

double ntk_recurrence_check(int p, int k_max) {
  if (k_max < 2) throw DomainError("ntk_recurrence_check: k_max must be >= 2");
  const auto mu = compute_spectrum(ntk_dot_kernel(), p, k_max);
  const auto mu0 = compute_spectrum(arccos0_kernel(), p, k_max + 1);
  const auto mu1 = compute_spectrum(arccos1_kernel(), p, k_max);
  auto m = [](const SpectrumTable& t, int k) { return t.rows[static_cast<std::size_t>(k)].mu; };

  const double floor = 1e-8 * std::abs(m(mu, 0));
  double worst = 0.0;
  {
    const double lhs = m(mu, 0);
    const double a = m(mu0, 1);
    const double b = m(mu1, 0);
    worst = std::abs(lhs - a - b) / (std::abs(lhs) + std::abs(a) + std::abs(b));
  }
  for (int k = 1; k <= k_max; ++k) {
    const double denom = 2.0 * k + p - 2.0;
    const double a = k / denom * m(mu0, k - 1);
    const double b = (k + p - 2.0) / denom * m(mu0, k + 1);
    const double c = m(mu1, k);
    const double lhs = m(mu, k);
    // Odd k >= 3 has every term zero up to rounding; the floor keeps that noise
    // from reading as a relative error of order one.
    const double scale = std::max(std::abs(lhs) + std::abs(a) + std::abs(b) + std::abs(c), floor);
    worst = std::max(worst, std::abs(lhs - a - b - c) / scale);
  }
  return worst;
}

}  // namespace ntk
