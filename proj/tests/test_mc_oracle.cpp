#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ntk/activation_kernels.hpp"
#include "ntk/conv_ntk.hpp"
#include "ntk/error.hpp"
#include "ntk/mc_oracle.hpp"

using namespace ntk;
using doctest::Approx;

namespace {
std::vector<double> unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n;
  std::vector<double> v(static_cast<std::size_t>(dim));
  double s = 0;
  for (auto& e : v) {
    e = n(rng);
    s += e * e;
  }
  for (auto& e : v) e /= std::sqrt(s);
  return v;
}
}  // namespace

TEST_CASE("two-layer gradient kernel by hand") {
  TwoLayerNet net;
  net.width = 1;
  net.input_dim = 2;
  net.w = {1.0, 0.0};
  net.v = {1.0};
  const std::vector<double> e1{1, 0}, z{0, 0};
  CHECK(two_layer_grad_kernel(net, e1, e1) == Approx(4.0));
  CHECK(two_layer_grad_kernel(net, e1, z) == 0.0);
}

TEST_CASE("network sampling is deterministic") {
  const auto a = TwoLayerNet::sample(5, 64, 3), b = TwoLayerNet::sample(5, 64, 3);
  CHECK(a.w == b.w);
  CHECK(a.v == b.v);
  CHECK(TwoLayerNet::sample(5, 64, 4).w != a.w);
  CHECK(replica_seed(1, 0) != replica_seed(1, 1));
  CHECK(replica_seed(1, 0) != replica_seed(2, 0));
}

TEST_CASE("two-layer MC estimates against the closed form") {
  std::mt19937_64 rng(5);
  const auto x = unit(rng, 10);
  auto y = unit(rng, 10);
  // Make y orthogonal to x.
  double d = 0;
  for (int i = 0; i < 10; ++i) d += x[i] * y[i];
  double s = 0;
  for (int i = 0; i < 10; ++i) {
    y[i] -= d * x[i];
    s += y[i] * y[i];
  }
  for (auto& v : y) v /= std::sqrt(s);
  std::vector<double> mx = x;
  for (auto& v : mx) v = -v;

  const auto same = mc_estimate(10, 4096, 8, x, x, 1);
  CHECK(std::abs(same.mean - 2.0) <= 3 * same.stderr_);
  const auto orth = mc_estimate(10, 4096, 8, x, y, 2);
  CHECK(std::abs(orth.mean - 1.0 / std::numbers::pi) <= 3 * orth.stderr_);
  const auto anti = mc_estimate(10, 4096, 8, x, mx, 3);
  CHECK(std::abs(anti.mean) <= 3 * anti.stderr_ + 1e-12);

  // Quadrupling the width roughly halves the standard error.
  const auto narrow = mc_estimate(10, 256, 128, x, y, 4);
  const auto wide = mc_estimate(10, 1024, 128, x, y, 4);
  const double factor = narrow.stderr_ / wide.stderr_;
  CHECK(factor >= 1.5);
  CHECK(factor <= 3.0);
  CHECK_THROWS(mc_estimate(10, 64, 1, x, y, 1));
}

TEST_CASE("conv gradient kernel") {
  ArchitectureSpec arch;
  arch.layers.push_back({box_offsets(1, 1), Pooling::dirac()});
  const auto net = TinyConvNet::sample(arch, 2, 2, 1, 16, 1);
  auto x = ImageSignal::zeros(2, 2);
  x.data = {1, 2, 3, 4};
  CHECK(conv_grad_kernel(net, x, ImageSignal::zeros(2, 2)) == 0.0);
  ArchitectureSpec two = ArchitectureSpec::two_layer_default();
  CHECK_THROWS_AS(TinyConvNet::sample(two, 2, 2, 1, 16, 1), CapabilityError);
}

TEST_CASE("conv MC agrees with the degenerate two-layer kernel summed over positions") {
  ArchitectureSpec arch;
  arch.layers.push_back({box_offsets(1, 1), Pooling::dirac()});
  auto x = ImageSignal::zeros(2, 2), y = ImageSignal::zeros(2, 2);
  x.data = {1.0, -0.5, 0.3, 2.0};
  y.data = {0.2, 0.8, -1.0, 1.5};
  double analytic = 0;
  for (int p = 0; p < 4; ++p) {
    const std::vector<double> a{x.data[p]}, b{y.data[p]};
    analytic += two_layer_ntk(a, b);
  }
  CHECK(conv_ntk(x, y, arch) == Approx(analytic).epsilon(1e-12));
  const auto mc = conv_mc_estimate(arch, 4096, 16, x, y, 9);
  CHECK(std::abs(mc.mean - analytic) <= 3 * mc.stderr_);
}

TEST_CASE("conv MC agrees with the DP on a 3x3 instance") {
  ArchitectureSpec arch;
  arch.layers.push_back({box_offsets(2, 2), Pooling::gaussian_for_subsample(1)});
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  auto x = ImageSignal::zeros(3, 3), y = ImageSignal::zeros(3, 3);
  for (auto& v : x.data) v = n(rng);
  for (auto& v : y.data) v = n(rng);
  const double exact = conv_ntk(x, y, arch);
  const auto mc = conv_mc_estimate(arch, 4096, 16, x, y, 11);
  CHECK(std::abs(mc.mean - exact) <= 3 * mc.stderr_);
  const double self = conv_ntk(x, x, arch);
  const auto mcs = conv_mc_estimate(arch, 4096, 16, x, x, 12);
  CHECK(std::abs(mcs.mean - self) <= 3 * mcs.stderr_);
}

TEST_CASE("pre-activation covariances") {
  ArchitectureSpec arch;
  arch.layers.push_back({box_offsets(2, 2), Pooling::gaussian_for_subsample(1)});
  arch.layers.push_back({box_offsets(2, 2), Pooling::dirac()});
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n;
  auto x = ImageSignal::zeros(3, 3), y = ImageSignal::zeros(3, 3);
  for (auto& v : x.data) v = n(rng);
  for (auto& v : y.data) v = n(rng);
  const std::vector<int> w1{4096};
  const auto g1 = gp_covariance_check(arch, 1, w1, 4, x, y, 0, 4, 1);
  CHECK(std::abs(g1.z) <= 4.0);
  const auto d1 = gp_covariance_check(arch, 1, w1, 4, x, x, 3, 3, 2);
  CHECK(d1.analytic > 0);
  CHECK(std::abs(d1.z) <= 4.0);
  const std::vector<int> w2{4096, 4096};
  const auto g2 = gp_covariance_check(arch, 2, w2, 2, x, y, 1, 1, 3);
  CHECK(std::abs(g2.z) <= 4.0);

  // Disjoint supports give zero layer-1 covariance.
  auto a = ImageSignal::zeros(3, 3), b = ImageSignal::zeros(3, 3);
  a.ref(0, 0) = 1.0;
  b.ref(2, 2) = 1.0;
  const auto g0 = gp_covariance_check(arch, 1, w1, 4, a, b, 0, 0, 4);
  CHECK(g0.analytic == 0.0);
  CHECK(std::abs(g0.z) <= 4.0);
}
