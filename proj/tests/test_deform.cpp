#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ntk/deform.hpp"
#include "ntk/error.hpp"

using namespace ntk;
using doctest::Approx;

namespace {

ImageSignal smooth_image(int h, int w) {
  auto x = ImageSignal::zeros(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) x.ref(i, j) = std::exp(-((i - h / 2.0) * (i - h / 2.0) + (j - w / 2.0) * (j - w / 2.0)) / 20.0);
  return x;
}

ImageSignal random_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0, 1);
  auto x = ImageSignal::zeros(h, w);
  for (auto& v : x.data) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("generated fields: determinism and normalization") {
  const auto a = generate_tau(3, 28, 28), b = generate_tau(3, 28, 28);
  for (int i = 0; i < 28; ++i)
    for (int j = 0; j < 28; ++j)
      for (int c = 0; c < 2; ++c) CHECK(a.displacement(i, j, c) == b.displacement(i, j, c));
  for (std::uint64_t s = 0; s < 100; ++s) CHECK(generate_tau(s, 28, 28).tau_sup() == Approx(1.0).epsilon(1e-12));
  CHECK(generate_tau(1, 28, 28).grad_sup() > 0.0);
}

TEST_CASE("constant fields have zero gradient; grad_sup is linear in alpha") {
  const std::vector<double> coarse(32, 0.0);
  std::vector<double> c = coarse;
  for (std::size_t i = 0; i < c.size(); i += 2) {
    c[i] = 0.3;
    c[i + 1] = -0.4;
  }
  const auto f = interpolate_coarse(c, 4, 4, 12, 12, 0.0);
  CHECK(f.grad_sup() < 1e-12);
  CHECK(f.tau_sup() == Approx(0.5).epsilon(1e-12));
  const auto g = generate_tau(9, 20, 20);
  for (double a : {0.01, 0.3, 3.0}) {
    CHECK(g.scaled(a).grad_sup() == Approx(a * g.grad_sup()).epsilon(1e-12));
    CHECK(g.scaled(a).tau_sup() == Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("gradient sup of a linear field") {
  // tau(i, j) = (0.1 j, 0): Jacobian [[0, 0.1], [0, 0]] with spectral norm 0.1.
  const int h = 6, w = 7;
  std::vector<double> tau;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      tau.push_back(0.1 * j);
      tau.push_back(0.0);
    }
  DeformationField f(h, w, tau);
  CHECK(f.grad_sup() == Approx(0.1).epsilon(1e-12));
  CHECK(f.tau_sup() == Approx(0.6).epsilon(1e-12));
}

TEST_CASE("tangent deformation") {
  std::mt19937_64 rng(1);
  const auto x = random_image(rng, 10, 10);
  const auto f = generate_tau(4, 10, 10);
  CHECK(apply_tangent_deformation(x, f, 0.0).data == x.data);

  auto c = ImageSignal::zeros(10, 10);
  for (auto& v : c.data) v = 0.7;
  const auto dc = apply_tangent_deformation(c, f, 0.5);
  for (int i = 1; i < 9; ++i)
    for (int j = 1; j < 9; ++j) CHECK(dc.at(i, j) == Approx(0.7).epsilon(1e-14));

  // Ramp x(u) = u_1 (row index) with tau = (1, 0): x - alpha in the interior.
  auto ramp = ImageSignal::zeros(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) ramp.ref(i, j) = i;
  const auto shift = DeformationField::constant(8, 8, 1.0, 0.0);
  const auto out = apply_tangent_deformation(ramp, shift, 0.25);
  for (int i = 1; i < 7; ++i)
    for (int j = 0; j < 8; ++j) CHECK(out.at(i, j) == Approx(i - 0.25).epsilon(1e-14));
}

TEST_CASE("exact warp") {
  std::mt19937_64 rng(2);
  const auto x = random_image(rng, 9, 9);
  const auto f = generate_tau(5, 9, 9);
  CHECK(apply_warp(x, f, 0.0).data == x.data);
  // Integer shift of one row down: y(i, j) = x(i - 1, j).
  const auto down = DeformationField::constant(9, 9, 1.0, 0.0);
  const auto y = apply_warp(x, down, 1.0);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) CHECK(y.at(i, j) == Approx(x.at(i - 1, j)).epsilon(1e-14));

  const auto s = smooth_image(20, 20);
  const auto g = generate_tau(6, 20, 20);
  double worst = 0;
  const auto a = apply_warp(s, g, 0.01), b = apply_tangent_deformation(s, g, 0.01);
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  CHECK(worst <= 1e-3);
  // Bilinear sampling is a one-sided difference while the tangent map uses
  // centered ones, so on a grid the gap shrinks only linearly in alpha.
  double worst_small = 0;
  const auto a2 = apply_warp(s, g, 0.001), b2 = apply_tangent_deformation(s, g, 0.001);
  for (std::size_t i = 0; i < a2.data.size(); ++i) worst_small = std::max(worst_small, std::abs(a2.data[i] - b2.data[i]));
  CHECK(worst_small < worst / 5);
}

TEST_CASE("translations") {
  std::mt19937_64 rng(3);
  const auto x = random_image(rng, 7, 7);
  for (int d = 0; d < kTranslationDirections; ++d) {
    const auto t = translate(x, d);
    CHECK(t.squared_norm() <= x.squared_norm());
    const auto v = translation_vector(d);
    CHECK(std::max(std::abs(v.di), std::abs(v.dj)) == 1);
    const auto back = translate(t, (d + 4) % 8);
    for (int i = 1; i < 6; ++i)
      for (int j = 1; j < 6; ++j) CHECK(back.at(i, j) == x.at(i, j));
  }
  CHECK_THROWS(translate(x, 8));
  CHECK_THROWS(translate(x, -1));
  // All eight directions are distinct.
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) CHECK_FALSE(translation_vector(a) == translation_vector(b));
}

TEST_CASE("stability experiment on a small image") {
  const auto ref = smooth_image(12, 12);
  ArchitectureSpec arch;
  arch.layers.push_back({box_offsets(3, 3), Pooling::gaussian_for_subsample(2)});
  arch.layers.push_back({box_offsets(3, 3), Pooling::gaussian_for_subsample(3)});
  arch.initial_pool = Pooling::gaussian_for_subsample(1);
  StabilityConfig cfg;
  cfg.set_size = 4;
  cfg.seed = 7;
  cfg.alphas = {0.0, 0.01, 0.1, 1.0};
  const auto rows = stability_experiment(ref, {}, arch, cfg);
  REQUIRE(rows.size() == 2 * 2 * 4);
  for (const auto& r : rows) {
    if (r.set == "deformations" && r.alpha == 0.0) CHECK(r.mean == Approx(0.0).epsilon(1e-6));
    CHECK(r.n_images == 4);
  }
  std::ostringstream a, b;
  write_stability_csv(a, rows);
  write_stability_csv(b, stability_experiment(ref, {}, arch, cfg));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("kernel,set,alpha,mean_rel_dist,std_rel_dist,n_images,grad_sup,tau_sup\n", 0) == 0);
  // Means increase with alpha on the pure deformation set.
  for (auto kind : {KernelKind::ntk, KernelKind::ckn}) {
    double prev = -1;
    for (const auto& r : rows) {
      if (r.kernel != kind || r.set != "deformations") continue;
      CHECK(r.mean > prev);
      prev = r.mean;
    }
  }
}

TEST_CASE("small_alpha_slope") {
  std::vector<StabilityRow> rows;
  for (double a : {0.01, 0.03, 0.1, 0.3, 1.0}) {
    rows.push_back({KernelKind::ntk, "deformations", a, 2.0 * std::sqrt(a), 0, 20, a, a});
    rows.push_back({KernelKind::ckn, "deformations", a, 0.5 * a, 0, 20, a, a});
    rows.push_back({KernelKind::ntk, "translations", a, 0.3, 0, 20, 0.0, 1.0});
  }
  CHECK(small_alpha_slope(rows, KernelKind::ntk, "deformations") == Approx(0.5).epsilon(1e-12));
  CHECK(small_alpha_slope(rows, KernelKind::ckn, "deformations") == Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(small_alpha_slope(rows, KernelKind::ntk, "translations"), InsufficientData);
}

TEST_CASE("label sets") {
  std::vector<ImageSignal> imgs;
  std::vector<int> labels;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 60; ++i) {
    imgs.push_back(random_image(rng, 4, 4));
    labels.push_back(i % 3);
  }
  const auto sets = label_sets(imgs, labels, 5, 10, 11);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].kind == "same-label");
  CHECK(sets[1].kind == "any-label");
  for (const auto& s : sets) CHECK(s.members.size() == 10);
  for (const auto& m : sets[0].members) {
    bool found = false;
    for (std::size_t i = 0; i < imgs.size(); ++i)
      if (imgs[i].data == m.data) {
        found = true;
        CHECK(labels[i] == labels[5]);
        CHECK(i != 5);
      }
    CHECK(found);
  }
  const auto again = label_sets(imgs, labels, 5, 10, 11);
  CHECK(again[1].members[3].data == sets[1].members[3].data);
}
