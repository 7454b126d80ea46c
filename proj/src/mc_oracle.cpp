#include "ntk/mc_oracle.hpp"

#include <cmath>
#include <random>

#include "ntk/error.hpp"
#include "ntk/parallel.hpp"
#include "ntk/vec.hpp"

namespace ntk {

std::uint64_t replica_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the combined state.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

void fill_normal(std::vector<double>& out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (double& v : out) v = normal(rng);
}

McEstimate summarize(const std::vector<double>& samples) {
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

TwoLayerNet TwoLayerNet::sample(int input_dim, int width, std::uint64_t seed) {
  if (input_dim < 1 || width < 1) throw ConfigError("TwoLayerNet: dimensions must be positive");
  TwoLayerNet net;
  net.width = width;
  net.input_dim = input_dim;
  net.seed = seed;
  net.w.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(input_dim));
  net.v.resize(static_cast<std::size_t>(width));
  std::mt19937_64 rng(seed);
  fill_normal(net.w, rng);
  fill_normal(net.v, rng);
  return net;
}

double two_layer_grad_kernel(const TwoLayerNet& net, std::span<const double> x, std::span<const double> y) {
  if (x.size() != static_cast<std::size_t>(net.input_dim) || y.size() != x.size()) {
    throw ConfigError("two_layer_grad_kernel: input dimension mismatch");
  }
  const double xy = dot(x, y);
  const auto p = static_cast<std::size_t>(net.input_dim);
  double acc = 0.0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(net.width); ++j) {
    const std::span<const double> wj(net.w.data() + j * p, p);
    const double ux = dot(wj, x);
    const double uy = dot(wj, y);
    // ReLU derivative at exactly 0 is taken as 0.
    if (ux > 0.0 && uy > 0.0) acc += net.v[j] * net.v[j] * xy + ux * uy;
  }
  return 2.0 * acc / net.width;
}

McEstimate mc_estimate(std::span<const TwoLayerNet> nets, std::span<const double> x, std::span<const double> y,
                       int threads) {
  if (nets.size() < 2) throw ConfigError("mc_estimate: need at least 2 seeds");
  std::vector<double> samples(nets.size());
  parallel_for(0, nets.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) samples[s] = two_layer_grad_kernel(nets[s], x, y);
  });
  return summarize(samples);
}

McEstimate mc_estimate(int input_dim, int width, int n_seeds, std::span<const double> x, std::span<const double> y,
                       std::uint64_t base_seed, int threads) {
  if (n_seeds < 2) throw ConfigError("mc_estimate: need at least 2 seeds");
  std::vector<double> samples(static_cast<std::size_t>(n_seeds));
  parallel_for(0, samples.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      const TwoLayerNet net = TwoLayerNet::sample(input_dim, width, replica_seed(base_seed, s));
      samples[s] = two_layer_grad_kernel(net, x, y);
    }
  });
  return summarize(samples);
}

namespace {

struct PoolGeometry {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0, subsample = 1, half = 0;
  std::vector<double> taps;

  PoolGeometry(const Pooling& pool, int h, int w)
      : in_h(h), in_w(w), out_h(pool.output_extent(h)), out_w(pool.output_extent(w)), subsample(pool.subsample),
        taps(pool.taps()) {
    half = static_cast<int>(taps.size() / 2);
  }

  // Calls fn(u, v, weight) for every nonzero h[s u - v].
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (int ui = 0; ui < out_h; ++ui) {
      for (int uj = 0; uj < out_w; ++uj) {
        for (int ti = -half; ti <= half; ++ti) {
          const int vi = subsample * ui - ti;
          if (vi < 0 || vi >= in_h) continue;
          for (int tj = -half; tj <= half; ++tj) {
            const int vj = subsample * uj - tj;
            if (vj < 0 || vj >= in_w) continue;
            fn(ui * out_w + uj, vi * in_w + vj,
               taps[static_cast<std::size_t>(ti + half)] * taps[static_cast<std::size_t>(tj + half)]);
          }
        }
      }
    }
  }
};

ImageSignal prepare_input(const ArchitectureSpec& arch, const ImageSignal& x) {
  return arch.initial_pool ? pool_signal(x, *arch.initial_pool) : x;
}

}  // namespace

TinyConvNet TinyConvNet::sample(const ArchitectureSpec& arch, int height, int width, int channels, int filters,
                                std::uint64_t seed) {
  arch.validate();
  if (arch.depth() != 1) throw CapabilityError("TinyConvNet: only one convolutional layer is supported");
  if (filters < 1) throw ConfigError("TinyConvNet: need at least one filter");
  TinyConvNet net;
  net.arch = arch;
  net.height = height;
  net.width = width;
  net.channels = channels;
  net.filters = filters;
  net.seed = seed;
  const ImageSignal probe = prepare_input(arch, ImageSignal::zeros(height, width, channels));
  const PoolGeometry geo(arch.layers[0].pool, probe.height, probe.width);
  const auto patch_dim = static_cast<std::size_t>(channels) * arch.layers[0].patch.size();
  net.w1.resize(static_cast<std::size_t>(filters) * patch_dim);
  net.w2.resize(static_cast<std::size_t>(filters) * static_cast<std::size_t>(geo.out_h * geo.out_w));
  std::mt19937_64 rng(seed);
  fill_normal(net.w1, rng);
  fill_normal(net.w2, rng);
  return net;
}

double conv_grad_kernel(const TinyConvNet& net, const ImageSignal& x, const ImageSignal& y) {
  if (net.arch.depth() != 1) throw CapabilityError("conv_grad_kernel: only one convolutional layer is supported");
  const ImageSignal probe = ImageSignal::zeros(net.height, net.width, net.channels);
  if (!x.same_shape(probe) || !y.same_shape(probe)) throw ConfigError("conv_grad_kernel: image shape mismatch");

  const LayerSpec& layer = net.arch.layers[0];
  const ImageSignal px = extract_patches(prepare_input(net.arch, x), layer.patch);
  const ImageSignal py = extract_patches(prepare_input(net.arch, y), layer.patch);
  const PoolGeometry geo(layer.pool, px.height, px.width);
  const auto dim = static_cast<std::size_t>(px.channels);
  const auto positions = static_cast<std::size_t>(px.positions());
  const auto pooled = static_cast<std::size_t>(geo.out_h * geo.out_w);

  std::vector<double> pre_x(positions), pre_y(positions), a_x(pooled), a_y(pooled), g(positions);
  std::vector<double> grad_x(dim), grad_y(dim);
  double acc = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(net.filters); ++i) {
    const std::span<const double> w1(net.w1.data() + i * dim, dim);
    const double* w2 = net.w2.data() + i * pooled;
    for (std::size_t v = 0; v < positions; ++v) {
      pre_x[v] = dot(w1, {px.data.data() + v * dim, dim});
      pre_y[v] = dot(w1, {py.data.data() + v * dim, dim});
    }
    std::fill(a_x.begin(), a_x.end(), 0.0);
    std::fill(a_y.begin(), a_y.end(), 0.0);
    std::fill(g.begin(), g.end(), 0.0);
    geo.for_each([&](int u, int v, double h) {
      a_x[static_cast<std::size_t>(u)] += h * std::max(pre_x[static_cast<std::size_t>(v)], 0.0);
      a_y[static_cast<std::size_t>(u)] += h * std::max(pre_y[static_cast<std::size_t>(v)], 0.0);
      g[static_cast<std::size_t>(v)] += h * w2[u];
    });
    // Head gradient: sqrt(2/m) a_i[u].
    for (std::size_t u = 0; u < pooled; ++u) acc += a_x[u] * a_y[u];
    // First-layer gradient: sqrt(2/m) sum_v g[v] relu'(pre[v]) P x[v].
    std::fill(grad_x.begin(), grad_x.end(), 0.0);
    std::fill(grad_y.begin(), grad_y.end(), 0.0);
    for (std::size_t v = 0; v < positions; ++v) {
      if (g[v] == 0.0) continue;
      if (pre_x[v] > 0.0) {
        for (std::size_t c = 0; c < dim; ++c) grad_x[c] += g[v] * px.data[v * dim + c];
      }
      if (pre_y[v] > 0.0) {
        for (std::size_t c = 0; c < dim; ++c) grad_y[c] += g[v] * py.data[v * dim + c];
      }
    }
    acc += dot(grad_x, grad_y);
  }
  return 2.0 * acc / net.filters;
}

McEstimate conv_mc_estimate(const ArchitectureSpec& arch, int filters, int n_seeds, const ImageSignal& x,
                            const ImageSignal& y, std::uint64_t base_seed, int threads) {
  if (n_seeds < 2) throw ConfigError("conv_mc_estimate: need at least 2 seeds");
  std::vector<double> samples(static_cast<std::size_t>(n_seeds));
  parallel_for(0, samples.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      const TinyConvNet net =
          TinyConvNet::sample(arch, x.height, x.width, x.channels, filters, replica_seed(base_seed, s));
      samples[s] = conv_grad_kernel(net, x, y);
    }
  });
  return summarize(samples);
}

namespace {

// First-layer pre-activations W1 P x at every position: positions x m.
std::vector<double> first_layer_pre(const ImageSignal& patches, const std::vector<double>& w1, int m) {
  const auto dim = static_cast<std::size_t>(patches.channels);
  const auto positions = static_cast<std::size_t>(patches.positions());
  std::vector<double> pre(positions * static_cast<std::size_t>(m));
  for (std::size_t v = 0; v < positions; ++v) {
    const std::span<const double> pv(patches.data.data() + v * dim, dim);
    for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
      pre[v * static_cast<std::size_t>(m) + i] = dot({w1.data() + i * dim, dim}, pv);
    }
  }
  return pre;
}

// Pooled first-layer activations A relu(W1 P x), as an image with m channels.
ImageSignal first_layer_activations(const std::vector<double>& pre, const ImageSignal& patches, const Pooling& pool,
                                    int m) {
  ImageSignal act = ImageSignal::zeros(patches.height, patches.width, m);
  for (std::size_t k = 0; k < pre.size(); ++k) act.data[k] = std::max(pre[k], 0.0);
  return pool_signal(act, pool);
}

}  // namespace

GpCheck gp_covariance_check(const ArchitectureSpec& arch, int layer, std::span<const int> widths, int n_seeds,
                            const ImageSignal& x, const ImageSignal& y, int position_x, int position_y,
                            std::uint64_t base_seed, int threads) {
  arch.validate();
  if (layer < 1 || layer > 2 || layer > arch.depth()) throw CapabilityError("gp_covariance_check: layer must be 1 or 2");
  if (widths.size() < static_cast<std::size_t>(layer)) throw ConfigError("gp_covariance_check: missing widths");
  if (n_seeds < 2) throw ConfigError("gp_covariance_check: need at least 2 seeds");
  if (!x.same_shape(y)) throw ConfigError("gp_covariance_check: image shape mismatch");

  const KernelPlane analytic = sigma_plane(x, y, arch, layer);
  if (position_x < 0 || position_x >= analytic.rows.size() || position_y < 0 || position_y >= analytic.cols.size()) {
    throw ConfigError("gp_covariance_check: position out of range for the layer grid");
  }

  const int m1 = widths[0];
  const ImageSignal px = extract_patches(prepare_input(arch, x), arch.layers[0].patch);
  const ImageSignal py = extract_patches(prepare_input(arch, y), arch.layers[0].patch);
  const auto dim1 = static_cast<std::size_t>(px.channels);

  std::vector<double> samples(static_cast<std::size_t>(n_seeds));
  parallel_for(0, samples.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      std::mt19937_64 rng(replica_seed(base_seed, s));
      std::vector<double> w1(static_cast<std::size_t>(m1) * dim1);
      fill_normal(w1, rng);
      if (layer == 1) {
        const auto ux = static_cast<std::size_t>(position_x);
        const auto uy = static_cast<std::size_t>(position_y);
        double acc = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(m1); ++i) {
          const std::span<const double> wi(w1.data() + i * dim1, dim1);
          acc += dot(wi, {px.data.data() + ux * dim1, dim1}) * dot(wi, {py.data.data() + uy * dim1, dim1});
        }
        samples[s] = acc / m1;
        continue;
      }
      const int m2 = widths[1];
      const ImageSignal ax =
          first_layer_activations(first_layer_pre(px, w1, m1), px, arch.layers[0].pool, m1);
      const ImageSignal ay =
          first_layer_activations(first_layer_pre(py, w1, m1), py, arch.layers[0].pool, m1);
      const ImageSignal qx = extract_patches(ax, arch.layers[1].patch);
      const ImageSignal qy = extract_patches(ay, arch.layers[1].patch);
      const auto dim2 = static_cast<std::size_t>(qx.channels);
      const std::span<const double> vx(qx.data.data() + static_cast<std::size_t>(position_x) * dim2, dim2);
      const std::span<const double> vy(qy.data.data() + static_cast<std::size_t>(position_y) * dim2, dim2);
      std::vector<double> w2(dim2);
      std::normal_distribution<double> normal;
      double acc = 0.0;
      for (int j = 0; j < m2; ++j) {
        for (double& w : w2) w = normal(rng);
        acc += (2.0 / m1) * dot(w2, vx) * dot(w2, vy);
      }
      samples[s] = acc / m2;
    }
  });
  const McEstimate est = summarize(samples);
  GpCheck out;
  out.empirical = est.mean;
  out.analytic = analytic.at(position_x, position_y);
  out.stderr_ = est.stderr_;
  out.z = est.stderr_ > 0.0 ? (est.mean - out.analytic) / est.stderr_ : (est.mean == out.analytic ? 0.0 : INFINITY);
  return out;
}

}  // namespace ntk
