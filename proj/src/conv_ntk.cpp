#include "ntk/conv_ntk.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "ntk/activation_kernels.hpp"
#include "ntk/error.hpp"
#include "ntk/fc_ntk.hpp"
#include "ntk/parallel.hpp"
#include "ntk/vec.hpp"

namespace ntk {

ImageSignal ImageSignal::zeros(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) throw ConfigError("ImageSignal: dimensions must be positive");
  ImageSignal x;
  x.height = height;
  x.width = width;
  x.channels = channels;
  x.data.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels),
                0.0);
  return x;
}

double ImageSignal::squared_norm() const {
  double acc = 0.0;
  for (double v : data) acc += v * v;
  return acc;
}

std::vector<Offset> box_offsets(int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("box_offsets: patch size must be positive");
  std::vector<Offset> out;
  const int r0 = -(rows - 1) / 2;
  const int c0 = -(cols - 1) / 2;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out.push_back({r0 + i, c0 + j});
  }
  return out;
}

std::vector<double> Pooling::taps() const {
  if (filter == PoolFilter::dirac || half_size == 0 || scale <= 0.0) return {1.0};
  std::vector<double> h(static_cast<std::size_t>(2 * half_size + 1));
  double total = 0.0;
  for (int t = -half_size; t <= half_size; ++t) {
    const double v = std::exp(-0.5 * t * t / (scale * scale));
    h[static_cast<std::size_t>(t + half_size)] = v;
    total += v;
  }
  for (double& v : h) v /= total;
  return h;
}

Pooling Pooling::dirac(int subsample) {
  Pooling p;
  p.filter = PoolFilter::dirac;
  p.subsample = subsample;
  return p;
}

Pooling Pooling::gaussian(double scale, int half_size, int subsample) {
  Pooling p;
  p.filter = PoolFilter::gaussian;
  p.scale = scale;
  p.half_size = half_size;
  p.subsample = subsample;
  return p;
}

Pooling Pooling::gaussian_for_subsample(int subsample) {
  return gaussian(subsample / std::sqrt(2.0), subsample, subsample);
}

void ArchitectureSpec::validate() const {
  if (layers.empty()) throw ConfigError("architecture needs at least one layer");
  auto check_pool = [](const Pooling& p) {
    if (p.subsample < 1) throw ConfigError("pooling subsample must be >= 1");
    if (p.half_size < 0) throw ConfigError("pooling half_size must be >= 0");
    if (p.filter == PoolFilter::gaussian && !(p.scale >= 0.0)) throw ConfigError("Gaussian pooling scale must be >= 0");
  };
  for (const auto& layer : layers) {
    if (layer.patch.empty()) throw ConfigError("patch offset set must be nonempty");
    check_pool(layer.pool);
  }
  if (initial_pool) check_pool(*initial_pool);
}

ArchitectureSpec ArchitectureSpec::two_layer_default() {
  ArchitectureSpec arch;
  arch.layers.push_back({box_offsets(3, 3), Pooling::gaussian_for_subsample(2)});
  arch.layers.push_back({box_offsets(3, 3), Pooling::gaussian_for_subsample(5)});
  return arch;
}

ArchitectureSpec ArchitectureSpec::degenerate(int depth) {
  ArchitectureSpec arch;
  for (int k = 0; k < depth; ++k) arch.layers.push_back({{Offset{0, 0}}, Pooling::dirac(1)});
  return arch;
}

namespace {

void check_budget(Grid rows, Grid cols, const ConvOptions& options) {
  const std::size_t bytes =
      static_cast<std::size_t>(rows.size()) * static_cast<std::size_t>(cols.size()) * sizeof(double);
  if (bytes > options.max_plane_bytes) {
    std::ostringstream msg;
    msg << "kernel plane of " << rows.size() << " x " << cols.size() << " positions (" << bytes
        << " bytes) exceeds the memory budget of " << options.max_plane_bytes << " bytes";
    throw ConfigError(msg.str());
  }
}

// One separable filtering pass along `axis` of a 4-D tensor (Ha, Wa, Hb, Wb).
std::vector<double> filter_axis(const std::vector<double>& in, std::array<int, 4>& dims, int axis,
                                const std::vector<double>& taps, int subsample, int threads) {
  std::size_t outer = 1;
  for (int k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]);
  std::size_t inner = 1;
  for (int k = axis + 1; k < 4; ++k) inner *= static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]);
  const int n = dims[static_cast<std::size_t>(axis)];
  const int n_out = (n - 1) / subsample + 1;
  const int half = static_cast<int>(taps.size() / 2);

  std::vector<double> out(outer * static_cast<std::size_t>(n_out) * inner, 0.0);
  parallel_for(0, outer * static_cast<std::size_t>(n_out), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t row = lo; row < hi; ++row) {
      const std::size_t o = row / static_cast<std::size_t>(n_out);
      const int u = static_cast<int>(row % static_cast<std::size_t>(n_out));
      double* dst = out.data() + row * inner;
      for (int t = -half; t <= half; ++t) {
        const int v = subsample * u - t;
        if (v < 0 || v >= n) continue;
        const double w = taps[static_cast<std::size_t>(t + half)];
        const double* src = in.data() + (o * static_cast<std::size_t>(n) + static_cast<std::size_t>(v)) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += w * src[i];
      }
    }
  });
  dims[static_cast<std::size_t>(axis)] = n_out;
  return out;
}

struct FeaturePlanes {
  KernelPlane phi1;
  KernelPlane m;
};

std::vector<double> checked_diagonal(std::span<const double> diag, const char* what) {
  std::vector<double> out(diag.begin(), diag.end());
  for (double& v : out) {
    if (v < 0.0) {
      if (v < -1e-10) {
        std::ostringstream msg;
        msg.precision(17);
        msg << what << ": negative self inner product " << v;
        throw PsdViolation(msg.str());
      }
      v = 0.0;
    }
  }
  return out;
}

// Computes the phi1 plane and, when `gamma` is given, the M plane in one sweep.
FeaturePlanes feature_planes(const KernelPlane& sigma, const KernelPlane* gamma, std::span<const double> diag_a,
                             std::span<const double> diag_b, const ConvOptions& options) {
  if (diag_a.size() != static_cast<std::size_t>(sigma.rows.size()) ||
      diag_b.size() != static_cast<std::size_t>(sigma.cols.size())) {
    throw ConfigError("feature planes: diagonal sizes do not match the plane");
  }
  if (gamma != nullptr && (gamma->rows != sigma.rows || gamma->cols != sigma.cols)) {
    throw ConfigError("m_plane: sigma and gamma planes differ in shape");
  }
  const auto da = checked_diagonal(diag_a, "phi1_plane");
  const auto db = checked_diagonal(diag_b, "phi1_plane");
  std::vector<double> norm_b(db.size());
  for (std::size_t q = 0; q < db.size(); ++q) norm_b[q] = std::sqrt(db[q]);

  FeaturePlanes out{KernelPlane(sigma.rows, sigma.cols), {}};
  if (gamma != nullptr) out.m = KernelPlane(sigma.rows, sigma.cols);
  const int cols = sigma.cols.size();
  parallel_for(0, static_cast<std::size_t>(sigma.rows.size()), options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const double na = std::sqrt(da[p]);
      if (na < kZeroNorm) continue;
      for (int q = 0; q < cols; ++q) {
        const double nb = norm_b[static_cast<std::size_t>(q)];
        if (nb < kZeroNorm) continue;
        const double scale = na * nb;
        const double cross = sigma.at(static_cast<int>(p), q);
        const double cos = clamp_cosine(cross / scale);
        const double phi = scale * kappa1(cos);
        out.phi1.ref(static_cast<int>(p), q) = phi;
        if (gamma != nullptr) out.m.ref(static_cast<int>(p), q) = kappa0(cos) * gamma->at(static_cast<int>(p), q) + phi;
      }
    }
  });
  return out;
}

}  // namespace

KernelPlane::KernelPlane(Grid r, Grid c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r.size()) * static_cast<std::size_t>(c.size()), fill) {}

double KernelPlane::trace() const {
  if (rows != cols) throw ConfigError("trace of a non-square kernel plane");
  double acc = 0.0;
  for (int p = 0; p < rows.size(); ++p) acc += at(p, p);
  return acc;
}

std::vector<double> KernelPlane::diagonal() const {
  if (rows != cols) throw ConfigError("diagonal of a non-square kernel plane");
  std::vector<double> d(static_cast<std::size_t>(rows.size()));
  for (int p = 0; p < rows.size(); ++p) d[static_cast<std::size_t>(p)] = at(p, p);
  return d;
}

KernelPlane pixel_plane(const ImageSignal& a, const ImageSignal& b, const ConvOptions& options) {
  if (a.channels != b.channels) throw ConfigError("pixel_plane: channel counts differ");
  const Grid ga{a.height, a.width};
  const Grid gb{b.height, b.width};
  check_budget(ga, gb, options);
  KernelPlane out(ga, gb);
  parallel_for(0, static_cast<std::size_t>(ga.size()), options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto pa = a.pixel(static_cast<int>(p) / a.width, static_cast<int>(p) % a.width);
      for (int q = 0; q < gb.size(); ++q) out.ref(static_cast<int>(p), q) = dot(pa, b.pixel(q / b.width, q % b.width));
    }
  });
  return out;
}

KernelPlane patch_plane(const KernelPlane& in, std::span<const Offset> offsets, const ConvOptions& options) {
  if (offsets.empty()) throw ConfigError("patch_plane: empty offset set");
  check_budget(in.rows, in.cols, options);
  KernelPlane out(in.rows, in.cols);
  const double inv = 1.0 / static_cast<double>(offsets.size());
  const int wa = in.rows.width;
  const int ha = in.rows.height;
  const int wb = in.cols.width;
  const int hb = in.cols.height;

  parallel_for(0, static_cast<std::size_t>(in.rows.size()), options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const int ia = static_cast<int>(p) / wa;
      const int ja = static_cast<int>(p) % wa;
      double* dst = out.data.data() + p * static_cast<std::size_t>(in.cols.size());
      for (const Offset& v : offsets) {
        const int sa_i = ia + v.di;
        const int sa_j = ja + v.dj;
        if (sa_i < 0 || sa_i >= ha || sa_j < 0 || sa_j >= wa) continue;
        const double* src_row = in.data.data() + static_cast<std::size_t>(sa_i * wa + sa_j) * static_cast<std::size_t>(in.cols.size());
        // Same offset on both sides: <P x[u], P y[u']> pairs x[u+v] with y[u'+v].
        const int jb_lo = std::max(0, -v.dj);
        const int jb_hi = std::min(wb, wb - v.dj);
        for (int ib = std::max(0, -v.di); ib < std::min(hb, hb - v.di); ++ib) {
          const double* src = src_row + static_cast<std::size_t>((ib + v.di) * wb + v.dj);
          double* d = dst + static_cast<std::size_t>(ib * wb);
          for (int jb = jb_lo; jb < jb_hi; ++jb) d[jb] += src[jb];
        }
      }
      for (int q = 0; q < in.cols.size(); ++q) dst[q] *= inv;
    }
  });
  return out;
}

KernelPlane pool_plane(const KernelPlane& in, const Pooling& pooling, const ConvOptions& options) {
  const auto taps = pooling.taps();
  if (taps.size() == 1 && pooling.subsample == 1) return in;
  std::array<int, 4> dims{in.rows.height, in.rows.width, in.cols.height, in.cols.width};
  std::vector<double> data = in.data;
  for (int axis = 0; axis < 4; ++axis) data = filter_axis(data, dims, axis, taps, pooling.subsample, options.threads);
  KernelPlane out;
  out.rows = {dims[0], dims[1]};
  out.cols = {dims[2], dims[3]};
  out.data = std::move(data);
  return out;
}

KernelPlane phi1_plane(const KernelPlane& cross, std::span<const double> diag_a, std::span<const double> diag_b,
                       const ConvOptions& options) {
  return feature_planes(cross, nullptr, diag_a, diag_b, options).phi1;
}

KernelPlane m_plane(const KernelPlane& sigma_cross, const KernelPlane& gamma_cross, std::span<const double> diag_a,
                    std::span<const double> diag_b, const ConvOptions& options) {
  return feature_planes(sigma_cross, &gamma_cross, diag_a, diag_b, options).m;
}

std::string to_string(KernelKind kind) { return kind == KernelKind::ntk ? "ntk" : "ckn"; }

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "ntk") return KernelKind::ntk;
  if (name == "ckn") return KernelKind::ckn;
  throw ConfigError("unknown kernel kind '" + name + "' (expected ntk or ckn)");
}

namespace {

struct Propagation {
  ConvKernelValue value;
  std::vector<std::vector<double>> diagonals;
  KernelPlane captured_sigma;
};

// Runs the plane recursion for the pair (a, b). Self runs (no diagonals given)
// read normalizations off their own Sigma planes. With capture_layer > 0 the
// run stops and returns the Sigma plane of that layer.
Propagation propagate(const ImageSignal& a, const ImageSignal& b, const ArchitectureSpec& arch,
                      const std::vector<std::vector<double>>* diag_a, const std::vector<std::vector<double>>* diag_b,
                      const ConvOptions& options, int capture_layer = 0) {
  arch.validate();
  if (a.channels != b.channels) throw ConfigError("conv kernel: images have different channel counts");
  const bool self_run = diag_a == nullptr;

  KernelPlane raw = pixel_plane(a, b, options);
  if (arch.initial_pool) raw = pool_plane(raw, *arch.initial_pool, options);
  KernelPlane sigma = patch_plane(raw, arch.layers.front().patch, options);
  KernelPlane gamma = sigma;

  Propagation result;
  const int n = arch.depth();
  for (int k = 0; k < n; ++k) {
    if (capture_layer == k + 1) {
      result.captured_sigma = std::move(sigma);
      return result;
    }
    std::vector<double> da;
    std::vector<double> db;
    if (self_run) {
      da = sigma.diagonal();
      db = da;
      result.diagonals.push_back(da);
    } else {
      da = diag_a->at(static_cast<std::size_t>(k));
      db = diag_b->at(static_cast<std::size_t>(k));
    }
    FeaturePlanes f = feature_planes(sigma, &gamma, da, db, options);
    const Pooling& pool = arch.layers[static_cast<std::size_t>(k)].pool;
    if (k + 1 < n) {
      const auto& next_patch = arch.layers[static_cast<std::size_t>(k + 1)].patch;
      sigma = patch_plane(pool_plane(f.phi1, pool, options), next_patch, options);
      gamma = patch_plane(pool_plane(f.m, pool, options), next_patch, options);
    } else {
      result.value.ntk = pool_plane(f.m, pool, options).trace();
      result.value.ckn = pool_plane(f.phi1, pool, options).trace();
    }
  }
  if (!std::isfinite(result.value.ntk) || !std::isfinite(result.value.ckn)) {
    throw NumericError("conv kernel: non-finite result");
  }
  return result;
}

}  // namespace

SelfFeatures self_features(const ImageSignal& x, const ArchitectureSpec& arch, const ConvOptions& options) {
  Propagation run = propagate(x, x, arch, nullptr, nullptr, options);
  return {std::move(run.diagonals), run.value};
}

ConvKernelValue cross_kernel(const ImageSignal& x, const SelfFeatures& fx, const ImageSignal& y,
                             const SelfFeatures& fy, const ArchitectureSpec& arch, const ConvOptions& options) {
  return propagate(x, y, arch, &fx.diagonals, &fy.diagonals, options).value;
}

ConvKernelValue conv_kernels(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch,
                             const ConvOptions& options) {
  const SelfFeatures fx = self_features(x, arch, options);
  const SelfFeatures fy = self_features(y, arch, options);
  return cross_kernel(x, fx, y, fy, arch, options);
}

double conv_ntk(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch, const ConvOptions& options) {
  return conv_kernels(x, y, arch, options).ntk;
}

double conv_ckn(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch, const ConvOptions& options) {
  return conv_kernels(x, y, arch, options).ckn;
}

KernelPlane sigma_plane(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch, int layer,
                        const ConvOptions& options) {
  if (layer < 1 || layer > arch.depth()) throw ConfigError("sigma_plane: layer out of range");
  const SelfFeatures fx = self_features(x, arch, options);
  const SelfFeatures fy = self_features(y, arch, options);
  return propagate(x, y, arch, &fx.diagonals, &fy.diagonals, options, layer).captured_sigma;
}

Eigen::MatrixXd gram(std::span<const ImageSignal> images, const ArchitectureSpec& arch, KernelKind kind,
                     const ConvOptions& options) {
  if (images.empty()) throw ConfigError("gram: need at least one image");
  for (const auto& im : images) {
    if (!im.same_shape(images.front())) throw ConfigError("gram: images differ in shape");
  }
  const std::size_t n = images.size();
  ConvOptions inner = options;
  inner.threads = 1;

  std::vector<SelfFeatures> selfs(n);
  parallel_for(0, n, options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) selfs[i] = self_features(images[i], arch, inner);
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = selfs[i].self.get(kind);
  }
  parallel_for(0, pairs.size(), options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      const auto [i, j] = pairs[t];
      const double v = cross_kernel(images[i], selfs[i], images[j], selfs[j], arch, inner).get(kind);
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  });
  return k;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw InsufficientData("mean_std: empty input");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

double relative_distance_value(double kxx, double kyy, double kxy) {
  if (kxx < kZeroNorm) throw DomainError("relative distance: degenerate reference with K(x,x) ~ 0");
  const double scale = std::max({std::abs(kxx), std::abs(kyy), 1.0});
  return std::sqrt(clamp_radicand(kxx + kyy - 2.0 * kxy, 1e-10 * scale)) / std::sqrt(kxx);
}

std::vector<double> relative_distances(const ImageSignal& reference, std::span<const ImageSignal> set,
                                       const ArchitectureSpec& arch, KernelKind kind, const ConvOptions& options) {
  if (set.empty()) throw ConfigError("relative_distance: empty set");
  const SelfFeatures ref = self_features(reference, arch, options);
  if (ref.self.get(kind) < kZeroNorm) throw DomainError("relative distance: degenerate reference with K(x,x) ~ 0");
  ConvOptions inner = options;
  inner.threads = 1;
  std::vector<double> out(set.size());
  parallel_for(0, set.size(), options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const SelfFeatures f = self_features(set[i], arch, inner);
      const double kxy = cross_kernel(reference, ref, set[i], f, arch, inner).get(kind);
      out[i] = relative_distance_value(ref.self.get(kind), f.self.get(kind), kxy);
    }
  });
  return out;
}

MeanStd relative_distance(const ImageSignal& reference, std::span<const ImageSignal> set,
                          const ArchitectureSpec& arch, KernelKind kind, const ConvOptions& options) {
  const auto d = relative_distances(reference, set, arch, kind, options);
  return mean_std(d);
}

ImageSignal pool_signal(const ImageSignal& x, const Pooling& pooling) {
  const auto taps = pooling.taps();
  const int half = static_cast<int>(taps.size() / 2);
  const int s = pooling.subsample;
  ImageSignal out = ImageSignal::zeros(pooling.output_extent(x.height), pooling.output_extent(x.width), x.channels);
  for (int i = 0; i < out.height; ++i) {
    for (int j = 0; j < out.width; ++j) {
      for (int ti = -half; ti <= half; ++ti) {
        for (int tj = -half; tj <= half; ++tj) {
          const int vi = s * i - ti;
          const int vj = s * j - tj;
          if (!x.contains(vi, vj)) continue;
          const double w = taps[static_cast<std::size_t>(ti + half)] * taps[static_cast<std::size_t>(tj + half)];
          for (int c = 0; c < x.channels; ++c) out.ref(i, j, c) += w * x.at(vi, vj, c);
        }
      }
    }
  }
  return out;
}

ImageSignal extract_patches(const ImageSignal& x, std::span<const Offset> offsets) {
  if (offsets.empty()) throw ConfigError("extract_patches: empty offset set");
  const int channels = x.channels * static_cast<int>(offsets.size());
  ImageSignal out = ImageSignal::zeros(x.height, x.width, channels);
  const double scale = 1.0 / std::sqrt(static_cast<double>(offsets.size()));
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      for (std::size_t v = 0; v < offsets.size(); ++v) {
        for (int c = 0; c < x.channels; ++c) {
          out.ref(i, j, static_cast<int>(v) * x.channels + c) = scale * x.at(i + offsets[v].di, j + offsets[v].dj, c);
        }
      }
    }
  }
  return out;
}

}  // namespace ntk
