#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ntk {

/// H x W x C real grid, row-major (row, column, channel). Reads outside the
/// grid return zero.
struct ImageSignal {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  static ImageSignal zeros(int height, int width, int channels = 1);

  [[nodiscard]] int positions() const { return height * width; }
  [[nodiscard]] bool contains(int i, int j) const { return i >= 0 && i < height && j >= 0 && j < width; }
  [[nodiscard]] double at(int i, int j, int c = 0) const {
    return contains(i, j) ? data[index(i, j, c)] : 0.0;
  }
  double& ref(int i, int j, int c = 0) { return data[index(i, j, c)]; }
  [[nodiscard]] std::span<const double> pixel(int i, int j) const {
    return {data.data() + index(i, j, 0), static_cast<std::size_t>(channels)};
  }
  [[nodiscard]] double squared_norm() const;
  [[nodiscard]] bool same_shape(const ImageSignal& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

 private:
  [[nodiscard]] std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
};

struct Offset {
  int di = 0;
  int dj = 0;
  bool operator==(const Offset&) const = default;
};

/// rows x cols box of offsets; for odd sizes centered at 0, for even sizes
/// starting at -(size-1)/2 (so a 2x2 box is {0,1}^2).
std::vector<Offset> box_offsets(int rows, int cols);

enum class PoolFilter { dirac, gaussian };

/// Linear pooling A x[u] = sum_v h[s u - v] x[v] with a separable filter.
struct Pooling {
  PoolFilter filter = PoolFilter::dirac;
  double scale = 0.0;  ///< Gaussian standard deviation in pixels
  int half_size = 0;   ///< taps cover [-half_size, half_size] per axis
  int subsample = 1;

  /// Normalized 1-D taps h[-half_size..half_size]; the 2-D filter is their
  /// outer product and therefore also sums to 1.
  [[nodiscard]] std::vector<double> taps() const;

  static Pooling dirac(int subsample = 1);
  /// Gaussian with scale s / sqrt(2) over (2s+1) taps per axis, subsampling s.
  static Pooling gaussian_for_subsample(int subsample);
  static Pooling gaussian(double scale, int half_size, int subsample);

  [[nodiscard]] int output_extent(int input_extent) const { return (input_extent - 1) / subsample + 1; }
};

struct LayerSpec {
  std::vector<Offset> patch;
  Pooling pool;
};

/// Convolutional architecture: per layer a patch extraction P^k followed (after
/// the ReLU feature step) by pooling A^k. The last layer's pooling is the
/// final pooling before the l2 contraction.
struct ArchitectureSpec {
  std::vector<LayerSpec> layers;
  std::optional<Pooling> initial_pool;

  void validate() const;
  [[nodiscard]] int depth() const { return static_cast<int>(layers.size()); }

  /// 3x3 patches, Gaussian pooling with subsampling 2 then 5, no initial pooling.
  static ArchitectureSpec two_layer_default();
  /// `depth` layers of 1x1 patches and Dirac pooling: reduces to the fully-connected NTK.
  static ArchitectureSpec degenerate(int depth);
};

struct Grid {
  int height = 0;
  int width = 0;
  [[nodiscard]] int size() const { return height * width; }
  bool operator==(const Grid&) const = default;
};

/// Inner products between two feature maps at all position pairs:
/// entry (p, q) = <x[p], y[q]>, p a position of the row grid, q of the column grid.
struct KernelPlane {
  Grid rows;
  Grid cols;
  std::vector<double> data;

  KernelPlane() = default;
  KernelPlane(Grid rows, Grid cols, double fill = 0.0);

  [[nodiscard]] double at(int p, int q) const {
    return data[static_cast<std::size_t>(p) * static_cast<std::size_t>(cols.size()) + static_cast<std::size_t>(q)];
  }
  double& ref(int p, int q) {
    return data[static_cast<std::size_t>(p) * static_cast<std::size_t>(cols.size()) + static_cast<std::size_t>(q)];
  }
  [[nodiscard]] double trace() const;
  [[nodiscard]] std::vector<double> diagonal() const;
};

struct ConvOptions {
  int threads = 1;
  std::size_t max_plane_bytes = std::size_t{1} << 30;
};

/// Plane of pixel inner products <a[p], b[q]>.
KernelPlane pixel_plane(const ImageSignal& a, const ImageSignal& b, const ConvOptions& options = {});

/// out[u,u'] = (1/|S|) sum_{v in S} in[u+v, u'+v]; out-of-grid reads are 0.
KernelPlane patch_plane(const KernelPlane& in, std::span<const Offset> offsets, const ConvOptions& options = {});

/// out[u,u'] = sum_{v,v'} h[s u - v] h[s u' - v'] in[v, v'], as four separable passes.
KernelPlane pool_plane(const KernelPlane& in, const Pooling& pooling, const ConvOptions& options = {});

/// out[u,u'] = sqrt(da[u] db[u']) kappa1(cross / sqrt(da db)); 0 where either diagonal is ~0.
KernelPlane phi1_plane(const KernelPlane& cross, std::span<const double> diag_a, std::span<const double> diag_b,
                       const ConvOptions& options = {});

/// out[u,u'] = kappa0(cos) gamma[u,u'] + phi1 entry; 0 where either diagonal is ~0.
KernelPlane m_plane(const KernelPlane& sigma_cross, const KernelPlane& gamma_cross, std::span<const double> diag_a,
                    std::span<const double> diag_b, const ConvOptions& options = {});

enum class KernelKind { ntk, ckn };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

struct ConvKernelValue {
  double ntk = 0.0;
  double ckn = 0.0;
  [[nodiscard]] double get(KernelKind kind) const { return kind == KernelKind::ntk ? ntk : ckn; }
};

/// Per-image state reused across all pairs involving that image: the Sigma
/// self-plane diagonals at every layer, and K(x, x).
struct SelfFeatures {
  std::vector<std::vector<double>> diagonals;
  ConvKernelValue self;
};

SelfFeatures self_features(const ImageSignal& x, const ArchitectureSpec& arch, const ConvOptions& options = {});

/// Cross kernel values given both images' self features.
ConvKernelValue cross_kernel(const ImageSignal& x, const SelfFeatures& fx, const ImageSignal& y,
                             const SelfFeatures& fy, const ArchitectureSpec& arch, const ConvOptions& options = {});

ConvKernelValue conv_kernels(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch,
                             const ConvOptions& options = {});

double conv_ntk(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch,
                const ConvOptions& options = {});
double conv_ckn(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch,
                const ConvOptions& options = {});

/// Sigma^k cross-plane <x_k[u], y_k[u']> at layer k (1-based), the covariance of
/// the layer-k pre-activations in the infinite-width limit.
KernelPlane sigma_plane(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch, int layer,
                        const ConvOptions& options = {});

/// Symmetric Gram matrix; self features computed once per image.
Eigen::MatrixXd gram(std::span<const ImageSignal> images, const ArchitectureSpec& arch, KernelKind kind,
                     const ConvOptions& options = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample standard deviation (0 for a single element).
MeanStd mean_std(std::span<const double> values);

/// sqrt(K(x,x) + K(y,y) - 2K(x,y)) / sqrt(K(x,x)) from kernel values.
double relative_distance_value(double kxx, double kyy, double kxy);

/// Relative RKHS distances of every member of `set` to `reference`, in set order.
std::vector<double> relative_distances(const ImageSignal& reference, std::span<const ImageSignal> set,
                                       const ArchitectureSpec& arch, KernelKind kind,
                                       const ConvOptions& options = {});

MeanStd relative_distance(const ImageSignal& reference, std::span<const ImageSignal> set,
                          const ArchitectureSpec& arch, KernelKind kind, const ConvOptions& options = {});

/// Explicit signal operators, used by the Monte Carlo oracle and norm checks.
ImageSignal pool_signal(const ImageSignal& x, const Pooling& pooling);
/// Stacks |S|^{-1/2} x[u+v] over v in S into C |S| channels.
ImageSignal extract_patches(const ImageSignal& x, std::span<const Offset> offsets);

}  // namespace ntk
