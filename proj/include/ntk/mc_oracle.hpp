#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ntk/conv_ntk.hpp"

namespace ntk {

/// Independent, well-mixed seed for replica `index` of a run seeded with `base`.
std::uint64_t replica_seed(std::uint64_t base, std::uint64_t index);

/// f(x) = sqrt(2/m) sum_j v_j relu(w_j . x) with i.i.d. N(0,1) parameters.
struct TwoLayerNet {
  int width = 0;
  int input_dim = 0;
  std::vector<double> w;  ///< width x input_dim, row-major
  std::vector<double> v;  ///< width
  std::uint64_t seed = 0;

  static TwoLayerNet sample(int input_dim, int width, std::uint64_t seed);
};

/// <grad_theta f(x), grad_theta f(y)> at initialization:
/// (2/m) sum_j [v_j^2 1{w_j.x>0} 1{w_j.y>0} <x,y> + relu(w_j.x) relu(w_j.y)].
double two_layer_grad_kernel(const TwoLayerNet& net, std::span<const double> x, std::span<const double> y);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error of the gradient kernel over `n_seeds` networks.
McEstimate mc_estimate(int input_dim, int width, int n_seeds, std::span<const double> x, std::span<const double> y,
                       std::uint64_t base_seed, int threads = 1);

/// Same estimator over prebuilt networks (lets a battery of pairs share draws).
McEstimate mc_estimate(std::span<const TwoLayerNet> nets, std::span<const double> x, std::span<const double> y,
                       int threads = 1);

/// One convolutional layer network:
/// f(x) = sqrt(2/m) sum_i sum_u w2_i[u] a_i[u],  a_i = A relu(W1_i P x).
/// An initial pooling in the architecture is applied to the input first.
struct TinyConvNet {
  ArchitectureSpec arch;  ///< exactly one layer
  int height = 0;
  int width = 0;
  int channels = 1;
  int filters = 0;         ///< m
  std::vector<double> w1;  ///< m x (channels |S|)
  std::vector<double> w2;  ///< m x pooled positions
  std::uint64_t seed = 0;

  static TinyConvNet sample(const ArchitectureSpec& arch, int height, int width, int channels, int filters,
                            std::uint64_t seed);
};

/// Exact finite-width <grad f(x), grad f(y)> over (W1, w2), closed form.
double conv_grad_kernel(const TinyConvNet& net, const ImageSignal& x, const ImageSignal& y);

McEstimate conv_mc_estimate(const ArchitectureSpec& arch, int filters, int n_seeds, const ImageSignal& x,
                            const ImageSignal& y, std::uint64_t base_seed, int threads = 1);

struct GpCheck {
  double empirical = 0.0;
  double analytic = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
};

/// Empirical covariance E[a~^k_i[u] a~'^k_i[u']] of layer-k pre-activations
/// (k = 1 or 2) over channels and seeds, against the Sigma^k plane entry.
/// widths[0] = m1 (first-layer channels); widths[1] = m2 for k = 2.
/// Positions index the layer-k grid row-major.
GpCheck gp_covariance_check(const ArchitectureSpec& arch, int layer, std::span<const int> widths, int n_seeds,
                            const ImageSignal& x, const ImageSignal& y, int position_x, int position_y,
                            std::uint64_t base_seed, int threads = 1);

}  // namespace ntk
