#pragma once

#include <span>

namespace ntk {

/// Covariance and NTK values of one input pair after some number of layers.
struct FcKernelState {
  double sigma_xx = 0.0;
  double sigma_yy = 0.0;
  double sigma_xy = 0.0;
  double ntk_xx = 0.0;
  double ntk_yy = 0.0;
  double ntk_xy = 0.0;
  int layer = 0;
};

/// One arc-cosine recursion step: Sigma_k from kappa1, K_k = Sigma_k + K_{k-1} kappa0.
FcKernelState fc_step(const FcKernelState& prev);

/// Runs the recursion from Sigma_0 = K_0 = <x, y> through `layers` hidden layers.
FcKernelState fc_state(std::span<const double> x, std::span<const double> y, int layers);

struct FcKernelValue {
  double sigma = 0.0;  ///< CKN (fixed-features) kernel Sigma_n(x, y)
  double ntk = 0.0;    ///< NTK K_n(x, y)
};

/// Deep fully-connected ReLU NTK with `layers` >= 1 hidden layers.
FcKernelValue fc_ntk(std::span<const double> x, std::span<const double> y, int layers);

/// sqrt(K_n(x,x) + K_n(y,y) - 2 K_n(x,y)), the distance between NTK feature maps.
double fc_feature_distance(std::span<const double> x, std::span<const double> y, int layers);

/// Clamps a squared distance that is negative only by rounding; throws PsdViolation otherwise.
double clamp_radicand(double radicand, double tolerance = 1e-10);

}  // namespace ntk
