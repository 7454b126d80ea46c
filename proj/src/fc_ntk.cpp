#include "ntk/fc_ntk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ntk/activation_kernels.hpp"
#include "ntk/error.hpp"
#include "ntk/vec.hpp"

namespace ntk {

FcKernelState fc_step(const FcKernelState& prev) {
  FcKernelState next;
  next.layer = prev.layer + 1;

  // Self terms: cosine 1, so kappa0 = kappa1 = 1.
  next.sigma_xx = prev.sigma_xx;
  next.sigma_yy = prev.sigma_yy;
  next.ntk_xx = next.sigma_xx + prev.ntk_xx;
  next.ntk_yy = next.sigma_yy + prev.ntk_yy;

  const double norm_x = std::sqrt(std::max(prev.sigma_xx, 0.0));
  const double norm_y = std::sqrt(std::max(prev.sigma_yy, 0.0));
  if (norm_x < kZeroNorm || norm_y < kZeroNorm) {
    next.sigma_xy = 0.0;
    next.ntk_xy = 0.0;
  } else {
    const double cos = clamp_cosine(prev.sigma_xy / (norm_x * norm_y));
    next.sigma_xy = norm_x * norm_y * kappa1(cos);
    next.ntk_xy = next.sigma_xy + prev.ntk_xy * kappa0(cos);
  }

  if (!std::isfinite(next.sigma_xy) || !std::isfinite(next.ntk_xy) || !std::isfinite(next.ntk_xx) ||
      !std::isfinite(next.ntk_yy)) {
    std::ostringstream msg;
    msg << "fc_ntk: non-finite value at layer " << next.layer;
    throw NumericError(msg.str());
  }
  return next;
}

FcKernelState fc_state(std::span<const double> x, std::span<const double> y, int layers) {
  if (x.size() != y.size()) throw InputError("fc_ntk: dimension mismatch");
  if (layers < 0) throw DomainError("fc_ntk: layer count must be >= 0");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("fc_ntk: non-finite input");
  }
  FcKernelState state;
  state.sigma_xx = state.ntk_xx = dot(x, x);
  state.sigma_yy = state.ntk_yy = dot(y, y);
  state.sigma_xy = state.ntk_xy = dot(x, y);
  for (int k = 0; k < layers; ++k) state = fc_step(state);
  return state;
}

FcKernelValue fc_ntk(std::span<const double> x, std::span<const double> y, int layers) {
  if (layers < 1) throw DomainError("fc_ntk: need at least one hidden layer");
  const FcKernelState s = fc_state(x, y, layers);
  return {s.sigma_xy, s.ntk_xy};
}

double clamp_radicand(double radicand, double tolerance) {
  if (radicand >= 0.0) return radicand;
  if (radicand >= -tolerance) return 0.0;
  std::ostringstream msg;
  msg.precision(17);
  msg << "squared feature distance " << radicand << " is negative beyond tolerance";
  throw PsdViolation(msg.str());
}

double fc_feature_distance(std::span<const double> x, std::span<const double> y, int layers) {
  if (layers < 1) throw DomainError("fc_feature_distance: need at least one hidden layer");
  const FcKernelState s = fc_state(x, y, layers);
  return std::sqrt(clamp_radicand(s.ntk_xx + s.ntk_yy - 2.0 * s.ntk_xy));
}

}  // namespace ntk
