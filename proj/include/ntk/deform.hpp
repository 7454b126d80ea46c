#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ntk/conv_ntk.hpp"

namespace ntk {

/// Per-pixel displacement field tau(u) = (row, col) in pixel units, scaled by
/// alpha when applied. Sup norms are always measured from the grid.
class DeformationField {
 public:
  DeformationField() = default;
  /// `tau` holds 2 values (row, col) per pixel, row-major.
  DeformationField(int height, int width, std::vector<double> tau, double alpha = 1.0);

  static DeformationField constant(int height, int width, double d_row, double d_col);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  /// alpha * tau(i, j), component 0 = row, 1 = column.
  [[nodiscard]] double displacement(int i, int j, int component) const {
    return alpha_ * tau_[(static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j)) * 2 +
                         static_cast<std::size_t>(component)];
  }
  /// max_u |alpha tau(u)|.
  [[nodiscard]] double tau_sup() const { return tau_sup_; }
  /// max_u of the largest singular value of the finite-difference Jacobian of alpha tau.
  [[nodiscard]] double grad_sup() const { return grad_sup_; }

  [[nodiscard]] DeformationField scaled(double alpha) const;

 private:
  void measure();

  int height_ = 0;
  int width_ = 0;
  std::vector<double> tau_;
  double alpha_ = 1.0;
  double tau_sup_ = 0.0;
  double grad_sup_ = 0.0;
};

/// Gaussian-weighted interpolation of coarse 2-vectors (row-major, 2 per node)
/// placed at the centers of a coarse_h x coarse_w tiling of the image.
DeformationField interpolate_coarse(std::span<const double> coarse, int coarse_h, int coarse_w, int height, int width,
                                    double smoothing_scale);

/// Random smooth field: standard normal coarse samples, interpolated, then
/// rescaled so that max |tau| = 1 pixel. Deterministic in seed.
/// smoothing_scale <= 0 selects the coarse cell size.
DeformationField generate_tau(std::uint64_t seed, int height, int width, int coarse_h = 4, int coarse_w = 4,
                              double smoothing_scale = 0.0);

/// x(u) - alpha tau(u) . grad x(u), centered differences with zero padding.
ImageSignal apply_tangent_deformation(const ImageSignal& x, const DeformationField& field, double alpha);

/// x(u - alpha tau(u)) by bilinear interpolation, zero outside the grid.
ImageSignal apply_warp(const ImageSignal& x, const DeformationField& field, double alpha);

inline constexpr int kTranslationDirections = 8;

/// One-pixel shift along compass direction 0..7 (0 = up, clockwise), zero-filled.
ImageSignal translate(const ImageSignal& x, int direction);
Offset translation_vector(int direction);

struct TransformSet {
  std::string kind;
  std::vector<ImageSignal> members;
};

struct StabilityRow {
  KernelKind kernel = KernelKind::ntk;
  std::string set;
  double alpha = 0.0;  ///< NaN for label sets
  double mean = 0.0;
  double std = 0.0;
  int n_images = 0;
  double grad_sup = 0.0;  ///< max over members of ||grad(alpha tau)||_inf; NaN for label sets
  double tau_sup = 0.0;   ///< max over members of ||alpha tau||_inf; NaN for label sets
};

struct StabilityConfig {
  std::vector<double> alphas{0.01, 0.03, 0.1, 0.3, 1.0, 3.0};
  int set_size = 20;
  std::uint64_t seed = 0;
  bool exact_warp = false;
  bool with_translations = true;
  std::vector<KernelKind> kernels{KernelKind::ntk, KernelKind::ckn};
  ConvOptions conv;
};

/// Deformed copies of `reference` at scale alpha, one per field; with
/// translations, each is also shifted by one pixel along direction i mod 8.
TransformSet deformation_set(const ImageSignal& reference, std::span<const DeformationField> fields, double alpha,
                             bool exact_warp, bool with_translations);

/// Runs the experiment: "deformations" (and "translations+deformations") sets
/// at every alpha from fields generated off config.seed, plus every fixed set
/// in `label_sets` once. Rows are ordered by kernel, then set, then alpha.
std::vector<StabilityRow> stability_experiment(const ImageSignal& reference, std::span<const TransformSet> label_sets,
                                               const ArchitectureSpec& arch, const StabilityConfig& config);

/// Relative-distance rows for one set and every requested kernel.
std::vector<StabilityRow> evaluate_set(const ImageSignal& reference, const SelfFeatures& reference_features,
                                       const TransformSet& set, const ArchitectureSpec& arch,
                                       std::span<const KernelKind> kernels, const ConvOptions& options);

/// CSV `kernel,set,alpha,mean_rel_dist,std_rel_dist,n_images,grad_sup,tau_sup`.
void write_stability_csv(std::ostream& out, std::span<const StabilityRow> rows);

/// Log-log slope of mean distance against alpha over [alpha_lo, alpha_hi] for
/// one kernel and set. Rows with grad_sup ~ 0 (pure translations) or
/// non-positive means are excluded; needs at least 3 rows.
double small_alpha_slope(std::span<const StabilityRow> rows, KernelKind kernel, const std::string& set,
                         double alpha_lo = 0.01, double alpha_hi = 0.3);

/// Same-label and any-label comparison sets of `set_size` images drawn from a
/// labelled corpus, excluding the reference. Deterministic in seed.
std::vector<TransformSet> label_sets(std::span<const ImageSignal> images, std::span<const int> labels,
                                     std::size_t reference_index, int set_size, std::uint64_t seed);

}  // namespace ntk
