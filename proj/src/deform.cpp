#include "ntk/deform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <random>

#include "ntk/error.hpp"
#include "ntk/parallel.hpp"

namespace ntk {

namespace {

// Largest singular value of [[a, b], [c, d]].
double spectral_norm_2x2(double a, double b, double c, double d) {
  const double f = a * a + b * b + c * c + d * d;
  const double det = a * d - b * c;
  const double disc = std::sqrt(std::max(0.0, f * f - 4.0 * det * det));
  return std::sqrt(0.5 * (f + disc));
}

}  // namespace

DeformationField::DeformationField(int height, int width, std::vector<double> tau, double alpha)
    : height_(height), width_(width), tau_(std::move(tau)), alpha_(alpha) {
  if (height < 1 || width < 1) throw ConfigError("DeformationField: empty grid");
  if (tau_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 2) {
    throw ConfigError("DeformationField: tau must hold 2 values per pixel");
  }
  measure();
}

DeformationField DeformationField::constant(int height, int width, double d_row, double d_col) {
  std::vector<double> tau(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 2);
  for (std::size_t i = 0; i < tau.size(); i += 2) {
    tau[i] = d_row;
    tau[i + 1] = d_col;
  }
  return {height, width, std::move(tau)};
}

DeformationField DeformationField::scaled(double alpha) const {
  DeformationField out = *this;
  out.alpha_ = alpha;
  out.measure();
  return out;
}

void DeformationField::measure() {
  auto raw = [this](int i, int j, int comp) {
    return tau_[(static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j)) * 2 +
                static_cast<std::size_t>(comp)];
  };
  // Centered differences inside, one-sided at the border.
  auto diff = [&](int i, int j, int comp, int axis) {
    const int n = axis == 0 ? height_ : width_;
    const int pos = axis == 0 ? i : j;
    if (n == 1) return 0.0;
    const int lo = std::max(pos - 1, 0);
    const int hi = std::min(pos + 1, n - 1);
    const double vlo = axis == 0 ? raw(lo, j, comp) : raw(i, lo, comp);
    const double vhi = axis == 0 ? raw(hi, j, comp) : raw(i, hi, comp);
    return (vhi - vlo) / static_cast<double>(hi - lo);
  };
  double tau_max = 0.0;
  double grad_max = 0.0;
  for (int i = 0; i < height_; ++i) {
    for (int j = 0; j < width_; ++j) {
      tau_max = std::max(tau_max, std::hypot(raw(i, j, 0), raw(i, j, 1)));
      grad_max = std::max(grad_max, spectral_norm_2x2(diff(i, j, 0, 0), diff(i, j, 0, 1), diff(i, j, 1, 0),
                                                      diff(i, j, 1, 1)));
    }
  }
  tau_sup_ = std::abs(alpha_) * tau_max;
  grad_sup_ = std::abs(alpha_) * grad_max;
}

DeformationField interpolate_coarse(std::span<const double> coarse, int coarse_h, int coarse_w, int height, int width,
                                    double smoothing_scale) {
  if (coarse_h < 2 || coarse_w < 2) throw ConfigError("deformation coarse grid must be at least 2x2");
  if (coarse.size() != static_cast<std::size_t>(coarse_h * coarse_w * 2)) {
    throw ConfigError("interpolate_coarse: expected 2 values per coarse node");
  }
  const double cell_h = static_cast<double>(height) / coarse_h;
  const double cell_w = static_cast<double>(width) / coarse_w;
  const double scale = smoothing_scale > 0.0 ? smoothing_scale : std::max(cell_h, cell_w);

  std::vector<double> tau(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 2, 0.0);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      double wsum = 0.0, r = 0.0, c = 0.0;
      for (int ci = 0; ci < coarse_h; ++ci) {
        for (int cj = 0; cj < coarse_w; ++cj) {
          const double di = i - ((ci + 0.5) * cell_h - 0.5);
          const double dj = j - ((cj + 0.5) * cell_w - 0.5);
          const double w = std::exp(-0.5 * (di * di + dj * dj) / (scale * scale));
          const auto k = static_cast<std::size_t>(ci * coarse_w + cj) * 2;
          wsum += w;
          r += w * coarse[k];
          c += w * coarse[k + 1];
        }
      }
      const auto k = (static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)) * 2;
      tau[k] = r / wsum;
      tau[k + 1] = c / wsum;
    }
  }
  return {height, width, std::move(tau)};
}

DeformationField generate_tau(std::uint64_t seed, int height, int width, int coarse_h, int coarse_w,
                              double smoothing_scale) {
  if (coarse_h < 2 || coarse_w < 2) throw ConfigError("deformation coarse grid must be at least 2x2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> coarse(static_cast<std::size_t>(coarse_h * coarse_w * 2));
  for (double& v : coarse) v = normal(rng);
  const DeformationField raw = interpolate_coarse(coarse, coarse_h, coarse_w, height, width, smoothing_scale);

  std::vector<double> tau(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 2);
  const double inv = 1.0 / raw.tau_sup();
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const auto k = (static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)) * 2;
      tau[k] = raw.displacement(i, j, 0) * inv;
      tau[k + 1] = raw.displacement(i, j, 1) * inv;
    }
  }
  return {height, width, std::move(tau)};
}

namespace {

void check_field_shape(const ImageSignal& x, const DeformationField& field) {
  if (x.height != field.height() || x.width != field.width()) {
    throw ConfigError("deformation field and image differ in shape");
  }
}

}  // namespace

ImageSignal apply_tangent_deformation(const ImageSignal& x, const DeformationField& field, double alpha) {
  check_field_shape(x, field);
  const DeformationField f = field.scaled(field.alpha() * alpha);
  ImageSignal out = x;
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      const double tr = f.displacement(i, j, 0);
      const double tc = f.displacement(i, j, 1);
      for (int c = 0; c < x.channels; ++c) {
        const double gr = 0.5 * (x.at(i + 1, j, c) - x.at(i - 1, j, c));
        const double gc = 0.5 * (x.at(i, j + 1, c) - x.at(i, j - 1, c));
        out.ref(i, j, c) = x.at(i, j, c) - (tr * gr + tc * gc);
      }
    }
  }
  return out;
}

ImageSignal apply_warp(const ImageSignal& x, const DeformationField& field, double alpha) {
  check_field_shape(x, field);
  const DeformationField f = field.scaled(field.alpha() * alpha);
  ImageSignal out = ImageSignal::zeros(x.height, x.width, x.channels);
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      const double si = i - f.displacement(i, j, 0);
      const double sj = j - f.displacement(i, j, 1);
      const double fi = std::floor(si);
      const double fj = std::floor(sj);
      const double ti = si - fi;
      const double tj = sj - fj;
      const int i0 = static_cast<int>(fi);
      const int j0 = static_cast<int>(fj);
      for (int c = 0; c < x.channels; ++c) {
        out.ref(i, j, c) = (1 - ti) * (1 - tj) * x.at(i0, j0, c) + (1 - ti) * tj * x.at(i0, j0 + 1, c) +
                           ti * (1 - tj) * x.at(i0 + 1, j0, c) + ti * tj * x.at(i0 + 1, j0 + 1, c);
      }
    }
  }
  return out;
}

Offset translation_vector(int direction) {
  // Compass order starting north and turning clockwise; direction d + 4 undoes d.
  static constexpr Offset kDirections[kTranslationDirections] = {{-1, 0}, {-1, 1}, {0, 1},  {1, 1},
                                                                 {1, 0},  {1, -1}, {0, -1}, {-1, -1}};
  if (direction < 0 || direction >= kTranslationDirections) {
    throw ConfigError("translate: direction must be in 0..7, got " + std::to_string(direction));
  }
  return kDirections[direction];
}

ImageSignal translate(const ImageSignal& x, int direction) {
  const Offset d = translation_vector(direction);
  ImageSignal out = ImageSignal::zeros(x.height, x.width, x.channels);
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      for (int c = 0; c < x.channels; ++c) out.ref(i, j, c) = x.at(i - d.di, j - d.dj, c);
    }
  }
  return out;
}

TransformSet deformation_set(const ImageSignal& reference, std::span<const DeformationField> fields, double alpha,
                             bool exact_warp, bool with_translations) {
  TransformSet set;
  set.kind = with_translations ? "translations+deformations" : "deformations";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    ImageSignal y = exact_warp ? apply_warp(reference, fields[i], alpha)
                               : apply_tangent_deformation(reference, fields[i], alpha);
    if (with_translations) y = translate(y, static_cast<int>(i % kTranslationDirections));
    set.members.push_back(std::move(y));
  }
  return set;
}

std::vector<StabilityRow> evaluate_set(const ImageSignal& reference, const SelfFeatures& reference_features,
                                       const TransformSet& set, const ArchitectureSpec& arch,
                                       std::span<const KernelKind> kernels, const ConvOptions& options) {
  if (set.members.empty()) throw ConfigError("transform set '" + set.kind + "' is empty");
  ConvOptions inner = options;
  inner.threads = 1;
  std::vector<SelfFeatures> selfs(set.members.size());
  std::vector<ConvKernelValue> cross(set.members.size());
  parallel_for(0, set.members.size(), options.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (!set.members[i].same_shape(reference)) throw ConfigError("transform set member differs in shape");
      selfs[i] = self_features(set.members[i], arch, inner);
      cross[i] = cross_kernel(reference, reference_features, set.members[i], selfs[i], arch, inner);
    }
  });

  std::vector<StabilityRow> rows;
  for (KernelKind kind : kernels) {
    std::vector<double> d(set.members.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = relative_distance_value(reference_features.self.get(kind), selfs[i].self.get(kind), cross[i].get(kind));
    }
    const MeanStd ms = mean_std(d);
    StabilityRow row;
    row.kernel = kind;
    row.set = set.kind;
    row.alpha = std::numeric_limits<double>::quiet_NaN();
    row.mean = ms.mean;
    row.std = ms.std;
    row.n_images = static_cast<int>(d.size());
    row.grad_sup = std::numeric_limits<double>::quiet_NaN();
    row.tau_sup = std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

std::vector<StabilityRow> stability_experiment(const ImageSignal& reference, std::span<const TransformSet> label_sets,
                                               const ArchitectureSpec& arch, const StabilityConfig& config) {
  if (config.set_size < 1) throw ConfigError("stability: set size must be >= 1");
  if (config.alphas.empty()) throw ConfigError("stability: no alphas given");
  std::vector<DeformationField> fields;
  for (int i = 0; i < config.set_size; ++i) {
    fields.push_back(generate_tau(config.seed + static_cast<std::uint64_t>(i), reference.height, reference.width));
  }
  const SelfFeatures ref = self_features(reference, arch, config.conv);

  std::vector<StabilityRow> rows;
  std::vector<bool> translation_modes{false};
  if (config.with_translations) translation_modes.push_back(true);
  for (bool with_translations : translation_modes) {
    for (double alpha : config.alphas) {
      const TransformSet set = deformation_set(reference, fields, alpha, config.exact_warp, with_translations);
      double grad_sup = 0.0;
      double tau_sup = 0.0;
      for (const auto& f : fields) {
        grad_sup = std::max(grad_sup, f.grad_sup() * alpha);
        tau_sup = std::max(tau_sup, f.tau_sup() * alpha);
      }
      for (auto row : evaluate_set(reference, ref, set, arch, config.kernels, config.conv)) {
        row.alpha = alpha;
        row.grad_sup = grad_sup;
        row.tau_sup = tau_sup;
        rows.push_back(row);
      }
    }
  }
  for (const auto& set : label_sets) {
    for (const auto& row : evaluate_set(reference, ref, set, arch, config.kernels, config.conv)) rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [&](const StabilityRow& a, const StabilityRow& b) {
    auto rank = [&](KernelKind k) {
      return std::find(config.kernels.begin(), config.kernels.end(), k) - config.kernels.begin();
    };
    return rank(a.kernel) < rank(b.kernel);
  });
  return rows;
}

void write_stability_csv(std::ostream& out, std::span<const StabilityRow> rows) {
  const auto old = out.precision(17);
  out << "kernel,set,alpha,mean_rel_dist,std_rel_dist,n_images,grad_sup,tau_sup\n";
  for (const auto& r : rows) {
    out << to_string(r.kernel) << ',' << r.set << ',' << r.alpha << ',' << r.mean << ',' << r.std << ',' << r.n_images
        << ',' << r.grad_sup << ',' << r.tau_sup << '\n';
  }
  out.precision(old);
}

double small_alpha_slope(std::span<const StabilityRow> rows, KernelKind kernel, const std::string& set,
                         double alpha_lo, double alpha_hi) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& r : rows) {
    if (r.kernel != kernel || r.set != set) continue;
    if (!(r.alpha >= alpha_lo && r.alpha <= alpha_hi)) continue;
    if (!(r.mean > 0.0) || !(r.grad_sup > 1e-12)) continue;
    xs.push_back(std::log(r.alpha));
    ys.push_back(std::log(r.mean));
  }
  if (xs.size() < 3) {
    throw InsufficientData("small_alpha_slope: need at least 3 usable alpha points, have " + std::to_string(xs.size()));
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

std::vector<TransformSet> label_sets(std::span<const ImageSignal> images, std::span<const int> labels,
                                     std::size_t reference_index, int set_size, std::uint64_t seed) {
  if (images.size() != labels.size()) throw ConfigError("label_sets: image and label counts differ");
  if (reference_index >= images.size()) throw ConfigError("label_sets: reference index out of range");
  const int label = labels[reference_index];
  std::vector<std::size_t> same;
  std::vector<std::size_t> any;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (i == reference_index) continue;
    any.push_back(i);
    if (labels[i] == label) same.push_back(i);
  }
  if (same.size() < static_cast<std::size_t>(set_size) || any.size() < static_cast<std::size_t>(set_size)) {
    throw ConfigError("label_sets: corpus too small for the requested set size");
  }
  std::mt19937_64 rng(seed);
  auto pick = [&](std::vector<std::size_t> pool, const std::string& kind) {
    // Partial Fisher–Yates with explicit index arithmetic (std::shuffle's
    // output is not pinned down by the standard).
    TransformSet set;
    set.kind = kind;
    for (int k = 0; k < set_size; ++k) {
      const std::size_t remaining = pool.size() - static_cast<std::size_t>(k);
      const std::size_t j = static_cast<std::size_t>(k) + static_cast<std::size_t>(rng() % remaining);
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      set.members.push_back(images[pool[static_cast<std::size_t>(k)]]);
    }
    return set;
  };
  std::vector<TransformSet> out;
  out.push_back(pick(same, "same-label"));
  out.push_back(pick(any, "any-label"));
  return out;
}

}  // namespace ntk
