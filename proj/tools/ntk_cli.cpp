#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ntk/activation_kernels.hpp"
#include "ntk/conv_ntk.hpp"
#include "ntk/deform.hpp"
#include "ntk/error.hpp"
#include "ntk/fc_ntk.hpp"
#include "ntk/io.hpp"
#include "ntk/mc_oracle.hpp"
#include "ntk/parallel.hpp"
#include "ntk/smoothness.hpp"
#include "ntk/spectral.hpp"

using json = nlohmann::json;
using namespace ntk;

namespace {

// ---------------------------------------------------------------------------
// Output

using Cell = std::variant<std::string, double, long long>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  json summary = json::object();
};

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(nullptr);
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

struct Common {
  std::string output;
  std::string format = "csv";
  int threads = 0;
  std::uint64_t seed = 0;
  std::string arch_path;
};

void emit(const std::string& command, const Table& t, const Common& common) {
  std::ofstream file;
  if (!common.output.empty()) {
    file.open(common.output);
    if (!file) throw InputError("cannot open output file " + common.output);
  }
  std::ostream& out = common.output.empty() ? std::cout : file;
  if (common.format == "json") {
    json doc;
    doc["command"] = command;
    doc["status"] = "ok";
    json rows = json::array();
    for (const auto& r : t.rows) {
      json obj;
      for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = cell_json(r[i]);
      rows.push_back(obj);
    }
    doc["rows"] = rows;
    doc["summary"] = t.summary;
    out << doc.dump(2) << '\n';
    return;
  }
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out << format_double(v);
            } else {
              out << v;
            }
          },
          r[i]);
    }
    out << '\n';
  }
  // CSV carries only the table; the summary goes to stderr as one JSON line.
  if (!t.summary.empty()) std::cerr << t.summary.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Inputs

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not a number: '" + item + "'");
    }
  }
  if (v.empty()) throw InputError("empty vector");
  return v;
}

ArchitectureSpec architecture(const Common& common, bool initial_pool_flag) {
  ArchitectureSpec arch = common.arch_path.empty() ? ArchitectureSpec::two_layer_default()
                                                   : load_architecture(common.arch_path);
  if (initial_pool_flag && !arch.initial_pool) arch.initial_pool = Pooling::gaussian_for_subsample(1);
  return arch;
}

// An image is either one entry of an IDX image file or a text grid of numbers
// (one row per line, values separated by commas or whitespace).
ImageSignal load_image(const std::string& path, int index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image file " + path);
  unsigned char head[4] = {};
  in.read(reinterpret_cast<char*>(head), 4);
  in.clear();
  in.seekg(0);
  if (in.gcount() == 4 && head[0] == 0 && head[1] == 0 && head[2] == 8 && head[3] == 3) {
    const auto images = idx_images(read_idx(in));
    if (index < 0 || static_cast<std::size_t>(index) >= images.size()) {
      throw InputError("image index " + std::to_string(index) + " out of range for " + path);
    }
    return images[static_cast<std::size_t>(index)];
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_vector(tok).front());
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("image file " + path + " holds no values");
  auto img = ImageSignal::zeros(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw InputError("ragged rows in image file " + path);
    for (std::size_t j = 0; j < rows[i].size(); ++j) img.ref(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  return img;
}

std::vector<KernelKind> kinds_from(const std::string& kernel) {
  if (kernel == "both") return {KernelKind::ntk, KernelKind::ckn};
  return {kernel_kind_from_string(kernel)};
}

ConvOptions conv_options(const Common& common) {
  ConvOptions o;
  o.threads = common.threads;
  return o;
}

// ---------------------------------------------------------------------------
// Subcommands

Table run_eval_fc(const std::string& xs, const std::string& ys, int depth) {
  const auto x = parse_vector(xs), y = parse_vector(ys);
  const auto v = fc_ntk(x, y, depth);
  Table t{{"depth", "sigma", "ntk", "feature_distance"}, {}};
  t.rows.push_back({static_cast<long long>(depth), v.sigma, v.ntk, fc_feature_distance(x, y, depth)});
  return t;
}

Table run_eval_conv(const ImageSignal& x, const ImageSignal& y, const ArchitectureSpec& arch, const Common& common) {
  const auto v = conv_kernels(x, y, arch, conv_options(common));
  Table t{{"ntk", "ckn"}, {{v.ntk, v.ckn}}};
  return t;
}

Table run_gram(const std::vector<ImageSignal>& images, const ArchitectureSpec& arch, KernelKind kind,
               const Common& common) {
  const auto g = gram(images, arch, kind, conv_options(common));
  Table t;
  t.columns = {"i", "j", "value"};
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) t.rows.push_back({static_cast<long long>(i), static_cast<long long>(j), g(i, j)});
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues();
  t.summary = {{"kernel", to_string(kind)}, {"n", g.rows()}, {"min_eigenvalue", ev.minCoeff()},
               {"max_eigenvalue", ev.maxCoeff()}};
  return t;
}

Table run_spectrum(const std::string& kernel, int p, int kmax, int fit_min, int fit_max) {
  const auto table = compute_spectrum(kernel_by_name(kernel), p, kmax);
  Table t{{"k", "mu", "multiplicity"}, {}};
  for (const auto& r : table.rows)
    t.rows.push_back({static_cast<long long>(r.k), r.mu, static_cast<long long>(r.multiplicity)});
  json fits = json::object();
  for (auto [name, parity] : {std::pair{"even", Parity::even}, std::pair{"odd", Parity::odd}, std::pair{"all", Parity::all}}) {
    try {
      fits[name] = decay_fit(table, fit_min, std::min(fit_max, kmax), parity);
    } catch (const InsufficientData&) {
      fits[name] = nullptr;
    }
  }
  t.summary = {{"kernel", kernel}, {"p", p}, {"kmax", kmax}, {"trace", table.trace()},
               {"fit_range", {fit_min, std::min(fit_max, kmax)}}, {"slopes", fits}};
  if (p >= 3 && kmax >= 2) t.summary["recurrence_error"] = ntk_recurrence_check(p, std::min(kmax, 30));
  return t;
}

Table run_smoothness(const std::string& probe, int pairs, const Common& common) {
  const auto grid = probe_grid();
  const auto ratio = probe == "phi0" ? probe_ratio(&phi0_holder_ratio, grid) : probe_ratio(&ntk_nonlip_ratio, grid);
  Table t{{"u", "ratio"}, {}};
  for (std::size_t i = 0; i < ratio.u_grid.size(); ++i) t.rows.push_back({ratio.u_grid[i], ratio.values[i]});

  std::mt19937_64 rng(common.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> log_norm(std::log(0.1), std::log(10.0));
  auto draw = [&](int dim, double scale) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double s = 0;
    for (auto& e : v) {
      e = normal(rng);
      s += e * e;
    }
    for (auto& e : v) e *= scale / std::sqrt(s);
    return v;
  };
  int holder_violations = 0;
  for (int i = 0; i < pairs; ++i) {
    const auto x = draw(20, std::exp(log_norm(rng)));
    const auto y = draw(20, std::exp(log_norm(rng)));
    if (!holder_bound_check(x, y).holds()) ++holder_violations;
  }
  int m_violations = 0;
  const int quads = std::max(1, pairs / 10);
  auto signal = [&](int c) {
    auto s = ImageSignal::zeros(4, 4, c);
    for (auto& v : s.data) v = normal(rng);
    return s;
  };
  for (int i = 0; i < quads; ++i) {
    const auto x = signal(3), y = signal(2), x2 = signal(3), y2 = signal(2);
    if (!m_smoothness_check(x, y, x2, y2).holds()) ++m_violations;
  }
  const auto phi0 = probe_ratio(&phi0_holder_ratio, grid);
  const auto lip_exp = smooth_activation_lip_check(exp_activation(1.0), std::max(1, pairs / 10), common.seed, 5,
                                                   common.threads);
  const auto lip_sp = smooth_activation_lip_check(softplus_activation(), std::max(1, pairs / 10), common.seed, 5,
                                                  common.threads);
  t.summary = {{"probe", probe},
               {"probe_sup", ratio.sup},
               {"phi0_ratio_sup", phi0.sup},
               {"nonlip_at_1_minus_1e-8", ntk_nonlip_ratio(1.0 - 1e-8)},
               {"holder_pairs", pairs},
               {"holder_violations", holder_violations},
               {"m_quadruples", quads},
               {"m_violations", m_violations},
               {"exp_lipschitz", {{"max_ratio", lip_exp.max_ratio}, {"bound", lip_exp.bound}}},
               {"softplus_lipschitz",
                {{"max_ratio", lip_sp.max_ratio}, {"bound", lip_sp.bound}, {"gammas", lip_sp.gammas}}}};
  return t;
}

Table run_stability(const MnistCorpus& corpus, int reference_index, const ArchitectureSpec& arch,
                    const StabilityConfig& cfg, bool with_label_sets) {
  if (reference_index < 0 || static_cast<std::size_t>(reference_index) >= corpus.images.size()) {
    throw InputError("reference index out of range");
  }
  const auto ref_idx = static_cast<std::size_t>(reference_index);
  std::vector<TransformSet> sets;
  if (with_label_sets) sets = label_sets(corpus.images, corpus.labels, ref_idx, cfg.set_size, cfg.seed);
  const auto rows = stability_experiment(corpus.images[ref_idx], sets, arch, cfg);
  Table t{{"kernel", "set", "alpha", "mean_rel_dist", "std_rel_dist", "n_images", "grad_sup", "tau_sup"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({to_string(r.kernel), r.set, r.alpha, r.mean, r.std, static_cast<long long>(r.n_images),
                      r.grad_sup, r.tau_sup});
  }
  json slopes = json::object();
  for (auto kind : cfg.kernels) {
    try {
      slopes[to_string(kind)] = small_alpha_slope(rows, kind, "deformations");
    } catch (const Error&) {
      slopes[to_string(kind)] = nullptr;
    }
  }
  t.summary = {{"reference_index", reference_index}, {"reference_label", corpus.labels[ref_idx]},
               {"seed", cfg.seed}, {"small_alpha_slopes", slopes}};
  return t;
}

Table run_mc_check(const Common& common, int width, int seeds, int conv_filters, bool& all_pass) {
  Table t{{"check", "value", "reference", "stderr", "z", "pass"}, {}};
  all_pass = true;
  std::mt19937_64 rng(common.seed);
  std::normal_distribution<double> normal;
  auto unit = [&](int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double s = 0;
    for (auto& e : v) {
      e = normal(rng);
      s += e * e;
    }
    for (auto& e : v) e /= std::sqrt(s);
    return v;
  };
  int excursions = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const auto x = unit(10), y = unit(10);
    const auto est = mc_estimate(10, width, seeds, x, y, replica_seed(common.seed, static_cast<std::uint64_t>(pair)),
                                 common.threads);
    const double exact = two_layer_ntk(x, y);
    const double z = (est.mean - exact) / est.stderr_;
    if (std::abs(z) > 3) ++excursions;
    t.rows.push_back({"two_layer_pair_" + std::to_string(pair), est.mean, exact, est.stderr_, z,
                      std::string(std::abs(z) <= 3 ? "yes" : "no")});
  }
  const bool two_layer_ok = excursions <= 1;
  all_pass = all_pass && two_layer_ok;

  auto image = [&](int h, int w) {
    auto s = ImageSignal::zeros(h, w);
    for (auto& v : s.data) v = normal(rng);
    return s;
  };
  ArchitectureSpec conv;
  conv.layers.push_back({box_offsets(2, 2), Pooling::gaussian_for_subsample(1)});
  for (int i = 0; i < 3; ++i) {
    const auto x = image(3, 3), y = image(3, 3);
    const double exact = conv_ntk(x, y, conv);
    const auto mc = conv_mc_estimate(conv, conv_filters, seeds, x, y, replica_seed(common.seed + 1000, i), common.threads);
    const double z = (mc.mean - exact) / mc.stderr_;
    const bool ok = std::abs(z) <= 3;
    all_pass = all_pass && ok;
    t.rows.push_back({"conv_instance_" + std::to_string(i), mc.mean, exact, mc.stderr_, z, std::string(ok ? "yes" : "no")});
  }

  ArchitectureSpec deep = conv;
  deep.layers.push_back({box_offsets(2, 2), Pooling::dirac()});
  const auto x = image(3, 3), y = image(3, 3);
  const std::vector<int> w1{4096}, w2{4096, 4096};
  // The standard error comes from the spread across seeds, so too few seeds
  // make the z-score heavy-tailed.
  const int gp_seeds = std::max(8, seeds);
  const auto g1 = gp_covariance_check(deep, 1, w1, gp_seeds, x, y, 0, 4, common.seed + 2000, common.threads);
  const auto g2 = gp_covariance_check(deep, 2, w2, gp_seeds, x, y, 1, 1, common.seed + 3000, common.threads);
  for (auto [name, g] : {std::pair{"gp_layer_1", g1}, std::pair{"gp_layer_2", g2}}) {
    const bool ok = std::abs(g.z) <= 4;
    all_pass = all_pass && ok;
    t.rows.push_back({std::string(name), g.empirical, g.analytic, g.stderr_, g.z, std::string(ok ? "yes" : "no")});
  }
  t.summary = {{"two_layer_excursions", excursions}, {"two_layer_pass", two_layer_ok}, {"all_pass", all_pass},
               {"width", width}, {"seeds", seeds}};
  return t;
}

// ---------------------------------------------------------------------------

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const LengthError*>(&e)) return "length_error";
  if (dynamic_cast<const FormatError*>(&e)) return "format_error";
  if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
  if (dynamic_cast<const InputError*>(&e)) return "input_error";
  if (dynamic_cast<const PsdViolation*>(&e)) return "psd_violation";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric_error";
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const CapabilityError*>(&e)) return "capability_error";
  if (dynamic_cast<const InsufficientData*>(&e)) return "insufficient_data";
  return "internal_error";
}

void report_failure(const std::string& command, const std::string& kind, const std::string& message) {
  json r = {{"status", "error"}, {"command", command}, {"error", kind}, {"message", message}};
  std::cerr << r.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact neural tangent kernels for fully-connected and convolutional ReLU networks"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--output,-o", common.output, "Write results to this file instead of stdout");
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", common.threads, "Worker threads (0 = all cores, 1 = bit-exact)")
        ->check(CLI::NonNegativeNumber);
  };
  auto add_seed = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--seed", common.seed, "Random seed");
    if (required) opt->required();
  };
  auto add_arch = [&](CLI::App* sub) {
    sub->add_option("--arch", common.arch_path, "Architecture JSON (default: two 3x3 layers, pooling 2 then 5)")
        ->check(CLI::ExistingFile);
  };

  // eval-fc
  std::string fc_x, fc_y;
  int fc_depth = 1;
  auto* eval_fc = app.add_subcommand("eval-fc", "Fully-connected NTK of two vectors");
  eval_fc->add_option("--x", fc_x, "First vector, comma separated")->required();
  eval_fc->add_option("--y", fc_y, "Second vector, comma separated")->required();
  eval_fc->add_option("--depth", fc_depth, "Hidden layers")->check(CLI::PositiveNumber);
  add_common(eval_fc);

  // eval-conv
  std::string conv_x, conv_y;
  int conv_xi = 0, conv_yi = 0;
  bool initial_pool = false;
  auto* eval_conv = app.add_subcommand("eval-conv", "Convolutional NTK and CKN kernels of two images");
  eval_conv->add_option("--x", conv_x, "First image: IDX image file or text grid")->required()->check(CLI::ExistingFile);
  eval_conv->add_option("--y", conv_y, "Second image")->required()->check(CLI::ExistingFile);
  eval_conv->add_option("--x-index", conv_xi, "Image index when --x is an IDX file");
  eval_conv->add_option("--y-index", conv_yi, "Image index when --y is an IDX file");
  eval_conv->add_flag("--initial-pool", initial_pool, "Apply the s = 1 Gaussian pooling to the inputs");
  add_arch(eval_conv);
  add_common(eval_conv);

  // gram
  std::string gram_images = std::string(NTK_DATA_DIR) + "/mnist-1k-images-idx3-ubyte";
  int gram_start = 0, gram_count = 10;
  std::string kernel = "ntk";
  auto* gram_cmd = app.add_subcommand("gram", "Gram matrix over consecutive images of an IDX file");
  gram_cmd->add_option("--images", gram_images, "IDX image file")->check(CLI::ExistingFile);
  gram_cmd->add_option("--start", gram_start, "First image index")->check(CLI::NonNegativeNumber);
  gram_cmd->add_option("--count", gram_count, "Number of images")->check(CLI::PositiveNumber);
  gram_cmd->add_option("--kernel", kernel, "Kernel")->check(CLI::IsMember({"ntk", "ckn"}));
  gram_cmd->add_flag("--initial-pool", initial_pool, "Apply the s = 1 Gaussian pooling to the inputs");
  add_arch(gram_cmd);
  add_common(gram_cmd);

  // spectrum
  std::string spec_kernel = "ntk";
  int spec_p = 3, spec_kmax = 100, fit_min = 20, fit_max = 100;
  auto* spectrum = app.add_subcommand("spectrum", "Mercer eigenvalues of a dot-product kernel on the sphere");
  spectrum->add_option("--kernel", spec_kernel, "ntk, kappa0 or kappa1")->check(CLI::IsMember({"ntk", "kappa0", "kappa1", "arccos0", "arccos1"}));
  spectrum->add_option("--p", spec_p, "Ambient dimension")->check(CLI::Range(3, 1000));
  spectrum->add_option("--kmax", spec_kmax, "Largest degree")->check(CLI::Range(0, 5000));
  spectrum->add_option("--fit-min", fit_min, "Smallest degree in the decay fit");
  spectrum->add_option("--fit-max", fit_max, "Largest degree in the decay fit");
  add_common(spectrum);

  // smoothness
  std::string probe = "nonlip";
  int pairs = 10000;
  auto* smooth = app.add_subcommand("smoothness", "Smoothness probes and bound sweeps");
  smooth->add_option("--probe", probe, "Ratio written as the CSV table")->check(CLI::IsMember({"phi0", "nonlip"}));
  smooth->add_option("--pairs", pairs, "Random pairs in the bound sweep")->check(CLI::PositiveNumber);
  add_seed(smooth, true);
  add_common(smooth);

  // stability
  std::string st_images = std::string(NTK_DATA_DIR) + "/mnist-1k-images-idx3-ubyte";
  std::string st_labels = std::string(NTK_DATA_DIR) + "/mnist-1k-labels-idx1-ubyte";
  int st_ref = -1, st_ref_label = 5, st_set_size = 20;
  std::vector<double> alphas{0.01, 0.03, 0.1, 0.3, 1.0, 3.0};
  bool exact_warp = false, no_translations = false, no_label_sets = false, no_initial_pool = false;
  std::string st_kernel = "both";
  auto* stab = app.add_subcommand("stability", "Relative kernel distances under deformations of an MNIST digit");
  stab->add_option("--images", st_images, "IDX image file")->check(CLI::ExistingFile);
  stab->add_option("--labels", st_labels, "IDX label file")->check(CLI::ExistingFile);
  stab->add_option("--reference-index", st_ref, "Reference image index (default: first with --reference-label)");
  stab->add_option("--reference-label", st_ref_label, "Label of the default reference")->check(CLI::Range(0, 9));
  stab->add_option("--set-size", st_set_size, "Images per set")->check(CLI::PositiveNumber);
  stab->add_option("--alphas", alphas, "Deformation scales")->delimiter(',');
  stab->add_option("--kernel", st_kernel, "ntk, ckn or both")->check(CLI::IsMember({"ntk", "ckn", "both"}));
  stab->add_flag("--exact-warp", exact_warp, "Bilinear warp instead of the tangent approximation");
  stab->add_flag("--no-translations", no_translations, "Skip the translations+deformations set");
  stab->add_flag("--no-label-sets", no_label_sets, "Skip the same-label and any-label sets");
  stab->add_flag("--no-initial-pool", no_initial_pool, "Do not pool the inputs before the first layer");
  add_seed(stab, true);
  add_arch(stab);
  add_common(stab);

  // mc-check
  int mc_width = 1 << 16, mc_seeds = 32, mc_filters = 1 << 14;
  auto* mc = app.add_subcommand("mc-check", "Monte Carlo battery against the analytic kernels");
  mc->add_option("--width", mc_width, "Hidden width of the two-layer networks")->check(CLI::PositiveNumber);
  mc->add_option("--seeds", mc_seeds, "Networks per estimate")->check(CLI::Range(2, 100000));
  mc->add_option("--filters", mc_filters, "Filters of the convolutional networks")->check(CLI::PositiveNumber);
  add_seed(mc, true);
  add_common(mc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_failure(argc > 1 ? argv[1] : "", "usage_error", e.what());
    return 2;
  }
  if (common.threads == 0) common.threads = default_threads();

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    bool ok = true;
    Table t;
    if (command == "eval-fc") {
      t = run_eval_fc(fc_x, fc_y, fc_depth);
    } else if (command == "eval-conv") {
      t = run_eval_conv(load_image(conv_x, conv_xi), load_image(conv_y, conv_yi), architecture(common, initial_pool),
                        common);
    } else if (command == "gram") {
      std::ifstream in(gram_images, std::ios::binary);
      const auto all = idx_images(read_idx(in));
      if (static_cast<std::size_t>(gram_start + gram_count) > all.size()) throw InputError("image range out of bounds");
      const std::vector<ImageSignal> imgs(all.begin() + gram_start, all.begin() + gram_start + gram_count);
      t = run_gram(imgs, architecture(common, initial_pool), kernel_kind_from_string(kernel), common);
    } else if (command == "spectrum") {
      t = run_spectrum(spec_kernel, spec_p, spec_kmax, fit_min, fit_max);
    } else if (command == "smoothness") {
      t = run_smoothness(probe, pairs, common);
    } else if (command == "stability") {
      const auto corpus = load_mnist(st_images, st_labels);
      if (st_ref < 0) {
        for (std::size_t i = 0; i < corpus.labels.size(); ++i)
          if (corpus.labels[i] == st_ref_label) {
            st_ref = static_cast<int>(i);
            break;
          }
        if (st_ref < 0) throw InputError("no image with label " + std::to_string(st_ref_label));
      }
      StabilityConfig cfg;
      cfg.alphas = alphas;
      cfg.set_size = st_set_size;
      cfg.seed = common.seed;
      cfg.exact_warp = exact_warp;
      cfg.with_translations = !no_translations;
      cfg.kernels = kinds_from(st_kernel);
      cfg.conv.threads = common.threads;
      t = run_stability(corpus, st_ref, architecture(common, !no_initial_pool), cfg, !no_label_sets);
    } else if (command == "mc-check") {
      t = run_mc_check(common, mc_width, mc_seeds, mc_filters, ok);
    }
    emit(command, t, common);
    if (!ok) {
      report_failure(command, "check_failed", "one or more Monte Carlo checks failed");
      return 3;
    }
    return 0;
  } catch (const std::exception& e) {
    report_failure(command, error_kind(e), e.what());
    return 1;
  }
}
