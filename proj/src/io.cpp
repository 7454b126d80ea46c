#include "ntk/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ntk/error.hpp"

namespace ntk {

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw LengthError(std::string("IDX: truncated while reading ") + what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::string hex(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

IdxFile read_idx(std::istream& in) {
  IdxFile file;
  file.magic = read_be32(in, "magic");
  std::size_t ndims = 0;
  if (file.magic == kIdxImagesMagic) {
    ndims = 3;
  } else if (file.magic == kIdxLabelsMagic) {
    ndims = 1;
  } else {
    throw FormatError("IDX: unexpected magic " + hex(file.magic) + " (expected 0x00000803 or 0x00000801)");
  }
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    file.dims.push_back(read_be32(in, "dimension size"));
    total *= file.dims.back();
  }
  file.bytes.resize(total);
  in.read(reinterpret_cast<char*>(file.bytes.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(in.gcount()) != total) {
    throw LengthError("IDX: expected " + std::to_string(total) + " data bytes, found " +
                      std::to_string(in.gcount()));
  }
  return file;
}

IdxFile read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("IDX: cannot open " + path);
  return read_idx(in);
}

std::vector<ImageSignal> idx_images(const IdxFile& file) {
  if (file.magic != kIdxImagesMagic || file.dims.size() != 3) throw FormatError("IDX: not an image file");
  const int count = static_cast<int>(file.dims[0]);
  const int rows = static_cast<int>(file.dims[1]);
  const int cols = static_cast<int>(file.dims[2]);
  std::vector<ImageSignal> images;
  images.reserve(static_cast<std::size_t>(count));
  const auto pixels = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  for (int n = 0; n < count; ++n) {
    ImageSignal im = ImageSignal::zeros(rows, cols, 1);
    for (std::size_t k = 0; k < pixels; ++k) {
      im.data[k] = file.bytes[static_cast<std::size_t>(n) * pixels + k] / 255.0;
    }
    images.push_back(std::move(im));
  }
  return images;
}

std::vector<int> idx_labels(const IdxFile& file) {
  if (file.magic != kIdxLabelsMagic || file.dims.size() != 1) throw FormatError("IDX: not a label file");
  return {file.bytes.begin(), file.bytes.end()};
}

MnistCorpus load_mnist(const std::string& images_path, const std::string& labels_path) {
  MnistCorpus corpus;
  corpus.images = idx_images(read_idx(images_path));
  corpus.labels = idx_labels(read_idx(labels_path));
  if (corpus.images.size() != corpus.labels.size()) {
    throw FormatError("MNIST: " + std::to_string(corpus.images.size()) + " images but " +
                      std::to_string(corpus.labels.size()) + " labels");
  }
  return corpus;
}

namespace {

using nlohmann::json;

Pooling parse_pool(const json& j) {
  const std::string type = j.value("type", "gaussian");
  const int s = j.value("subsample", 1);
  if (s < 1) throw ConfigError("architecture: subsample must be >= 1");
  if (type == "dirac") return Pooling::dirac(s);
  if (type != "gaussian") throw ConfigError("architecture: unknown pool type '" + type + "'");
  Pooling p = Pooling::gaussian_for_subsample(s);
  if (j.contains("scale")) p.scale = j.at("scale").get<double>();
  if (j.contains("half_size")) p.half_size = j.at("half_size").get<int>();
  return p;
}

json pool_json(const Pooling& p) {
  json j;
  j["type"] = p.filter == PoolFilter::dirac ? "dirac" : "gaussian";
  j["subsample"] = p.subsample;
  if (p.filter == PoolFilter::gaussian) {
    j["scale"] = p.scale;
    j["half_size"] = p.half_size;
  }
  return j;
}

}  // namespace

ArchitectureSpec parse_architecture(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("architecture: invalid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("layers") || !doc.at("layers").is_array()) {
      throw ConfigError("architecture: expected an object with a \"layers\" array");
    }
    if (doc.value("padding", std::string("zero")) != "zero") {
      throw ConfigError("architecture: only zero padding is supported");
    }
    ArchitectureSpec arch;
    for (const auto& layer : doc.at("layers")) {
      LayerSpec spec;
      if (layer.contains("offsets")) {
        for (const auto& o : layer.at("offsets")) spec.patch.push_back({o.at(0).get<int>(), o.at(1).get<int>()});
      } else {
        const auto patch = layer.value("patch", std::vector<int>{1, 1});
        if (patch.size() != 2) throw ConfigError("architecture: patch must be [rows, cols]");
        spec.patch = box_offsets(patch[0], patch[1]);
      }
      spec.pool = layer.contains("pool") ? parse_pool(layer.at("pool")) : Pooling::dirac(1);
      arch.layers.push_back(std::move(spec));
    }
    if (doc.contains("initial_pool")) {
      const auto& ip = doc.at("initial_pool");
      if (ip.is_boolean()) {
        if (ip.get<bool>()) arch.initial_pool = Pooling::gaussian_for_subsample(1);
      } else {
        arch.initial_pool = parse_pool(ip);
      }
    }
    arch.validate();
    return arch;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
}

ArchitectureSpec load_architecture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("architecture: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_architecture(buf.str());
}

std::string architecture_to_json(const ArchitectureSpec& arch) {
  json doc;
  doc["padding"] = "zero";
  doc["layers"] = json::array();
  for (const auto& layer : arch.layers) {
    json l;
    json offsets = json::array();
    for (const auto& o : layer.patch) offsets.push_back({o.di, o.dj});
    l["offsets"] = offsets;
    l["pool"] = pool_json(layer.pool);
    doc["layers"].push_back(l);
  }
  doc["initial_pool"] = arch.initial_pool ? pool_json(*arch.initial_pool) : json(false);
  return doc.dump();
}

}  // namespace ntk
