#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ntk/conv_ntk.hpp"

namespace ntk {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Raw contents of an IDX file of unsigned bytes.
struct IdxFile {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

/// Big-endian magic and dimension sizes followed by raw bytes. Accepts the
/// image (0x803) and label (0x801) magics only.
IdxFile read_idx(std::istream& in);
IdxFile read_idx(const std::string& path);

/// Images scaled to [0, 1], one channel.
std::vector<ImageSignal> idx_images(const IdxFile& file);
std::vector<int> idx_labels(const IdxFile& file);

struct MnistCorpus {
  std::vector<ImageSignal> images;
  std::vector<int> labels;
};

MnistCorpus load_mnist(const std::string& images_path, const std::string& labels_path);

/// Parses the JSON architecture description, e.g.
/// {"layers":[{"patch":[3,3],"pool":{"type":"gaussian","subsample":2}}],
///  "padding":"zero","initial_pool":false}
/// Gaussian scale and half-size default to s/sqrt(2) and s.
ArchitectureSpec parse_architecture(const std::string& json_text);
ArchitectureSpec load_architecture(const std::string& path);
std::string architecture_to_json(const ArchitectureSpec& arch);

}  // namespace ntk
