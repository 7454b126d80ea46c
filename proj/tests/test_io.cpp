#include <doctest.h>

#include <sstream>
#include <string>

#include "ntk/error.hpp"
#include "ntk/io.hpp"

using namespace ntk;
using doctest::Approx;

namespace {
std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 8) & 0xff),
          static_cast<char>(v & 0xff)};
}
}  // namespace

TEST_CASE("IDX image fixture") {
  // Two 2x3 images with known bytes.
  std::string bytes = be32(0x803) + be32(2) + be32(2) + be32(3);
  const unsigned char px[12] = {0, 255, 51, 102, 1, 254, 10, 20, 30, 40, 50, 60};
  bytes.append(reinterpret_cast<const char*>(px), 12);
  std::istringstream in(bytes);
  const auto f = read_idx(in);
  CHECK(f.magic == kIdxImagesMagic);
  CHECK(f.dims == std::vector<std::uint32_t>{2, 2, 3});
  const auto imgs = idx_images(f);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].height == 2);
  CHECK(imgs[0].width == 3);
  CHECK(imgs[0].at(0, 1) == 1.0);
  CHECK(imgs[0].at(0, 2) == Approx(0.2).epsilon(1e-15));
  CHECK(imgs[0].at(1, 0) == Approx(0.4).epsilon(1e-15));
  CHECK(imgs[1].at(1, 2) == Approx(60.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("IDX labels, bad magic, truncation") {
  std::string lab = be32(0x801) + be32(3) + std::string("\x07\x00\x09", 3);
  std::istringstream in(lab);
  const auto f = read_idx(in);
  CHECK(idx_labels(f) == std::vector<int>{7, 0, 9});
  CHECK_THROWS_AS(idx_images(f), FormatError);

  std::istringstream bad(be32(0x1234) + be32(1));
  try {
    read_idx(bad);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("0x00001234") != std::string::npos);
  }
  std::istringstream trunc(be32(0x801) + be32(5) + std::string("\x01\x02", 2));
  CHECK_THROWS_AS(read_idx(trunc), LengthError);
  std::istringstream trunc_header(be32(0x803) + be32(1));
  CHECK_THROWS_AS(read_idx(trunc_header), LengthError);
}

TEST_CASE("bundled MNIST subset") {
  const auto c = load_mnist(NTK_DATA_DIR "/mnist-1k-images-idx3-ubyte", NTK_DATA_DIR "/mnist-1k-labels-idx1-ubyte");
  REQUIRE(c.images.size() == 1000);
  CHECK(c.labels.size() == 1000);
  CHECK(c.images[0].height == 28);
  CHECK(c.images[0].width == 28);
  int counts[10] = {};
  for (int l : c.labels) counts[l]++;
  for (int k : counts) CHECK(k == 100);
  for (double v : c.images[17].data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("architecture JSON") {
  const auto a = parse_architecture(
      R"({"layers":[{"patch":[3,3],"pool":{"type":"gaussian","subsample":2}},{"patch":[3,3],"pool":{"type":"gaussian","subsample":5}}],"padding":"zero","initial_pool":false})");
  const auto d = ArchitectureSpec::two_layer_default();
  REQUIRE(a.depth() == 2);
  CHECK(a.layers[0].patch == d.layers[0].patch);
  CHECK(a.layers[1].pool.scale == Approx(d.layers[1].pool.scale));
  CHECK(a.layers[1].pool.half_size == 5);
  CHECK_FALSE(a.initial_pool.has_value());
  const auto round = parse_architecture(architecture_to_json(a));
  CHECK(round.layers[1].pool.subsample == 5);
  CHECK(round.layers[0].patch == a.layers[0].patch);

  const auto b = parse_architecture(
      R"({"layers":[{"offsets":[[0,0],[1,2]],"pool":{"type":"dirac"}}],"initial_pool":true})");
  CHECK(b.layers[0].patch.size() == 2);
  CHECK(b.layers[0].patch[1] == Offset{1, 2});
  REQUIRE(b.initial_pool.has_value());
  CHECK(b.initial_pool->subsample == 1);

  CHECK_THROWS_AS(parse_architecture(R"({"layers":[]})"), ConfigError);
  CHECK_THROWS_AS(parse_architecture(R"({"layers":[{"patch":[3,3],"pool":{"type":"max"}}]})"), ConfigError);
  CHECK_THROWS_AS(parse_architecture(R"({"layers":[{"patch":[3,3]}],"padding":"reflect"})"), ConfigError);
  CHECK_THROWS_AS(parse_architecture("{not json"), ConfigError);
}
