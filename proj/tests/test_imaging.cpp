#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fixthresh/error.hpp"
#include "fixthresh/image.hpp"
#include "oracles.hpp"

using namespace fixthresh;
using imaging::ImageTensor;
using imaging::ImageU8;
using imaging::Range;

namespace {

std::string fixture(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

// Minimal P6 reader for the reference-codec expectations.
ImageU8 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  REQUIRE(magic == "P6");
  REQUIRE(maxval == 255);
  in.get();
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.data.resize(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  REQUIRE(in.gcount() == static_cast<std::streamsize>(img.data.size()));
  return img;
}

}  // namespace

TEST_CASE("load_image: 1x1 white PNG") {
  const ImageU8 img = imaging::load_image(fixture("white_1x1.png"));
  REQUIRE(img.height == 1);
  REQUIRE(img.width == 1);
  CHECK(img.data == std::vector<std::uint8_t>{255, 255, 255});
}

TEST_CASE("load_image: grayscale PNG replicates channels") {
  const ImageU8 img = imaging::load_image(fixture("gray10_4x3.png"));
  REQUIRE(img.height == 3);
  REQUIRE(img.width == 4);
  for (std::uint8_t v : img.data) CHECK(v == 10);
}

TEST_CASE("load_image: JPEG decode matches the reference decoder byte-exactly") {
  const ImageU8 got = imaging::load_image(fixture("photo_64.jpg"));
  const ImageU8 want = read_ppm(fixture("photo_64_jpg_decoded.ppm"));
  REQUIRE(got.height == want.height);
  REQUIRE(got.width == want.width);
  CHECK(got.data == want.data);
}

TEST_CASE("load_image error paths") {
  CHECK_THROWS_AS(imaging::load_image(fixture("does_not_exist.png")), Error);
  // A non-image file is rejected as a format error.
  CHECK_THROWS_AS(imaging::load_image(fixture("gen_fixtures.py")), Error);
}

TEST_CASE("to_unit and to_u8") {
  ImageU8 img;
  img.height = 1;
  img.width = 3;
  img.data = {255, 0, 128, 255, 0, 128, 255, 0, 128};
  const ImageTensor t = imaging::to_unit(img);
  CHECK(t.data[0] == 1.0);
  CHECK(t.data[1] == 0.0);
  CHECK(t.data[2] == doctest::Approx(128.0 / 255.0));
  const ImageU8 back = imaging::to_u8(t);
  CHECK(back.data == img.data);
}

TEST_CASE("resize_bicubic identity and constants") {
  oracles::MiniRng rng(5);
  ImageTensor img = ImageTensor::zeros(6, 9);
  for (auto& v : img.data) v = 0.1 + 0.8 * rng.uniform();

  const ImageTensor same = imaging::resize_bicubic(img, 6, 9);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::fabs(same.data[i] - img.data[i]) < 1e-6);

  for (auto dims : {std::pair{3, 5}, {8, 8}, {13, 2}, {1, 1}}) {
    const ImageTensor c = imaging::resize_bicubic(
        ImageTensor::constant(7, 7, 0.42), dims.first, dims.second);
    CHECK(c.height == dims.first);
    CHECK(c.width == dims.second);
    for (double v : c.data) CHECK(std::fabs(v - 0.42) < 1e-6);
  }
}

TEST_CASE("resize_bicubic matches the direct Catmull-Rom formula") {
  // 4x4 ramp with values kept away from the [0,1] edges so clamping stays inert.
  ImageTensor img = ImageTensor::zeros(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = 0.1 + 0.05 * x + 0.1 * y + 0.02 * c;

  const ImageTensor up = imaging::resize_bicubic(img, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) {
        const double want = oracles::bicubic_sample(img.data, 4, 4, c, y, x, 8, 8);
        CHECK(std::fabs(up.at(y, x, c) - want) < 1e-4);
      }

  // A non-uniform random image and a downscale, against the same oracle.
  oracles::MiniRng rng(17);
  ImageTensor rnd = ImageTensor::zeros(9, 7);
  for (auto& v : rnd.data) v = 0.15 + 0.7 * rng.uniform();
  const ImageTensor down = imaging::resize_bicubic(rnd, 5, 6);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c) {
        const double want = oracles::bicubic_sample(rnd.data, 9, 7, c, y, x, 5, 6);
        CHECK(std::fabs(down.at(y, x, c) - want) < 1e-4);
      }
}

TEST_CASE("normalize with ImageNet statistics") {
  const imaging::NormStats stats = imaging::imagenet_stats();
  ImageTensor img = ImageTensor::zeros(1, 2);
  img.at(0, 0, 0) = 0.485;  // channel-0 mean maps to 0
  img.at(0, 1, 0) = 1.0;
  const ImageTensor out = imaging::normalize(img, stats);
  CHECK(out.range_tag == Range::normalized);
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(out.at(0, 1, 0) == doctest::Approx((1.0 - 0.485) / 0.229).epsilon(1e-6));
  CHECK(out.at(0, 1, 0) == doctest::Approx(2.2489).epsilon(1e-4));

  CHECK_THROWS_AS(imaging::normalize(out, stats), Error);  // wrong range tag
}

TEST_CASE("normalize round-trips through denormalize") {
  oracles::MiniRng rng(11);
  const imaging::NormStats stats = imaging::imagenet_stats();
  ImageTensor img = ImageTensor::zeros(5, 4);
  for (auto& v : img.data) v = rng.uniform();
  const ImageTensor back = imaging::denormalize(imaging::normalize(img, stats), stats);
  CHECK(back.range_tag == Range::unit);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::fabs(back.data[i] - img.data[i]) < 1e-6);
}

TEST_CASE("preprocessing is label-agnostic: same bytes, same output") {
  const ImageU8 img = imaging::load_image(fixture("photo_64.png"));
  const ImageTensor a =
      imaging::normalize(imaging::resize_bicubic(imaging::to_unit(img), 32, 32),
                         imaging::imagenet_stats());
  const ImageTensor b =
      imaging::normalize(imaging::resize_bicubic(imaging::to_unit(img), 32, 32),
                         imaging::imagenet_stats());
  CHECK(a.data == b.data);
}

TEST_CASE("save_png round trip and chunk inventory") {
  const ImageU8 img = imaging::load_image(fixture("photo_64.png"));
  const std::string tmp = "test_save_roundtrip.png";
  imaging::save_png(tmp, img);
  const ImageU8 back = imaging::load_image(tmp);
  CHECK(back.data == img.data);

  // Only critical chunks: no ancillary metadata that could leak labels.
  std::ifstream in(tmp, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  std::vector<std::string> chunks;
  std::size_t off = 8;
  while (off + 8 <= bytes.size()) {
    const std::size_t len = (static_cast<std::size_t>(bytes[off]) << 24) |
                            (bytes[off + 1] << 16) | (bytes[off + 2] << 8) |
                            bytes[off + 3];
    chunks.emplace_back(bytes.begin() + off + 4, bytes.begin() + off + 8);
    off += 12 + len;
  }
  for (const auto& c : chunks)
    CHECK((c == "IHDR" || c == "IDAT" || c == "IEND"));
  std::remove(tmp.c_str());
}
