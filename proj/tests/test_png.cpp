#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "patchstart/errors.hpp"
#include "patchstart/png_codec.hpp"
#include "patchstart/rng.hpp"

using namespace patchstart;
namespace fs = std::filesystem;

namespace {

std::uint32_t crc32(const std::vector<std::uint8_t>& bytes, std::size_t from) {
  std::uint32_t crc = 0xffffffffu;
  for (std::size_t i = from; i < bytes.size(); ++i) {
    crc ^= bytes[i];
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type,
               const std::vector<std::uint8_t>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32(out, crc32(body, 0));
}

// 1x1 8-bit grayscale PNG holding one byte, zlib "stored" block, no libpng.
std::vector<std::uint8_t> handmade_gray_png(std::uint8_t value) {
  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, 1);
  put_u32(ihdr, 1);
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});
  put_chunk(out, "IHDR", ihdr);

  const std::vector<std::uint8_t> raw{0, value};  // filter byte + pixel
  std::uint32_t a = 1, b = 0;
  for (std::uint8_t v : raw) {
    a = (a + v) % 65521;
    b = (b + a) % 65521;
  }
  std::vector<std::uint8_t> z{0x78, 0x01, 0x01, 0x02, 0x00, 0xfd, 0xff};
  z.insert(z.end(), raw.begin(), raw.end());
  put_u32(z, (b << 16) | a);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "patchstart_test_png";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("decode handmade gray pixel") {
  const auto bytes = handmade_gray_png(128);
  const Image img = decode_png(bytes);
  REQUIRE(img.shape() == Shape{1, 1, 1});
  CHECK(img.data()[0] == 128.0 / 255.0);
}

TEST_CASE("rgb round trip is exact on the 8-bit grid") {
  Rng rng(3);
  Image img({5, 7, 3});
  for (double& v : img.data()) v = static_cast<double>(rng.uniform_index(256)) / 255.0;
  const fs::path path = temp_dir() / "rt.png";
  save_png(img, path);
  CHECK(load_png(path) == img);
  CHECK(decode_png(encode_png(img)) == img);
}

TEST_CASE("quantize matches a png round trip") {
  Rng rng(4);
  Image img({4, 4, 3});
  for (double& v : img.data()) v = rng.uniform(-0.2, 1.2);
  const Image q = quantize_u8(img);
  CHECK(decode_png(encode_png(img)) == q);
  for (double v : q.data()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("malformed input") {
  const auto good = handmade_gray_png(7);
  const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + 40);
  CHECK_THROWS_AS(decode_png(truncated), IoError);

  std::vector<std::uint8_t> not_png(good);
  not_png[1] = 'X';
  CHECK_THROWS_AS(decode_png(not_png), FormatError);

  const fs::path path = temp_dir() / "truncated.png";
  {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(truncated.data()),
            static_cast<std::streamsize>(truncated.size()));
  }
  CHECK_THROWS_AS(load_png(path), IoError);
  CHECK_THROWS_AS(load_png(temp_dir() / "does_not_exist.png"), IoError);
}

TEST_CASE("unsupported channel counts are rejected on save") {
  CHECK_THROWS(encode_png(Image({2, 2, 2})));
}
