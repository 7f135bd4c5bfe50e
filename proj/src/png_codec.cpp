#include "patchstart/png_codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "patchstart/errors.hpp"
#include "patchstart/fsutil.hpp"

namespace patchstart {

namespace {

struct ReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void read_from_buffer(png_structp png, png_bytep out, png_size_t count) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + count > cur->size) {
    png_error(png, "unexpected end of data");
  }
  std::memcpy(out, cur->data + cur->pos, count);
  cur->pos += count;
}

void write_to_vector(png_structp png, png_bytep in, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + count);
}

void flush_noop(png_structp) {}

void silent_warning(png_structp, png_const_charp) {}

enum class DecodeStatus { ok, corrupt, unsupported };

struct DecodeResult {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

// libpng reports errors through longjmp; keep every non-trivial object outside
// this frame so nothing is skipped when it fires.
DecodeStatus decode_raw(ReadCursor* cursor, std::vector<std::uint8_t>* pixels,
                        std::vector<png_bytep>* rows, DecodeResult* info) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           silent_warning);
  if (png == nullptr) return DecodeStatus::corrupt;
  png_infop pinfo = png_create_info_struct(png);
  if (pinfo == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return DecodeStatus::corrupt;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &pinfo, nullptr);
    return DecodeStatus::corrupt;
  }
  png_set_read_fn(png, cursor, read_from_buffer);
  png_read_info(png, pinfo);
  info->width = png_get_image_width(png, pinfo);
  info->height = png_get_image_height(png, pinfo);
  info->bit_depth = png_get_bit_depth(png, pinfo);
  info->color_type = png_get_color_type(png, pinfo);
  if (info->bit_depth != 8 ||
      (info->color_type != PNG_COLOR_TYPE_GRAY && info->color_type != PNG_COLOR_TYPE_RGB)) {
    png_destroy_read_struct(&png, &pinfo, nullptr);
    return DecodeStatus::unsupported;
  }
  const std::size_t channels = info->color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(info->width) * channels;
  pixels->resize(stride * info->height);
  rows->resize(info->height);
  for (png_uint_32 y = 0; y < info->height; ++y) (*rows)[y] = pixels->data() + y * stride;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &pinfo, nullptr);
  return DecodeStatus::ok;
}

bool encode_raw(const std::uint8_t* pixels, png_uint_32 width, png_uint_32 height,
                int color_type, std::size_t stride, std::vector<png_bytep>* rows,
                std::vector<std::uint8_t>* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            silent_warning);
  if (png == nullptr) return false;
  png_infop pinfo = png_create_info_struct(png);
  if (pinfo == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &pinfo);
    return false;
  }
  png_set_write_fn(png, out, write_to_vector, flush_noop);
  png_set_IHDR(png, pinfo, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, pinfo);
  rows->resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    (*rows)[y] = const_cast<png_bytep>(pixels + y * stride);
  }
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &pinfo);
  return true;
}

std::uint8_t to_byte(double v) {
  if (std::isnan(v)) return 0;
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG stream");
  }
  ReadCursor cursor{bytes.data(), bytes.size(), 0};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  DecodeResult info;
  switch (decode_raw(&cursor, &pixels, &rows, &info)) {
    case DecodeStatus::corrupt:
      throw IoError("corrupt or truncated PNG stream");
    case DecodeStatus::unsupported:
      throw FormatError("unsupported PNG format: bit depth " + std::to_string(info.bit_depth) +
                        ", color type " + std::to_string(info.color_type) +
                        " (need 8-bit gray or RGB)");
    case DecodeStatus::ok:
      break;
  }
  const std::size_t channels = info.color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  Image img(Shape{info.height, info.width, channels});
  auto out = img.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = pixels[i] / 255.0;
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty() || (img.channels() != 1 && img.channels() != 3)) {
    throw InvalidArgument("encode_png: need a non-empty 1- or 3-channel image, got " +
                          img.shape().str());
  }
  std::vector<std::uint8_t> pixels(img.size());
  std::transform(img.data().begin(), img.data().end(), pixels.begin(), to_byte);
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> out;
  const int color_type = img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (!encode_raw(pixels.data(), static_cast<png_uint_32>(img.width()),
                  static_cast<png_uint_32>(img.height()), color_type,
                  img.width() * img.channels(), &rows, &out)) {
    throw IoError("PNG encoding failed");
  }
  return out;
}

Image load_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_png(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                           bytes.size()));
}

void save_mask_png(const Mask& m, const std::filesystem::path& path) {
  save_png(Image(Shape{m.height(), m.width(), 1},
                 std::vector<double>(m.data().begin(), m.data().end())),
           path);
}

Image quantize_u8(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace patchstart
