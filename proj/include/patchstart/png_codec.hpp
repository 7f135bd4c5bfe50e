#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "patchstart/image.hpp"

namespace patchstart {

// 8-bit grayscale and RGB PNG only. Load maps byte v to v / 255, save maps x to
// round(255 * x) after clamping into [0, 1].
Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);

// Masks travel as single-channel images.
void save_mask_png(const Mask& m, const std::filesystem::path& path);

// Snaps every value onto the 8-bit grid that a PNG round trip produces.
Image quantize_u8(const Image& img);

}  // namespace patchstart
