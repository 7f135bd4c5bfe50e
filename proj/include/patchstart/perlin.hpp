#pragma once

#include <cstddef>

#include "patchstart/image.hpp"
#include "patchstart/rng.hpp"

namespace patchstart {

// 2-D lattice gradient noise on a freq x freq cell grid spanning the image,
// with smoothstep interpolation. Pixel (y, x) sits at lattice coordinate
// (y * freq / height, x * freq / width); the field is exactly 0 on lattice
// corners. Returns a single-channel image, unnormalized.
Image perlin_raw(std::size_t height, std::size_t width, std::size_t freq, Rng& rng);

// perlin_raw scaled to max-abs 1 (an all-zero field stays zero).
Image sample_perlin(std::size_t height, std::size_t width, std::size_t freq, Rng& rng);

}  // namespace patchstart
