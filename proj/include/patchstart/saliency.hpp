#pragma once

#include <cstddef>
#include <optional>

#include "patchstart/image.hpp"
#include "patchstart/models.hpp"

namespace patchstart {

struct BoundingBox {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool empty() const { return height == 0 || width == 0; }
  bool operator==(const BoundingBox&) const = default;
};

struct SaliencyParams {
  // Blur radius in pixels; unset means 0.03 * min(H, W).
  std::optional<double> sigma;
  double gain = 4.0;
  double patch_threshold = 0.5;
  // Number of largest above-threshold components kept in the patch.
  std::size_t components = 1;

  double sigma_for(const Shape& shape) const;
};

// A salient region of a target-class donor: the donor pixels plus a soft mask
// that is zero outside the kept component(s). bbox tightly bounds
// {mask >= patch_threshold}.
struct SaliencyPatch {
  Image donor;
  Mask mask;
  BoundingBox bbox;
  Label donor_label = 0;

  bool operator==(const SaliencyPatch&) const = default;
};

// Per-pixel max over channels of |gradient|, scaled so the maximum is 1. An
// all-zero gradient gives an all-zero mask.
Mask saliency_from_gradient(const Image& gradient);
Mask saliency_map(const Model& surrogate, const Image& img, Label target_class);

// Blur, renormalize to a peak of 1, multiply by gain, clip to [0, 1].
Mask smooth_amplify(const Mask& m, double sigma, double gain);

// Throws ExtractionError when nothing survives the threshold.
SaliencyPatch extract_patch(const Image& donor, Label donor_label, const Model& surrogate,
                            const SaliencyParams& params);

// Keeps the `keep` largest components of {m >= threshold} (ties by label
// order), zeroes every other pixel and returns the tight bounding box.
// Exposed for testing with hand-built masks.
SaliencyPatch patch_from_mask(const Image& donor, Label donor_label, const Mask& m,
                              double threshold, std::size_t keep);

}  // namespace patchstart
