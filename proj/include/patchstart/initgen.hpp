#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patchstart/image.hpp"
#include "patchstart/models.hpp"
#include "patchstart/oracle.hpp"
#include "patchstart/saliency.hpp"

namespace patchstart {

struct LabeledImage {
  Image image;
  Label label = 0;
  std::string name;
};

// Where a pool patch lands on the canvas. The placed size is the patch bbox
// scaled by `scale` (see placed_size).
struct Placement {
  std::size_t patch_index = 0;
  double scale = 1.0;
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const Placement&) const = default;
};

struct PlacedSize {
  std::size_t height;
  std::size_t width;
};

PlacedSize placed_size(const BoundingBox& bbox, double scale);

struct Candidate {
  Image image;
  double distance = 0.0;
  Placement placement;
  std::size_t generation_index = 0;
};

enum class Provenance { copy_paste, closest_image, full_image_fallback };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct StartingPoint {
  Image image;
  double distance = 0.0;
  std::uint64_t init_queries = 0;
  Provenance provenance = Provenance::copy_paste;
  std::optional<Placement> placement;
  std::string donor;  // donor name for image-based starts
};

// Outcome of any initializer. On exhaustion `start` is empty and `queries`
// still reports every oracle call that was made.
struct InitResult {
  std::optional<StartingPoint> start;
  std::uint64_t queries = 0;
  std::size_t rounds = 0;

  bool ok() const { return start.has_value(); }
};

struct InitParams {
  std::size_t candidates = 50;
  std::size_t pool_size = 10;
  double scale_min = 0.5;
  double scale_max = 1.0;
  SaliencyParams saliency;
  double escalation_factor = 1.5;
  // Candidate rounds before the full-image fallback.
  std::size_t rounds = 3;
  bool fallback = true;
};

struct EscalationStep {
  InitParams params;
  bool fallback = false;
};

// Blends the patch's bbox crop, rescaled by placement.scale, into the original
// at (row, col): out = (1 - m) * original + m * donor. Pixels outside the
// placed mask support keep their original bits.
Image place_patch(const Image& original, const SaliencyPatch& patch, const Placement& placement);

// Draws n random placements from the pool and returns the blended candidates
// sorted by l2 distance to the original (ties by generation order).
std::vector<Candidate> generate_candidates(const Image& original,
                                           const std::vector<SaliencyPatch>& pool, std::size_t n,
                                           std::uint64_t seed, double scale_min = 0.5,
                                           double scale_max = 1.0);

// Queries candidates in order and stops at the first one labelled target_class.
InitResult select_start(const std::vector<Candidate>& candidates, OracleSession& session,
                        Label target_class);

// Round r in [1, rounds) scales the scale range (clamped to 1) and the mask
// gain by factor^r; round == rounds requests the full-image fallback.
EscalationStep escalate(const InitParams& params, std::size_t round);

// Baseline: target-class donors in ascending distance order, one query each,
// until one is adversarial. Throws InvalidArgument if there is no donor of
// target_class.
InitResult closest_image_init(const Image& original, const std::vector<LabeledImage>& donors,
                              Label target_class, OracleSession& session);

// Full copy-and-paste initializer: extract a pool from target-class donors,
// generate and probe candidates, escalate, and finally fall back to the
// closest full image if allowed.
InitResult copy_paste_init(const Image& original, Label target_class,
                           const std::vector<LabeledImage>& donors, const Model& surrogate,
                           OracleSession& session, const InitParams& params, std::uint64_t seed);

}  // namespace patchstart
