#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "patchstart/image.hpp"
#include "patchstart/initgen.hpp"
#include "patchstart/models.hpp"

namespace patchstart {

// Small synthetic stand-in for an image classification benchmark.
//
// Every class centroid is a shared smooth background plus a class motif: smooth
// noise under a centered Gaussian window. Images of a class add per-image
// variation of the motif (same window), weak full-frame noise and clutter
// confined to the outside of the window, so the class-relevant pixels sit in
// the middle of the frame while whole images differ mostly elsewhere. The oracle is the
// nearest-centroid classifier over the true centroids; the surrogate is a
// nearest-centroid classifier over sample means from an independent draw.
struct DeskTaskParams {
  Shape shape{32, 32, 3};
  std::size_t num_classes = 10;
  double background_std = 0.12;   // per-entry std of the shared background
  double motif_norm = 1.6;        // l2 norm of each class motif
  double variation_norm = 1.6;    // l2 norm of per-image motif variation
  double noise_norm = 1.0;        // l2 norm of per-image full-frame noise
  double clutter_norm = 3.5;      // l2 norm of per-image clutter outside the window
  double clutter_sigma = 2.0;     // blur of the clutter field, pixels
  double window_frac = 0.1;       // motif window sigma as a fraction of min(H, W)
  double smooth_sigma = 1.2;      // blur of background and noise fields, pixels
  double motif_sigma = 2.0;       // blur of motifs and their variation, pixels
  double illumination_std = 0.0;  // per-image, per-channel constant offset
  std::size_t donors_per_class = 10;
  std::size_t surrogate_samples = 16;
  std::size_t cases = 20;
  std::uint64_t seed = 1;
};

struct DeskCase {
  Image original;
  Label true_label = 0;
  Label target_label = 0;
};

struct DeskTask {
  DeskTaskParams params;
  Model oracle;
  Model surrogate;
  std::vector<LabeledImage> donors;
  std::vector<DeskCase> cases;
};

// Every image is quantized to 8 bits so that the files written by
// write_desk_task load back bit-identical. Originals are drawn until the
// oracle assigns them their true label.
DeskTask make_desk_task(const DeskTaskParams& params);

// Writes oracle.json, surrogate.json, donors/<label>/*.png, originals/*.png,
// manifest.jsonl and config.toml (paths relative to `dir`).
void write_desk_task(const DeskTask& task, const std::filesystem::path& dir);

}  // namespace patchstart
