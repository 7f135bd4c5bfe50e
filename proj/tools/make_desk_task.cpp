// Writes the synthetic desk-scale task (models, donors, originals, manifest,
// config) into a directory.
#include <iostream>

#include <CLI11.hpp>

#include "patchstart/desk_task.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic desk-scale task", "make_desk_task"};
  patchstart::DeskTaskParams params;
  std::string out;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--cases", params.cases, "Number of manifest cases");
  app.add_option("--seed", params.seed, "Task seed");
  app.add_option("--classes", params.num_classes, "Number of classes");
  app.add_option("--donors-per-class", params.donors_per_class, "Donor images per class");
  app.add_option("--background-std", params.background_std, "Per-entry std of the shared background");
  app.add_option("--motif-norm", params.motif_norm, "l2 norm of each class motif");
  app.add_option("--variation-norm", params.variation_norm, "l2 norm of per-image motif variation");
  app.add_option("--noise-norm", params.noise_norm, "l2 norm of per-image full-frame noise");
  app.add_option("--clutter-norm", params.clutter_norm, "l2 norm of per-image clutter");
  app.add_option("--clutter-sigma", params.clutter_sigma, "Blur of the clutter field, pixels");
  app.add_option("--window-frac", params.window_frac, "Motif window sigma / min(H, W)");
  app.add_option("--smooth-sigma", params.smooth_sigma, "Blur of motif and noise fields, pixels");
  app.add_option("--motif-sigma", params.motif_sigma, "Blur of motif fields, pixels");
  app.add_option("--illumination-std", params.illumination_std, "Per-image colour cast std");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto task = patchstart::make_desk_task(params);
    patchstart::write_desk_task(task, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cout << "wrote " << params.cases << " cases to " << out << "\n";
  return 0;
}
