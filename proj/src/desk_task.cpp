#include "patchstart/desk_task.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "patchstart/errors.hpp"
#include "patchstart/fsutil.hpp"
#include "patchstart/png_codec.hpp"
#include "patchstart/rng.hpp"

namespace patchstart {

namespace fs = std::filesystem;

namespace {

double norm(const Image& img) {
  double acc = 0.0;
  for (double v : img.data()) acc += v * v;
  return std::sqrt(acc);
}

void scale_to_norm(Image& img, double target) {
  const double n = norm(img);
  if (n > 0.0) {
    for (double& v : img.data()) v *= target / n;
  }
}

Image smooth_noise(const Shape& shape, double sigma, Rng& rng) {
  Image img(shape);
  for (double& v : img.data()) v = rng.normal();
  img = gaussian_blur(img, sigma);
  scale_to_norm(img, 1.0);
  return img;
}

Image windowed(Image img, const Shape& shape, double window_sigma) {
  const double cy = 0.5 * static_cast<double>(shape.height - 1);
  const double cx = 0.5 * static_cast<double>(shape.width - 1);
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * window_sigma * window_sigma));
      for (std::size_t c = 0; c < shape.channels; ++c) img.at(y, x, c) *= w;
    }
  }
  return img;
}

// Motifs carry no net colour, so a colour cast cannot favour any class.
void zero_channel_means(Image& img) {
  const std::size_t ch = img.channels();
  for (std::size_t c = 0; c < ch; ++c) {
    double mean = 0.0;
    for (std::size_t px = 0; px < img.shape().pixels(); ++px) mean += img.data()[px * ch + c];
    mean /= static_cast<double>(img.shape().pixels());
    for (std::size_t px = 0; px < img.shape().pixels(); ++px) img.data()[px * ch + c] -= mean;
  }
}

class Generator {
 public:
  explicit Generator(const DeskTaskParams& p) : p_(p) {
    Rng rng(mix_seed(p.seed, 1));
    const double win = p.window_frac * static_cast<double>(std::min(p.shape.height, p.shape.width));
    window_sigma_ = win;
    background_ = smooth_noise(p.shape, p.smooth_sigma, rng);
    scale_to_norm(background_, p.background_std * std::sqrt(static_cast<double>(p.shape.size())));
    for (double& v : background_.data()) v += 0.5;
    for (std::size_t k = 0; k < p.num_classes; ++k) {
      Image motif = windowed(smooth_noise(p.shape, p.motif_sigma, rng), p.shape, win);
      zero_channel_means(motif);
      scale_to_norm(motif, p.motif_norm);
      motifs_.push_back(std::move(motif));
    }
  }

  Image centroid(Label k) const {
    Image c = background_;
    const auto m = motifs_[static_cast<std::size_t>(k)].data();
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += m[i];
    return c.clip();
  }

  Image sample(Label k, Rng& rng) const {
    Image img = centroid(k);
    Image var = windowed(smooth_noise(p_.shape, p_.motif_sigma, rng), p_.shape, window_sigma_);
    scale_to_norm(var, p_.variation_norm);
    Image bg = smooth_noise(p_.shape, p_.smooth_sigma, rng);
    scale_to_norm(bg, p_.noise_norm);
    // clutter lives away from the object: smooth noise under 1 - window
    Image clutter = smooth_noise(p_.shape, p_.clutter_sigma, rng);
    const Image inside = windowed(clutter, p_.shape, window_sigma_);
    for (std::size_t i = 0; i < clutter.size(); ++i) clutter.data()[i] -= inside.data()[i];
    scale_to_norm(clutter, p_.clutter_norm);
    for (std::size_t i = 0; i < img.size(); ++i) {
      img.data()[i] += var.data()[i] + bg.data()[i] + clutter.data()[i];
    }
    // global colour cast, as between photos taken under different light
    const std::size_t ch = p_.shape.channels;
    for (std::size_t c = 0; c < ch; ++c) {
      const double cast = p_.illumination_std * rng.normal();
      for (std::size_t px = 0; px < p_.shape.pixels(); ++px) img.data()[px * ch + c] += cast;
    }
    return quantize_u8(img.clip());
  }

 private:
  DeskTaskParams p_;
  double window_sigma_ = 1.0;
  Image background_;
  std::vector<Image> motifs_;
};

}  // namespace

DeskTask make_desk_task(const DeskTaskParams& params) {
  if (params.num_classes < 2) throw InvalidArgument("desk task needs at least two classes");
  const Generator gen(params);

  CentroidModel oracle{params.shape, {}};
  for (std::size_t k = 0; k < params.num_classes; ++k) {
    oracle.centroids.push_back(gen.centroid(static_cast<Label>(k)));
  }

  Rng surrogate_rng(mix_seed(params.seed, 2));
  CentroidModel surrogate{params.shape, {}};
  for (std::size_t k = 0; k < params.num_classes; ++k) {
    Image mean(params.shape);
    for (std::size_t s = 0; s < params.surrogate_samples; ++s) {
      const Image img = gen.sample(static_cast<Label>(k), surrogate_rng);
      for (std::size_t i = 0; i < mean.size(); ++i) mean.data()[i] += img.data()[i];
    }
    for (double& v : mean.data()) v /= static_cast<double>(std::max<std::size_t>(1, params.surrogate_samples));
    surrogate.centroids.push_back(std::move(mean));
  }

  DeskTask task{params, Model(std::move(oracle)), Model(std::move(surrogate)), {}, {}};

  Rng donor_rng(mix_seed(params.seed, 3));
  for (std::size_t k = 0; k < params.num_classes; ++k) {
    for (std::size_t i = 0; i < params.donors_per_class; ++i) {
      std::ostringstream name;
      name << k << "/donor_" << (i < 10 ? "0" : "") << i << ".png";
      task.donors.push_back({gen.sample(static_cast<Label>(k), donor_rng), static_cast<Label>(k),
                             name.str()});
    }
  }

  Rng case_rng(mix_seed(params.seed, 4));
  for (std::size_t i = 0; i < params.cases; ++i) {
    DeskCase c;
    c.true_label = static_cast<Label>(case_rng.uniform_index(params.num_classes));
    c.target_label = static_cast<Label>(
        (static_cast<std::size_t>(c.true_label) + 1 + case_rng.uniform_index(params.num_classes - 1)) %
        params.num_classes);
    for (int attempt = 0; attempt < 100; ++attempt) {
      c.original = gen.sample(c.true_label, case_rng);
      if (task.oracle.classify(c.original) == c.true_label) break;
    }
    task.cases.push_back(std::move(c));
  }
  return task;
}

void write_desk_task(const DeskTask& task, const fs::path& dir) {
  save_model(task.oracle, dir / "oracle.json");
  save_model(task.surrogate, dir / "surrogate.json");
  for (const auto& d : task.donors) save_png(d.image, dir / "donors" / d.name);

  std::ostringstream manifest;
  for (std::size_t i = 0; i < task.cases.size(); ++i) {
    const auto& c = task.cases[i];
    const std::string rel = "originals/case_" + std::string(i < 10 ? "0" : "") + std::to_string(i) + ".png";
    save_png(c.original, dir / rel);
    nlohmann::json line = {
        {"original", rel}, {"true_label", c.true_label}, {"target_label", c.target_label}};
    manifest << line.dump() << "\n";
  }
  write_file_atomic(dir / "manifest.jsonl", manifest.str());

  std::ostringstream config;
  config << "# desk-scale task, seed " << task.params.seed << "\n"
         << "oracle = \"oracle.json\"\n"
         << "surrogate = \"surrogate.json\"\n"
         << "donors_dir = \"donors\"\n"
         << "strategy = \"copy_paste\"\n"
         << "budget = 5000\n"
         << "threshold = \"auto\"\n"
         << "marks = [500, 1000, 2500, 5000]\n"
         << "seed = " << task.params.seed << "\n"
         << "\n[init]\n"
         << "gain = 1.0\n"
         << "sigma = 2.0\n"
         << "scale_min = 1.0\n"
         << "scale_max = 1.0\n"
         << "\n[attack]\n"
         << "delta = 0.1\n"
         << "epsilon = 0.003\n"
         << "per_channel_noise = true\n"
         << "perlin_freq = 6\n";
  write_file_atomic(dir / "config.toml", config.str());
}

}  // namespace patchstart
