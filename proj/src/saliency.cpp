#include "patchstart/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "patchstart/errors.hpp"

namespace patchstart {

double SaliencyParams::sigma_for(const Shape& shape) const {
  if (sigma) return *sigma;
  return 0.03 * static_cast<double>(std::min(shape.height, shape.width));
}

Mask saliency_from_gradient(const Image& gradient) {
  Mask m(gradient.height(), gradient.width());
  for (std::size_t y = 0; y < gradient.height(); ++y) {
    for (std::size_t x = 0; x < gradient.width(); ++x) {
      double v = 0.0;
      for (std::size_t c = 0; c < gradient.channels(); ++c) {
        v = std::max(v, std::abs(gradient.at(y, x, c)));
      }
      m.at(y, x) = v;
    }
  }
  const double peak = m.max();
  if (peak > 0.0) {
    for (double& v : m.data()) v /= peak;
  }
  return m;
}

Mask saliency_map(const Model& surrogate, const Image& img, Label target_class) {
  return saliency_from_gradient(surrogate.gradient(img, target_class));
}

Mask smooth_amplify(const Mask& m, double sigma, double gain) {
  if (sigma < 0.0) throw InvalidArgument("smooth_amplify: sigma must be >= 0");
  if (gain < 1.0) throw InvalidArgument("smooth_amplify: gain must be >= 1");
  Mask out = gaussian_blur(m, sigma);
  const double peak = out.max();
  if (peak <= 0.0) {
    std::fill(out.data().begin(), out.data().end(), 0.0);
    return out;
  }
  for (double& v : out.data()) v = std::clamp(v / peak * gain, 0.0, 1.0);
  return out;
}

SaliencyPatch patch_from_mask(const Image& donor, Label donor_label, const Mask& m,
                              double threshold, std::size_t keep) {
  if (m.height() != donor.height() || m.width() != donor.width()) {
    throw InvalidArgument("patch mask does not match donor size");
  }
  const Components comps = connected_components(m, threshold);
  if (comps.count() == 0) {
    throw ExtractionError("no saliency above threshold " + std::to_string(threshold));
  }

  std::vector<int> order(comps.count());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return comps.sizes[a - 1] > comps.sizes[b - 1];
  });
  std::vector<bool> kept(comps.count() + 1, false);
  for (std::size_t i = 0; i < std::min(keep == 0 ? 1 : keep, order.size()); ++i) {
    kept[order[i]] = true;
  }

  SaliencyPatch patch{donor, Mask(m.height(), m.width()), {}, donor_label};
  std::size_t top = m.height(), left = m.width(), bottom = 0, right = 0;
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      if (!kept[comps.label(y, x)]) continue;
      patch.mask.at(y, x) = m.at(y, x);
      top = std::min(top, y);
      left = std::min(left, x);
      bottom = std::max(bottom, y);
      right = std::max(right, x);
    }
  }
  patch.bbox = {top, left, bottom - top + 1, right - left + 1};
  return patch;
}

SaliencyPatch extract_patch(const Image& donor, Label donor_label, const Model& surrogate,
                            const SaliencyParams& params) {
  const Mask raw = saliency_map(surrogate, donor, donor_label);
  const Mask smooth = smooth_amplify(raw, params.sigma_for(donor.shape()), params.gain);
  return patch_from_mask(donor, donor_label, smooth, params.patch_threshold, params.components);
}

}  // namespace patchstart
