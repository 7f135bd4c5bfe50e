#include "patchstart/initgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "patchstart/errors.hpp"
#include "patchstart/rng.hpp"

namespace patchstart {

PlacedSize placed_size(const BoundingBox& bbox, double scale) {
  auto dim = [scale](std::size_t n) {
    return static_cast<std::size_t>(
        std::max(1L, std::lround(scale * static_cast<double>(n))));
  };
  return {dim(bbox.height), dim(bbox.width)};
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::copy_paste:
      return "copy_paste";
    case Provenance::closest_image:
      return "closest_image";
    case Provenance::full_image_fallback:
      return "full_image_fallback";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "copy_paste") return Provenance::copy_paste;
  if (s == "closest_image") return Provenance::closest_image;
  if (s == "full_image_fallback") return Provenance::full_image_fallback;
  throw FormatError("unknown provenance '" + s + "'");
}

Image place_patch(const Image& original, const SaliencyPatch& patch, const Placement& placement) {
  if (patch.donor.channels() != original.channels()) {
    throw InvalidArgument("patch donor has " + std::to_string(patch.donor.channels()) +
                          " channels, canvas has " + std::to_string(original.channels()));
  }
  const BoundingBox& bb = patch.bbox;
  if (bb.empty() || bb.top + bb.height > patch.donor.height() ||
      bb.left + bb.width > patch.donor.width()) {
    throw InvalidArgument("patch bbox lies outside its donor");
  }
  const PlacedSize ps = placed_size(bb, placement.scale);
  if (placement.row + ps.height > original.height() ||
      placement.col + ps.width > original.width()) {
    throw InvalidArgument("placed patch " + std::to_string(ps.height) + "x" +
                          std::to_string(ps.width) + " at (" + std::to_string(placement.row) +
                          ", " + std::to_string(placement.col) + ") leaves the canvas");
  }

  const std::size_t ch = original.channels();
  Image crop(Shape{bb.height, bb.width, ch});
  Mask crop_mask(bb.height, bb.width);
  for (std::size_t y = 0; y < bb.height; ++y) {
    for (std::size_t x = 0; x < bb.width; ++x) {
      crop_mask.at(y, x) = patch.mask.at(bb.top + y, bb.left + x);
      for (std::size_t c = 0; c < ch; ++c) {
        crop.at(y, x, c) = patch.donor.at(bb.top + y, bb.left + x, c);
      }
    }
  }
  const Image pixels = resample_bilinear(crop, ps.height, ps.width);
  const Mask alpha = resample_bilinear(crop_mask, ps.height, ps.width);

  Image out = original;
  for (std::size_t y = 0; y < ps.height; ++y) {
    for (std::size_t x = 0; x < ps.width; ++x) {
      const double m = std::clamp(alpha.at(y, x), 0.0, 1.0);
      if (m == 0.0) continue;
      for (std::size_t c = 0; c < ch; ++c) {
        double& o = out.at(placement.row + y, placement.col + x, c);
        o = std::clamp((1.0 - m) * o + m * pixels.at(y, x, c), 0.0, 1.0);
      }
    }
  }
  return out;
}

std::vector<Candidate> generate_candidates(const Image& original,
                                           const std::vector<SaliencyPatch>& pool, std::size_t n,
                                           std::uint64_t seed, double scale_min,
                                           double scale_max) {
  if (pool.empty()) throw InvalidArgument("generate_candidates: empty patch pool");
  if (n == 0) throw InvalidArgument("generate_candidates: need at least one candidate");
  if (!(scale_min > 0.0) || scale_max < scale_min) {
    throw InvalidArgument("generate_candidates: invalid scale range");
  }

  const std::size_t H = original.height();
  const std::size_t W = original.width();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const PlacedSize ps = placed_size(pool[i].bbox, scale_min);
    if (!pool[i].bbox.empty() && ps.height <= H && ps.width <= W) usable.push_back(i);
  }
  if (usable.empty()) {
    throw GenerationError("no patch fits a " + std::to_string(H) + "x" + std::to_string(W) +
                          " canvas at scale " + std::to_string(scale_min));
  }

  Rng rng(seed);
  std::vector<Candidate> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t pi = usable[rng.uniform_index(usable.size())];
    const BoundingBox& bb = pool[pi].bbox;
    const double fit = std::min(static_cast<double>(H) / static_cast<double>(bb.height),
                                static_cast<double>(W) / static_cast<double>(bb.width));
    const double hi = std::max(scale_min, std::min(scale_max, fit));
    double scale = rng.uniform(scale_min, hi);
    PlacedSize ps = placed_size(bb, scale);
    ps.height = std::min(ps.height, H);
    ps.width = std::min(ps.width, W);
    const std::size_t row = rng.uniform_index(H - ps.height + 1);
    const std::size_t col = rng.uniform_index(W - ps.width + 1);

    Candidate cand;
    cand.placement = Placement{pi, scale, row, col};
    cand.image = place_patch(original, pool[pi], cand.placement);
    cand.generation_index = k;
    out.push_back(std::move(cand));
  }
  for (auto& c : out) c.distance = l2_distance(c.image, original);
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance < b.distance;
  });
  return out;
}

InitResult select_start(const std::vector<Candidate>& candidates, OracleSession& session,
                        Label target_class) {
  InitResult result;
  for (const auto& cand : candidates) {
    const Label label = session.classify(cand.image);
    ++result.queries;
    if (label == target_class) {
      result.start = StartingPoint{cand.image, cand.distance, result.queries,
                                   Provenance::copy_paste, cand.placement, {}};
      return result;
    }
  }
  return result;
}

EscalationStep escalate(const InitParams& params, std::size_t round) {
  if (round == 0) throw InvalidArgument("escalate: round must be >= 1");
  EscalationStep step{params, round >= params.rounds};
  if (step.fallback) return step;
  const double f = std::pow(params.escalation_factor, static_cast<double>(round));
  step.params.scale_min = std::min(1.0, params.scale_min * f);
  step.params.scale_max = std::min(1.0, params.scale_max * f);
  step.params.saliency.gain = params.saliency.gain * f;
  return step;
}

InitResult closest_image_init(const Image& original, const std::vector<LabeledImage>& donors,
                              Label target_class, OracleSession& session) {
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < donors.size(); ++i) {
    if (donors[i].label == target_class) {
      ranked.emplace_back(l2_distance(donors[i].image, original), i);
    }
  }
  if (ranked.empty()) {
    throw InvalidArgument("closest_image_init: no donor of target class " +
                          std::to_string(target_class));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  InitResult result;
  for (const auto& [dist, i] : ranked) {
    const Label label = session.classify(donors[i].image);
    ++result.queries;
    if (label == target_class) {
      result.start = StartingPoint{donors[i].image, dist,          result.queries,
                                   Provenance::closest_image, std::nullopt, donors[i].name};
      return result;
    }
  }
  return result;
}

InitResult copy_paste_init(const Image& original, Label target_class,
                           const std::vector<LabeledImage>& donors, const Model& surrogate,
                           OracleSession& session, const InitParams& params, std::uint64_t seed) {
  std::vector<const LabeledImage*> target_donors;
  for (const auto& d : donors) {
    if (d.label == target_class) target_donors.push_back(&d);
  }
  if (target_donors.empty()) {
    throw InvalidArgument("copy_paste_init: no donor of target class " +
                          std::to_string(target_class));
  }

  // seeded Fisher-Yates, then keep the first pool_size donors
  Rng pick(mix_seed(seed, 0x9001));
  for (std::size_t i = target_donors.size(); i > 1; --i) {
    std::swap(target_donors[i - 1], target_donors[pick.uniform_index(i)]);
  }
  if (params.pool_size > 0 && target_donors.size() > params.pool_size) {
    target_donors.resize(params.pool_size);
  }

  InitResult result;
  for (std::size_t round = 0;; ++round) {
    const EscalationStep step =
        round == 0 ? EscalationStep{params, params.rounds == 0} : escalate(params, round);
    if (step.fallback) break;
    result.rounds = round + 1;

    std::vector<SaliencyPatch> pool;
    std::vector<std::string> names;
    for (const LabeledImage* d : target_donors) {
      try {
        pool.push_back(extract_patch(d->image, d->label, surrogate, step.params.saliency));
        names.push_back(d->name);
      } catch (const ExtractionError&) {
        // zero saliency for this donor; the rest of the pool still works
      }
    }
    if (pool.empty()) continue;

    std::vector<Candidate> candidates;
    try {
      candidates = generate_candidates(original, pool, step.params.candidates,
                                       mix_seed(seed, round), step.params.scale_min,
                                       step.params.scale_max);
    } catch (const GenerationError&) {
      continue;
    }
    InitResult r = select_start(candidates, session, target_class);
    result.queries += r.queries;
    if (r.ok()) {
      result.start = std::move(r.start);
      result.start->init_queries = result.queries;
      result.start->donor = names[result.start->placement->patch_index];
      return result;
    }
  }

  if (!params.fallback) return result;
  std::vector<LabeledImage> full;
  for (const LabeledImage* d : target_donors) full.push_back(*d);
  InitResult r = closest_image_init(original, full, target_class, session);
  result.queries += r.queries;
  if (r.ok()) {
    result.start = std::move(r.start);
    result.start->provenance = Provenance::full_image_fallback;
    result.start->init_queries = result.queries;
  }
  return result;
}

}  // namespace patchstart
