#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "muscdb/datamodel.hpp"

namespace muscdb {

struct ImageFeature {
  ImageId image_id = 0;
  std::vector<double> vector;

  friend bool operator==(const ImageFeature&, const ImageFeature&) = default;
};

// Images picked by an image-level strategy and the object cost they incur.
struct ImageSelection {
  std::vector<ImageId> images;
  std::int64_t objects = 0;
  // Objects charged beyond the budget (only non-zero with allow_overshoot).
  std::int64_t overshoot = 0;
};

using ObjectCounter = std::function<std::int64_t(ImageId)>;

// Walks `order` and takes images while the cumulative object count stays
// within `budget`; the first image that does not fit ends the walk. With
// `allow_overshoot` that image is taken as well and the excess reported.
ImageSelection take_within_budget(std::span<const ImageId> order, std::int64_t budget,
                                  const ObjectCounter& objects_in, bool allow_overshoot = false);

std::vector<ImageId> unlabeled_images(const PoolState& pool);

ImageSelection random_images(const PoolState& pool, std::int64_t object_budget, std::uint64_t seed,
                             const ObjectCounter& objects_in, bool allow_overshoot = false);

// Mean object entropy over the image's predictions; 0 without predictions.
double image_entropy_score(std::span<const Prediction> preds);

ImageSelection entropy_images(const PoolState& pool, std::int64_t object_budget, const ObjectCounter& objects_in,
                              bool allow_overshoot = false);

// k-center greedy: repeatedly take the unlabeled point farthest (Euclidean)
// from everything labeled or already taken; ties go to the lower image_id.
// Throws Error{dimension_mismatch} on inconsistent vector lengths.
std::vector<ImageId> coreset_greedy(std::span<const ImageFeature> labeled, std::span<const ImageFeature> unlabeled,
                                    std::size_t k);

// Covering radius of `unlabeled` by the union of `labeled` and `centers`.
double covering_radius(std::span<const ImageFeature> labeled, std::span<const ImageFeature> unlabeled,
                       std::span<const ImageId> centers);

ImageSelection coreset_images(const PoolState& pool, std::span<const ImageFeature> features,
                              std::int64_t object_budget, const ObjectCounter& objects_in,
                              bool allow_overshoot = false);

}  // namespace muscdb
