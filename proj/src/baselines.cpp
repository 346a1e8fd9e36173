#include "muscdb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "muscdb/errors.hpp"
#include "muscdb/scoring.hpp"

namespace muscdb {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_dimensions(std::span<const ImageFeature> a, std::span<const ImageFeature> b) {
  std::size_t dim = 0;
  bool have = false;
  for (auto set : {a, b}) {
    for (const ImageFeature& f : set) {
      if (!have) {
        dim = f.vector.size();
        have = true;
      } else if (f.vector.size() != dim) {
        throw Error(ErrorKind::dimension_mismatch, "feature vectors have inconsistent dimensions");
      }
    }
  }
}

}  // namespace

ImageSelection take_within_budget(std::span<const ImageId> order, std::int64_t budget,
                                  const ObjectCounter& objects_in, bool allow_overshoot) {
  ImageSelection sel;
  for (ImageId id : order) {
    const std::int64_t n = objects_in(id);
    if (sel.objects + n > budget) {
      if (allow_overshoot && sel.objects < budget) {
        sel.images.push_back(id);
        sel.objects += n;
        sel.overshoot = sel.objects - budget;
      }
      break;
    }
    sel.images.push_back(id);
    sel.objects += n;
  }
  return sel;
}

std::vector<ImageId> unlabeled_images(const PoolState& pool) {
  std::vector<ImageId> out;
  for (const auto& [id, rec] : pool.images()) {
    if (rec.status == ImageStatus::unlabeled) out.push_back(id);
  }
  return out;
}

ImageSelection random_images(const PoolState& pool, std::int64_t object_budget, std::uint64_t seed,
                             const ObjectCounter& objects_in, bool allow_overshoot) {
  if (object_budget <= 0) return {};
  auto order = unlabeled_images(pool);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return take_within_budget(order, object_budget, objects_in, allow_overshoot);
}

double image_entropy_score(std::span<const Prediction> preds) {
  if (preds.empty()) return 0.0;
  double sum = 0.0;
  for (const Prediction& p : preds) sum += object_entropy(p.class_probs);
  return sum / static_cast<double>(preds.size());
}

ImageSelection entropy_images(const PoolState& pool, std::int64_t object_budget, const ObjectCounter& objects_in,
                              bool allow_overshoot) {
  if (object_budget <= 0) return {};
  std::vector<std::pair<double, ImageId>> ranked;
  for (ImageId id : unlabeled_images(pool)) {
    auto preds = pool.image(id).predictions;
    // Fixed summation order makes the score independent of list order.
    std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) { return a.pred_id < b.pred_id; });
    ranked.emplace_back(image_entropy_score(preds), id);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ImageId> order;
  order.reserve(ranked.size());
  for (const auto& r : ranked) order.push_back(r.second);
  return take_within_budget(order, object_budget, objects_in, allow_overshoot);
}

std::vector<ImageId> coreset_greedy(std::span<const ImageFeature> labeled, std::span<const ImageFeature> unlabeled,
                                    std::size_t k) {
  check_dimensions(labeled, unlabeled);
  std::vector<const ImageFeature*> pool;
  for (const ImageFeature& f : unlabeled) pool.push_back(&f);
  std::sort(pool.begin(), pool.end(), [](const ImageFeature* a, const ImageFeature* b) { return a->image_id < b->image_id; });

  std::vector<double> nearest(pool.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (const ImageFeature& l : labeled) nearest[i] = std::min(nearest[i], squared_distance(pool[i]->vector, l.vector));
  }

  std::vector<ImageId> picked;
  std::vector<bool> taken(pool.size(), false);
  const std::size_t rounds = std::min(k, pool.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      if (best == pool.size() || nearest[i] > nearest[best]) best = i;
    }
    taken[best] = true;
    picked.push_back(pool[best]->image_id);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken[i]) nearest[i] = std::min(nearest[i], squared_distance(pool[i]->vector, pool[best]->vector));
    }
  }
  return picked;
}

double covering_radius(std::span<const ImageFeature> labeled, std::span<const ImageFeature> unlabeled,
                       std::span<const ImageId> centers) {
  check_dimensions(labeled, unlabeled);
  std::vector<const ImageFeature*> anchors;
  for (const ImageFeature& l : labeled) anchors.push_back(&l);
  for (ImageId id : centers) {
    for (const ImageFeature& u : unlabeled) {
      if (u.image_id == id) anchors.push_back(&u);
    }
  }
  double radius = 0.0;
  for (const ImageFeature& u : unlabeled) {
    double best = std::numeric_limits<double>::infinity();
    for (const ImageFeature* a : anchors) best = std::min(best, squared_distance(u.vector, a->vector));
    radius = std::max(radius, best);
  }
  return std::sqrt(radius);
}

ImageSelection coreset_images(const PoolState& pool, std::span<const ImageFeature> features,
                              std::int64_t object_budget, const ObjectCounter& objects_in, bool allow_overshoot) {
  if (object_budget <= 0) return {};
  std::map<ImageId, const ImageFeature*> by_id;
  for (const ImageFeature& f : features) by_id[f.image_id] = &f;

  std::vector<ImageFeature> labeled;
  std::vector<ImageFeature> unlabeled;
  for (const auto& [id, rec] : pool.images()) {
    auto it = by_id.find(id);
    if (rec.status == ImageStatus::unlabeled) {
      if (it == by_id.end()) {
        throw Error(ErrorKind::not_found, "no feature vector for unlabeled image " + std::to_string(id));
      }
      unlabeled.push_back(*it->second);
    } else if (it != by_id.end()) {
      labeled.push_back(*it->second);
    }
  }
  const auto order = coreset_greedy(labeled, unlabeled, unlabeled.size());
  return take_within_budget(order, object_budget, objects_in, allow_overshoot);
}

}  // namespace muscdb
