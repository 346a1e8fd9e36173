#include "muscdb/datamodel.hpp"

#include <algorithm>

#include "muscdb/errors.hpp"

namespace muscdb {

double Prediction::max_confidence() const {
  if (class_probs.empty()) return 0.0;
  return *std::max_element(class_probs.begin(), class_probs.end());
}

int Prediction::argmax_class() const {
  if (class_probs.empty()) return -1;
  return static_cast<int>(std::max_element(class_probs.begin(), class_probs.end()) - class_probs.begin());
}

const char* to_string(ImageStatus status) {
  switch (status) {
    case ImageStatus::fully_labeled: return "fully_labeled";
    case ImageStatus::unlabeled: return "unlabeled";
    case ImageStatus::partially_labeled: return "partially_labeled";
  }
  return "unknown";
}

ImageStatus image_status_from_string(const std::string& text) {
  if (text == "fully_labeled") return ImageStatus::fully_labeled;
  if (text == "unlabeled") return ImageStatus::unlabeled;
  if (text == "partially_labeled") return ImageStatus::partially_labeled;
  throw Error(ErrorKind::parse, "unknown image status '" + text + "'");
}

PoolState::PoolState(int num_classes) : num_classes_(num_classes), class_counts_(num_classes, 0) {
  if (num_classes < 2) throw Error(ErrorKind::contract, "at least two classes are required");
}

void PoolState::add_image(ImageId id, ImageStatus status, std::vector<Prediction> predictions,
                          std::vector<GroundTruthObject> annotations) {
  if (images_.contains(id)) {
    throw Error(ErrorKind::contract, "image " + std::to_string(id) + " added twice");
  }
  if (status == ImageStatus::partially_labeled) {
    throw Error(ErrorKind::contract, "images enter the pool labeled or unlabeled, never partial");
  }
  if (status == ImageStatus::unlabeled && !annotations.empty()) {
    throw Error(ErrorKind::contract, "unlabeled image carries annotations");
  }
  for (const Prediction& p : predictions) {
    if (p.image_id != id) throw Error(ErrorKind::contract, "prediction assigned to wrong image");
    if (p.num_classes() != num_classes_) {
      throw Error(ErrorKind::dimension_mismatch, "prediction class vector has wrong length");
    }
  }
  for (const GroundTruthObject& gt : annotations) {
    if (gt.class_id < 0 || gt.class_id >= num_classes_) {
      throw Error(ErrorKind::unknown_class, "annotation class out of range");
    }
    ++class_counts_[gt.class_id];
  }
  images_.emplace(id, ImageRecord{status, std::move(predictions), std::move(annotations)});
}

const ImageRecord& PoolState::image(ImageId id) const {
  auto it = images_.find(id);
  if (it == images_.end()) throw Error(ErrorKind::not_found, "image " + std::to_string(id) + " not in pool");
  return it->second;
}

void PoolState::apply_query_results(std::span<const QueryResult> results) {
  std::set<PredId> batch_preds;
  std::set<std::pair<ImageId, int>> batch_gts;
  for (const QueryResult& r : results) {
    auto it = images_.find(r.image_id);
    if (it == images_.end()) {
      throw Error(ErrorKind::not_found, "query result for unknown image " + std::to_string(r.image_id));
    }
    const ImageRecord& rec = it->second;
    if (rec.status == ImageStatus::fully_labeled) {
      throw Error(ErrorKind::contract, "query result targets fully labeled image " + std::to_string(r.image_id));
    }
    const bool known_pred = std::any_of(rec.predictions.begin(), rec.predictions.end(),
                                        [&](const Prediction& p) { return p.pred_id == r.pred_id; });
    if (!known_pred) {
      throw Error(ErrorKind::not_found, "prediction " + std::to_string(r.pred_id) + " not in image " +
                                            std::to_string(r.image_id));
    }
    if (consumed_.contains(r.pred_id) || !batch_preds.insert(r.pred_id).second) {
      throw Error(ErrorKind::duplicate_label, "prediction " + std::to_string(r.pred_id) + " already queried");
    }
    if (r.cost != 1) throw Error(ErrorKind::contract, "query cost must be 1");
    if (r.match) {
      if (r.match->class_id < 0 || r.match->class_id >= num_classes_) {
        throw Error(ErrorKind::unknown_class, "matched class out of range");
      }
      if (!(r.iou_with_gt > 0.0)) throw Error(ErrorKind::contract, "matched result with zero IoU");
      const auto key = std::make_pair(r.image_id, r.match->gt_id);
      bool seen = !batch_gts.insert(key).second;
      if (auto pit = partial_by_image_.find(r.image_id); pit != partial_by_image_.end()) {
        for (std::size_t idx : pit->second) {
          const auto& prev = partial_labels_[idx];
          if (prev.match && prev.match->gt_id == r.match->gt_id) seen = true;
        }
      }
      if (seen) {
        throw Error(ErrorKind::duplicate_label, "object " + std::to_string(r.match->gt_id) + " in image " +
                                                    std::to_string(r.image_id) + " already labeled");
      }
    }
  }

  for (const QueryResult& r : results) {
    images_.at(r.image_id).status = ImageStatus::partially_labeled;
    consumed_.insert(r.pred_id);
    partial_by_image_[r.image_id].push_back(partial_labels_.size());
    partial_labels_.push_back(r);
    if (r.match) ++class_counts_[r.match->class_id];
  }
}

void PoolState::apply_full_labels(ImageId id, std::vector<GroundTruthObject> annotations) {
  auto it = images_.find(id);
  if (it == images_.end()) throw Error(ErrorKind::not_found, "image " + std::to_string(id) + " not in pool");
  if (it->second.status != ImageStatus::unlabeled) {
    throw Error(ErrorKind::duplicate_label, "image " + std::to_string(id) + " is not unlabeled");
  }
  for (const GroundTruthObject& gt : annotations) {
    if (gt.class_id < 0 || gt.class_id >= num_classes_) {
      throw Error(ErrorKind::unknown_class, "annotation class out of range");
    }
  }
  for (const GroundTruthObject& gt : annotations) ++class_counts_[gt.class_id];
  it->second.status = ImageStatus::fully_labeled;
  it->second.annotations = std::move(annotations);
}

std::size_t PoolState::count(ImageStatus status) const {
  return static_cast<std::size_t>(std::count_if(images_.begin(), images_.end(),
                                                [&](const auto& kv) { return kv.second.status == status; }));
}

std::vector<RotatedBox> PoolState::labeled_boxes(ImageId id) const {
  const ImageRecord& rec = image(id);
  std::vector<RotatedBox> out;
  for (const GroundTruthObject& gt : rec.annotations) out.push_back(gt.box);
  if (auto it = partial_by_image_.find(id); it != partial_by_image_.end()) {
    for (std::size_t idx : it->second) {
      if (partial_labels_[idx].match) out.push_back(partial_labels_[idx].match->gt_box);
    }
  }
  return out;
}

PoolSnapshot PoolState::snapshot() const {
  PoolSnapshot snap;
  for (const auto& [id, rec] : images_) snap.statuses.emplace(id, rec.status);
  snap.consumed.assign(consumed_.begin(), consumed_.end());
  snap.class_counts = class_counts_;
  return snap;
}

ClassCounts recount_classes(const PoolState& pool) {
  ClassCounts counts(pool.num_classes(), 0);
  for (const auto& [id, rec] : pool.images()) {
    if (rec.status != ImageStatus::fully_labeled) continue;
    for (const GroundTruthObject& gt : rec.annotations) ++counts[gt.class_id];
  }
  for (const QueryResult& r : pool.partial_labels()) {
    if (r.match) ++counts[r.match->class_id];
  }
  return counts;
}

PoolState apply_query_results(PoolState pool, std::span<const QueryResult> results) {
  pool.apply_query_results(results);
  return pool;
}

void GroundTruthStore::add_image(ImageId id, std::vector<GroundTruthObject> objects) {
  std::set<int> ids;
  for (const GroundTruthObject& gt : objects) {
    if (gt.class_id < 0 || gt.class_id >= num_classes_) {
      throw Error(ErrorKind::unknown_class, "ground-truth class out of range");
    }
    if (!ids.insert(gt.gt_id).second) {
      throw Error(ErrorKind::contract, "duplicate gt_id " + std::to_string(gt.gt_id) + " in image " +
                                           std::to_string(id));
    }
  }
  std::sort(objects.begin(), objects.end(),
            [](const GroundTruthObject& a, const GroundTruthObject& b) { return a.gt_id < b.gt_id; });
  if (!images_.emplace(id, std::move(objects)).second) {
    throw Error(ErrorKind::contract, "image " + std::to_string(id) + " added twice");
  }
}

std::span<const GroundTruthObject> GroundTruthStore::objects(ImageId id) const {
  auto it = images_.find(id);
  if (it == images_.end()) throw Error(ErrorKind::not_found, "no ground truth for image " + std::to_string(id));
  return it->second;
}

void GroundTruthStore::mark_labeled(ImageId id, int gt_id) {
  auto it = images_.find(id);
  if (it == images_.end()) throw Error(ErrorKind::not_found, "no ground truth for image " + std::to_string(id));
  for (GroundTruthObject& gt : it->second) {
    if (gt.gt_id != gt_id) continue;
    if (gt.labeled) {
      throw Error(ErrorKind::duplicate_label, "object " + std::to_string(gt_id) + " already labeled");
    }
    gt.labeled = true;
    return;
  }
  throw Error(ErrorKind::not_found, "object " + std::to_string(gt_id) + " not in image " + std::to_string(id));
}

std::vector<ImageId> GroundTruthStore::image_ids() const {
  std::vector<ImageId> out;
  out.reserve(images_.size());
  for (const auto& kv : images_) out.push_back(kv.first);
  return out;
}

ClassCounts GroundTruthStore::class_totals() const {
  ClassCounts out(num_classes_, 0);
  for (const auto& [id, objs] : images_) {
    for (const GroundTruthObject& gt : objs) ++out[gt.class_id];
  }
  return out;
}

}  // namespace muscdb
