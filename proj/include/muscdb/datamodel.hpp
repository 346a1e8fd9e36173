#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "muscdb/geometry.hpp"

namespace muscdb {

using ImageId = std::int64_t;
using PredId = std::int64_t;
using ClassCounts = std::vector<std::int64_t>;

struct GroundTruthObject {
  int gt_id = 0;
  int class_id = 0;
  RotatedBox box;
  bool difficult = false;
  bool labeled = false;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct Prediction {
  PredId pred_id = 0;
  ImageId image_id = 0;
  RotatedBox box;
  std::vector<double> class_probs;
  double background_score = 0.0;

  int num_classes() const { return static_cast<int>(class_probs.size()); }
  double max_confidence() const;
  // Lowest index wins ties.
  int argmax_class() const;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

enum class ImageStatus { fully_labeled, unlabeled, partially_labeled };

const char* to_string(ImageStatus status);
ImageStatus image_status_from_string(const std::string& text);

struct MatchedObject {
  int gt_id = 0;
  int class_id = 0;
  RotatedBox gt_box;

  friend bool operator==(const MatchedObject&, const MatchedObject&) = default;
};

// One oracle answer. An empty `match` is a background answer.
struct QueryResult {
  ImageId image_id = 0;
  PredId pred_id = 0;
  std::optional<MatchedObject> match;
  double iou_with_gt = 0.0;
  int cycle = 0;
  int cost = 1;

  bool matched() const { return match.has_value(); }

  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

struct ImageRecord {
  ImageStatus status = ImageStatus::unlabeled;
  std::vector<Prediction> predictions;
  // Complete annotation; only populated for fully labeled images.
  std::vector<GroundTruthObject> annotations;
};

struct PoolSnapshot {
  std::map<ImageId, ImageStatus> statuses;
  std::vector<PredId> consumed;
  ClassCounts class_counts;

  friend bool operator==(const PoolSnapshot&, const PoolSnapshot&) = default;
};

// The learner-side view of the data: D_L, D_U and D_P plus the per-class
// object counts a_k over D_L and the matched part of D_P. It never holds the
// ground truth of unlabeled regions; that lives in GroundTruthStore.
class PoolState {
 public:
  explicit PoolState(int num_classes);

  // Fully labeled images must come with their annotations; others must not.
  void add_image(ImageId id, ImageStatus status, std::vector<Prediction> predictions,
                 std::vector<GroundTruthObject> annotations = {});

  // All-or-nothing: the pool is unchanged when any result is rejected.
  void apply_query_results(std::span<const QueryResult> results);

  // Image-level labeling used by the image-based baselines (D_U -> D_L).
  void apply_full_labels(ImageId id, std::vector<GroundTruthObject> annotations);

  int num_classes() const { return num_classes_; }
  const std::map<ImageId, ImageRecord>& images() const { return images_; }
  const ImageRecord& image(ImageId id) const;
  const std::vector<QueryResult>& partial_labels() const { return partial_labels_; }
  const ClassCounts& class_counts() const { return class_counts_; }
  bool consumed(PredId id) const { return consumed_.contains(id); }
  std::size_t count(ImageStatus status) const;

  // Ground-truth boxes the learner already knows for an image (its full
  // annotation or its matched partial labels).
  std::vector<RotatedBox> labeled_boxes(ImageId id) const;

  PoolSnapshot snapshot() const;

 private:
  int num_classes_;
  std::map<ImageId, ImageRecord> images_;
  std::map<ImageId, std::vector<std::size_t>> partial_by_image_;
  std::vector<QueryResult> partial_labels_;
  std::set<PredId> consumed_;
  ClassCounts class_counts_;
};

ClassCounts recount_classes(const PoolState& pool);

// Value-returning form of PoolState::apply_query_results.
PoolState apply_query_results(PoolState pool, std::span<const QueryResult> results);

// Oracle-side ground truth with per-object labeled flags.
class GroundTruthStore {
 public:
  explicit GroundTruthStore(int num_classes) : num_classes_(num_classes) {}

  void add_image(ImageId id, std::vector<GroundTruthObject> objects);
  bool contains(ImageId id) const { return images_.contains(id); }
  std::span<const GroundTruthObject> objects(ImageId id) const;
  // Throws Error{duplicate_label} when the object was already handed out.
  void mark_labeled(ImageId id, int gt_id);
  std::vector<ImageId> image_ids() const;
  ClassCounts class_totals() const;
  int num_classes() const { return num_classes_; }

 private:
  int num_classes_;
  std::map<ImageId, std::vector<GroundTruthObject>> images_;
};

}  // namespace muscdb
