#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "muscdb/baselines.hpp"
#include "muscdb/datamodel.hpp"
#include "muscdb/surrogate.hpp"

namespace muscdb {

struct DetectorNoise {
  // Softmax temperature on the class scores; 0 means hard one-hot output.
  double prob_temperature = 1.0;
  double confusion_rate = 0.0;
  double box_jitter_sigma = 0.0;
  // Expected false positives per image (Poisson).
  double false_positive_rate = 0.0;
  double miss_rate = 0.0;
  // Score margin given to the detected class and the std-dev of per-class
  // score noise.
  double class_boost = 5.0;
  double logit_noise = 1.0;
  // The boost for class k is scaled by (freq_k / freq_0)^exponent, so with a
  // positive exponent rare classes are detected less confidently.
  double rare_class_boost_exponent = 0.0;
  // Background score ranges for true detections and false positives.
  double true_background_max = 0.1;
  double fp_background_min = 0.5;
  double fp_background_max = 0.95;
};

struct GenConfig {
  int num_classes = 8;
  int num_images = 100;
  int min_objects = 5;
  int max_objects = 15;
  double class_frequency_exponent = 0.0;
  double scene_size = 1024.0;
  double min_box_size = 16.0;
  double max_box_size = 64.0;
  DetectorNoise noise;
  int feature_dim = 16;
  double feature_separation = 3.0;
  double initial_labeled_fraction = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  // Normalised power-law class frequencies (k + 1)^-s.
  std::vector<double> class_frequencies() const;
};

struct Scene {
  std::vector<GroundTruthObject> objects;
  std::vector<std::vector<double>> features;
};

struct SimulatedPrediction {
  Prediction prediction;
  // gt_id of the source object, -1 for false positives.
  int source_gt = -1;
  std::vector<double> feature;
};

// Independent generator for (seed, image, purpose); images come out the same
// regardless of generation order.
std::mt19937_64 image_stream(std::uint64_t seed, std::int64_t image_id, std::uint64_t purpose);

// Throws Error{scene_too_dense} when an object cannot be placed with pairwise
// IoU below 0.3 after 1000 attempts.
Scene gen_scene(const GenConfig& config, ImageId image_id, std::mt19937_64& rng);

// Returns predictions with pred_id left at 0 and image_id set.
std::vector<SimulatedPrediction> simulate_detector(const Scene& scene, const GenConfig& config, ImageId image_id,
                                                   std::mt19937_64& rng);

// Everything a synthetic experiment needs. The pool is the learner's view;
// truth and the feature tables are only read by the oracle and the surrogate.
struct SyntheticWorld {
  PoolState pool;
  GroundTruthStore truth;
  std::vector<ImageFeature> image_features;
  std::map<std::pair<ImageId, int>, std::vector<double>> object_features;
  std::map<PredId, std::vector<double>> prediction_features;
  std::map<PredId, int> prediction_source;
};

SyntheticWorld gen_pool(const GenConfig& config);

// Class-balanced held-out objects drawn from the same class-conditional
// Gaussians as the scenes.
std::vector<HeldoutExample> gen_heldout(const GenConfig& config, int per_class);

std::vector<std::string> synthetic_class_names(int num_classes);

// Writes labelTxt/<image_id>.txt (DOTA), predictions.jsonl, features.jsonl,
// classes.txt and initial_labeled.txt under `dir`.
void export_world(const SyntheticWorld& world, const GenConfig& config, const std::string& dir);

}  // namespace muscdb
