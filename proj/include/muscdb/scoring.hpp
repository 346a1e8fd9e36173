#pragma once

#include <span>
#include <vector>

#include "muscdb/datamodel.hpp"

namespace muscdb {

struct ScoringConfig {
  // Confidence threshold for the image-level term (strict >).
  double theta = 0.10;
  // Image uncertainty assigned when no prediction clears theta.
  double empty_confident_set_value = 1.0;

  void validate() const;
};

struct ScoredPrediction {
  ImageId image_id = 0;
  PredId pred_id = 0;
  int argmax_class = 0;
  double phi_image = 0.0;
  double phi_object = 0.0;
  double phi = 0.0;

  friend bool operator==(const ScoredPrediction&, const ScoredPrediction&) = default;
};

// Which image term multiplies the object entropy.
enum class ImageTerm {
  mixed,        // phi = phi_image * phi_object
  object_only,  // phi_image fixed to 1
};

// Indices (into `preds`) of predictions whose top class probability is
// strictly greater than theta.
std::vector<std::size_t> confident_set(std::span<const Prediction> preds, double theta);

// One minus the mean top-class confidence over the confident set.
double image_uncertainty(std::span<const Prediction> preds, const ScoringConfig& config);

// Shannon entropy (natural log) of the foreground probabilities after
// renormalising them to sum to one. Throws Error{degenerate_probability} for
// negative, non-finite or all-zero input.
double object_entropy(std::span<const double> class_probs);

// Scores every candidate. Candidates may span many images and arrive in any
// order; the image term is computed per image over the candidates given.
// Output is sorted by (image_id, pred_id).
std::vector<ScoredPrediction> score_pool(std::span<const Prediction> candidates, const ScoringConfig& config,
                                         ImageTerm term = ImageTerm::mixed);

}  // namespace muscdb
