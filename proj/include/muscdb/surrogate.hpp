#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace muscdb {

struct TrainConfig {
  int steps = 300;
  double learning_rate = 0.1;
  double l2 = 1e-3;

  void validate() const;
};

// A labeled feature vector. Negatives target the background column
// (index num_classes); negatives from partially labeled images carry the
// background score used as their loss weight.
struct TrainingExample {
  std::vector<double> feature;
  int target = 0;
  bool is_positive = true;
  bool from_partial_image = false;
  std::optional<double> background_score;
};

// Linear softmax classifier over C foreground classes plus background.
class SurrogateModel {
 public:
  SurrogateModel(int num_classes, int feature_dim);

  int num_classes() const { return num_classes_; }
  int feature_dim() const { return feature_dim_; }
  int num_outputs() const { return num_classes_ + 1; }

  std::vector<double> logits(std::span<const double> feature) const;
  // Argmax over all outputs; lowest index on ties. May return num_classes
  // (background).
  int predict(std::span<const double> feature) const;

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  friend bool operator==(const SurrogateModel&, const SurrogateModel&) = default;

 private:
  int num_classes_;
  int feature_dim_;
  std::vector<double> weights_;  // row-major, num_outputs x feature_dim
  std::vector<double> bias_;
};

// Classification loss (adaptive-weight cross-entropy, mean over examples)
// plus 0.5 * l2 * |W|^2.
double training_objective(const SurrogateModel& model, std::span<const TrainingExample> data, double l2);

// Full-batch gradient descent from `model`. When `trace` is given it receives
// the objective before every step and after the last one.
SurrogateModel train(SurrogateModel model, std::span<const TrainingExample> data, const TrainConfig& config,
                     std::vector<double>* trace = nullptr);

struct Evaluation {
  // NaN for classes absent from the held-out data.
  std::vector<double> recall_per_class;
  double macro_recall = 0.0;
  double accuracy = 0.0;
  // num_classes rows (truth) x num_classes + 1 columns (prediction).
  std::vector<std::vector<std::int64_t>> confusion;
};

struct HeldoutExample {
  std::vector<double> feature;
  int class_id = 0;
};

Evaluation evaluate(const SurrogateModel& model, std::span<const HeldoutExample> heldout);

}  // namespace muscdb
