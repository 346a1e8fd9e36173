#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace muscdb {

inline constexpr std::size_t kRegDims = 5;
using RegVector = std::array<double, kRegDims>;

// One region proposal in the box head. Logits cover the C foreground classes
// followed by background at index C.
struct ProposalSample {
  std::vector<double> logits;
  int target_class = 0;
  bool is_positive = false;
  bool from_partial_image = false;
  // Predicted background score; required for negatives of partial images.
  std::optional<double> background_score;
  RegVector reg_pred{};
  RegVector reg_target{};

  int num_classes() const { return static_cast<int>(logits.size()) - 1; }
};

struct LossBreakdown {
  double cls_loss = 0.0;
  double reg_loss = 0.0;
  double total = 0.0;
  double lambda_cls = 0.0;
  double lambda_reg = 0.0;
  int W = 0;
  int num_positive = 0;
};

struct LossGradient {
  std::vector<std::vector<double>> logits;
  std::vector<RegVector> reg_pred;
};

double smooth_l1(double x);
double smooth_l1_grad(double x);

// 1 for positives and for every proposal of a fully labeled image; the frozen
// background score for negatives of a partially labeled image.
double adaptive_weight(const ProposalSample& sample);

// Sum with a fixed binary-tree order so results do not depend on how the
// batch is later split or parallelised.
double pairwise_sum(std::span<const double> values);

// Throws Error{contract} on an empty or inconsistent batch.
void validate_batch(std::span<const ProposalSample> batch);

LossBreakdown bbox_loss(std::span<const ProposalSample> batch);
LossGradient bbox_loss_grad(std::span<const ProposalSample> batch);

// Largest relative error between the analytic gradient and central differences
// of the total loss over every logit and regression coordinate. The relative
// error denominator is max(|analytic|, 1e-8).
double finite_diff_check(std::span<const ProposalSample> batch, double epsilon);

}  // namespace muscdb
