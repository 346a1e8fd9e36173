#include "muscdb/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "muscdb/errors.hpp"
#include "muscdb/partial_loss.hpp"

namespace muscdb {
namespace {

std::vector<ProposalSample> to_samples(const SurrogateModel& model, std::span<const TrainingExample> data) {
  std::vector<ProposalSample> batch;
  batch.reserve(data.size());
  for (const TrainingExample& ex : data) {
    ProposalSample s;
    s.logits = model.logits(ex.feature);
    s.target_class = ex.target;
    s.is_positive = ex.is_positive;
    s.from_partial_image = ex.from_partial_image;
    s.background_score = ex.background_score;
    batch.push_back(std::move(s));
  }
  return batch;
}

void check_data(const SurrogateModel& model, std::span<const TrainingExample> data) {
  if (data.empty()) throw Error(ErrorKind::contract, "surrogate training needs at least one example");
  for (const TrainingExample& ex : data) {
    if (static_cast<int>(ex.feature.size()) != model.feature_dim()) {
      throw Error(ErrorKind::dimension_mismatch, "training feature has wrong dimension");
    }
  }
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw Error(ErrorKind::config, "steps must be non-negative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error(ErrorKind::config, "learning_rate must be positive");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw Error(ErrorKind::config, "l2 must be non-negative");
}

SurrogateModel::SurrogateModel(int num_classes, int feature_dim)
    : num_classes_(num_classes),
      feature_dim_(feature_dim),
      weights_(static_cast<std::size_t>(num_classes + 1) * feature_dim, 0.0),
      bias_(num_classes + 1, 0.0) {
  if (num_classes < 2 || feature_dim < 1) throw Error(ErrorKind::contract, "invalid surrogate dimensions");
}

std::vector<double> SurrogateModel::logits(std::span<const double> feature) const {
  std::vector<double> out(bias_);
  for (int k = 0; k < num_outputs(); ++k) {
    const double* row = weights_.data() + static_cast<std::size_t>(k) * feature_dim_;
    double s = 0.0;
    for (int d = 0; d < feature_dim_; ++d) s += row[d] * feature[d];
    out[k] += s;
  }
  return out;
}

int SurrogateModel::predict(std::span<const double> feature) const {
  const auto l = logits(feature);
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

double training_objective(const SurrogateModel& model, std::span<const TrainingExample> data, double l2) {
  check_data(model, data);
  return bbox_loss(to_samples(model, data)).cls_loss + 0.5 * l2 * squared_norm(model.weights());
}

SurrogateModel train(SurrogateModel model, std::span<const TrainingExample> data, const TrainConfig& config,
                     std::vector<double>* trace) {
  config.validate();
  check_data(model, data);
  const int K = model.num_outputs();
  const int D = model.feature_dim();
  std::vector<double> column(data.size());

  for (int step = 0; step < config.steps; ++step) {
    const auto batch = to_samples(model, data);
    if (trace) trace->push_back(bbox_loss(batch).cls_loss + 0.5 * config.l2 * squared_norm(model.weights()));
    const LossGradient g = bbox_loss_grad(batch);

    std::vector<double> grad_w(model.weights().size());
    std::vector<double> grad_b(K);
    for (int k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < data.size(); ++j) column[j] = g.logits[j][k];
      grad_b[k] = pairwise_sum(column);
      for (int d = 0; d < D; ++d) {
        for (std::size_t j = 0; j < data.size(); ++j) column[j] = g.logits[j][k] * data[j].feature[d];
        grad_w[static_cast<std::size_t>(k) * D + d] = pairwise_sum(column);
      }
    }
    auto& w = model.weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * (grad_w[i] + config.l2 * w[i]);
    auto& b = model.bias();
    for (int k = 0; k < K; ++k) b[k] -= config.learning_rate * grad_b[k];
  }
  if (trace) trace->push_back(training_objective(model, data, config.l2));
  return model;
}

Evaluation evaluate(const SurrogateModel& model, std::span<const HeldoutExample> heldout) {
  if (heldout.empty()) throw Error(ErrorKind::contract, "held-out set is empty");
  const int C = model.num_classes();
  Evaluation ev;
  ev.confusion.assign(C, std::vector<std::int64_t>(C + 1, 0));
  std::int64_t correct = 0;
  for (const HeldoutExample& ex : heldout) {
    if (ex.class_id < 0 || ex.class_id >= C) throw Error(ErrorKind::unknown_class, "held-out class out of range");
    const int pred = model.predict(ex.feature);
    ++ev.confusion[ex.class_id][pred];
    if (pred == ex.class_id) ++correct;
  }
  double recall_sum = 0.0;
  int present = 0;
  for (int k = 0; k < C; ++k) {
    std::int64_t row = 0;
    for (auto v : ev.confusion[k]) row += v;
    if (row == 0) {
      ev.recall_per_class.push_back(std::nan(""));
      continue;
    }
    const double r = static_cast<double>(ev.confusion[k][k]) / static_cast<double>(row);
    ev.recall_per_class.push_back(r);
    recall_sum += r;
    ++present;
  }
  ev.macro_recall = present ? recall_sum / present : std::nan("");
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(heldout.size());
  return ev;
}

}  // namespace muscdb
