#include "muscdb/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "muscdb/errors.hpp"

namespace muscdb {

void ScoringConfig::validate() const {
  if (!std::isfinite(theta) || !(theta > 0.0) || !(theta < 1.0)) {
    throw Error(ErrorKind::config, "theta must lie in (0, 1)");
  }
  if (!std::isfinite(empty_confident_set_value)) {
    throw Error(ErrorKind::config, "empty_confident_set_value must be finite");
  }
}

std::vector<std::size_t> confident_set(std::span<const Prediction> preds, double theta) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (preds[j].max_confidence() > theta) out.push_back(j);
  }
  return out;
}

double image_uncertainty(std::span<const Prediction> preds, const ScoringConfig& config) {
  const auto members = confident_set(preds, config.theta);
  if (members.empty()) return config.empty_confident_set_value;
  double sum = 0.0;
  for (std::size_t j : members) sum += preds[j].max_confidence();
  return 1.0 - sum / static_cast<double>(members.size());
}

double object_entropy(std::span<const double> class_probs) {
  double total = 0.0;
  for (double p : class_probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorKind::degenerate_probability, "class probabilities must be finite and non-negative");
    }
    total += p;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::degenerate_probability, "class probabilities sum to zero");
  double h = 0.0;
  for (double p : class_probs) {
    if (p <= 0.0) continue;
    const double q = p / total;
    h -= q * std::log(q);
  }
  return std::max(h, 0.0);
}

std::vector<ScoredPrediction> score_pool(std::span<const Prediction> candidates, const ScoringConfig& config,
                                         ImageTerm term) {
  config.validate();
  std::map<ImageId, std::vector<Prediction>> by_image;
  for (const Prediction& p : candidates) by_image[p.image_id].push_back(p);

  std::vector<ScoredPrediction> out;
  out.reserve(candidates.size());
  for (auto& [image_id, preds] : by_image) {
    std::sort(preds.begin(), preds.end(),
              [](const Prediction& a, const Prediction& b) { return a.pred_id < b.pred_id; });
    const double phi_image = term == ImageTerm::mixed ? image_uncertainty(preds, config) : 1.0;
    for (const Prediction& p : preds) {
      const double phi_object = object_entropy(p.class_probs);
      out.push_back({image_id, p.pred_id, p.argmax_class(), phi_image, phi_object, phi_image * phi_object});
    }
  }
  return out;
}

}  // namespace muscdb
