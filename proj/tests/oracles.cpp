#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

using muscdb::RotatedBox;

bool inside(const RotatedBox& box, double x, double y) {
  const double dx = x - box.cx;
  const double dy = y - box.cy;
  const double c = std::cos(box.angle);
  const double s = std::sin(box.angle);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * box.w && std::abs(v) <= 0.5 * box.h;
}

double monte_carlo_iou(const RotatedBox& a, const RotatedBox& b, std::int64_t samples, std::mt19937_64& rng) {
  const RotatedBox& small = a.area() <= b.area() ? a : b;
  const RotatedBox& other = a.area() <= b.area() ? b : a;
  const auto side = static_cast<std::int64_t>(std::sqrt(static_cast<double>(samples)));
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  const double c = std::cos(small.angle);
  const double s = std::sin(small.angle);
  const double oc = std::cos(other.angle);
  const double os = std::sin(other.angle);
  const double hw = 0.5 * other.w;
  const double hh = 0.5 * other.h;
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < side; ++i) {
    for (std::int64_t j = 0; j < side; ++j) {
      const double u = ((static_cast<double>(i) + jitter(rng)) / static_cast<double>(side) - 0.5) * small.w;
      const double v = ((static_cast<double>(j) + jitter(rng)) / static_cast<double>(side) - 0.5) * small.h;
      const double dx = small.cx + c * u - s * v - other.cx;
      const double dy = small.cy + s * u + c * v - other.cy;
      if (std::abs(oc * dx + os * dy) <= hw && std::abs(-os * dx + oc * dy) <= hh) ++hits;
    }
  }
  const double inter = small.area() * static_cast<double>(hits) / static_cast<double>(side * side);
  return inter / (a.area() + b.area() - inter);
}

std::vector<muscdb::ScoredPrediction> alg1_select(std::vector<muscdb::ScoredPrediction> candidates,
                                                  std::vector<std::int64_t> per_class, std::int64_t total) {
  std::vector<muscdb::ScoredPrediction> selected;
  while (total > 0 && !candidates.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const auto& c = candidates[i];
      const auto& b = candidates[best];
      if (c.phi > b.phi || (c.phi == b.phi && (c.image_id < b.image_id ||
                                               (c.image_id == b.image_id && c.pred_id < b.pred_id)))) {
        best = i;
      }
    }
    const auto pick = candidates[best];
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
    if (per_class[pick.argmax_class] > 0) {
      selected.push_back(pick);
      --per_class[pick.argmax_class];
      --total;
    }
  }
  return selected;
}

std::vector<muscdb::ImageId> kcenter_greedy(std::span<const muscdb::ImageFeature> labeled,
                                            std::span<const muscdb::ImageFeature> unlabeled, std::size_t k) {
  std::vector<std::vector<double>> centers;
  for (const auto& f : labeled) centers.push_back(f.vector);
  std::vector<bool> taken(unlabeled.size(), false);
  std::vector<muscdb::ImageId> out;
  auto dist = [](const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
    return std::sqrt(s);
  };
  while (out.size() < std::min(k, unlabeled.size())) {
    double best = -1.0;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      if (taken[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d = std::min(d, dist(unlabeled[i].vector, c));
      if (d > best || (d == best && unlabeled[i].image_id < unlabeled[pick].image_id)) {
        best = d;
        pick = i;
      }
    }
    taken[pick] = true;
    centers.push_back(unlabeled[pick].vector);
    out.push_back(unlabeled[pick].image_id);
  }
  return out;
}

double entropy(std::span<const double> probs) {
  double z = 0.0;
  for (double p : probs) z += p;
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= (p / z) * std::log(p / z);
  }
  return h;
}

double kl_uniform(std::span<const std::int64_t> h) {
  double total = 0.0;
  for (auto v : h) total += static_cast<double>(v);
  double kl = 0.0;
  for (auto v : h) {
    if (v == 0) continue;
    const double p = static_cast<double>(v) / total;
    kl += p * std::log(p / (1.0 / static_cast<double>(h.size())));
  }
  return kl;
}

double reference_loss(std::span<const muscdb::ProposalSample> batch) {
  double cls = 0.0;
  double reg = 0.0;
  int positives = 0;
  for (const auto& s : batch) {
    double m = s.logits[0];
    for (double l : s.logits) m = std::max(m, l);
    double z = 0.0;
    for (double l : s.logits) z += std::exp(l - m);
    const double ce = -(s.logits[s.target_class] - m - std::log(z));
    const double w = (!s.is_positive && s.from_partial_image) ? *s.background_score : 1.0;
    cls += w * ce;
    if (s.is_positive) {
      ++positives;
      for (std::size_t u = 0; u < 5; ++u) {
        const double x = std::abs(s.reg_pred[u] - s.reg_target[u]);
        reg += x < 1.0 ? 0.5 * x * x : x - 0.5;
      }
    }
  }
  return cls / static_cast<double>(batch.size()) + reg / std::max(1, positives);
}

RotatedBox random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> size(1.0, 0.5 * extent);
  std::uniform_real_distribution<double> ang(-3.2, 3.2);
  return RotatedBox::make(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
}

std::vector<muscdb::ProposalSample> random_batch(std::mt19937_64& rng, int size, int num_classes) {
  std::normal_distribution<double> logit(0.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, num_classes - 1);
  std::vector<muscdb::ProposalSample> batch;
  for (int i = 0; i < size; ++i) {
    muscdb::ProposalSample s;
    for (int k = 0; k <= num_classes; ++k) s.logits.push_back(logit(rng));
    s.is_positive = unit(rng) < 0.5;
    s.from_partial_image = unit(rng) < 0.5;
    s.target_class = s.is_positive ? cls(rng) : num_classes;
    if (!s.is_positive && s.from_partial_image) s.background_score = unit(rng);
    for (std::size_t u = 0; u < 5; ++u) {
      // Keep every regression residual at least 1e-3 away from the kink at +-1.
      double r;
      do {
        r = 4.0 * unit(rng) - 2.0;
      } while (std::abs(std::abs(r) - 1.0) < 1e-3);
      s.reg_target[u] = 3.0 * unit(rng) - 1.5;
      s.reg_pred[u] = s.reg_target[u] + r;
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace oracle
