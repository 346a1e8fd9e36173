#include "muscdb/partial_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "muscdb/errors.hpp"

namespace muscdb {
namespace {

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double cross_entropy(const ProposalSample& s) {
  return log_sum_exp(s.logits) - s.logits[static_cast<std::size_t>(s.target_class)];
}

}  // namespace

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) { return std::clamp(x, -1.0, 1.0); }

double adaptive_weight(const ProposalSample& sample) {
  if (sample.is_positive || !sample.from_partial_image) return 1.0;
  if (!sample.background_score) {
    throw Error(ErrorKind::contract, "negative proposal of a partial image needs a background score");
  }
  return *sample.background_score;
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

void validate_batch(std::span<const ProposalSample> batch) {
  if (batch.empty()) throw Error(ErrorKind::contract, "empty proposal batch");
  const std::size_t width = batch.front().logits.size();
  if (width < 3) throw Error(ErrorKind::contract, "need at least two foreground classes plus background");
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const ProposalSample& s = batch[j];
    const std::string where = "proposal " + std::to_string(j) + ": ";
    if (s.logits.size() != width) throw Error(ErrorKind::contract, where + "inconsistent logit width");
    for (double l : s.logits) {
      if (!std::isfinite(l)) throw Error(ErrorKind::contract, where + "non-finite logit");
    }
    const int bg = s.num_classes();
    if (s.target_class < 0 || s.target_class > bg) throw Error(ErrorKind::contract, where + "target out of range");
    if (s.is_positive && s.target_class == bg) {
      throw Error(ErrorKind::contract, where + "positive proposal with background target");
    }
    if (!s.is_positive && s.target_class != bg) {
      throw Error(ErrorKind::contract, where + "negative proposal must target background");
    }
    if (!s.is_positive && s.from_partial_image) {
      if (!s.background_score) throw Error(ErrorKind::contract, where + "missing background score");
      const double mu = *s.background_score;
      if (!(mu >= 0.0 && mu <= 1.0)) throw Error(ErrorKind::contract, where + "background score outside [0, 1]");
    }
  }
}

LossBreakdown bbox_loss(std::span<const ProposalSample> batch) {
  validate_batch(batch);
  LossBreakdown out;
  out.W = static_cast<int>(batch.size());
  std::vector<double> cls_terms(batch.size());
  std::vector<double> reg_terms(batch.size(), 0.0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const ProposalSample& s = batch[j];
    cls_terms[j] = adaptive_weight(s) * cross_entropy(s);
    if (s.is_positive) {
      ++out.num_positive;
      double r = 0.0;
      for (std::size_t u = 0; u < kRegDims; ++u) r += smooth_l1(s.reg_pred[u] - s.reg_target[u]);
      reg_terms[j] = r;
    }
  }
  out.lambda_cls = 1.0 / out.W;
  out.lambda_reg = 1.0 / std::max(1, out.num_positive);
  out.cls_loss = out.lambda_cls * pairwise_sum(cls_terms);
  out.reg_loss = out.lambda_reg * pairwise_sum(reg_terms);
  out.total = out.cls_loss + out.reg_loss;
  return out;
}

LossGradient bbox_loss_grad(std::span<const ProposalSample> batch) {
  validate_batch(batch);
  const double lambda_cls = 1.0 / static_cast<double>(batch.size());
  const auto positives = std::count_if(batch.begin(), batch.end(), [](const auto& s) { return s.is_positive; });
  const double lambda_reg = 1.0 / static_cast<double>(std::max<std::ptrdiff_t>(1, positives));

  LossGradient g;
  g.logits.resize(batch.size());
  g.reg_pred.assign(batch.size(), RegVector{});
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const ProposalSample& s = batch[j];
    const double scale = lambda_cls * adaptive_weight(s);
    const double lse = log_sum_exp(s.logits);
    auto& gl = g.logits[j];
    gl.resize(s.logits.size());
    for (std::size_t k = 0; k < s.logits.size(); ++k) {
      const double p = std::exp(s.logits[k] - lse);
      const double onehot = static_cast<int>(k) == s.target_class ? 1.0 : 0.0;
      gl[k] = scale * (p - onehot);
    }
    if (s.is_positive) {
      for (std::size_t u = 0; u < kRegDims; ++u) {
        g.reg_pred[j][u] = lambda_reg * smooth_l1_grad(s.reg_pred[u] - s.reg_target[u]);
      }
    }
  }
  return g;
}

double finite_diff_check(std::span<const ProposalSample> batch, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw Error(ErrorKind::contract, "epsilon outside [1e-7, 1e-3]");
  const LossGradient analytic = bbox_loss_grad(batch);
  const LossBreakdown base = bbox_loss(batch);

  // The loss is a sum of per-proposal terms under batch-level weights that do
  // not depend on logits or regression outputs, so each coordinate only moves
  // its own proposal's term. Differencing that term keeps rounding noise
  // proportional to the proposal rather than the whole batch.
  auto term = [&](const ProposalSample& s) {
    double t = base.lambda_cls * adaptive_weight(s) * cross_entropy(s);
    if (s.is_positive) {
      double r = 0.0;
      for (std::size_t u = 0; u < kRegDims; ++u) r += smooth_l1(s.reg_pred[u] - s.reg_target[u]);
      t += base.lambda_reg * r;
    }
    return t;
  };

  double worst = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    ProposalSample work = batch[j];
    auto compare = [&](double& coord, double an) {
      const double saved = coord;
      const double hi = saved + epsilon;
      const double lo = saved - epsilon;
      coord = hi;
      const double up = term(work);
      coord = lo;
      const double down = term(work);
      coord = saved;
      const double fd = (up - down) / (hi - lo);
      worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-8));
    };
    for (std::size_t k = 0; k < work.logits.size(); ++k) compare(work.logits[k], analytic.logits[j][k]);
    for (std::size_t u = 0; u < kRegDims; ++u) compare(work.reg_pred[u], analytic.reg_pred[j][u]);
  }
  return worst;
}

}  // namespace muscdb
