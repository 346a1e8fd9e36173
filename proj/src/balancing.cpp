#include "muscdb/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "muscdb/errors.hpp"

namespace muscdb {

std::vector<double> class_weights(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw Error(ErrorKind::contract, "class count vector is empty");
  std::int64_t sum = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw Error(ErrorKind::contract, "class counts must be non-negative");
    sum += c;
  }
  const double n = static_cast<double>(counts.size());
  std::vector<double> beta(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    beta[k] = sum == 0 ? 1.0 - 1.0 / n : 1.0 - static_cast<double>(counts[k]) / static_cast<double>(sum);
  }
  return beta;
}

std::vector<double> class_preferences(std::span<const double> beta) {
  if (beta.empty()) throw Error(ErrorKind::contract, "class weight vector is empty");
  const double top = *std::max_element(beta.begin(), beta.end());
  std::vector<double> zeta(beta.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < beta.size(); ++k) {
    zeta[k] = std::exp(beta[k] - top);
    norm += zeta[k];
  }
  for (double& z : zeta) z /= norm;
  return zeta;
}

ClassBudget allocate_budget(std::span<const double> zeta, std::int64_t total) {
  if (total < 0) throw Error(ErrorKind::contract, "budget must be non-negative");
  ClassBudget budget;
  budget.total = total;
  budget.zeta.assign(zeta.begin(), zeta.end());
  budget.per_class.assign(zeta.size(), 0);

  std::vector<double> remainder(zeta.size());
  std::int64_t assigned = 0;
  for (std::size_t k = 0; k < zeta.size(); ++k) {
    const double share = static_cast<double>(total) * zeta[k];
    const double floored = std::floor(share);
    budget.per_class[k] = static_cast<std::int64_t>(floored);
    remainder[k] = share - floored;
    assigned += budget.per_class[k];
  }

  std::vector<std::size_t> order(zeta.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Floors of a probability vector undershoot by less than C units, so one
  // pass over the classes always settles the leftover.
  std::int64_t leftover = total - assigned;
  for (std::size_t i = 0; leftover > 0 && !order.empty(); i = (i + 1) % order.size()) {
    ++budget.per_class[order[i]];
    --leftover;
  }
  while (leftover < 0) {
    auto it = std::max_element(budget.per_class.begin(), budget.per_class.end());
    --*it;
    ++leftover;
  }
  return budget;
}

ClassBudget balanced_budget(std::span<const std::int64_t> counts, std::int64_t total) {
  const auto beta = class_weights(counts);
  auto budget = allocate_budget(class_preferences(beta), total);
  budget.beta = beta;
  return budget;
}

ClassBudget unlimited_budget(int num_classes, std::int64_t total) {
  ClassBudget budget;
  budget.total = total;
  budget.per_class.assign(num_classes, total);
  budget.zeta.assign(num_classes, 1.0 / num_classes);
  budget.beta.assign(num_classes, 1.0 - 1.0 / num_classes);
  return budget;
}

}  // namespace muscdb
