#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace muscdb {

struct ClassBudget {
  std::vector<std::int64_t> per_class;
  std::int64_t total = 0;
  std::vector<double> zeta;
  std::vector<double> beta;
};

// beta_k = 1 - a_k / sum(a). All-zero counts give the uniform weight 1 - 1/C.
std::vector<double> class_weights(std::span<const std::int64_t> counts);

// Numerically stable softmax.
std::vector<double> class_preferences(std::span<const double> beta);

// Largest-remainder apportionment of `total` units by `zeta`; leftover units go
// to the largest fractional parts, lower class index first on ties.
ClassBudget allocate_budget(std::span<const double> zeta, std::int64_t total);

// class_weights -> class_preferences -> allocate_budget.
ClassBudget balanced_budget(std::span<const std::int64_t> counts, std::int64_t total);

// Every class may take the whole budget (no balancing).
ClassBudget unlimited_budget(int num_classes, std::int64_t total);

}  // namespace muscdb
