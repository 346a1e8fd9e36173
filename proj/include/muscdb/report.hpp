#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace muscdb {

// Per-cycle experiment record. Doubles that are undefined for a cycle (no
// matched queries, no taken candidates, class absent from held-out data) are
// NaN and serialise as "nan".
struct CycleReport {
  std::string strategy;
  std::uint64_t seed = 0;
  int cycle = 0;
  std::vector<std::int64_t> queried_per_class;
  std::int64_t matched = 0;
  std::int64_t background_queries = 0;
  std::int64_t charged = 0;
  std::int64_t budget = 0;
  std::int64_t unspent = 0;
  std::int64_t overshoot = 0;
  std::int64_t starved_classes = 0;
  double kl_to_uniform = 0.0;
  double rare_share = 0.0;
  double phi_min = 0.0;
  double phi_median = 0.0;
  double phi_max = 0.0;
  std::vector<double> recall_per_class;
  double macro_recall = 0.0;
  double accuracy = 0.0;
  std::string pool_digest;
  std::string config_digest;

  int num_classes() const { return static_cast<int>(queried_per_class.size()); }
};

// NaN-aware field-wise equality.
bool same_report(const CycleReport& a, const CycleReport& b);

}  // namespace muscdb
