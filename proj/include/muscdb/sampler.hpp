#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "muscdb/balancing.hpp"
#include "muscdb/datamodel.hpp"
#include "muscdb/scoring.hpp"

namespace muscdb {

struct SamplerConfig {
  std::int64_t budget = 0;
  // Candidates overlapping an already-labeled object above this IoU are dropped.
  double suppression_iou = 0.5;
  // A ground-truth object matches only when its IoU is strictly above this.
  double min_match_iou = 0.0;
  bool charge_background_queries = true;
  // After the class-budgeted pass, spend any leftover budget ignoring classes.
  bool second_pass_ignore_class = false;
  // When false, objects flagged `difficult` are invisible to the oracle.
  bool match_difficult = true;

  void validate() const;
};

enum class BudgetMode {
  balanced,   // per-class budgets from the labeled class distribution
  unlimited,  // any class may use the whole budget
};

struct CycleOptions {
  ScoringConfig scoring;
  SamplerConfig sampler;
  ImageTerm image_term = ImageTerm::mixed;
  BudgetMode budget_mode = BudgetMode::balanced;
};

std::vector<Prediction> suppress_labeled_overlaps(std::span<const Prediction> preds,
                                                  std::span<const RotatedBox> labeled_boxes, double tau);

// Unconsumed predictions of unlabeled and partially labeled images that
// survive suppression against each image's labeled boxes.
std::vector<Prediction> collect_candidates(const PoolState& pool, double suppression_iou);

// Descending phi, then ascending (image_id, pred_id).
void sort_for_selection(std::vector<ScoredPrediction>& scored);

struct SelectionTrace {
  std::vector<ScoredPrediction> taken;
  std::vector<bool> charged;
  std::vector<ScoredPrediction> discarded;
  std::vector<std::int64_t> remaining_per_class;
  std::int64_t remaining_total = 0;
};

// Greedy single pass over candidates in selection order. A candidate is taken
// when its predicted class still has budget; `visit` is called for each taken
// candidate and returns whether it is charged against the budget.
SelectionTrace greedy_select(std::span<const ScoredPrediction> scored, const ClassBudget& budget,
                             bool second_pass_ignore_class,
                             const std::function<bool(const ScoredPrediction&)>& visit);

// Pure selection with every query charged.
std::vector<ScoredPrediction> select_queries(std::span<const ScoredPrediction> scored, const ClassBudget& budget,
                                             bool second_pass_ignore_class = false);

// Labels the query against the image's unlabeled ground truth: the object with
// the largest IoU above min_match_iou (lowest gt_id on ties) is returned and
// flagged labeled; otherwise the answer is background. Cost is always 1.
QueryResult oracle_label(const Prediction& query, GroundTruthStore& truth, const SamplerConfig& config, int cycle);

struct CycleStats {
  ClassBudget budget;
  std::vector<std::int64_t> queried_per_class;
  std::int64_t charged = 0;
  std::int64_t unspent = 0;
  std::int64_t background_queries = 0;
  std::size_t num_candidates = 0;
  // Classes left with budget while untaken candidates of that class remain.
  std::int64_t starved_classes = 0;
  std::vector<double> taken_phi;
};

struct CycleOutcome {
  std::vector<QueryResult> results;
  CycleStats stats;
};

// One acquisition round: suppress -> score -> budget -> select -> label ->
// apply to the pool.
CycleOutcome run_cycle(PoolState& pool, GroundTruthStore& truth, const CycleOptions& options, int cycle);

}  // namespace muscdb
