#include "muscdb/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "muscdb/errors.hpp"

namespace muscdb {

void SamplerConfig::validate() const {
  if (budget < 0) throw Error(ErrorKind::config, "budget must be non-negative");
  if (!(suppression_iou > 0.0) || suppression_iou > 1.0) {
    throw Error(ErrorKind::config, "suppression_iou must lie in (0, 1]");
  }
  if (!(min_match_iou >= 0.0) || !(min_match_iou < 1.0)) {
    throw Error(ErrorKind::config, "min_match_iou must lie in [0, 1)");
  }
}

std::vector<Prediction> suppress_labeled_overlaps(std::span<const Prediction> preds,
                                                  std::span<const RotatedBox> labeled_boxes, double tau) {
  std::vector<Prediction> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) {
    const bool overlaps = std::any_of(labeled_boxes.begin(), labeled_boxes.end(),
                                      [&](const RotatedBox& b) { return rotated_iou(p.box, b) > tau; });
    if (!overlaps) out.push_back(p);
  }
  return out;
}

std::vector<Prediction> collect_candidates(const PoolState& pool, double suppression_iou) {
  std::vector<Prediction> out;
  for (const auto& [id, rec] : pool.images()) {
    if (rec.status == ImageStatus::fully_labeled) continue;
    std::vector<Prediction> open;
    for (const Prediction& p : rec.predictions) {
      if (!pool.consumed(p.pred_id)) open.push_back(p);
    }
    const auto labeled = pool.labeled_boxes(id);
    auto kept = suppress_labeled_overlaps(open, labeled, suppression_iou);
    out.insert(out.end(), std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
  }
  return out;
}

void sort_for_selection(std::vector<ScoredPrediction>& scored) {
  std::sort(scored.begin(), scored.end(), [](const ScoredPrediction& a, const ScoredPrediction& b) {
    if (a.phi != b.phi) return a.phi > b.phi;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return a.pred_id < b.pred_id;
  });
}

SelectionTrace greedy_select(std::span<const ScoredPrediction> scored, const ClassBudget& budget,
                             bool second_pass_ignore_class,
                             const std::function<bool(const ScoredPrediction&)>& visit) {
  std::vector<ScoredPrediction> order(scored.begin(), scored.end());
  sort_for_selection(order);

  SelectionTrace trace;
  trace.remaining_per_class = budget.per_class;
  trace.remaining_total = budget.total;
  auto& left = trace.remaining_per_class;

  std::size_t i = 0;
  for (; i < order.size() && trace.remaining_total > 0; ++i) {
    const ScoredPrediction& c = order[i];
    const auto k = static_cast<std::size_t>(c.argmax_class);
    if (k >= left.size()) throw Error(ErrorKind::contract, "candidate class outside budget vector");
    if (left[k] <= 0) {
      trace.discarded.push_back(c);
      continue;
    }
    const bool charge = visit(c);
    trace.taken.push_back(c);
    trace.charged.push_back(charge);
    if (charge) {
      --left[k];
      --trace.remaining_total;
    }
  }

  if (second_pass_ignore_class) {
    for (const ScoredPrediction& c : trace.discarded) {
      if (trace.remaining_total <= 0) break;
      const bool charge = visit(c);
      trace.taken.push_back(c);
      trace.charged.push_back(charge);
      if (charge) --trace.remaining_total;
    }
  }
  return trace;
}

std::vector<ScoredPrediction> select_queries(std::span<const ScoredPrediction> scored, const ClassBudget& budget,
                                             bool second_pass_ignore_class) {
  return greedy_select(scored, budget, second_pass_ignore_class, [](const ScoredPrediction&) { return true; })
      .taken;
}

QueryResult oracle_label(const Prediction& query, GroundTruthStore& truth, const SamplerConfig& config, int cycle) {
  QueryResult result;
  result.image_id = query.image_id;
  result.pred_id = query.pred_id;
  result.cycle = cycle;
  result.cost = 1;

  const GroundTruthObject* best = nullptr;
  double best_iou = 0.0;
  for (const GroundTruthObject& gt : truth.objects(query.image_id)) {
    if (gt.labeled) continue;
    if (gt.difficult && !config.match_difficult) continue;
    const double iou = rotated_iou(query.box, gt.box);
    if (best == nullptr || iou > best_iou) {
      best = &gt;
      best_iou = iou;
    }
  }
  result.iou_with_gt = best_iou;
  if (best != nullptr && best_iou > config.min_match_iou && best_iou > 0.0) {
    result.match = MatchedObject{best->gt_id, best->class_id, best->box};
    truth.mark_labeled(query.image_id, best->gt_id);
  }
  return result;
}

CycleOutcome run_cycle(PoolState& pool, GroundTruthStore& truth, const CycleOptions& options, int cycle) {
  options.scoring.validate();
  options.sampler.validate();
  const int num_classes = pool.num_classes();

  CycleOutcome outcome;
  CycleStats& stats = outcome.stats;
  stats.queried_per_class.assign(num_classes, 0);

  const auto candidates = collect_candidates(pool, options.sampler.suppression_iou);
  stats.num_candidates = candidates.size();
  const auto scored = score_pool(candidates, options.scoring, options.image_term);

  stats.budget = options.budget_mode == BudgetMode::balanced
                     ? balanced_budget(pool.class_counts(), options.sampler.budget)
                     : unlimited_budget(num_classes, options.sampler.budget);

  std::map<PredId, const Prediction*> by_id;
  for (const Prediction& p : candidates) by_id.emplace(p.pred_id, &p);

  auto label = [&](const ScoredPrediction& s) {
    QueryResult r = oracle_label(*by_id.at(s.pred_id), truth, options.sampler, cycle);
    const bool charge = r.matched() || options.sampler.charge_background_queries;
    if (r.matched()) {
      ++stats.queried_per_class[r.match->class_id];
    } else {
      ++stats.background_queries;
    }
    if (charge) ++stats.charged;
    stats.taken_phi.push_back(s.phi);
    outcome.results.push_back(std::move(r));
    return charge;
  };
  const SelectionTrace trace =
      greedy_select(scored, stats.budget, options.sampler.second_pass_ignore_class, label);
  stats.unspent = trace.remaining_total;

  if (trace.remaining_total > 0) {
    std::vector<bool> untaken_class(num_classes, false);
    std::map<PredId, bool> taken_ids;
    for (const auto& t : trace.taken) taken_ids[t.pred_id] = true;
    for (const auto& s : scored) {
      if (!taken_ids.contains(s.pred_id)) untaken_class[s.argmax_class] = true;
    }
    for (int k = 0; k < num_classes; ++k) {
      if (trace.remaining_per_class[k] > 0 && untaken_class[k]) ++stats.starved_classes;
    }
  }

  pool.apply_query_results(outcome.results);
  return outcome;
}

}  // namespace muscdb
