#include "doctest.h"
#include "muscdb/datamodel.hpp"
#include "muscdb/errors.hpp"

using namespace muscdb;

namespace {

Prediction pred(PredId id, ImageId image, std::vector<double> probs, RotatedBox box = RotatedBox::make(5, 5, 4, 2, 0)) {
  Prediction p;
  p.pred_id = id;
  p.image_id = image;
  p.box = box;
  p.class_probs = std::move(probs);
  return p;
}

GroundTruthObject gt(int id, int cls, RotatedBox box = RotatedBox::make(5, 5, 4, 2, 0)) {
  GroundTruthObject g;
  g.gt_id = id;
  g.class_id = cls;
  g.box = box;
  g.labeled = true;
  return g;
}

QueryResult matched(ImageId image, PredId p, int gt_id, int cls, int cycle = 1) {
  QueryResult r;
  r.image_id = image;
  r.pred_id = p;
  r.match = MatchedObject{gt_id, cls, RotatedBox::make(5, 5, 4, 2, 0)};
  r.iou_with_gt = 0.8;
  r.cycle = cycle;
  return r;
}

QueryResult background(ImageId image, PredId p) {
  QueryResult r;
  r.image_id = image;
  r.pred_id = p;
  r.cycle = 1;
  return r;
}

PoolState small_pool() {
  PoolState pool(2);
  pool.add_image(0, ImageStatus::fully_labeled, {}, {gt(0, 0), gt(1, 0), gt(2, 1)});
  pool.add_image(1, ImageStatus::unlabeled, {pred(10, 1, {0.7, 0.3}), pred(11, 1, {0.2, 0.8})});
  pool.add_image(2, ImageStatus::unlabeled, {pred(20, 2, {0.5, 0.5})});
  return pool;
}

}  // namespace

TEST_CASE("prediction helpers") {
  const Prediction p = pred(0, 0, {0.2, 0.4, 0.4});
  CHECK(p.max_confidence() == doctest::Approx(0.4));
  CHECK(p.argmax_class() == 1);
}

TEST_CASE("class counts") {
  PoolState empty(3);
  CHECK(recount_classes(empty) == ClassCounts{0, 0, 0});

  PoolState pool = small_pool();
  CHECK(pool.class_counts() == ClassCounts{2, 1});
  CHECK(recount_classes(pool) == ClassCounts{2, 1});

  const std::vector<QueryResult> r{matched(1, 11, 0, 1)};
  pool.apply_query_results(r);
  CHECK(pool.class_counts() == ClassCounts{2, 2});
  CHECK(recount_classes(pool) == pool.class_counts());
  CHECK(pool.image(1).status == ImageStatus::partially_labeled);
  CHECK(pool.consumed(11));
  CHECK(pool.labeled_boxes(1).size() == 1);
}

TEST_CASE("background results only change status") {
  PoolState pool = small_pool();
  const std::vector<QueryResult> r{background(2, 20)};
  pool.apply_query_results(r);
  CHECK(pool.class_counts() == ClassCounts{2, 1});
  CHECK(pool.image(2).status == ImageStatus::partially_labeled);
  CHECK(pool.partial_labels().size() == 1);
  CHECK(pool.labeled_boxes(2).empty());
}

TEST_CASE("apply_query_results rejects bad input atomically") {
  PoolState pool = small_pool();
  const PoolSnapshot before = pool.snapshot();

  auto expect = [&](std::vector<QueryResult> results, ErrorKind kind) {
    try {
      pool.apply_query_results(results);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
    }
    CHECK(pool.snapshot() == before);
  };

  expect({matched(9, 10, 0, 0)}, ErrorKind::not_found);
  expect({matched(1, 99, 0, 0)}, ErrorKind::not_found);
  expect({matched(1, 10, 0, 0), matched(1, 10, 1, 0)}, ErrorKind::duplicate_label);
  expect({matched(1, 10, 0, 0), matched(1, 11, 0, 0)}, ErrorKind::duplicate_label);
  expect({matched(1, 10, 0, 5)}, ErrorKind::unknown_class);
  expect({matched(0, 10, 0, 0)}, ErrorKind::contract);
  QueryResult costly = background(2, 20);
  costly.cost = 2;
  expect({costly}, ErrorKind::contract);

  const std::vector<QueryResult> ok{matched(1, 10, 0, 0)};
  pool.apply_query_results(ok);
  CHECK_THROWS_AS(pool.apply_query_results(ok), Error);
}

TEST_CASE("value form leaves the input untouched") {
  const PoolState pool = small_pool();
  const std::vector<QueryResult> r{matched(1, 10, 0, 0)};
  const PoolState next = apply_query_results(pool, r);
  CHECK(pool.partial_labels().empty());
  CHECK(next.partial_labels().size() == 1);
}

TEST_CASE("partition invariant over random mutation sequences") {
  PoolState pool(3);
  for (ImageId i = 0; i < 6; ++i) {
    std::vector<Prediction> preds;
    for (int j = 0; j < 4; ++j) preds.push_back(pred(i * 10 + j, i, {0.5, 0.3, 0.2}));
    pool.add_image(i, ImageStatus::unlabeled, preds);
  }
  int next_gt = 0;
  for (ImageId i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) {
      std::vector<QueryResult> r;
      if ((i + j) % 3 == 0) {
        r.push_back(background(i, i * 10 + j));
      } else {
        r.push_back(matched(i, i * 10 + j, next_gt++, (i * j) % 3));
      }
      pool.apply_query_results(r);
      CHECK(pool.class_counts() == recount_classes(pool));
      const std::size_t total = pool.count(ImageStatus::fully_labeled) + pool.count(ImageStatus::unlabeled) +
                                pool.count(ImageStatus::partially_labeled);
      CHECK(total == 6);
    }
  }
  pool.add_image(6, ImageStatus::unlabeled, {});
  pool.apply_full_labels(6, {});
  CHECK(pool.image(6).status == ImageStatus::fully_labeled);
  CHECK_THROWS_AS(pool.apply_full_labels(6, {}), Error);
  CHECK_THROWS_AS(pool.apply_full_labels(5, {}), Error);
}

TEST_CASE("ground truth store") {
  GroundTruthStore truth(2);
  GroundTruthObject a = gt(3, 0);
  a.labeled = false;
  GroundTruthObject b = gt(1, 1);
  b.labeled = false;
  truth.add_image(7, {a, b});
  CHECK(truth.objects(7)[0].gt_id == 1);
  truth.mark_labeled(7, 3);
  CHECK(truth.objects(7)[1].labeled);
  CHECK_THROWS_AS(truth.mark_labeled(7, 3), Error);
  CHECK_THROWS_AS(truth.mark_labeled(8, 0), Error);
  CHECK(truth.class_totals() == ClassCounts{1, 1});
}

TEST_CASE("status names round-trip") {
  for (auto s : {ImageStatus::fully_labeled, ImageStatus::unlabeled, ImageStatus::partially_labeled}) {
    CHECK(image_status_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(image_status_from_string("nope"), Error);
}
