#include <cmath>
#include <map>

#include "doctest.h"
#include "muscdb/errors.hpp"
#include "muscdb/harness.hpp"
#include "muscdb/scoring.hpp"
#include "muscdb/synthgen.hpp"

using namespace muscdb;

namespace {

GenConfig small(int images = 40) {
  GenConfig c;
  c.num_classes = 4;
  c.num_images = images;
  c.min_objects = 3;
  c.max_objects = 6;
  c.feature_dim = 6;
  return c;
}

std::vector<std::int64_t> class_histogram(const GenConfig& config, int objects) {
  std::vector<std::int64_t> h(config.num_classes, 0);
  int n = 0;
  for (ImageId id = 0; n < objects; ++id) {
    auto rng = image_stream(config.seed, id, 1);
    for (const auto& g : gen_scene(config, id, rng).objects) {
      ++h[g.class_id];
      ++n;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("scenes are deterministic and independent of order") {
  const GenConfig c = small();
  auto r1 = image_stream(1, 5, 1);
  auto r2 = image_stream(1, 5, 1);
  const Scene a = gen_scene(c, 5, r1);
  const Scene b = gen_scene(c, 5, r2);
  CHECK(a.objects == b.objects);
  CHECK(a.features == b.features);
  CHECK(a.objects.size() >= 3);
  CHECK(a.objects.size() <= 6);
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < a.objects.size(); ++j) CHECK(rotated_iou(a.objects[i].box, a.objects[j].box) < 0.3);
  }
  CHECK(pool_digest(gen_pool(c).pool) == pool_digest(gen_pool(c).pool));
}

TEST_CASE("class frequencies follow the power law") {
  GenConfig c;
  c.num_classes = 8;
  c.min_objects = 10;
  c.max_objects = 20;
  for (double s : {0.0, 1.5}) {
    c.class_frequency_exponent = s;
    const auto h = class_histogram(c, 10000);
    double n = 0;
    for (auto v : h) n += static_cast<double>(v);
    double z = 0;
    for (int k = 0; k < 8; ++k) z += std::pow(k + 1.0, -s);
    double chi2 = 0;
    for (int k = 0; k < 8; ++k) {
      const double p = std::pow(k + 1.0, -s) / z;
      const double expected = n * p;
      CHECK(std::abs(h[k] - expected) < 3.0 * std::sqrt(n * p * (1 - p)) + 1);
      chi2 += (h[k] - expected) * (h[k] - expected) / expected;
    }
    // 99.9th percentile of chi-square with 7 degrees of freedom.
    CHECK(chi2 < 24.32);
    if (s >= 1.0) CHECK(static_cast<double>(h[7]) < 0.5 * n / 8.0);
  }
}

TEST_CASE("noiseless detector reproduces the ground truth") {
  GenConfig c = small();
  c.noise.prob_temperature = 0.0;
  c.noise.logit_noise = 0.0;
  c.noise.true_background_max = 0.0;
  auto rng = image_stream(0, 1, 1);
  const Scene s = gen_scene(c, 1, rng);
  auto drng = image_stream(0, 1, 2);
  const auto preds = simulate_detector(s, c, 1, drng);
  REQUIRE(preds.size() == s.objects.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i].prediction;
    CHECK(rotated_iou(p.box, s.objects[i].box) == doctest::Approx(1.0));
    for (int k = 0; k < c.num_classes; ++k) CHECK(p.class_probs[k] == (k == s.objects[i].class_id ? 1.0 : 0.0));
  }
}

TEST_CASE("hot detector approaches uniform probabilities") {
  GenConfig c = small();
  c.noise.prob_temperature = 1e6;
  auto rng = image_stream(0, 2, 1);
  const Scene s = gen_scene(c, 2, rng);
  auto drng = image_stream(0, 2, 2);
  for (const auto& p : simulate_detector(s, c, 2, drng)) {
    CHECK(std::abs(object_entropy(p.prediction.class_probs) - std::log(4.0)) < 1e-3);
  }
}

TEST_CASE("missing everything yields no predictions") {
  GenConfig c = small();
  c.noise.miss_rate = 1.0;
  c.noise.false_positive_rate = 0.0;
  auto rng = image_stream(0, 3, 1);
  const Scene s = gen_scene(c, 3, rng);
  auto drng = image_stream(0, 3, 2);
  CHECK(simulate_detector(s, c, 3, drng).empty());
}

TEST_CASE("calibration sanity") {
  GenConfig c = small(300);
  c.noise.prob_temperature = 1.0;
  c.noise.confusion_rate = 0.0;
  const SyntheticWorld w = gen_pool(c);
  int total = 0;
  int right = 0;
  for (const auto& [id, rec] : w.pool.images()) {
    for (const auto& p : rec.predictions) {
      const int src = w.prediction_source.at(p.pred_id);
      if (src < 0) continue;
      ++total;
      for (const auto& g : w.truth.objects(id)) {
        if (g.gt_id == src && g.class_id == p.argmax_class()) ++right;
      }
    }
  }
  CHECK(total > 500);
  CHECK(right >= 0.99 * total);
}

TEST_CASE("initial split") {
  GenConfig c = small(100);
  CHECK(gen_pool(c).pool.count(ImageStatus::fully_labeled) == 5);
  c.initial_labeled_fraction = 0.0;
  const SyntheticWorld w = gen_pool(c);
  CHECK(w.pool.count(ImageStatus::fully_labeled) == 0);
  CHECK(w.pool.class_counts() == ClassCounts(4, 0));
  CHECK(w.image_features.size() == 100);
}

TEST_CASE("dense scenes fail loudly") {
  GenConfig c = small();
  c.scene_size = 70;
  c.min_box_size = 60;
  c.max_box_size = 64;
  c.min_objects = c.max_objects = 20;
  auto rng = image_stream(0, 0, 1);
  try {
    gen_scene(c, 0, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::scene_too_dense);
  }
}

TEST_CASE("generator config validation") {
  GenConfig c = small();
  c.feature_dim = 2;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small();
  c.noise.miss_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small();
  c.min_objects = 7;
  CHECK_THROWS_AS(c.validate(), Error);
}
