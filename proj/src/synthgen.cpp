#include "muscdb/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "muscdb/errors.hpp"
#include "muscdb/ingest.hpp"

namespace muscdb {
namespace {

constexpr std::uint64_t kSceneStream = 1;
constexpr std::uint64_t kDetectorStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kHeldoutStream = 4;
constexpr int kPlacementAttempts = 1000;
constexpr double kPlacementIou = 0.3;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<double> class_feature(const GenConfig& config, int class_id, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> f(config.feature_dim);
  for (double& v : f) v = noise(rng);
  if (class_id >= 0) f[class_id] += config.feature_separation / std::numbers::sqrt2;
  return f;
}

RotatedBox random_box(const GenConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> size(config.min_box_size, config.max_box_size);
  std::uniform_real_distribution<double> angle(-std::numbers::pi / 2, std::numbers::pi / 2);
  const double margin = config.max_box_size * std::numbers::sqrt2 / 2;
  const double lo = std::min(margin, config.scene_size / 2);
  std::uniform_real_distribution<double> centre(lo, config.scene_size - lo);
  const double w = size(rng);
  const double h = size(rng);
  const double a = angle(rng);
  const double cx = centre(rng);
  const double cy = centre(rng);
  return RotatedBox::make(cx, cy, w, h, a);
}

std::vector<double> softmax_scores(std::vector<double> scores, double temperature) {
  if (temperature == 0.0) {
    const auto top = std::max_element(scores.begin(), scores.end()) - scores.begin();
    std::vector<double> out(scores.size(), 0.0);
    out[top] = 1.0;
    return out;
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double norm = 0.0;
  for (double& s : scores) {
    s = std::exp((s - m) / temperature);
    norm += s;
  }
  for (double& s : scores) s /= norm;
  return scores;
}

}  // namespace

void GenConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::config, what); };
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (num_images < 0) fail("num_images must be non-negative");
  if (min_objects < 0 || max_objects < min_objects) fail("objects_per_image range is invalid");
  if (!(class_frequency_exponent >= 0.0)) fail("class_frequency_exponent must be >= 0");
  if (!(min_box_size > 0.0) || max_box_size < min_box_size) fail("box_size_range is invalid");
  if (!(scene_size >= max_box_size)) fail("scene_size must exceed the largest box");
  if (!(noise.prob_temperature >= 0.0) || !std::isfinite(noise.prob_temperature)) {
    fail("prob_temperature must be finite and >= 0");
  }
  if (!(noise.confusion_rate >= 0.0 && noise.confusion_rate < 1.0)) fail("confusion_rate must lie in [0, 1)");
  if (!(noise.box_jitter_sigma >= 0.0)) fail("box_jitter_sigma must be >= 0");
  if (!(noise.false_positive_rate >= 0.0)) fail("false_positive_rate must be >= 0");
  if (!(noise.miss_rate >= 0.0 && noise.miss_rate <= 1.0)) fail("miss_rate must lie in [0, 1]");
  if (!(noise.logit_noise >= 0.0) || !std::isfinite(noise.class_boost)) fail("class score noise is invalid");
  if (!(noise.true_background_max >= 0.0 && noise.true_background_max < 1.0)) {
    fail("true_background_max must lie in [0, 1)");
  }
  if (!(noise.fp_background_min >= 0.0 && noise.fp_background_min <= noise.fp_background_max &&
        noise.fp_background_max < 1.0)) {
    fail("false-positive background range is invalid");
  }
  if (feature_dim < num_classes) fail("feature_dim must be at least num_classes");
  if (!(feature_separation >= 0.0)) fail("feature_separation must be >= 0");
  if (!(initial_labeled_fraction >= 0.0 && initial_labeled_fraction <= 1.0)) {
    fail("initial_labeled_fraction must lie in [0, 1]");
  }
}

std::vector<double> GenConfig::class_frequencies() const {
  std::vector<double> f(num_classes);
  for (int k = 0; k < num_classes; ++k) f[k] = std::pow(static_cast<double>(k + 1), -class_frequency_exponent);
  const double total = std::accumulate(f.begin(), f.end(), 0.0);
  for (double& v : f) v /= total;
  return f;
}

std::mt19937_64 image_stream(std::uint64_t seed, std::int64_t image_id, std::uint64_t purpose) {
  const std::uint64_t key = splitmix64(static_cast<std::uint64_t>(image_id) ^ splitmix64(purpose));
  return std::mt19937_64(splitmix64(seed ^ key));
}

Scene gen_scene(const GenConfig& config, ImageId image_id, std::mt19937_64& rng) {
  const auto freq = config.class_frequencies();
  std::discrete_distribution<int> pick_class(freq.begin(), freq.end());
  std::uniform_int_distribution<int> count(config.min_objects, config.max_objects);

  Scene scene;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const int cls = pick_class(rng);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const RotatedBox box = random_box(config, rng);
      const bool clash = std::any_of(scene.objects.begin(), scene.objects.end(), [&](const GroundTruthObject& o) {
        return rotated_iou(o.box, box) >= kPlacementIou;
      });
      if (clash) continue;
      scene.objects.push_back({i, cls, box, false, false});
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorKind::scene_too_dense,
                  "could not place object " + std::to_string(i) + " in image " + std::to_string(image_id));
    }
    scene.features.push_back(class_feature(config, cls, rng));
  }
  return scene;
}

std::vector<SimulatedPrediction> simulate_detector(const Scene& scene, const GenConfig& config, ImageId image_id,
                                                   std::mt19937_64& rng) {
  const DetectorNoise& nz = config.noise;
  const int C = config.num_classes;
  const auto freq = config.class_frequencies();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, C - 2);

  auto draw_probs = [&](int boosted, double boost, double background) {
    std::vector<double> scores(C);
    for (int k = 0; k < C; ++k) scores[k] = nz.logit_noise * gauss(rng);
    if (boosted >= 0) scores[boosted] += boost;
    auto probs = softmax_scores(std::move(scores), nz.prob_temperature);
    for (double& p : probs) p *= 1.0 - background;
    return probs;
  };

  std::vector<SimulatedPrediction> out;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const GroundTruthObject& gt = scene.objects[i];
    if (unit(rng) < nz.miss_rate) continue;

    RotatedBox box = gt.box;
    if (nz.box_jitter_sigma > 0.0) {
      const double s = nz.box_jitter_sigma;
      const double cx = box.cx + s * gauss(rng);
      const double cy = box.cy + s * gauss(rng);
      const double w = std::max(1.0, box.w + s * gauss(rng));
      const double h = std::max(1.0, box.h + s * gauss(rng));
      const double a = box.angle + (s / std::max(box.w, box.h)) * gauss(rng);
      box = RotatedBox::make(cx, cy, w, h, a);
    }

    int detected = gt.class_id;
    if (nz.confusion_rate > 0.0 && unit(rng) < nz.confusion_rate) {
      detected = other(rng);
      if (detected >= gt.class_id) ++detected;
    }
    const double boost = nz.class_boost * std::pow(freq[detected] / freq[0], nz.rare_class_boost_exponent);
    const double background = nz.true_background_max > 0.0 ? nz.true_background_max * unit(rng) : 0.0;

    SimulatedPrediction sp;
    sp.prediction.image_id = image_id;
    sp.prediction.box = box;
    sp.prediction.class_probs = draw_probs(detected, boost, background);
    sp.prediction.background_score = background;
    sp.source_gt = gt.gt_id;
    sp.feature = scene.features[i];
    out.push_back(std::move(sp));
  }

  if (nz.false_positive_rate > 0.0) {
    std::poisson_distribution<int> fp_count(nz.false_positive_rate);
    std::uniform_real_distribution<double> fp_bg(nz.fp_background_min, nz.fp_background_max);
    const int n = fp_count(rng);
    for (int i = 0; i < n; ++i) {
      SimulatedPrediction sp;
      sp.prediction.image_id = image_id;
      sp.prediction.box = random_box(config, rng);
      const double background = fp_bg(rng);
      sp.prediction.class_probs = draw_probs(-1, 0.0, background);
      sp.prediction.background_score = background;
      sp.feature = class_feature(config, -1, rng);
      out.push_back(std::move(sp));
    }
  }
  return out;
}

SyntheticWorld gen_pool(const GenConfig& config) {
  config.validate();
  SyntheticWorld world{PoolState(config.num_classes), GroundTruthStore(config.num_classes), {}, {}, {}, {}};

  std::vector<ImageId> ids(config.num_images);
  std::iota(ids.begin(), ids.end(), ImageId{0});
  auto split_rng = image_stream(config.seed, -1, kSplitStream);
  std::vector<ImageId> shuffled = ids;
  std::shuffle(shuffled.begin(), shuffled.end(), split_rng);
  const auto n_labeled = static_cast<std::size_t>(std::floor(config.initial_labeled_fraction * config.num_images + 0.5));
  std::vector<bool> labeled(config.num_images, false);
  for (std::size_t i = 0; i < n_labeled; ++i) labeled[shuffled[i]] = true;

  PredId next_pred = 0;
  for (ImageId id : ids) {
    auto scene_rng = image_stream(config.seed, id, kSceneStream);
    Scene scene = gen_scene(config, id, scene_rng);
    auto det_rng = image_stream(config.seed, id, kDetectorStream);
    auto sims = simulate_detector(scene, config, id, det_rng);

    std::vector<Prediction> preds;
    for (auto& sp : sims) {
      sp.prediction.pred_id = next_pred++;
      world.prediction_features.emplace(sp.prediction.pred_id, std::move(sp.feature));
      world.prediction_source.emplace(sp.prediction.pred_id, sp.source_gt);
      preds.push_back(std::move(sp.prediction));
    }

    std::vector<double> mean(config.feature_dim, 0.0);
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      for (int d = 0; d < config.feature_dim; ++d) mean[d] += scene.features[i][d];
      world.object_features.emplace(std::make_pair(id, scene.objects[i].gt_id), scene.features[i]);
    }
    if (!scene.objects.empty()) {
      for (double& v : mean) v /= static_cast<double>(scene.objects.size());
    }
    world.image_features.push_back({id, std::move(mean)});

    if (labeled[id]) {
      for (auto& o : scene.objects) o.labeled = true;
      world.pool.add_image(id, ImageStatus::fully_labeled, std::move(preds), scene.objects);
    } else {
      world.pool.add_image(id, ImageStatus::unlabeled, std::move(preds));
    }
    world.truth.add_image(id, std::move(scene.objects));
  }
  return world;
}

std::vector<HeldoutExample> gen_heldout(const GenConfig& config, int per_class) {
  config.validate();
  auto rng = image_stream(config.seed, -2, kHeldoutStream);
  std::vector<HeldoutExample> out;
  out.reserve(static_cast<std::size_t>(per_class) * config.num_classes);
  for (int k = 0; k < config.num_classes; ++k) {
    for (int i = 0; i < per_class; ++i) out.push_back({class_feature(config, k, rng), k});
  }
  return out;
}

std::vector<std::string> synthetic_class_names(int num_classes) {
  std::vector<std::string> names;
  for (int k = 0; k < num_classes; ++k) names.push_back("class" + std::to_string(k));
  return names;
}

void export_world(const SyntheticWorld& world, const GenConfig& config, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "labelTxt");
  const auto names = synthetic_class_names(config.num_classes);

  std::vector<Prediction> preds;
  std::string labeled_list;
  for (ImageId id : world.truth.image_ids()) {
    DotaFile file;
    file.image_source = "synthetic";
    for (const GroundTruthObject& gt : world.truth.objects(id)) {
      file.objects.push_back({box_to_quad(gt.box), names[gt.class_id], gt.difficult ? 1 : 0});
    }
    write_file((fs::path(dir) / "labelTxt" / (std::to_string(id) + ".txt")).string(), serialize_dota(file));
    const ImageRecord& rec = world.pool.image(id);
    preds.insert(preds.end(), rec.predictions.begin(), rec.predictions.end());
    if (rec.status == ImageStatus::fully_labeled) labeled_list += std::to_string(id) + "\n";
  }
  std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) { return a.pred_id < b.pred_id; });
  write_file((fs::path(dir) / "predictions.jsonl").string(), write_predictions(preds));
  write_file((fs::path(dir) / "features.jsonl").string(), write_features(world.image_features));
  std::string classes;
  for (const auto& n : names) classes += n + "\n";
  write_file((fs::path(dir) / "classes.txt").string(), classes);
  write_file((fs::path(dir) / "initial_labeled.txt").string(), labeled_list);
}

}  // namespace muscdb
