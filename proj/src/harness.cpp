#include "muscdb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "muscdb/baselines.hpp"
#include "muscdb/errors.hpp"
#include "muscdb/ingest.hpp"

namespace muscdb {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kCycleStream = 5;
constexpr const char* kCheckpointFormat = "muscdb-checkpoint-1";

struct World {
  PoolState pool;
  GroundTruthStore truth;
  std::vector<ImageFeature> image_features;
  std::map<std::pair<ImageId, int>, std::vector<double>> object_features;
  std::map<PredId, std::vector<double>> prediction_features;
  std::vector<HeldoutExample> heldout;
  bool has_object_features = false;
  int feature_dim = 0;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  const std::string text = read_file(path);
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.erase(line.begin());
    if (!line.empty()) out.push_back(line);
    start = end + 1;
  }
  return out;
}

World build_dota_world(const ExperimentConfig& config, std::uint64_t seed) {
  const PoolSource& src = config.source;
  const auto classes = read_lines(src.classes_path);
  if (classes.size() < 2) throw Error(ErrorKind::config, "class list needs at least two entries");
  const int C = static_cast<int>(classes.size());
  World world{PoolState(C), GroundTruthStore(C), {}, {}, {}, {}, false, 0};

  std::map<ImageId, std::vector<Prediction>> preds;
  for (Prediction& p : load_predictions(read_file(src.predictions_path), C)) preds[p.image_id].push_back(std::move(p));

  std::set<ImageId> ids;
  for (const auto& kv : preds) ids.insert(kv.first);
  std::map<ImageId, fs::path> label_files;
  for (const auto& entry : fs::directory_iterator(src.label_dir)) {
    if (entry.path().extension() != ".txt") continue;
    const std::string stem = entry.path().stem().string();
    char* end = nullptr;
    const long long id = std::strtoll(stem.c_str(), &end, 10);
    if (stem.empty() || *end != '\0') {
      throw Error(ErrorKind::config, "label file name is not an integer image id: " + entry.path().string());
    }
    label_files[id] = entry.path();
    ids.insert(id);
  }

  std::set<ImageId> labeled;
  if (!src.initial_labeled_path.empty()) {
    for (const auto& line : read_lines(src.initial_labeled_path)) labeled.insert(std::stoll(line));
  } else {
    std::vector<ImageId> order(ids.begin(), ids.end());
    auto rng = image_stream(seed, -1, 3);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = static_cast<std::size_t>(std::floor(src.initial_labeled_fraction * order.size() + 0.5));
    labeled.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  }

  for (ImageId id : ids) {
    std::vector<GroundTruthObject> gts;
    if (auto it = label_files.find(id); it != label_files.end()) {
      try {
        gts = parse_dota_file(read_file(it->second.string()), classes);
      } catch (const ParseError& e) {
        std::string msg = e.what();
        msg = msg.substr(msg.find(": ") + 2);
        throw ParseError(e.kind(), e.line(), it->second.filename().string() + ": " + msg);
      }
    }
    auto image_preds = preds.count(id) ? std::move(preds[id]) : std::vector<Prediction>{};
    if (labeled.count(id)) {
      for (auto& g : gts) g.labeled = true;
      world.pool.add_image(id, ImageStatus::fully_labeled, std::move(image_preds), gts);
    } else {
      world.pool.add_image(id, ImageStatus::unlabeled, std::move(image_preds));
    }
    world.truth.add_image(id, std::move(gts));
  }
  if (!src.features_path.empty()) world.image_features = read_features(read_file(src.features_path));
  return world;
}

World build_world(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.source.kind == PoolSource::Kind::dota) return build_dota_world(config, seed);
  GenConfig gen = config.source.generator;
  gen.seed = seed;
  SyntheticWorld sw = gen_pool(gen);
  World world{std::move(sw.pool), std::move(sw.truth), std::move(sw.image_features), std::move(sw.object_features),
              std::move(sw.prediction_features), {}, true, gen.feature_dim};
  if (config.surrogate.enabled) world.heldout = gen_heldout(gen, config.surrogate.heldout_per_class);
  return world;
}

std::vector<TrainingExample> training_set(const World& world) {
  const PoolState& pool = world.pool;
  const int C = pool.num_classes();
  std::vector<TrainingExample> data;
  for (const auto& [id, rec] : pool.images()) {
    if (rec.status != ImageStatus::fully_labeled) continue;
    for (const GroundTruthObject& gt : rec.annotations) {
      data.push_back({world.object_features.at({id, gt.gt_id}), gt.class_id, true, false, std::nullopt});
    }
  }
  for (const QueryResult& r : pool.partial_labels()) {
    if (r.match) {
      data.push_back({world.object_features.at({r.image_id, r.match->gt_id}), r.match->class_id, true, true,
                      std::nullopt});
      continue;
    }
    const auto& preds = pool.image(r.image_id).predictions;
    auto it = std::find_if(preds.begin(), preds.end(), [&](const Prediction& p) { return p.pred_id == r.pred_id; });
    data.push_back({world.prediction_features.at(r.pred_id), C, false, true, it->background_score});
  }
  return data;
}

void phi_summary(std::vector<double> phi, CycleReport& report) {
  if (phi.empty()) {
    report.phi_min = report.phi_median = report.phi_max = std::nan("");
    return;
  }
  std::sort(phi.begin(), phi.end());
  report.phi_min = phi.front();
  report.phi_max = phi.back();
  const std::size_t n = phi.size();
  report.phi_median = n % 2 ? phi[n / 2] : 0.5 * (phi[n / 2 - 1] + phi[n / 2]);
}

std::string config_digest(const ExperimentConfig& config, std::uint64_t seed) {
  ordered_json j = config_to_json(config);
  j.erase("seeds");
  j.erase("output_dir");
  return hex_digest(fnv1a(std::to_string(seed), fnv1a(j.dump())));
}

std::string rng_digest(std::uint64_t seed, int completed_cycles) {
  auto rng = image_stream(seed, completed_cycles + 1, kCycleStream);
  return hex_digest(rng());
}

fs::path seed_dir(const RunOptions& options, const ExperimentConfig& config, std::uint64_t seed) {
  return fs::path(options.output_dir) / to_string(config.strategy) / ("seed_" + std::to_string(seed));
}

void write_seed_artifacts(const fs::path& dir, const SeedRun& run, const Checkpoint& checkpoint) {
  fs::create_directories(dir);
  write_file((dir / "reports.csv").string(), write_cycle_reports(run.reports));
  write_file((dir / "queries.jsonl").string(), write_query_results(run.queries));
  std::string images = "cycle,image_id\n";
  for (const auto& [cycle, id] : run.image_selections) images += std::to_string(cycle) + "," + std::to_string(id) + "\n";
  write_file((dir / "image_selections.csv").string(), images);
  std::string timing = "cycle,seconds\n";
  for (std::size_t i = 0; i < run.cycle_seconds.size(); ++i) {
    timing += std::to_string(run.reports.size() - run.cycle_seconds.size() + i + 1) + "," +
              format_double(run.cycle_seconds[i]) + "\n";
  }
  write_file((dir / "timing.csv").string(), timing);
  write_file((dir / "checkpoint.json").string(), checkpoint_to_text(checkpoint));
}

void replay(World& world, const Checkpoint& cp) {
  std::map<int, std::vector<QueryResult>> by_cycle;
  for (const QueryResult& r : cp.queries) by_cycle[r.cycle].push_back(r);
  for (const auto& [cycle, results] : by_cycle) {
    for (const QueryResult& r : results) {
      if (r.match) world.truth.mark_labeled(r.image_id, r.match->gt_id);
    }
    world.pool.apply_query_results(results);
  }
  for (const auto& [cycle, id] : cp.image_selections) {
    std::vector<GroundTruthObject> gts(world.truth.objects(id).begin(), world.truth.objects(id).end());
    for (auto& g : gts) {
      world.truth.mark_labeled(id, g.gt_id);
      g.labeled = true;
    }
    world.pool.apply_full_labels(id, std::move(gts));
  }
}

json snapshot_to_json(const PoolSnapshot& snap) {
  json statuses = json::array();
  for (const auto& [id, st] : snap.statuses) statuses.push_back(json::array({id, to_string(st)}));
  return json{{"statuses", statuses}, {"consumed", snap.consumed}, {"class_counts", snap.class_counts}};
}

PoolSnapshot snapshot_from_json(const json& j) {
  PoolSnapshot snap;
  for (const auto& item : j.at("statuses")) {
    snap.statuses.emplace(item.at(0).get<ImageId>(), image_status_from_string(item.at(1).get<std::string>()));
  }
  snap.consumed = j.at("consumed").get<std::vector<PredId>>();
  snap.class_counts = j.at("class_counts").get<ClassCounts>();
  return snap;
}

double nan_mean(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  return n ? s / n : std::nan("");
}

// Reads `key` from `obj` into `out` when present and records it as seen.
template <typename T>
void take(const json& obj, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

void reject_unknown(const json& obj, const std::set<std::string>& seen, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!seen.count(it.key())) throw Error(ErrorKind::config, "unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::mus_cdb: return "mus_cdb";
    case Strategy::mus_only: return "mus_only";
    case Strategy::cdb_only: return "cdb_only";
    case Strategy::random: return "random";
    case Strategy::entropy: return "entropy";
    case Strategy::coreset: return "coreset";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  for (Strategy s : {Strategy::mus_cdb, Strategy::mus_only, Strategy::cdb_only, Strategy::random, Strategy::entropy,
                     Strategy::coreset}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorKind::config, "unknown strategy '" + name + "'");
}

bool is_object_strategy(Strategy s) {
  return s == Strategy::mus_cdb || s == Strategy::mus_only || s == Strategy::cdb_only;
}

ExperimentConfig::ExperimentConfig() {
  for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
}

void ExperimentConfig::validate() const {
  if (cycles < 1) throw Error(ErrorKind::config, "cycles must be at least 1");
  if (budget < 0) throw Error(ErrorKind::config, "budget must be non-negative");
  if (seeds.empty()) throw Error(ErrorKind::config, "at least one seed is required");
  scoring.validate();
  SamplerConfig s = sampler;
  s.budget = budget;
  s.validate();
  surrogate.train.validate();
  if (surrogate.heldout_per_class < 1) throw Error(ErrorKind::config, "heldout_per_class must be positive");
  if (source.kind == PoolSource::Kind::synthetic) {
    source.generator.validate();
  } else {
    if (source.label_dir.empty() || source.predictions_path.empty() || source.classes_path.empty()) {
      throw Error(ErrorKind::config, "dota source needs label_dir, predictions and classes");
    }
    if (strategy == Strategy::coreset && source.features_path.empty()) {
      throw Error(ErrorKind::config, "coreset on a dota source needs a features file");
    }
  }
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json source;
  if (c.source.kind == PoolSource::Kind::synthetic) {
    const GenConfig& g = c.source.generator;
    const DetectorNoise& n = g.noise;
    source["type"] = "synthetic";
    source["generator"] = {
        {"num_classes", g.num_classes},
        {"num_images", g.num_images},
        {"min_objects", g.min_objects},
        {"max_objects", g.max_objects},
        {"class_frequency_exponent", g.class_frequency_exponent},
        {"scene_size", g.scene_size},
        {"min_box_size", g.min_box_size},
        {"max_box_size", g.max_box_size},
        {"feature_dim", g.feature_dim},
        {"feature_separation", g.feature_separation},
        {"initial_labeled_fraction", g.initial_labeled_fraction},
        {"noise",
         {{"prob_temperature", n.prob_temperature},
          {"confusion_rate", n.confusion_rate},
          {"box_jitter_sigma", n.box_jitter_sigma},
          {"false_positive_rate", n.false_positive_rate},
          {"miss_rate", n.miss_rate},
          {"class_boost", n.class_boost},
          {"logit_noise", n.logit_noise},
          {"rare_class_boost_exponent", n.rare_class_boost_exponent},
          {"true_background_max", n.true_background_max},
          {"fp_background_min", n.fp_background_min},
          {"fp_background_max", n.fp_background_max}}}};
  } else {
    source["type"] = "dota";
    source["label_dir"] = c.source.label_dir;
    source["predictions"] = c.source.predictions_path;
    source["classes"] = c.source.classes_path;
    source["features"] = c.source.features_path;
    source["initial_labeled"] = c.source.initial_labeled_path;
    source["initial_labeled_fraction"] = c.source.initial_labeled_fraction;
  }
  ordered_json j;
  j["strategy"] = to_string(c.strategy);
  j["cycles"] = c.cycles;
  j["budget"] = c.budget;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["scoring"] = {{"theta", c.scoring.theta}, {"empty_confident_set_value", c.scoring.empty_confident_set_value}};
  j["sampler"] = {{"suppression_iou", c.sampler.suppression_iou},
                  {"min_match_iou", c.sampler.min_match_iou},
                  {"charge_background_queries", c.sampler.charge_background_queries},
                  {"second_pass_ignore_class", c.sampler.second_pass_ignore_class},
                  {"match_difficult", c.sampler.match_difficult}};
  j["allow_overshoot"] = c.allow_overshoot;
  j["surrogate"] = {{"enabled", c.surrogate.enabled},
                    {"steps", c.surrogate.train.steps},
                    {"learning_rate", c.surrogate.train.learning_rate},
                    {"l2", c.surrogate.train.l2},
                    {"heldout_per_class", c.surrogate.heldout_per_class}};
  j["source"] = source;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorKind::config, "configuration must be a JSON object");
    std::set<std::string> seen;
    std::string strategy = to_string(c.strategy);
    take(j, "strategy", strategy, seen);
    c.strategy = strategy_from_string(strategy);
    take(j, "cycles", c.cycles, seen);
    take(j, "budget", c.budget, seen);
    take(j, "seeds", c.seeds, seen);
    take(j, "output_dir", c.output_dir, seen);
    take(j, "allow_overshoot", c.allow_overshoot, seen);
    seen.insert({"scoring", "sampler", "surrogate", "source"});
    reject_unknown(j, seen, "configuration");

    if (auto it = j.find("scoring"); it != j.end()) {
      std::set<std::string> s;
      take(*it, "theta", c.scoring.theta, s);
      take(*it, "empty_confident_set_value", c.scoring.empty_confident_set_value, s);
      reject_unknown(*it, s, "scoring");
    }
    if (auto it = j.find("sampler"); it != j.end()) {
      std::set<std::string> s;
      take(*it, "suppression_iou", c.sampler.suppression_iou, s);
      take(*it, "min_match_iou", c.sampler.min_match_iou, s);
      take(*it, "charge_background_queries", c.sampler.charge_background_queries, s);
      take(*it, "second_pass_ignore_class", c.sampler.second_pass_ignore_class, s);
      take(*it, "match_difficult", c.sampler.match_difficult, s);
      reject_unknown(*it, s, "sampler");
    }
    if (auto it = j.find("surrogate"); it != j.end()) {
      std::set<std::string> s;
      take(*it, "enabled", c.surrogate.enabled, s);
      take(*it, "steps", c.surrogate.train.steps, s);
      take(*it, "learning_rate", c.surrogate.train.learning_rate, s);
      take(*it, "l2", c.surrogate.train.l2, s);
      take(*it, "heldout_per_class", c.surrogate.heldout_per_class, s);
      reject_unknown(*it, s, "surrogate");
    }
    if (auto it = j.find("source"); it != j.end()) {
      std::set<std::string> s;
      std::string type = "synthetic";
      take(*it, "type", type, s);
      if (type == "synthetic") {
        c.source.kind = PoolSource::Kind::synthetic;
        s.insert("generator");
        reject_unknown(*it, s, "source");
        if (auto gt = it->find("generator"); gt != it->end()) {
          GenConfig& g = c.source.generator;
          std::set<std::string> gs;
          take(*gt, "num_classes", g.num_classes, gs);
          take(*gt, "num_images", g.num_images, gs);
          take(*gt, "min_objects", g.min_objects, gs);
          take(*gt, "max_objects", g.max_objects, gs);
          take(*gt, "class_frequency_exponent", g.class_frequency_exponent, gs);
          take(*gt, "scene_size", g.scene_size, gs);
          take(*gt, "min_box_size", g.min_box_size, gs);
          take(*gt, "max_box_size", g.max_box_size, gs);
          take(*gt, "feature_dim", g.feature_dim, gs);
          take(*gt, "feature_separation", g.feature_separation, gs);
          take(*gt, "initial_labeled_fraction", g.initial_labeled_fraction, gs);
          gs.insert("noise");
          reject_unknown(*gt, gs, "generator");
          if (auto nt = gt->find("noise"); nt != gt->end()) {
            DetectorNoise& n = g.noise;
            std::set<std::string> ns;
            take(*nt, "prob_temperature", n.prob_temperature, ns);
            take(*nt, "confusion_rate", n.confusion_rate, ns);
            take(*nt, "box_jitter_sigma", n.box_jitter_sigma, ns);
            take(*nt, "false_positive_rate", n.false_positive_rate, ns);
            take(*nt, "miss_rate", n.miss_rate, ns);
            take(*nt, "class_boost", n.class_boost, ns);
            take(*nt, "logit_noise", n.logit_noise, ns);
            take(*nt, "rare_class_boost_exponent", n.rare_class_boost_exponent, ns);
            take(*nt, "true_background_max", n.true_background_max, ns);
            take(*nt, "fp_background_min", n.fp_background_min, ns);
            take(*nt, "fp_background_max", n.fp_background_max, ns);
            reject_unknown(*nt, ns, "noise");
          }
        }
      } else if (type == "dota") {
        c.source.kind = PoolSource::Kind::dota;
        take(*it, "label_dir", c.source.label_dir, s);
        take(*it, "predictions", c.source.predictions_path, s);
        take(*it, "classes", c.source.classes_path, s);
        take(*it, "features", c.source.features_path, s);
        take(*it, "initial_labeled", c.source.initial_labeled_path, s);
        take(*it, "initial_labeled_fraction", c.source.initial_labeled_fraction, s);
        reject_unknown(*it, s, "source");
      } else {
        throw Error(ErrorKind::config, "unknown source type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad configuration value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, path + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  if (c.source.kind == PoolSource::Kind::dota) {
    // Relative data paths resolve against the configuration file.
    const fs::path base = fs::path(path).parent_path();
    for (std::string* p : {&c.source.label_dir, &c.source.predictions_path, &c.source.classes_path,
                           &c.source.features_path, &c.source.initial_labeled_path}) {
      if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).string();
    }
  }
  return c;
}

ExperimentConfig standard_benchmark() {
  ExperimentConfig c;
  GenConfig& g = c.source.generator;
  g.num_classes = 8;
  g.num_images = 300;
  g.min_objects = 10;
  g.max_objects = 30;
  g.class_frequency_exponent = 1.5;
  g.scene_size = 1024.0;
  g.min_box_size = 16.0;
  g.max_box_size = 64.0;
  g.feature_dim = 16;
  g.feature_separation = 3.0;
  g.initial_labeled_fraction = 0.05;
  g.noise.prob_temperature = 1.0;
  g.noise.confusion_rate = 0.1;
  g.noise.box_jitter_sigma = 2.0;
  g.noise.false_positive_rate = 0.3;
  g.noise.miss_rate = 0.05;
  c.strategy = Strategy::mus_cdb;
  c.cycles = 3;
  c.budget = 200;
  return c;
}

double kl_to_uniform(std::span<const std::int64_t> histogram) {
  std::int64_t total = 0;
  for (auto v : histogram) {
    if (v < 0) throw Error(ErrorKind::contract, "histogram entries must be non-negative");
    total += v;
  }
  if (total == 0) throw Error(ErrorKind::contract, "histogram is empty");
  const double C = static_cast<double>(histogram.size());
  double kl = 0.0;
  for (auto v : histogram) {
    if (v == 0) continue;
    const double p = static_cast<double>(v) / static_cast<double>(total);
    kl += p * std::log(p * C);
  }
  return std::max(kl, 0.0);
}

std::vector<int> rare_classes(std::span<const std::int64_t> class_totals) {
  std::vector<int> order(class_totals.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (class_totals[a] != class_totals[b]) return class_totals[a] < class_totals[b];
    return a > b;
  });
  const std::size_t n = (class_totals.size() + 3) / 4;
  order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

std::string hex_digest(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t pool_digest(const PoolState& pool) {
  const PoolSnapshot snap = pool.snapshot();
  std::uint64_t h = fnv1a(snapshot_to_json(snap).dump());
  return fnv1a(write_query_results(pool.partial_labels()), h);
}

std::string checkpoint_to_text(const Checkpoint& cp) {
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["config_digest"] = cp.config_digest;
  j["seed"] = cp.seed;
  j["completed_cycles"] = cp.completed_cycles;
  j["rng_digest"] = cp.rng_digest;
  j["pool"] = snapshot_to_json(cp.pool);
  json queries = json::array();
  const std::string qtext = write_query_results(cp.queries);
  std::size_t start = 0;
  while (start < qtext.size()) {
    const std::size_t end = qtext.find('\n', start);
    queries.push_back(qtext.substr(start, end - start));
    start = end + 1;
  }
  j["queries"] = queries;
  json images = json::array();
  for (const auto& [cycle, id] : cp.image_selections) images.push_back(json::array({cycle, id}));
  j["image_selections"] = images;
  json reports = json::array();
  for (const CycleReport& r : cp.reports) reports.push_back(cycle_report_row(r));
  j["num_classes"] = cp.pool.class_counts.size();
  j["reports"] = reports;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_text(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorKind::checkpoint_mismatch, "unsupported checkpoint format");
    }
    Checkpoint cp;
    cp.config_digest = j.at("config_digest").get<std::string>();
    cp.seed = j.at("seed").get<std::uint64_t>();
    cp.completed_cycles = j.at("completed_cycles").get<int>();
    cp.rng_digest = j.at("rng_digest").get<std::string>();
    cp.pool = snapshot_from_json(j.at("pool"));
    std::string qtext;
    for (const auto& line : j.at("queries")) qtext += line.get<std::string>() + "\n";
    cp.queries = read_query_results(qtext);
    for (const auto& item : j.at("image_selections")) {
      cp.image_selections.emplace_back(item.at(0).get<int>(), item.at(1).get<ImageId>());
    }
    const int C = j.at("num_classes").get<int>();
    std::string rtext = cycle_report_header(C) + "\n";
    for (const auto& row : j.at("reports")) rtext += row.get<std::string>() + "\n";
    cp.reports = read_cycle_reports(rtext);
    return cp;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::checkpoint_mismatch, std::string("malformed checkpoint: ") + e.what());
  }
}

bool same_checkpoint(const Checkpoint& a, const Checkpoint& b) {
  if (a.reports.size() != b.reports.size()) return false;
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    if (!same_report(a.reports[i], b.reports[i])) return false;
  }
  return a.config_digest == b.config_digest && a.seed == b.seed && a.completed_cycles == b.completed_cycles &&
         a.rng_digest == b.rng_digest && a.pool == b.pool && a.queries == b.queries &&
         a.image_selections == b.image_selections;
}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  config.validate();
  World world = build_world(config, seed);
  const int C = world.pool.num_classes();
  const std::string digest = config_digest(config, seed);
  const ClassCounts totals = world.truth.class_totals();
  const auto rare = rare_classes(totals);

  SeedRun run;
  run.seed = seed;
  run.class_totals = totals;
  const bool persist = !options.output_dir.empty();
  const fs::path dir = persist ? seed_dir(options, config, seed) : fs::path();

  int start_cycle = 0;
  if (options.resume && persist && fs::exists(dir / "checkpoint.json")) {
    const Checkpoint cp = checkpoint_from_text(read_file((dir / "checkpoint.json").string()));
    if (cp.config_digest != digest || cp.seed != seed) {
      throw Error(ErrorKind::checkpoint_mismatch, "checkpoint was written for a different configuration or seed");
    }
    if (cp.rng_digest != rng_digest(seed, cp.completed_cycles)) {
      throw Error(ErrorKind::checkpoint_mismatch, "checkpoint random-stream digest does not match");
    }
    replay(world, cp);
    if (!(world.pool.snapshot() == cp.pool)) {
      throw Error(ErrorKind::checkpoint_mismatch, "replayed pool differs from the checkpoint");
    }
    start_cycle = cp.completed_cycles;
    run.reports = cp.reports;
    run.queries = cp.queries;
    run.image_selections = cp.image_selections;
  }

  auto objects_in = [&](ImageId id) { return static_cast<std::int64_t>(world.truth.objects(id).size()); };

  for (int cycle = start_cycle + 1; cycle <= config.cycles; ++cycle) {
    const auto started = std::chrono::steady_clock::now();
    CycleReport report;
    report.strategy = to_string(config.strategy);
    report.seed = seed;
    report.cycle = cycle;
    report.budget = config.budget;
    report.queried_per_class.assign(C, 0);

    if (is_object_strategy(config.strategy)) {
      CycleOptions opts;
      opts.scoring = config.scoring;
      opts.sampler = config.sampler;
      opts.sampler.budget = config.budget;
      opts.image_term = config.strategy == Strategy::cdb_only ? ImageTerm::object_only : ImageTerm::mixed;
      opts.budget_mode = config.strategy == Strategy::mus_only ? BudgetMode::unlimited : BudgetMode::balanced;
      CycleOutcome outcome = run_cycle(world.pool, world.truth, opts, cycle);
      report.queried_per_class = outcome.stats.queried_per_class;
      report.background_queries = outcome.stats.background_queries;
      report.charged = outcome.stats.charged;
      report.unspent = outcome.stats.unspent;
      report.starved_classes = outcome.stats.starved_classes;
      phi_summary(outcome.stats.taken_phi, report);
      run.queries.insert(run.queries.end(), outcome.results.begin(), outcome.results.end());
    } else {
      ImageSelection sel;
      if (config.strategy == Strategy::random) {
        auto rng = image_stream(seed, cycle, kCycleStream);
        sel = random_images(world.pool, config.budget, rng(), objects_in, config.allow_overshoot);
      } else if (config.strategy == Strategy::entropy) {
        sel = entropy_images(world.pool, config.budget, objects_in, config.allow_overshoot);
      } else {
        sel = coreset_images(world.pool, world.image_features, config.budget, objects_in, config.allow_overshoot);
      }
      for (ImageId id : sel.images) {
        std::vector<GroundTruthObject> gts(world.truth.objects(id).begin(), world.truth.objects(id).end());
        for (auto& g : gts) {
          world.truth.mark_labeled(id, g.gt_id);
          g.labeled = true;
          ++report.queried_per_class[g.class_id];
        }
        world.pool.apply_full_labels(id, std::move(gts));
        run.image_selections.emplace_back(cycle, id);
      }
      report.charged = sel.objects;
      report.unspent = std::max<std::int64_t>(0, config.budget - sel.objects);
      report.overshoot = sel.overshoot;
      phi_summary({}, report);
    }

    report.matched = std::accumulate(report.queried_per_class.begin(), report.queried_per_class.end(), std::int64_t{0});
    if (report.matched > 0) {
      report.kl_to_uniform = kl_to_uniform(report.queried_per_class);
      std::int64_t rare_count = 0;
      for (int k : rare) rare_count += report.queried_per_class[k];
      report.rare_share = static_cast<double>(rare_count) / static_cast<double>(report.matched);
    } else {
      report.kl_to_uniform = std::nan("");
      report.rare_share = std::nan("");
    }

    report.recall_per_class.assign(C, std::nan(""));
    report.macro_recall = std::nan("");
    report.accuracy = std::nan("");
    if (config.surrogate.enabled && world.has_object_features) {
      const auto data = training_set(world);
      if (!data.empty()) {
        const SurrogateModel model = train(SurrogateModel(C, world.feature_dim), data, config.surrogate.train);
        const Evaluation ev = evaluate(model, world.heldout);
        report.recall_per_class = ev.recall_per_class;
        report.macro_recall = ev.macro_recall;
        report.accuracy = ev.accuracy;
      }
    }
    report.pool_digest = hex_digest(pool_digest(world.pool));
    report.config_digest = digest;
    run.reports.push_back(std::move(report));
    run.cycle_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

    if (persist) {
      Checkpoint cp{digest, seed, cycle, rng_digest(seed, cycle), world.pool.snapshot(), run.queries,
                    run.image_selections, run.reports};
      write_seed_artifacts(dir, run, cp);
    }
    if (options.stop_after && cycle >= *options.stop_after) break;
  }
  return run;
}

std::vector<CycleReport> ExperimentResult::all_reports() const {
  std::vector<CycleReport> out;
  for (const SeedRun& r : runs) out.insert(out.end(), r.reports.begin(), r.reports.end());
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  ExperimentResult result;
  for (std::uint64_t seed : config.seeds) result.runs.push_back(run_seed(config, seed, options));
  if (!options.output_dir.empty()) {
    const fs::path dir = fs::path(options.output_dir) / to_string(config.strategy);
    fs::create_directories(dir);
    write_file((dir / "reports.csv").string(), write_cycle_reports(result.all_reports()));
    write_file((dir / "config.json").string(), config_to_json(config).dump(2) + "\n");
  }
  return result;
}

SweepResult theta_sweep(const ExperimentConfig& config, std::span<const double> thetas, const RunOptions& options) {
  if (thetas.size() < 2) throw Error(ErrorKind::config, "a sweep needs at least two theta values");
  SweepResult sweep;
  for (double theta : thetas) {
    ExperimentConfig c = config;
    c.scoring.theta = theta;
    RunOptions o = options;
    if (!o.output_dir.empty()) o.output_dir = (fs::path(options.output_dir) / ("theta_" + format_double(theta))).string();
    ExperimentResult res = run_experiment(c, o);
    for (int cycle = 1; cycle <= c.cycles; ++cycle) {
      std::vector<double> recalls;
      std::vector<double> kls;
      for (const SeedRun& run : res.runs) {
        for (const CycleReport& r : run.reports) {
          if (r.cycle != cycle) continue;
          recalls.push_back(r.macro_recall);
          kls.push_back(r.kl_to_uniform);
        }
      }
      SweepRow row;
      row.theta = theta;
      row.cycle = cycle;
      row.seeds = static_cast<int>(recalls.size());
      row.macro_recall_mean = nan_mean(recalls);
      row.macro_recall_min = std::nan("");
      row.macro_recall_max = std::nan("");
      for (double v : recalls) {
        if (std::isnan(v)) continue;
        row.macro_recall_min = std::isnan(row.macro_recall_min) ? v : std::min(row.macro_recall_min, v);
        row.macro_recall_max = std::isnan(row.macro_recall_max) ? v : std::max(row.macro_recall_max, v);
      }
      row.kl_mean = nan_mean(kls);
      sweep.rows.push_back(row);
    }
    sweep.experiments.push_back(std::move(res));
  }
  return sweep;
}

std::string write_sweep_table(std::span<const SweepRow> rows) {
  std::string out = "theta,cycle,seeds,macro_recall_mean,macro_recall_min,macro_recall_max,kl_mean\n";
  for (const SweepRow& r : rows) {
    out += format_double(r.theta) + "," + std::to_string(r.cycle) + "," + std::to_string(r.seeds) + "," +
           format_double(r.macro_recall_mean) + "," + format_double(r.macro_recall_min) + "," +
           format_double(r.macro_recall_max) + "," + format_double(r.kl_mean) + "\n";
  }
  return out;
}

double sign_test_p(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  // Sum of binomial(n, i) / 2^n for i <= k, in log space.
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

std::vector<CompareRow> compare_reports(std::span<const std::vector<CycleReport>> groups) {
  std::vector<CompareRow> rows;
  if (groups.empty()) return rows;
  std::map<std::pair<int, std::uint64_t>, double> reference;
  for (const CycleReport& r : groups.front()) reference[{r.cycle, r.seed}] = r.macro_recall;

  for (const auto& group : groups) {
    std::map<int, std::vector<const CycleReport*>> by_cycle;
    for (const CycleReport& r : group) by_cycle[r.cycle].push_back(&r);
    for (const auto& [cycle, reports] : by_cycle) {
      CompareRow row;
      row.strategy = reports.front()->strategy;
      row.cycle = cycle;
      row.seeds = static_cast<int>(reports.size());
      std::vector<double> recall, kl, rare, charged;
      for (const CycleReport* r : reports) {
        recall.push_back(r->macro_recall);
        kl.push_back(r->kl_to_uniform);
        rare.push_back(r->rare_share);
        charged.push_back(static_cast<double>(r->charged));
        auto it = reference.find({cycle, r->seed});
        if (it == reference.end() || std::isnan(it->second) || std::isnan(r->macro_recall)) continue;
        if (r->macro_recall > it->second) {
          ++row.wins;
        } else if (r->macro_recall < it->second) {
          ++row.losses;
        } else {
          ++row.ties;
        }
      }
      row.macro_recall_mean = nan_mean(recall);
      row.kl_mean = nan_mean(kl);
      row.rare_share_mean = nan_mean(rare);
      row.charged_mean = nan_mean(charged);
      row.sign_p = sign_test_p(row.wins, row.losses);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string write_compare_table(std::span<const CompareRow> rows) {
  std::string out =
      "strategy,cycle,seeds,macro_recall_mean,kl_mean,rare_share_mean,charged_mean,wins,losses,ties,sign_p\n";
  for (const CompareRow& r : rows) {
    out += r.strategy + "," + std::to_string(r.cycle) + "," + std::to_string(r.seeds) + "," +
           format_double(r.macro_recall_mean) + "," + format_double(r.kl_mean) + "," +
           format_double(r.rare_share_mean) + "," + format_double(r.charged_mean) + "," + std::to_string(r.wins) +
           "," + std::to_string(r.losses) + "," + std::to_string(r.ties) + "," + format_double(r.sign_p) + "\n";
  }
  return out;
}

}  // namespace muscdb
