#include "muscdb/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "muscdb/errors.hpp"

namespace muscdb {
namespace {

using nlohmann::json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<double> to_double(std::string_view token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view token) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

double orient(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

std::array<Point, 4> quad_points(const std::array<double, 8>& q) {
  return {{{q[0], q[1]}, {q[2], q[3]}, {q[4], q[5]}, {q[6], q[7]}}};
}

bool is_simple_quad(const std::array<double, 8>& q) {
  const auto p = quad_points(q);
  if (segments_touch(p[0], p[1], p[2], p[3])) return false;
  if (segments_touch(p[1], p[2], p[3], p[0])) return false;
  return std::abs(signed_area(p)) > kAreaSnap;
}

std::string json_box(const RotatedBox& b) {
  return "{\"cx\":" + format_double(b.cx) + ",\"cy\":" + format_double(b.cy) + ",\"w\":" + format_double(b.w) +
         ",\"h\":" + format_double(b.h) + ",\"angle\":" + format_double(b.angle) + "}";
}

std::string json_array(std::span<const double> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out + "]";
}

RotatedBox box_from_json(const json& j) {
  return RotatedBox::make(j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
                          j.at("h").get<double>(), j.at("angle").get<double>());
}

// Runs `fn(line_number, line)` over non-blank lines, converting JSON and
// contract failures into line-tagged parse errors.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const std::size_t number = i + 1;
    try {
      fn(number, line);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.kind(), number, e.what());
    } catch (const json::exception& e) {
      throw ParseError(ErrorKind::parse, number, e.what());
    }
  }
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double csv_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nan("");
  auto v = to_double(s);
  if (!v) throw ParseError(ErrorKind::parse, line, "bad number '" + s + "'");
  return *v;
}

long long csv_int(const std::string& s, std::size_t line) {
  auto v = to_integer(s);
  if (!v) throw ParseError(ErrorKind::parse, line, "bad integer '" + s + "'");
  return *v;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

DotaFile parse_dota_text(std::string_view text) {
  DotaFile file;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t number = i + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    if (starts_with(line, "imagesource")) {
      const auto colon = line.find(':');
      file.image_source = std::string(colon == std::string_view::npos ? "" : trim(line.substr(colon + 1)));
      continue;
    }
    if (starts_with(line, "gsd")) {
      const auto colon = line.find(':');
      file.gsd = std::string(colon == std::string_view::npos ? "" : trim(line.substr(colon + 1)));
      continue;
    }
    const auto tokens = split_ws(line);
    if (tokens.size() != 9 && tokens.size() != 10) {
      throw ParseError(ErrorKind::parse, number,
                       "expected 9 or 10 tokens, found " + std::to_string(tokens.size()));
    }
    DotaAnnotation ann;
    for (std::size_t k = 0; k < 8; ++k) {
      auto v = to_double(tokens[k]);
      if (!v) throw ParseError(ErrorKind::parse, number, "non-numeric coordinate '" + std::string(tokens[k]) + "'");
      ann.quad[k] = *v;
    }
    ann.category = std::string(tokens[8]);
    if (tokens.size() == 10) {
      auto d = to_integer(tokens[9]);
      if (!d || (*d != 0 && *d != 1)) {
        throw ParseError(ErrorKind::parse, number, "difficult flag must be 0 or 1");
      }
      ann.difficult = static_cast<int>(*d);
    }
    if (!is_simple_quad(ann.quad)) {
      throw ParseError(ErrorKind::invalid_polygon, number, "quad is degenerate or self-intersecting");
    }
    file.objects.push_back(std::move(ann));
  }
  return file;
}

std::vector<GroundTruthObject> to_ground_truth(const DotaFile& file, std::span<const std::string> class_list) {
  std::vector<GroundTruthObject> out;
  out.reserve(file.objects.size());
  for (std::size_t i = 0; i < file.objects.size(); ++i) {
    const DotaAnnotation& ann = file.objects[i];
    auto it = std::find(class_list.begin(), class_list.end(), ann.category);
    if (it == class_list.end()) {
      throw Error(ErrorKind::unknown_class, "unknown category '" + ann.category + "'");
    }
    const auto pts = quad_points(ann.quad);
    GroundTruthObject gt;
    gt.gt_id = static_cast<int>(i);
    gt.class_id = static_cast<int>(it - class_list.begin());
    gt.box = min_area_rect(pts);
    gt.difficult = ann.difficult != 0;
    out.push_back(gt);
  }
  return out;
}

std::vector<GroundTruthObject> parse_dota_file(std::string_view text, std::span<const std::string> class_list) {
  if (class_list.empty()) throw Error(ErrorKind::contract, "class list is empty");
  const DotaFile file = parse_dota_text(text);
  // Re-walk to attach line numbers to category failures.
  std::size_t obj = 0;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size() && obj < file.objects.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty() || starts_with(line, "imagesource") || starts_with(line, "gsd")) continue;
    const auto& cat = file.objects[obj++].category;
    if (std::find(class_list.begin(), class_list.end(), cat) == class_list.end()) {
      throw ParseError(ErrorKind::unknown_class, i + 1, "unknown category '" + cat + "'");
    }
  }
  return to_ground_truth(file, class_list);
}

std::string serialize_dota(const DotaFile& file) {
  std::string out;
  if (file.image_source) out += "imagesource:" + *file.image_source + "\n";
  if (file.gsd) out += "gsd:" + *file.gsd + "\n";
  for (const DotaAnnotation& ann : file.objects) {
    for (double v : ann.quad) out += format_double(v) + " ";
    out += ann.category + " " + std::to_string(ann.difficult) + "\n";
  }
  return out;
}

std::array<double, 8> box_to_quad(const RotatedBox& box) {
  const auto c = box_corners(box);
  return {c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y};
}

std::vector<Prediction> load_predictions(std::string_view text, std::optional<int> num_classes) {
  std::vector<Prediction> out;
  for_each_record(text, [&](std::size_t number, std::string_view line) {
    const json j = json::parse(line);
    Prediction p;
    p.pred_id = static_cast<PredId>(out.size());
    p.image_id = j.at("image_id").get<ImageId>();
    p.box = box_from_json(j.at("box"));
    p.class_probs = j.at("class_probs").get<std::vector<double>>();
    p.background_score = j.at("background_score").get<double>();

    const int expected = num_classes ? *num_classes : (out.empty() ? p.num_classes() : out.front().num_classes());
    if (p.num_classes() < 2) throw ParseError(ErrorKind::parse, number, "need at least two class probabilities");
    if (p.num_classes() != expected) {
      throw ParseError(ErrorKind::dimension_mismatch, number,
                       "expected " + std::to_string(expected) + " class probabilities");
    }
    double sum = p.background_score;
    for (double v : p.class_probs) {
      if (!std::isfinite(v) || v < 0.0) throw ParseError(ErrorKind::parse, number, "negative or non-finite probability");
      sum += v;
    }
    if (!std::isfinite(p.background_score) || p.background_score < 0.0) {
      throw ParseError(ErrorKind::parse, number, "negative or non-finite background score");
    }
    if (!(sum >= 0.5 && sum <= 1.5)) {
      throw ParseError(ErrorKind::calibration, number, "probabilities sum to " + format_double(sum));
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      for (double& v : p.class_probs) v /= sum;
      p.background_score /= sum;
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::string write_predictions(std::span<const Prediction> preds) {
  std::string out;
  for (const Prediction& p : preds) {
    out += "{\"image_id\":" + std::to_string(p.image_id) + ",\"box\":" + json_box(p.box) +
           ",\"class_probs\":" + json_array(p.class_probs) +
           ",\"background_score\":" + format_double(p.background_score) + "}\n";
  }
  return out;
}

std::vector<QueryResult> read_query_results(std::string_view text) {
  std::vector<QueryResult> out;
  for_each_record(text, [&](std::size_t number, std::string_view line) {
    const json j = json::parse(line);
    QueryResult r;
    r.image_id = j.at("image_id").get<ImageId>();
    r.pred_id = j.at("pred_id").get<PredId>();
    const auto outcome = j.at("outcome").get<std::string>();
    if (outcome == "matched") {
      r.match = MatchedObject{j.at("gt_id").get<int>(), j.at("class_id").get<int>(), box_from_json(j.at("gt_box"))};
    } else if (outcome != "background") {
      throw ParseError(ErrorKind::parse, number, "unknown outcome '" + outcome + "'");
    }
    r.iou_with_gt = j.at("iou_with_gt").get<double>();
    r.cycle = j.at("cycle").get<int>();
    r.cost = j.at("cost").get<int>();
    if (r.cost != 1) throw ParseError(ErrorKind::parse, number, "cost must be 1");
    if (r.match && !(r.iou_with_gt > 0.0)) throw ParseError(ErrorKind::parse, number, "matched result with zero IoU");
    out.push_back(std::move(r));
  });
  return out;
}

std::string write_query_results(std::span<const QueryResult> results) {
  std::string out;
  for (const QueryResult& r : results) {
    out += "{\"image_id\":" + std::to_string(r.image_id) + ",\"pred_id\":" + std::to_string(r.pred_id);
    if (r.match) {
      out += ",\"outcome\":\"matched\",\"gt_id\":" + std::to_string(r.match->gt_id) +
             ",\"class_id\":" + std::to_string(r.match->class_id) + ",\"gt_box\":" + json_box(r.match->gt_box);
    } else {
      out += ",\"outcome\":\"background\"";
    }
    out += ",\"iou_with_gt\":" + format_double(r.iou_with_gt) + ",\"cycle\":" + std::to_string(r.cycle) +
           ",\"cost\":" + std::to_string(r.cost) + "}\n";
  }
  return out;
}

std::vector<ImageFeature> read_features(std::string_view text) {
  std::vector<ImageFeature> out;
  for_each_record(text, [&](std::size_t number, std::string_view line) {
    const json j = json::parse(line);
    ImageFeature f{j.at("image_id").get<ImageId>(), j.at("vector").get<std::vector<double>>()};
    for (double v : f.vector) {
      if (!std::isfinite(v)) throw ParseError(ErrorKind::parse, number, "non-finite feature value");
    }
    if (!out.empty() && out.front().vector.size() != f.vector.size()) {
      throw ParseError(ErrorKind::dimension_mismatch, number, "feature dimension differs from first record");
    }
    out.push_back(std::move(f));
  });
  return out;
}

std::string write_features(std::span<const ImageFeature> features) {
  std::string out;
  for (const ImageFeature& f : features) {
    out += "{\"image_id\":" + std::to_string(f.image_id) + ",\"vector\":" + json_array(f.vector) + "}\n";
  }
  return out;
}

std::string cycle_report_header(int num_classes) {
  std::string h = "strategy,seed,cycle";
  for (int k = 0; k < num_classes; ++k) h += ",queried_" + std::to_string(k);
  h += ",matched,background,charged,budget,unspent,overshoot,starved_classes,kl_to_uniform,rare_share,"
       "phi_min,phi_median,phi_max";
  for (int k = 0; k < num_classes; ++k) h += ",recall_" + std::to_string(k);
  h += ",macro_recall,accuracy,pool_digest,config_digest";
  return h;
}

std::string cycle_report_row(const CycleReport& r) {
  std::string row = r.strategy + "," + std::to_string(r.seed) + "," + std::to_string(r.cycle);
  for (auto q : r.queried_per_class) row += "," + std::to_string(q);
  for (auto v : {r.matched, r.background_queries, r.charged, r.budget, r.unspent, r.overshoot, r.starved_classes}) {
    row += "," + std::to_string(v);
  }
  for (double v : {r.kl_to_uniform, r.rare_share, r.phi_min, r.phi_median, r.phi_max}) row += "," + format_double(v);
  for (double v : r.recall_per_class) row += "," + format_double(v);
  row += "," + format_double(r.macro_recall) + "," + format_double(r.accuracy) + "," + r.pool_digest + "," +
         r.config_digest;
  return row;
}

std::string write_cycle_reports(std::span<const CycleReport> reports) {
  if (reports.empty()) return {};
  std::string out = cycle_report_header(reports.front().num_classes()) + "\n";
  for (const CycleReport& r : reports) {
    if (r.num_classes() != reports.front().num_classes() ||
        r.recall_per_class.size() != r.queried_per_class.size()) {
      throw Error(ErrorKind::contract, "reports disagree on class count");
    }
    out += cycle_report_row(r) + "\n";
  }
  return out;
}

std::vector<CycleReport> read_cycle_reports(std::string_view text) {
  std::vector<CycleReport> out;
  const auto lines = split_lines(text);
  int num_classes = -1;
  std::size_t columns = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t number = i + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (num_classes < 0) {
      num_classes = static_cast<int>(std::count_if(cells.begin(), cells.end(),
                                                   [](const std::string& c) { return starts_with(c, "queried_"); }));
      if (num_classes < 1 || std::string(line) != cycle_report_header(num_classes)) {
        throw ParseError(ErrorKind::parse, number, "unrecognised report header");
      }
      columns = cells.size();
      continue;
    }
    if (cells.size() != columns) {
      throw ParseError(ErrorKind::parse, number,
                       "expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()));
    }
    CycleReport r;
    std::size_t c = 0;
    r.strategy = cells[c++];
    auto [ptr, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), r.seed);
    if (ec != std::errc() || ptr != cells[c].data() + cells[c].size()) {
      throw ParseError(ErrorKind::parse, number, "bad seed '" + cells[c] + "'");
    }
    ++c;
    r.cycle = static_cast<int>(csv_int(cells[c++], number));
    for (int k = 0; k < num_classes; ++k) r.queried_per_class.push_back(csv_int(cells[c++], number));
    for (auto* field : {&r.matched, &r.background_queries, &r.charged, &r.budget, &r.unspent, &r.overshoot,
                        &r.starved_classes}) {
      *field = csv_int(cells[c++], number);
    }
    for (auto* field : {&r.kl_to_uniform, &r.rare_share, &r.phi_min, &r.phi_median, &r.phi_max}) {
      *field = csv_double(cells[c++], number);
    }
    for (int k = 0; k < num_classes; ++k) r.recall_per_class.push_back(csv_double(cells[c++], number));
    r.macro_recall = csv_double(cells[c++], number);
    r.accuracy = csv_double(cells[c++], number);
    r.pool_digest = cells[c++];
    r.config_digest = cells[c++];
    out.push_back(std::move(r));
  }
  return out;
}

bool same_report(const CycleReport& a, const CycleReport& b) {
  auto eq = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  if (a.recall_per_class.size() != b.recall_per_class.size()) return false;
  for (std::size_t k = 0; k < a.recall_per_class.size(); ++k) {
    if (!eq(a.recall_per_class[k], b.recall_per_class[k])) return false;
  }
  return a.strategy == b.strategy && a.seed == b.seed && a.cycle == b.cycle &&
         a.queried_per_class == b.queried_per_class && a.matched == b.matched &&
         a.background_queries == b.background_queries && a.charged == b.charged && a.budget == b.budget &&
         a.unspent == b.unspent && a.overshoot == b.overshoot && a.starved_classes == b.starved_classes &&
         eq(a.kl_to_uniform, b.kl_to_uniform) && eq(a.rare_share, b.rare_share) && eq(a.phi_min, b.phi_min) &&
         eq(a.phi_median, b.phi_median) && eq(a.phi_max, b.phi_max) && eq(a.macro_recall, b.macro_recall) &&
         eq(a.accuracy, b.accuracy) && a.pool_digest == b.pool_digest && a.config_digest == b.config_digest;
}

std::size_t validate_text(InputKind kind, std::string_view text, std::span<const std::string> class_list) {
  switch (kind) {
    case InputKind::dota:
      if (class_list.empty()) return parse_dota_text(text).objects.size();
      return parse_dota_file(text, class_list).size();
    case InputKind::predictions: return load_predictions(text).size();
    case InputKind::query_results: return read_query_results(text).size();
    case InputKind::features: return read_features(text).size();
    case InputKind::reports: return read_cycle_reports(text).size();
  }
  return 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

}  // namespace muscdb
