#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muscdb/baselines.hpp"
#include "muscdb/datamodel.hpp"
#include "muscdb/report.hpp"

namespace muscdb {

struct DotaAnnotation {
  std::array<double, 8> quad{};
  std::string category;
  int difficult = 0;

  friend bool operator==(const DotaAnnotation&, const DotaAnnotation&) = default;
};

struct DotaFile {
  std::optional<std::string> image_source;
  std::optional<std::string> gsd;
  std::vector<DotaAnnotation> objects;

  friend bool operator==(const DotaFile&, const DotaFile&) = default;
};

// Tokenises on ASCII whitespace. Lines starting with "imagesource" or "gsd"
// are headers; blank lines are ignored; every other line must carry 8
// coordinates, a category and an optional difficult flag.
DotaFile parse_dota_text(std::string_view text);

// Same, additionally mapping categories through `class_list` and converting
// each quad to its minimum-area rotated rectangle. gt_id is the object's
// position in the file.
std::vector<GroundTruthObject> parse_dota_file(std::string_view text, std::span<const std::string> class_list);

std::vector<GroundTruthObject> to_ground_truth(const DotaFile& file, std::span<const std::string> class_list);

std::string serialize_dota(const DotaFile& file);

// Corners of the box as a DOTA quad (counterclockwise from the first corner).
std::array<double, 8> box_to_quad(const RotatedBox& box);

// Predictions JSONL. Each line holds image_id, box {cx,cy,w,h,angle},
// class_probs and background_score. pred_ids follow file order. The
// probability vector plus background is rescaled to sum to one when its raw
// sum lies in [0.5, 1.5] and rejected otherwise.
std::vector<Prediction> load_predictions(std::string_view text, std::optional<int> num_classes = std::nullopt);
std::string write_predictions(std::span<const Prediction> preds);

std::vector<QueryResult> read_query_results(std::string_view text);
std::string write_query_results(std::span<const QueryResult> results);

std::vector<ImageFeature> read_features(std::string_view text);
std::string write_features(std::span<const ImageFeature> features);

// CSV with a header row; the header depends on the class count of the first
// record. An empty list serialises to an empty string.
std::string write_cycle_reports(std::span<const CycleReport> reports);
std::string cycle_report_header(int num_classes);
std::string cycle_report_row(const CycleReport& report);
std::vector<CycleReport> read_cycle_reports(std::string_view text);

enum class InputKind { dota, predictions, query_results, features, reports };

// Parses `text` as the given kind and returns the record count; throws
// ParseError (with the offending line) on malformed input.
std::size_t validate_text(InputKind kind, std::string_view text, std::span<const std::string> class_list = {});

std::string format_double(double value);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace muscdb
