#include "muscdb/errors.hpp"

namespace muscdb {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_box: return "invalid-box";
    case ErrorKind::invalid_polygon: return "invalid-polygon";
    case ErrorKind::not_found: return "not-found";
    case ErrorKind::duplicate_label: return "duplicate-label";
    case ErrorKind::parse: return "parse";
    case ErrorKind::unknown_class: return "unknown-class";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::degenerate_probability: return "degenerate-probability";
    case ErrorKind::contract: return "contract";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::scene_too_dense: return "scene-too-dense";
    case ErrorKind::config: return "config";
    case ErrorKind::checkpoint_mismatch: return "checkpoint-mismatch";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace muscdb
