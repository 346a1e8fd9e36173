#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace muscdb {

enum class ErrorKind {
  invalid_box,
  invalid_polygon,
  not_found,
  duplicate_label,
  parse,
  unknown_class,
  calibration,
  degenerate_probability,
  contract,
  dimension_mismatch,
  scene_too_dense,
  config,
  checkpoint_mismatch,
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Input-format failure tied to a 1-based line number (0 when not line-bound).
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& what)
      : Error(kind, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace muscdb
