#pragma once

#include <stdexcept>
#include <string>

namespace depthkv {

// Base class for all depthkv error conditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// What exactly went wrong while decoding a file.
enum class ParseErrc {
  bad_magic,      // file does not start with the expected magic bytes
  bad_header,     // header fields are inconsistent or unsupported
  truncated,      // payload shorter than the header implies
  trailing_data,  // payload longer than the header implies
  non_finite,     // NaN or infinity in a tensor or table cell
  bad_csv,        // malformed CSV cell or ragged row
};

const char* parse_errc_name(ParseErrc code);

class ParseError : public Error {
 public:
  ParseError(ParseErrc code, const std::string& message)
      : Error(message), code_(code) {}

  ParseErrc code() const noexcept { return code_; }

 private:
  ParseErrc code_;
};

// Filesystem-level failures (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

// A budget configuration that cannot be satisfied (per-layer ratio above the
// cap, or an integer budget too small for the minimum-retention rule).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

inline const char* parse_errc_name(ParseErrc code) {
  switch (code) {
    case ParseErrc::bad_magic: return "bad_magic";
    case ParseErrc::bad_header: return "bad_header";
    case ParseErrc::truncated: return "truncated";
    case ParseErrc::trailing_data: return "trailing_data";
    case ParseErrc::non_finite: return "non_finite";
    case ParseErrc::bad_csv: return "bad_csv";
  }
  return "unknown";
}

}  // namespace depthkv
