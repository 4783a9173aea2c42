#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

namespace depthkv::detail {

// Shortest round-trip decimal form, identical across runs.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  // from_chars rejects leading whitespace and '+'; trim both.
  std::size_t begin = text.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return false;
  std::size_t end = text.find_last_not_of(" \t\r");
  text = text.substr(begin, end - begin + 1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

}  // namespace depthkv::detail
