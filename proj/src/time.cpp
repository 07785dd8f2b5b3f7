#include "mtp/time.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

#include "mtp/error.hpp"

namespace mtp {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

// Seconds field: digits with an optional fractional part.
double parse_seconds_field(std::string_view tok) {
  bool dot_seen = false;
  bool digit_seen = false;
  for (char c : tok) {
    if (c == '.' && !dot_seen) {
      dot_seen = true;
    } else if (c >= '0' && c <= '9') {
      digit_seen = true;
    } else {
      digit_seen = false;
      break;
    }
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (!digit_seen || ec != std::errc() || ptr != tok.data() + tok.size() ||
      !std::isfinite(value) || value < 0.0)
    throw parse_error("invalid seconds token '" + std::string(tok) + "' in timestamp");
  return value;
}

double parse_clock(std::string_view text) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t colon = text.find(':', pos);
    if (colon == std::string_view::npos) {
      fields.push_back(text.substr(pos));
      break;
    }
    fields.push_back(text.substr(pos, colon - pos));
    pos = colon + 1;
  }
  if (fields.size() > 3)
    throw parse_error("too many ':' fields in timestamp '" + std::string(text) + "'");

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
    std::string_view tok = fields[i];
    if (!all_digits(tok))
      throw parse_error("invalid token '" + std::string(tok) + "' in timestamp '" +
                        std::string(text) + "'");
    long long units = 0;
    std::from_chars(tok.data(), tok.data() + tok.size(), units);
    // minutes in H:MM:SS must be < 60; leading hours/minutes field is unbounded
    if (i > 0 && units >= 60)
      throw parse_error("field '" + std::string(tok) + "' must be < 60 in timestamp '" +
                        std::string(text) + "'");
    total = total * 60.0 + static_cast<double>(units);
  }
  double secs = parse_seconds_field(fields.back());
  if (secs >= 60.0)
    throw parse_error("seconds token '" + std::string(fields.back()) +
                      "' must be < 60 in timestamp '" + std::string(text) + "'");
  return total * 60.0 + secs;
}

}  // namespace

double parse_timestamp(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) throw parse_error("empty timestamp");
  if (s.find(':') != std::string_view::npos) return parse_clock(s);

  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw parse_error("invalid timestamp token '" + std::string(s) + "'");
  if (!std::isfinite(value) || value < 0.0)
    throw parse_error("timestamp '" + std::string(s) + "' must be a finite non-negative value");
  return value;
}

std::string format_timestamp(double seconds) {
  if (!std::isfinite(seconds) || seconds < 0.0)
    throw input_error("cannot format negative or non-finite timestamp");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), seconds);
  if (ec != std::errc()) throw input_error("timestamp formatting failed");
  return std::string(buf, ptr);
}

std::string format_clock(double seconds) {
  if (!std::isfinite(seconds) || seconds < 0.0)
    throw input_error("cannot format negative or non-finite timestamp");
  auto total = static_cast<long long>(seconds);
  long long h = total / 3600, m = (total % 3600) / 60, s = total % 60;
  char buf[32];
  if (h > 0)
    std::snprintf(buf, sizeof(buf), "%lld:%02lld:%02lld", h, m, s);
  else
    std::snprintf(buf, sizeof(buf), "%lld:%02lld", m, s);
  return buf;
}

}  // namespace mtp
