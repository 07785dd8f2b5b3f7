#pragma once
// Timestamps are non-negative seconds from conversation start. Annotation
// files write them either as bare seconds ("85.5") or clock strings in the
// forms M:SS, MM:SS, H:MM:SS ("1:25", "01:25", "1:02:03").

#include <string>
#include <string_view>

namespace mtp {

// Accepts bare seconds or a clock string. Seconds fields after a colon must
// be < 60. Throws ErrorKind::Parse naming the offending token.
double parse_timestamp(std::string_view text);

// Shortest decimal representation that parses back to the same value.
std::string format_timestamp(double seconds);

// M:SS (H:MM:SS from one hour up), seconds floored. Display only.
std::string format_clock(double seconds);

}  // namespace mtp
