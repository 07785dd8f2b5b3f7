#include "mtp/types.hpp"

#include <array>
#include <cctype>

namespace mtp {
namespace {

constexpr std::array<std::string_view, 5> kTpTypeNames = {
    "EmotionalOutburst", "DecisionChange", "ExternalInfluence",
    "PerspectiveShift", "UncomfortableSituation",
};

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace

std::string_view tp_type_name(TpType type) {
  return kTpTypeNames[static_cast<std::size_t>(type)];
}

std::optional<TpType> parse_tp_type(std::string_view text) {
  for (std::size_t i = 0; i < kTpTypeNames.size(); ++i)
    if (iequals(text, kTpTypeNames[i])) return static_cast<TpType>(i);
  return std::nullopt;
}

}  // namespace mtp
