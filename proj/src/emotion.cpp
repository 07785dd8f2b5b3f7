#include "mtp/emotion.hpp"

#include <array>
#include <cctype>

namespace mtp {
namespace {

constexpr std::array<std::string_view, kEmotionLabelCount> kNames = {
    "Happy",     "Excited",    "Calm",     "Relaxed",   "Alert",   "Anxious",
    "Angry",     "Disgusted",  "Sad",      "Upset",     "Depressed",
    "Frustrated", "Confused",  "Surprised", "Neutral",  "Serious", "Nervous",
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

std::string_view emotion_name(EmotionLabel label) {
  return kNames[static_cast<std::size_t>(label)];
}

Polarity polarity_of(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::Happy:
    case EmotionLabel::Excited:
    case EmotionLabel::Calm:
    case EmotionLabel::Relaxed:
    case EmotionLabel::Alert:
      return Polarity::Positive;
    case EmotionLabel::Anxious:
    case EmotionLabel::Angry:
    case EmotionLabel::Disgusted:
    case EmotionLabel::Sad:
    case EmotionLabel::Upset:
    case EmotionLabel::Depressed:
    case EmotionLabel::Frustrated:
    case EmotionLabel::Confused:
      return Polarity::Negative;
    case EmotionLabel::Surprised:
    case EmotionLabel::Neutral:
    case EmotionLabel::Serious:
    case EmotionLabel::Nervous:
      return Polarity::NeutralTransitional;
  }
  return Polarity::NeutralTransitional;  // unreachable
}

std::optional<EmotionLabel> parse_emotion(std::string_view text) {
  for (int i = 0; i < kEmotionLabelCount; ++i)
    if (iequals(text, kNames[static_cast<std::size_t>(i)]))
      return static_cast<EmotionLabel>(i);
  return std::nullopt;
}

}  // namespace mtp
