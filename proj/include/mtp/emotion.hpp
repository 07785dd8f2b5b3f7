#pragma once
// The 17 canonical feeling labels drawn from the circumplex model, with their
// fixed polarity grouping. Ingest is case-insensitive; output uses canonical
// casing.

#include <optional>
#include <string_view>

namespace mtp {

enum class EmotionLabel {
  Happy,
  Excited,
  Calm,
  Relaxed,
  Alert,
  Anxious,
  Angry,
  Disgusted,
  Sad,
  Upset,
  Depressed,
  Frustrated,
  Confused,
  Surprised,
  Neutral,
  Serious,
  Nervous,
};

inline constexpr int kEmotionLabelCount = 17;

enum class Polarity { Positive, Negative, NeutralTransitional };

std::string_view emotion_name(EmotionLabel label);
Polarity polarity_of(EmotionLabel label);

// Case-insensitive lookup; nullopt when the text names no canonical label.
std::optional<EmotionLabel> parse_emotion(std::string_view text);

}  // namespace mtp
