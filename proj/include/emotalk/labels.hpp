#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace emotalk {

/// Audio emotion labels. The first four are the concrete classes in their
/// fixed tie-break order; `unknown` marks an abstention.
enum class EmotionLabel { angry, happy, neutral, sad, unknown };

inline constexpr std::array<EmotionLabel, 4> kConcreteEmotions{
    EmotionLabel::angry, EmotionLabel::happy, EmotionLabel::neutral, EmotionLabel::sad};
inline constexpr std::array<EmotionLabel, 5> kAllEmotions{
    EmotionLabel::angry, EmotionLabel::happy, EmotionLabel::neutral, EmotionLabel::sad,
    EmotionLabel::unknown};

constexpr std::size_t index_of(EmotionLabel l) { return static_cast<std::size_t>(l); }

std::string_view to_string(EmotionLabel l);
std::optional<EmotionLabel> parse_emotion(std::string_view s);
/// Portuguese adjective used in prompts and reports ("triste", ...).
std::string_view portuguese_name(EmotionLabel l);

enum class SentimentLabel { sad, neutral, happy };

std::string_view to_string(SentimentLabel l);
std::optional<SentimentLabel> parse_sentiment(std::string_view s);

}  // namespace emotalk
