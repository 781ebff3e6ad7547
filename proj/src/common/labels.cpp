#include "emotalk/labels.hpp"

namespace emotalk {

std::string_view to_string(EmotionLabel l) {
  switch (l) {
    case EmotionLabel::angry: return "angry";
    case EmotionLabel::happy: return "happy";
    case EmotionLabel::neutral: return "neutral";
    case EmotionLabel::sad: return "sad";
    case EmotionLabel::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<EmotionLabel> parse_emotion(std::string_view s) {
  for (auto l : kAllEmotions) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

std::string_view portuguese_name(EmotionLabel l) {
  switch (l) {
    case EmotionLabel::angry: return "irritado";
    case EmotionLabel::happy: return "feliz";
    case EmotionLabel::neutral: return "neutro";
    case EmotionLabel::sad: return "triste";
    case EmotionLabel::unknown: return "indefinido";
  }
  return "indefinido";
}

std::string_view to_string(SentimentLabel l) {
  switch (l) {
    case SentimentLabel::sad: return "sad";
    case SentimentLabel::neutral: return "neutral";
    case SentimentLabel::happy: return "happy";
  }
  return "neutral";
}

std::optional<SentimentLabel> parse_sentiment(std::string_view s) {
  for (auto l : {SentimentLabel::sad, SentimentLabel::neutral, SentimentLabel::happy}) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

}  // namespace emotalk
