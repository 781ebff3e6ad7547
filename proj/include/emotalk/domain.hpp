#pragma once

#include <cstdint>
#include <string>

#include "emotalk/labels.hpp"
#include "emotalk/time.hpp"

namespace emotalk {

using PsychologistId = std::int64_t;
using PatientId = std::int64_t;

struct Psychologist {
  PsychologistId id = 0;
  std::string name;
  std::string email;

  friend bool operator==(const Psychologist&, const Psychologist&) = default;
};

struct Patient {
  PatientId id = 0;
  std::string name;
  PsychologistId psychologist_id = 0;

  friend bool operator==(const Patient&, const Patient&) = default;
};

/// One patient message and the system reply, with the emotion annotations
/// that produced it. turn_index is dense per patient, starting at 0.
struct ConversationTurn {
  std::int64_t id = 0;
  PatientId patient_id = 0;
  std::int64_t turn_index = 0;
  std::string user_text;
  std::string reply_text;
  EmotionLabel audio_emotion = EmotionLabel::unknown;
  SentimentLabel text_sentiment = SentimentLabel::neutral;
  EmotionLabel final_emotion = EmotionLabel::neutral;
  Timestamp created_at{};

  friend bool operator==(const ConversationTurn&, const ConversationTurn&) = default;
};

}  // namespace emotalk
