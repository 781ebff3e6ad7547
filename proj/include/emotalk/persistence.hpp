#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emotalk/domain.hpp"
#include "emotalk/time.hpp"

namespace emotalk::db {

/// Dot-atom addresses per RFC 5322 (no quoted local parts or IP literals).
bool is_valid_email(std::string_view email);

struct NewTurn {
  std::string user_text;
  std::string reply_text;
  EmotionLabel audio_emotion = EmotionLabel::unknown;
  SentimentLabel text_sentiment = SentimentLabel::neutral;
  EmotionLabel final_emotion = EmotionLabel::neutral;
};

struct Migration {
  int version = 0;
  std::string name;
  std::string sql;
};

/// Numbered migrations compiled in from data/migrations.
const std::vector<Migration>& migrations();

/// Relational store for psychologists, patients and conversation turns.
/// Implementations must be safe for concurrent use; append_turn is
/// serialized per patient so turn indices stay dense.
class Store {
 public:
  virtual ~Store() = default;

  /// Applies pending migrations; returns how many ran.
  virtual int migrate() = 0;
  virtual int schema_version() const = 0;

  /// Creates or renames the psychologist keyed by email. Throws InvalidEmail.
  virtual Psychologist upsert_psychologist(std::string_view name, std::string_view email) = 0;
  virtual std::optional<Psychologist> find_psychologist(PsychologistId id) const = 0;
  virtual std::vector<Psychologist> list_psychologists() const = 0;
  /// Throws UnknownPsychologist, or PsychologistHasPatients while patients
  /// are still assigned.
  virtual void delete_psychologist(PsychologistId id) = 0;

  /// Inserts a patient, or updates the one with `id` when given. Throws
  /// UnknownPsychologist.
  virtual Patient upsert_patient(std::string_view name, PsychologistId psychologist_id,
                                 std::optional<PatientId> id = std::nullopt) = 0;
  virtual std::optional<Patient> find_patient(PatientId id) const = 0;
  virtual std::vector<Patient> list_patients(
      std::optional<PsychologistId> psychologist_id = std::nullopt) const = 0;

  /// turn_index = previous max + 1 (0 for the first turn). Throws UnknownPatient.
  virtual ConversationTurn append_turn(PatientId patient_id, const NewTurn& turn) = 0;
  /// Ascending turn_index; `limit` keeps the most recent N. Throws UnknownPatient.
  virtual std::vector<ConversationTurn> get_history(
      PatientId patient_id, std::optional<std::size_t> limit = std::nullopt) const = 0;
};

struct SqliteOptions {
  Clock clock = now_utc;
  /// Read connections for file databases; in-memory stores use one.
  std::size_t pool_size = 4;
  bool migrate_on_open = true;
};

/// SQLite-backed store. ":memory:" opens a private in-memory database.
std::unique_ptr<Store> open_sqlite_store(const std::string& path, SqliteOptions options = {});

/// ET_DB_PATH, defaulting to "emotalk.db" in the working directory.
std::unique_ptr<Store> open_store_from_env(SqliteOptions options = {});

/// One psychologist, two patients and six turns. Returns false (and
/// writes nothing) when the store already holds psychologists.
bool seed_demo(Store& store);

}  // namespace emotalk::db
