#include <sqlite3.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"
#include "emotalk/persistence.hpp"
#include "migrations.hpp"

namespace emotalk::db {

const std::vector<Migration>& migrations() { return detail::embedded_migrations(); }

namespace {

[[noreturn]] void storage_failure(sqlite3* db, const std::string& what) {
  throw Error(Errc::StorageFailure, what + ": " + sqlite3_errmsg(db));
}

void exec(sqlite3* db, const std::string& sql) {
  char* msg = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &msg) != SQLITE_OK) {
    std::string why = msg != nullptr ? msg : "unknown error";
    sqlite3_free(msg);
    throw Error(Errc::StorageFailure, "SQL failed: " + why);
  }
}

class Statement {
 public:
  Statement(sqlite3* db, std::string_view sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK) {
      storage_failure(db, "prepare");
    }
  }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;
  ~Statement() { sqlite3_finalize(stmt_); }

  Statement& bind(int idx, std::int64_t v) {
    sqlite3_bind_int64(stmt_, idx, v);
    return *this;
  }
  Statement& bind(int idx, std::string_view v) {
    sqlite3_bind_text(stmt_, idx, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind_null(int idx) {
    sqlite3_bind_null(stmt_, idx);
    return *this;
  }

  /// SQLITE_ROW, SQLITE_DONE, or the extended error code.
  int step_rc() {
    const int rc = sqlite3_step(stmt_);
    return rc == SQLITE_ROW || rc == SQLITE_DONE ? rc : sqlite3_extended_errcode(db_);
  }

  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    storage_failure(db_, "step");
  }

  std::int64_t int64_at(int col) const { return sqlite3_column_int64(stmt_, col); }
  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  std::string text_at(int col) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
    return p != nullptr ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
                        : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

/// BEGIN IMMEDIATE ... COMMIT, rolled back unless committed.
class WriteTransaction {
 public:
  explicit WriteTransaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
  WriteTransaction(const WriteTransaction&) = delete;
  WriteTransaction& operator=(const WriteTransaction&) = delete;
  ~WriteTransaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec(db_, "COMMIT");
    done_ = true;
  }

 private:
  sqlite3* db_;
  bool done_ = false;
};

class ReadTransaction {
 public:
  explicit ReadTransaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN"); }
  ReadTransaction(const ReadTransaction&) = delete;
  ReadTransaction& operator=(const ReadTransaction&) = delete;
  ~ReadTransaction() { sqlite3_exec(db_, "COMMIT", nullptr, nullptr, nullptr); }

 private:
  sqlite3* db_;
};

struct ConnectionDeleter {
  void operator()(sqlite3* db) const { sqlite3_close_v2(db); }
};
using Connection = std::unique_ptr<sqlite3, ConnectionDeleter>;

Connection open_connection(const std::string& path) {
  sqlite3* raw = nullptr;
  const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX | SQLITE_OPEN_URI;
  const int rc = sqlite3_open_v2(path.c_str(), &raw, flags, nullptr);
  Connection conn(raw);
  if (rc != SQLITE_OK) {
    throw Error(Errc::StorageFailure, "cannot open database " + path + ": " +
                                          (raw != nullptr ? sqlite3_errmsg(raw) : "out of memory"));
  }
  sqlite3_busy_timeout(conn.get(), 5000);
  exec(conn.get(), "PRAGMA foreign_keys = ON");
  return conn;
}

EmotionLabel emotion_column(const std::string& s) {
  if (auto l = parse_emotion(s)) return *l;
  throw Error(Errc::StorageFailure, "stored emotion label is invalid: " + s);
}

SentimentLabel sentiment_column(const std::string& s) {
  if (auto l = parse_sentiment(s)) return *l;
  throw Error(Errc::StorageFailure, "stored sentiment label is invalid: " + s);
}

Timestamp timestamp_column(const std::string& s) {
  if (auto t = parse_iso8601(s)) return *t;
  throw Error(Errc::StorageFailure, "stored timestamp is invalid: " + s);
}

constexpr std::string_view kTurnColumns =
    "id, patient_id, turn_index, user_text, reply_text, audio_emotion, text_sentiment, "
    "final_emotion, created_at";

ConversationTurn turn_from_row(const Statement& st) {
  ConversationTurn t;
  t.id = st.int64_at(0);
  t.patient_id = st.int64_at(1);
  t.turn_index = st.int64_at(2);
  t.user_text = st.text_at(3);
  t.reply_text = st.text_at(4);
  t.audio_emotion = emotion_column(st.text_at(5));
  t.text_sentiment = sentiment_column(st.text_at(6));
  t.final_emotion = emotion_column(st.text_at(7));
  t.created_at = timestamp_column(st.text_at(8));
  return t;
}

bool patient_exists(sqlite3* db, PatientId id) {
  Statement st(db, "SELECT 1 FROM patients WHERE id = ?");
  st.bind(1, id);
  return st.step();
}

bool psychologist_exists(sqlite3* db, PsychologistId id) {
  Statement st(db, "SELECT 1 FROM psychologists WHERE id = ?");
  st.bind(1, id);
  return st.step();
}

class SqliteStore final : public Store {
 public:
  SqliteStore(const std::string& path, SqliteOptions options) : clock_(std::move(options.clock)) {
    const bool in_memory = path == ":memory:" || path.empty();
    const std::size_t n = in_memory ? 1 : std::max<std::size_t>(1, options.pool_size);
    for (std::size_t i = 0; i < n; ++i) {
      Connection c = open_connection(in_memory ? ":memory:" : path);
      if (i == 0 && !in_memory) exec(c.get(), "PRAGMA journal_mode = WAL");
      idle_.push_back(std::move(c));
    }
    if (options.migrate_on_open) migrate();
  }

  int migrate() override {
    std::lock_guard write(write_mutex_);
    Lease lease(*this);
    sqlite3* db = lease.get();
    exec(db,
         "CREATE TABLE IF NOT EXISTS schema_migrations ("
         " version INTEGER PRIMARY KEY, name VARCHAR(200) NOT NULL, applied_at VARCHAR(32) NOT NULL)");
    const int current = version_on(db);
    int applied = 0;
    for (const auto& m : migrations()) {
      if (m.version <= current) continue;
      WriteTransaction tx(db);
      exec(db, m.sql);
      Statement st(db, "INSERT INTO schema_migrations (version, name, applied_at) VALUES (?, ?, ?)");
      st.bind(1, static_cast<std::int64_t>(m.version)).bind(2, m.name).bind(3, format_iso8601(clock_()));
      st.step();
      tx.commit();
      ++applied;
    }
    return applied;
  }

  int schema_version() const override {
    Lease lease(*this);
    return version_on(lease.get());
  }

  Psychologist upsert_psychologist(std::string_view name, std::string_view email) override {
    if (!is_valid_email(email)) {
      throw Error(Errc::InvalidEmail, "invalid email address: " + std::string(email));
    }
    std::lock_guard write(write_mutex_);
    Lease lease(*this);
    sqlite3* db = lease.get();
    WriteTransaction tx(db);
    {
      Statement st(db,
                   "INSERT INTO psychologists (name, email) VALUES (?, ?) "
                   "ON CONFLICT (email) DO UPDATE SET name = excluded.name");
      st.bind(1, name).bind(2, email);
      st.step();
    }
    Statement st(db, "SELECT id, name, email FROM psychologists WHERE email = ?");
    st.bind(1, email);
    if (!st.step()) storage_failure(db, "psychologist vanished after upsert");
    Psychologist p{st.int64_at(0), st.text_at(1), st.text_at(2)};
    tx.commit();
    return p;
  }

  std::optional<Psychologist> find_psychologist(PsychologistId id) const override {
    Lease lease(*this);
    Statement st(lease.get(), "SELECT id, name, email FROM psychologists WHERE id = ?");
    st.bind(1, id);
    if (!st.step()) return std::nullopt;
    return Psychologist{st.int64_at(0), st.text_at(1), st.text_at(2)};
  }

  std::vector<Psychologist> list_psychologists() const override {
    Lease lease(*this);
    Statement st(lease.get(), "SELECT id, name, email FROM psychologists ORDER BY id");
    std::vector<Psychologist> out;
    while (st.step()) out.push_back({st.int64_at(0), st.text_at(1), st.text_at(2)});
    return out;
  }

  void delete_psychologist(PsychologistId id) override {
    std::lock_guard write(write_mutex_);
    Lease lease(*this);
    sqlite3* db = lease.get();
    WriteTransaction tx(db);
    if (!psychologist_exists(db, id)) {
      throw Error(Errc::UnknownPsychologist, "no psychologist with id " + std::to_string(id));
    }
    Statement st(db, "DELETE FROM psychologists WHERE id = ?");
    st.bind(1, id);
    const int rc = st.step_rc();
    if ((rc & 0xFF) == SQLITE_CONSTRAINT) {
      throw Error(Errc::PsychologistHasPatients,
                  "psychologist " + std::to_string(id) + " still has assigned patients");
    }
    if (rc != SQLITE_DONE) storage_failure(db, "delete psychologist");
    tx.commit();
  }

  Patient upsert_patient(std::string_view name, PsychologistId psychologist_id,
                         std::optional<PatientId> id) override {
    std::lock_guard write(write_mutex_);
    Lease lease(*this);
    sqlite3* db = lease.get();
    WriteTransaction tx(db);
    if (!psychologist_exists(db, psychologist_id)) {
      throw Error(Errc::UnknownPsychologist,
                  "no psychologist with id " + std::to_string(psychologist_id));
    }
    Statement st(db,
                 "INSERT INTO patients (id, name, psychologist_id) VALUES (?, ?, ?) "
                 "ON CONFLICT (id) DO UPDATE SET name = excluded.name, "
                 "psychologist_id = excluded.psychologist_id");
    if (id) {
      st.bind(1, *id);
    } else {
      st.bind_null(1);
    }
    st.bind(2, name).bind(3, psychologist_id);
    st.step();
    const PatientId row = id.value_or(sqlite3_last_insert_rowid(db));
    tx.commit();
    return Patient{row, std::string(name), psychologist_id};
  }

  std::optional<Patient> find_patient(PatientId id) const override {
    Lease lease(*this);
    Statement st(lease.get(), "SELECT id, name, psychologist_id FROM patients WHERE id = ?");
    st.bind(1, id);
    if (!st.step()) return std::nullopt;
    return Patient{st.int64_at(0), st.text_at(1), st.int64_at(2)};
  }

  std::vector<Patient> list_patients(std::optional<PsychologistId> psychologist_id) const override {
    Lease lease(*this);
    std::vector<Patient> out;
    if (psychologist_id) {
      Statement st(lease.get(),
                   "SELECT id, name, psychologist_id FROM patients WHERE psychologist_id = ? ORDER BY id");
      st.bind(1, *psychologist_id);
      while (st.step()) out.push_back({st.int64_at(0), st.text_at(1), st.int64_at(2)});
    } else {
      Statement st(lease.get(), "SELECT id, name, psychologist_id FROM patients ORDER BY id");
      while (st.step()) out.push_back({st.int64_at(0), st.text_at(1), st.int64_at(2)});
    }
    return out;
  }

  ConversationTurn append_turn(PatientId patient_id, const NewTurn& turn) override {
    std::lock_guard write(write_mutex_);
    Lease lease(*this);
    sqlite3* db = lease.get();
    WriteTransaction tx(db);
    if (!patient_exists(db, patient_id)) {
      throw Error(Errc::UnknownPatient, "no patient with id " + std::to_string(patient_id));
    }
    ConversationTurn out;
    out.patient_id = patient_id;
    out.user_text = turn.user_text;
    out.reply_text = turn.reply_text;
    out.audio_emotion = turn.audio_emotion;
    out.text_sentiment = turn.text_sentiment;
    out.final_emotion = turn.final_emotion;
    out.created_at = clock_();
    {
      Statement st(db,
                   "SELECT turn_index, created_at FROM conversations WHERE patient_id = ? "
                   "ORDER BY turn_index DESC LIMIT 1");
      st.bind(1, patient_id);
      if (st.step()) {
        out.turn_index = st.int64_at(0) + 1;
        out.created_at = std::max(out.created_at, timestamp_column(st.text_at(1)));
      }
    }
    Statement st(db,
                 "INSERT INTO conversations (patient_id, turn_index, user_text, reply_text, "
                 "audio_emotion, text_sentiment, final_emotion, created_at) "
                 "VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
    st.bind(1, patient_id)
        .bind(2, out.turn_index)
        .bind(3, out.user_text)
        .bind(4, out.reply_text)
        .bind(5, to_string(out.audio_emotion))
        .bind(6, to_string(out.text_sentiment))
        .bind(7, to_string(out.final_emotion))
        .bind(8, format_iso8601(out.created_at));
    st.step();
    out.id = sqlite3_last_insert_rowid(db);
    tx.commit();
    return out;
  }

  std::vector<ConversationTurn> get_history(PatientId patient_id,
                                            std::optional<std::size_t> limit) const override {
    Lease lease(*this);
    sqlite3* db = lease.get();
    ReadTransaction snapshot(db);
    if (!patient_exists(db, patient_id)) {
      throw Error(Errc::UnknownPatient, "no patient with id " + std::to_string(patient_id));
    }
    std::string sql = "SELECT " + std::string(kTurnColumns) + " FROM conversations WHERE patient_id = ?";
    if (limit) {
      sql = "SELECT * FROM (" + sql + " ORDER BY turn_index DESC LIMIT ?) ORDER BY turn_index ASC";
    } else {
      sql += " ORDER BY turn_index ASC";
    }
    Statement st(db, sql);
    st.bind(1, patient_id);
    if (limit) st.bind(2, static_cast<std::int64_t>(*limit));
    std::vector<ConversationTurn> out;
    while (st.step()) out.push_back(turn_from_row(st));
    return out;
  }

 private:
  class Lease {
   public:
    explicit Lease(const SqliteStore& store) : store_(store) {
      std::unique_lock lock(store_.pool_mutex_);
      store_.pool_cv_.wait(lock, [&] { return !store_.idle_.empty(); });
      conn_ = std::move(store_.idle_.back());
      store_.idle_.pop_back();
    }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    ~Lease() {
      {
        std::lock_guard lock(store_.pool_mutex_);
        store_.idle_.push_back(std::move(conn_));
      }
      store_.pool_cv_.notify_one();
    }
    sqlite3* get() const { return conn_.get(); }

   private:
    const SqliteStore& store_;
    Connection conn_;
  };

  static int version_on(sqlite3* db) {
    Statement st(db, "SELECT COALESCE(MAX(version), 0) FROM schema_migrations");
    return st.step() ? static_cast<int>(st.int64_at(0)) : 0;
  }

  Clock clock_;
  std::mutex write_mutex_;
  mutable std::mutex pool_mutex_;
  mutable std::condition_variable pool_cv_;
  mutable std::vector<Connection> idle_;
};

}  // namespace

bool is_valid_email(std::string_view email) {
  const auto at = email.rfind('@');
  if (at == std::string_view::npos || at == 0 || at > 64 || email.size() > 254) return false;
  const auto local = email.substr(0, at);
  const auto domain = email.substr(at + 1);

  static constexpr std::string_view kAtext = "!#$%&'*+/=?^_`{|}~-";
  auto alnum = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
  };
  if (local.front() == '.' || local.back() == '.' || local.find("..") != std::string_view::npos) {
    return false;
  }
  for (char c : local) {
    if (!alnum(c) && c != '.' && kAtext.find(c) == std::string_view::npos) return false;
  }

  if (domain.empty() || domain.size() > 253) return false;
  std::size_t labels = 0;
  std::size_t start = 0;
  while (start <= domain.size()) {
    const auto dot = domain.find('.', start);
    const auto label = domain.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (label.empty() || label.size() > 63 || label.front() == '-' || label.back() == '-') return false;
    for (char c : label) {
      if (!alnum(c) && c != '-') return false;
    }
    ++labels;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels >= 2;
}

std::unique_ptr<Store> open_sqlite_store(const std::string& path, SqliteOptions options) {
  return std::make_unique<SqliteStore>(path, std::move(options));
}

std::unique_ptr<Store> open_store_from_env(SqliteOptions options) {
  return open_sqlite_store(env_or("ET_DB_PATH", "emotalk.db"), std::move(options));
}

bool seed_demo(Store& store) {
  if (!store.list_psychologists().empty()) return false;
  const auto ana = store.upsert_psychologist("Dra. Ana Souza", "ana.souza@clinica.example");
  const auto joao = store.upsert_patient("João Pereira", ana.id);
  const auto maria = store.upsert_patient("Maria Lima", ana.id);

  using E = EmotionLabel;
  using S = SentimentLabel;
  const struct {
    PatientId patient;
    NewTurn turn;
  } turns[] = {
      {joao.id, {"Hoje acordei muito triste e sem vontade de sair de casa.",
                 "Sinto muito que o dia tenha começado assim. Quer me contar o que passou pela sua cabeça ao acordar?",
                 E::sad, S::sad, E::sad}},
      {joao.id, {"Fiquei irritado no trabalho porque ninguém me ouviu.",
                 "É frustrante não ser ouvido. Respirar fundo por alguns instantes pode ajudar a baixar a tensão.",
                 E::angry, S::sad, E::angry}},
      {joao.id, {"Consegui conversar com meu irmão e me senti melhor.",
                 "Que bom que essa conversa trouxe alívio. Conversar com pessoas queridas é um ótimo recurso.",
                 E::unknown, S::happy, E::happy}},
      {maria.id, {"Estou ansiosa com a prova de amanhã.",
                  "A ansiedade antes de uma prova é comum. Que tal organizar um pequeno plano de estudo e pausas?",
                  E::unknown, S::sad, E::sad}},
      {maria.id, {"Fiz a prova e acho que fui bem.",
                  "Parabéns pelo esforço! Reconheça o quanto você se dedicou.",
                  E::happy, S::happy, E::happy}},
      {maria.id, {"Hoje foi um dia normal.",
                  "Obrigado por compartilhar. Dias tranquilos também são importantes.",
                  E::neutral, S::neutral, E::neutral}},
  };
  for (const auto& t : turns) store.append_turn(t.patient, t.turn);
  return true;
}

}  // namespace emotalk::db
