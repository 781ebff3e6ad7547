#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emotalk/domain.hpp"
#include "emotalk/persistence.hpp"
#include "emotalk/responder.hpp"
#include "emotalk/time.hpp"

namespace emotalk::reporting {

struct SummaryWindow {
  std::int64_t first_turn_index = 0;
  std::int64_t last_turn_index = 0;
  Timestamp first_at;
  Timestamp last_at;

  friend bool operator==(const SummaryWindow&, const SummaryWindow&) = default;
};

/// Counts and one-decimal percentages of final_emotion, indexed like
/// kAllEmotions. Percentages use largest-remainder rounding so that they
/// total exactly 100.0 whenever there is at least one turn.
struct EmotionSummary {
  std::array<int, 5> counts{};
  std::array<double, 5> percentages{};
  std::optional<SummaryWindow> window;  // empty when there are no turns

  int total() const;
  int count(EmotionLabel l) const { return counts[index_of(l)]; }
  double percent(EmotionLabel l) const { return percentages[index_of(l)]; }
};

EmotionSummary summarize_emotions(std::span<const ConversationTurn> turns);

/// Tenths of a percent per bucket, largest remainder first; ties go to the
/// lower index. Sums to 1000 unless every count is zero.
std::vector<int> largest_remainder_tenths(std::span<const int> counts);

/// Localizable copy for reports and email, loaded from a JSON object of
/// strings plus "emotions" and "sentiments" label maps. Placeholders are
/// written {name}.
class ReportStrings {
 public:
  static ReportStrings from_json(const std::string& text);
  static ReportStrings from_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  std::string format(const std::string& key, const std::map<std::string, std::string>& values) const;
  const std::string& emotion(EmotionLabel l) const { return emotions_.at(l); }
  const std::string& sentiment(SentimentLabel l) const { return sentiments_.at(l); }

 private:
  std::map<std::string, std::string> text_;
  std::map<EmotionLabel, std::string> emotions_;
  std::map<SentimentLabel, std::string> sentiments_;
};

/// ET_REPORT_STRINGS, defaulting to the shipped Portuguese file.
ReportStrings report_strings_from_env();

struct Report {
  Patient patient;
  Psychologist psychologist;
  EmotionSummary summary;
  std::vector<ConversationTurn> turns;
  std::vector<std::string> key_points;
  Timestamp generated_at;
  bool key_points_summarized = false;  // produced by the chat summarizer
};

/// First turn, last turn, and the latest turn carrying the most frequent
/// negative emotion (angry or sad; angry wins ties). Empty for no turns.
std::vector<std::string> extract_key_points(std::span<const ConversationTurn> turns,
                                            const EmotionSummary& summary,
                                            const ReportStrings& strings);

struct ReportOptions {
  /// When set, key points come from this backend (one per reply line);
  /// any failure or an empty reply falls back to extract_key_points.
  const responder::ChatBackend* summarizer = nullptr;
  responder::ResponderConfig chat;
};

Report build_report(const Patient& patient, const Psychologist& psychologist,
                    std::vector<ConversationTurn> turns, const ReportStrings& strings,
                    Timestamp generated_at, const ReportOptions& options = {});

/// Loads the patient, their psychologist and the complete history.
/// Throws UnknownPatient.
Report build_report(const db::Store& store, PatientId patient_id, const ReportStrings& strings,
                    Timestamp generated_at, const ReportOptions& options = {});

enum class Format { markdown, html };

/// Deterministic document. Every turn opens with a "### " heading built
/// from the "interaction" string, and no other line starts that way.
std::string render_report(const Report& report, Format format, const ReportStrings& strings);

struct SmtpConfig {
  std::string host = "localhost";
  int port = 25;
  std::string user;
  std::string pass;
  std::string from = "emotalk@localhost";
  std::chrono::milliseconds timeout{30000};
};

/// ET_SMTP_HOST, ET_SMTP_PORT, ET_SMTP_USER, ET_SMTP_PASS, ET_SMTP_FROM.
SmtpConfig smtp_config_from_env();

struct EmailMessage {
  std::string from;
  std::string to;
  std::string subject;
  std::string message_id;  // with angle brackets
  Timestamp date;
  std::string text_body;
  std::string html_body;
};

/// UTF-8 multipart/alternative message with base64 parts, CRLF line
/// endings and an RFC 2047 encoded subject.
std::string build_mime(const EmailMessage& message, const std::string& boundary);

EmailMessage compose_report_email(const Report& report, const ReportStrings& strings,
                                  const SmtpConfig& smtp, Timestamp now);

struct DeliveryReceipt {
  std::string message_id;
  Timestamp accepted_at;
};

/// One SMTP session per call; STARTTLS is used when the server offers it.
/// Throws InvalidEmail, SmtpConnectFailed, or SmtpRejected with the
/// server's reply code as detail.
DeliveryReceipt send_email(const EmailMessage& message, const SmtpConfig& smtp, const Clock& clock);

DeliveryReceipt send_report_email(const Report& report, const SmtpConfig& smtp,
                                  const ReportStrings& strings, const Clock& clock = now_utc);

/// Plain SMTP reachability (TCP connect).
bool smtp_reachable(const SmtpConfig& smtp, std::chrono::milliseconds timeout);

}  // namespace emotalk::reporting
