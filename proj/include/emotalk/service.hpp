#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/emotion.hpp"
#include "emotalk/error.hpp"
#include "emotalk/persistence.hpp"
#include "emotalk/reporting.hpp"
#include "emotalk/responder.hpp"
#include "emotalk/sentiment.hpp"
#include "emotalk/transcription.hpp"

namespace httplib {
class Server;
}

namespace emotalk::service {

struct Backends {
  std::shared_ptr<const asr::TranscriptionBackend> asr;
  std::shared_ptr<const emotion::EmotionBackend> emotion;
  std::shared_ptr<const sentiment::SentimentBackend> sentiment;
  std::shared_ptr<const responder::ChatBackend> chat;
};

/// ET_ASR_*, ET_EMOTION_*, ET_SENTIMENT_* and ET_LLM_* selections.
Backends backends_from_env(const dsp::DspConfig& dsp);

inline constexpr std::size_t kMaxAudioBytes = 10u << 20;
inline constexpr double kMaxAudioSeconds = 120.0;

struct PipelineConfig {
  dsp::DspConfig dsp;
  double unknown_threshold = emotion::kDefaultUnknownThreshold;
  responder::ResponderConfig responder;
  std::size_t max_audio_bytes = kMaxAudioBytes;
  double max_audio_seconds = kMaxAudioSeconds;
  /// Stored as user_text when the transcriber hears no speech.
  std::string silence_text = "(mensagem sem fala)";
};

struct MessageResponse {
  ConversationTurn turn;  // already persisted
  asr::Transcript transcript;
  emotion::EmotionScores audio;
  sentiment::EmotionalState state;
  responder::GeneratedReply reply;
  bool emotion_degraded = false;
  bool sentiment_degraded = false;
};

class Pipeline {
 public:
  Pipeline(db::Store& store, Backends backends, responder::PromptTemplate prompt,
           responder::Fallbacks fallbacks, PipelineConfig cfg = {});

  /// Decode, resample, then emotion (Mel branch) and transcription plus
  /// sentiment in parallel, fuse, prompt over the stored history, reply,
  /// persist. Emotion and sentiment failures degrade to unknown/neutral;
  /// a transcription failure throws TranscriptionUnavailable and nothing
  /// is written. `fmt` is sniffed from the bytes when absent.
  MessageResponse handle_message(PatientId patient_id, std::span<const std::uint8_t> audio,
                                 std::optional<dsp::WavFormat> fmt = std::nullopt) const;

  db::Store& store() const { return store_; }
  const Backends& backends() const { return backends_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  db::Store& store_;
  Backends backends_;
  responder::PromptTemplate prompt_;
  responder::Fallbacks fallbacks_;
  PipelineConfig cfg_;
};

/// HTTP status for an error code.
int http_status(Errc code);

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string auth_token;  // empty disables the check
  std::string cors_origin;  // empty sends no CORS headers
  reporting::SmtpConfig smtp;
  std::shared_ptr<const reporting::ReportStrings> report_strings;
  std::size_t worker_threads = 16;
};

/// ET_PORT, ET_AUTH_TOKEN, ET_CORS_ORIGIN, ET_SMTP_* and ET_REPORT_STRINGS.
ServerConfig server_config_from_env();

/// JSON API under /api/v1 plus an unauthenticated /healthz.
class ApiServer {
 public:
  ApiServer(const Pipeline& pipeline, ServerConfig cfg, Clock clock = now_utc);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  int bind();
  void routes();

  const Pipeline& pipeline_;
  ServerConfig cfg_;
  Clock clock_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace emotalk::service
