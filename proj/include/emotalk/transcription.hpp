#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/backend_status.hpp"
#include "emotalk/http_client.hpp"

namespace emotalk::asr {

struct Transcript {
  std::string text;
  std::string language = "pt";
  std::string backend_id;
  std::int64_t latency_ms = 0;
  bool silence = false;  // backend reported no speech; text is empty
  int retries = 0;
};

class TranscriptionBackend {
 public:
  virtual ~TranscriptionBackend() = default;
  virtual Transcript transcribe(const dsp::AudioClip& clip) const = 0;
  virtual std::string id() const = 0;
  virtual BackendStatus status() const = 0;
};

/// FNV-1a 64 of the clip's PCM16 WAV encoding, as 16 lower-case hex digits.
/// Keys the stub backend's fixture map.
std::string clip_fingerprint(const dsp::AudioClip& clip);

/// True when every sample quantizes to zero at 16-bit resolution.
bool is_silent(const dsp::AudioClip& clip);

/// Deterministic lookup table keyed by clip_fingerprint. A "*" entry, when
/// present, answers any clip without its own fixture.
class StubTranscriptionBackend final : public TranscriptionBackend {
 public:
  explicit StubTranscriptionBackend(std::map<std::string, std::string> fixtures);
  /// JSON object {fingerprint: text}.
  static StubTranscriptionBackend from_file(const std::filesystem::path& path);

  Transcript transcribe(const dsp::AudioClip& clip) const override;
  std::string id() const override { return "stub"; }
  BackendStatus status() const override { return BackendStatus::stub; }

 private:
  std::map<std::string, std::string> fixtures_;
};

/// Multipart upload of a 16 kHz PCM16 WAV ("file") plus `language` and
/// `model` form fields to {api_base}/audio/transcriptions; expects
/// {"text": ...} back.
class HttpTranscriptionBackend final : public TranscriptionBackend {
 public:
  struct Config {
    std::string api_base;
    std::string api_key;
    std::string model = "whisper-1";
    std::string language = "pt";
    RetryPolicy retry;
  };

  explicit HttpTranscriptionBackend(Config cfg);

  Transcript transcribe(const dsp::AudioClip& clip) const override;
  std::string id() const override { return "http:" + cfg_.model; }
  BackendStatus status() const override;

 private:
  Config cfg_;
  HttpClient client_;
};

/// Calls the backend and stamps latency. Throws EmptyAudio for an empty
/// clip; backend errors propagate.
Transcript transcribe(const dsp::AudioClip& clip, const TranscriptionBackend& backend);

/// ET_ASR_BACKEND=stub reads ET_ASR_FIXTURES; otherwise ET_ASR_API_BASE,
/// ET_ASR_API_KEY, ET_ASR_TIMEOUT_MS and ET_ASR_MODEL configure the HTTP client.
std::unique_ptr<TranscriptionBackend> make_transcription_backend_from_env();

}  // namespace emotalk::asr
