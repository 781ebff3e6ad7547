#include "emotalk/transcription.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"

namespace emotalk::asr {

namespace {

constexpr int kUploadRateHz = 16000;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string clip_fingerprint(const dsp::AudioClip& clip) {
  const auto bytes = dsp::encode_wav_pcm16(clip);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool is_silent(const dsp::AudioClip& clip) {
  for (double s : clip.samples) {
    if (std::lround(s * 32768.0) != 0) return false;
  }
  return true;
}

StubTranscriptionBackend::StubTranscriptionBackend(std::map<std::string, std::string> fixtures)
    : fixtures_(std::move(fixtures)) {}

StubTranscriptionBackend StubTranscriptionBackend::from_file(const std::filesystem::path& path) {
  const auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
  if (!doc.is_object()) {
    throw Error(Errc::InvalidConfig, "ASR fixture file must hold a JSON object: " + path.string());
  }
  std::map<std::string, std::string> fixtures;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) {
      throw Error(Errc::InvalidConfig, "ASR fixture '" + key + "' is not a string");
    }
    fixtures.emplace(key, value.get<std::string>());
  }
  return StubTranscriptionBackend(std::move(fixtures));
}

Transcript StubTranscriptionBackend::transcribe(const dsp::AudioClip& clip) const {
  Transcript t;
  t.backend_id = id();
  if (is_silent(clip)) {
    t.silence = true;
    return t;
  }
  const std::string key = clip_fingerprint(clip);
  auto it = fixtures_.find(key);
  if (it == fixtures_.end()) it = fixtures_.find("*");
  if (it == fixtures_.end()) {
    throw Error(Errc::BackendRejected, "no ASR fixture for clip " + key, 404);
  }
  t.text = it->second;
  return t;
}

HttpTranscriptionBackend::HttpTranscriptionBackend(Config cfg)
    : cfg_(std::move(cfg)),
      client_(cfg_.api_base + "/audio/transcriptions", cfg_.api_key, cfg_.retry) {}

Transcript HttpTranscriptionBackend::transcribe(const dsp::AudioClip& clip) const {
  const auto wav = dsp::encode_wav_pcm16(dsp::resample(clip, kUploadRateHz));
  const std::vector<MultipartField> fields{
      {"file", std::string(wav.begin(), wav.end()), "audio.wav", "audio/wav"},
      {"language", cfg_.language, "", ""},
      {"model", cfg_.model, "", ""},
      {"response_format", "json", "", ""},
  };
  const HttpResponse res = client_.post_multipart(fields);
  const auto doc = nlohmann::json::parse(res.body, nullptr, false);
  if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
    throw Error(Errc::BackendRejected, "transcription reply lacks a \"text\" string: " + res.body,
                res.status);
  }
  Transcript t;
  t.text = trim(doc["text"].get<std::string>());
  t.language = cfg_.language;
  t.backend_id = id();
  t.silence = t.text.empty();
  t.retries = res.retries;
  return t;
}

BackendStatus HttpTranscriptionBackend::status() const {
  return client_.reachable(std::chrono::milliseconds{1000}) ? BackendStatus::up
                                                            : BackendStatus::down;
}

Transcript transcribe(const dsp::AudioClip& clip, const TranscriptionBackend& backend) {
  if (clip.samples.empty()) throw Error(Errc::EmptyAudio, "cannot transcribe an empty clip");
  const auto start = std::chrono::steady_clock::now();
  Transcript t = backend.transcribe(clip);
  t.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return t;
}

std::unique_ptr<TranscriptionBackend> make_transcription_backend_from_env() {
  if (env_or("ET_ASR_BACKEND", "http") == "stub") {
    const auto path = env("ET_ASR_FIXTURES");
    if (!path) throw Error(Errc::InvalidConfig, "ET_ASR_BACKEND=stub requires ET_ASR_FIXTURES");
    return std::make_unique<StubTranscriptionBackend>(StubTranscriptionBackend::from_file(*path));
  }
  HttpTranscriptionBackend::Config cfg;
  cfg.api_base = env_or("ET_ASR_API_BASE", "https://api.openai.com/v1");
  cfg.api_key = env_or("ET_ASR_API_KEY", "");
  cfg.model = env_or("ET_ASR_MODEL", cfg.model);
  cfg.retry.timeout = std::chrono::milliseconds{env_int_or("ET_ASR_TIMEOUT_MS", 30000)};
  return std::make_unique<HttpTranscriptionBackend>(std::move(cfg));
}

}  // namespace emotalk::asr
