#pragma once

// Fully stubbed pipeline: fixture clip A transcribes to "estou muito
// triste", the baseline emotion model is biased hard towards sad, and the
// chat stub answers "OK:{emotion}".

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"
#include "emotalk/service.hpp"

namespace emotalk::test {

inline constexpr const char* kClipAText = "estou muito triste";

/// One second of a 220 Hz tone at 16 kHz, PCM16.
inline dsp::AudioClip clip_a() {
  dsp::AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.resize(16000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    clip.samples[i] = 0.3 * std::sin(2.0 * std::numbers::pi * 220.0 * static_cast<double>(i) / 16000.0);
  }
  return clip;
}

inline std::string wav_bytes(const dsp::AudioClip& clip) {
  const auto bytes = dsp::encode_wav_pcm16(clip);
  return std::string(bytes.begin(), bytes.end());
}

inline std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Fingerprint of what the pipeline hands the transcriber for `wav`.
inline std::string pipeline_fingerprint(const std::string& wav) {
  return asr::clip_fingerprint(dsp::resample(dsp::decode_audio(as_bytes(wav), dsp::WavFormat::pcm16), 16000));
}

inline std::shared_ptr<emotion::BaselineEmotionBackend> sad_biased_emotion(const dsp::DspConfig& cfg = {}) {
  emotion::BaselineEmotionBackend::Weights w;
  w.w = Matrix<double>(4, 2 * static_cast<std::size_t>(cfg.n_mels), 0.0);
  w.b = {0.0, 0.0, 0.0, 10.0};
  return std::make_shared<emotion::BaselineEmotionBackend>(std::move(w));
}

inline std::shared_ptr<sentiment::LexiconSentimentBackend> shipped_lexicon() {
  return std::make_shared<sentiment::LexiconSentimentBackend>(sentiment::LexiconSentimentBackend::from_files(
      data_dir() / "lexicon" / "positive.txt", data_dir() / "lexicon" / "negative.txt"));
}

inline service::Backends stub_backends() {
  service::Backends b;
  b.asr = std::make_shared<asr::StubTranscriptionBackend>(
      std::map<std::string, std::string>{{pipeline_fingerprint(wav_bytes(clip_a())), kClipAText}});
  b.emotion = sad_biased_emotion();
  b.sentiment = shipped_lexicon();
  b.chat = std::make_shared<responder::StubChatBackend>("OK:{emotion}");
  return b;
}

inline responder::PromptTemplate shipped_prompt() {
  return responder::PromptTemplate::from_file(data_dir() / "templates" / "system_prompt.txt");
}

inline responder::Fallbacks shipped_fallbacks() {
  return responder::Fallbacks::from_file(data_dir() / "templates" / "fallbacks.json");
}

struct FailingAsr final : asr::TranscriptionBackend {
  asr::Transcript transcribe(const dsp::AudioClip&) const override {
    throw Error(Errc::BackendUnavailable, "asr down");
  }
  std::string id() const override { return "failing"; }
  BackendStatus status() const override { return BackendStatus::down; }
};

struct FailingEmotion final : emotion::EmotionBackend {
  emotion::Probabilities predict(const dsp::MelSpectrogram&) const override {
    throw Error(Errc::BackendUnavailable, "emotion down");
  }
  std::string id() const override { return "failing"; }
  BackendStatus status() const override { return BackendStatus::down; }
};

struct FailingSentiment final : sentiment::SentimentBackend {
  SentimentLabel classify(std::string_view) const override { throw std::runtime_error("sentiment down"); }
  std::string id() const override { return "failing"; }
  BackendStatus status() const override { return BackendStatus::down; }
};

struct FailingChat final : responder::ChatBackend {
  responder::ChatCompletion complete(const responder::ChatRequest&) const override {
    throw Error(Errc::BackendUnavailable, "chat down");
  }
  std::string id() const override { return "failing"; }
  BackendStatus status() const override { return BackendStatus::down; }
};

/// Wraps a transcriber and counts calls.
struct CountingAsr final : asr::TranscriptionBackend {
  explicit CountingAsr(std::shared_ptr<const asr::TranscriptionBackend> inner) : inner(std::move(inner)) {}
  asr::Transcript transcribe(const dsp::AudioClip& clip) const override {
    ++calls;
    return inner->transcribe(clip);
  }
  std::string id() const override { return inner->id(); }
  BackendStatus status() const override { return inner->status(); }
  std::shared_ptr<const asr::TranscriptionBackend> inner;
  mutable std::atomic<int> calls{0};
};

}  // namespace emotalk::test
