#include <spdlog/spdlog.h>

#include <cstdio>
#include <future>

#include "emotalk/error.hpp"
#include "emotalk/service.hpp"

namespace emotalk::service {

Backends backends_from_env(const dsp::DspConfig& dsp) {
  Backends b;
  b.asr = asr::make_transcription_backend_from_env();
  b.emotion = emotion::make_emotion_backend_from_env(dsp);
  b.sentiment = sentiment::make_sentiment_backend_from_env();
  b.chat = responder::make_chat_backend_from_env();
  return b;
}

Pipeline::Pipeline(db::Store& store, Backends backends, responder::PromptTemplate prompt,
                   responder::Fallbacks fallbacks, PipelineConfig cfg)
    : store_(store),
      backends_(std::move(backends)),
      prompt_(std::move(prompt)),
      fallbacks_(std::move(fallbacks)),
      cfg_(std::move(cfg)) {
  if (!backends_.asr || !backends_.emotion || !backends_.sentiment || !backends_.chat) {
    throw Error(Errc::InvalidConfig, "pipeline needs all four backends");
  }
  cfg_.dsp.validate();
}

MessageResponse Pipeline::handle_message(PatientId patient_id, std::span<const std::uint8_t> audio,
                                         std::optional<dsp::WavFormat> fmt) const {
  if (audio.size() > cfg_.max_audio_bytes) {
    throw Error(Errc::PayloadTooLarge, "audio is " + std::to_string(audio.size()) + " bytes, limit " +
                                           std::to_string(cfg_.max_audio_bytes));
  }
  if (audio.empty()) throw Error(Errc::EmptyAudio, "no audio bytes");
  if (!store_.find_patient(patient_id)) {
    throw Error(Errc::UnknownPatient, "no patient with id " + std::to_string(patient_id));
  }

  const auto format = fmt ? *fmt : dsp::sniff_wav_format(audio).value_or(dsp::WavFormat::pcm16);
  const auto clip = dsp::decode_audio(audio, format, "patient-" + std::to_string(patient_id));
  if (clip.duration_s() > cfg_.max_audio_seconds) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f s exceeds %.0f s", clip.duration_s(), cfg_.max_audio_seconds);
    throw Error(Errc::AudioTooLong, buf);
  }
  const auto resampled = dsp::resample(clip, cfg_.dsp.target_rate_hz);

  MessageResponse out;
  auto branch_a = std::async(std::launch::async, [&] {
    const auto mel = dsp::mel_spectrogram(dsp::pad_or_trim(resampled, cfg_.dsp.fixed_len_samples), cfg_.dsp);
    return emotion::detect_emotion(mel, *backends_.emotion, cfg_.unknown_threshold);
  });

  SentimentLabel text_sentiment = SentimentLabel::neutral;
  try {
    out.transcript = asr::transcribe(resampled, *backends_.asr);
  } catch (const std::exception& e) {
    throw Error(Errc::TranscriptionUnavailable, std::string("transcription failed: ") + e.what());
  }
  try {
    text_sentiment = sentiment::classify_sentiment(out.transcript.text, *backends_.sentiment);
  } catch (const std::exception& e) {
    spdlog::warn("sentiment backend failed, using neutral: {}", e.what());
    out.sentiment_degraded = true;
  }

  try {
    out.audio = branch_a.get();
  } catch (const std::exception& e) {
    spdlog::warn("emotion backend failed, abstaining: {}", e.what());
    out.audio.probs.fill(0.25);
    out.audio.decided = EmotionLabel::unknown;
    out.audio.backend_id = backends_.emotion->id();
    out.emotion_degraded = true;
  }

  out.state = sentiment::fuse_states(out.audio, text_sentiment);
  const bool silent = out.transcript.silence || out.transcript.text.find_first_not_of(" \t\r\n") == std::string::npos;
  const std::string user_text = silent ? cfg_.silence_text : out.transcript.text;

  const auto history = store_.get_history(patient_id, cfg_.responder.history_turns);
  const auto bundle = responder::build_prompt(history, out.state, user_text, prompt_, cfg_.responder);
  out.reply = responder::generate_response(bundle, *backends_.chat, fallbacks_, cfg_.responder);

  db::NewTurn turn;
  turn.user_text = user_text;
  turn.reply_text = out.reply.text;
  turn.audio_emotion = out.audio.decided;
  turn.text_sentiment = text_sentiment;
  turn.final_emotion = out.state.final;
  out.turn = store_.append_turn(patient_id, turn);
  return out;
}

}  // namespace emotalk::service
