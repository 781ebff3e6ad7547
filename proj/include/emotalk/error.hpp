#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emotalk {

enum class Errc {
  // audio_dsp
  MalformedContainer,
  UnsupportedFormat,
  EmptyAudio,
  InvalidRate,
  TooShort,
  InvalidConfig,
  // backends
  BackendUnavailable,
  BackendRejected,
  Timeout,
  // emotion
  ShapeMismatch,
  NotADistribution,
  // responder
  EmptyMessage,
  // persistence
  InvalidEmail,
  UnknownPsychologist,
  UnknownPatient,
  PsychologistHasPatients,
  StorageFailure,
  // reporting
  SmtpConnectFailed,
  SmtpRejected,
  // evaluation
  TooFewItems,
  LengthMismatch,
  InvalidLabel,
  EmptyInput,
  // service
  TranscriptionUnavailable,
  PayloadTooLarge,
  AudioTooLong,
  InvalidRequest,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carried across every module boundary. `detail` holds a
/// numeric side channel such as an HTTP status or an SMTP reply code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, int detail = 0);

  Errc code() const noexcept { return code_; }
  int detail() const noexcept { return detail_; }

 private:
  Errc code_;
  int detail_;
};

}  // namespace emotalk
