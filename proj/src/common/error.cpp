#include "emotalk/error.hpp"

namespace emotalk {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedContainer: return "MalformedContainer";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::EmptyAudio: return "EmptyAudio";
    case Errc::InvalidRate: return "InvalidRate";
    case Errc::TooShort: return "TooShort";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::BackendRejected: return "BackendRejected";
    case Errc::Timeout: return "Timeout";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NotADistribution: return "NotADistribution";
    case Errc::EmptyMessage: return "EmptyMessage";
    case Errc::InvalidEmail: return "InvalidEmail";
    case Errc::UnknownPsychologist: return "UnknownPsychologist";
    case Errc::UnknownPatient: return "UnknownPatient";
    case Errc::PsychologistHasPatients: return "PsychologistHasPatients";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::SmtpConnectFailed: return "SmtpConnectFailed";
    case Errc::SmtpRejected: return "SmtpRejected";
    case Errc::TooFewItems: return "TooFewItems";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::TranscriptionUnavailable: return "TranscriptionUnavailable";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::AudioTooLong: return "AudioTooLong";
    case Errc::InvalidRequest: return "InvalidRequest";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message, int detail)
    : std::runtime_error(message), code_(code), detail_(detail) {}

}  // namespace emotalk
