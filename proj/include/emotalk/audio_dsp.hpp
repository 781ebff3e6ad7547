#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emotalk/matrix.hpp"

namespace emotalk::dsp {

/// Decoded mono waveform. Samples lie in [-1, 1] and are finite.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 0;
  std::string source_id;

  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

enum class WavFormat { pcm16, float32 };

std::string to_string(WavFormat fmt);
std::optional<WavFormat> parse_wav_format(std::string_view name);

/// Looks at a RIFF/WAVE header and reports which sample encoding it
/// carries, or nullopt when the bytes are not a supported WAV.
std::optional<WavFormat> sniff_wav_format(std::span<const std::uint8_t> bytes);

/// Parses a RIFF/WAVE container. Multi-channel audio is averaged to mono.
/// Throws MalformedContainer, UnsupportedFormat or EmptyAudio.
AudioClip decode_audio(std::span<const std::uint8_t> bytes, WavFormat fmt,
                       std::string source_id = {});

/// Mono 16-bit PCM WAV; the inverse of decode_audio up to quantization.
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);
std::vector<std::uint8_t> encode_wav_float32(const AudioClip& clip);

/// Kaiser-windowed sinc interpolation (beta 8, 16 zero crossings per
/// side at the lower of the two rates). Same-rate input is returned as is.
AudioClip resample(const AudioClip& clip, int target_rate_hz);

/// Zero-pads at the end or keeps the head so the result has exactly n samples.
AudioClip pad_or_trim(const AudioClip& clip, std::size_t n);

enum class WindowKind { hann, rectangular };

struct DspConfig {
  int target_rate_hz = 16000;
  int n_fft = 1024;
  int hop = 256;
  WindowKind window = WindowKind::hann;
  int n_mels = 64;
  double fmin_hz = 0.0;
  std::optional<double> fmax_hz;  // Nyquist of target_rate_hz when unset
  std::size_t fixed_len_samples = 80000;

  double effective_fmax_hz() const {
    return fmax_hz.value_or(target_rate_hz / 2.0);
  }
  std::size_t n_bins() const { return static_cast<std::size_t>(n_fft / 2 + 1); }
  /// Frame count for center-off framing of `len` samples (0 if len < n_fft).
  std::size_t frames_for(std::size_t len) const;

  /// Throws InvalidConfig when an invariant is violated.
  void validate() const;
};

/// Periodic window of length n.
std::vector<double> make_window(WindowKind kind, std::size_t n);

/// Complex spectrum, rows = non-negative frequency bins, cols = frames.
using Spectrum = Matrix<std::complex<double>>;

/// Frame t is the DFT of window * samples[t*hop, t*hop + n_fft).
/// Throws TooShort when the clip holds fewer than n_fft samples.
Spectrum stft(const AudioClip& clip, const DspConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters on the 2595*log10(1 + f/700) scale, shape
/// [n_mels x n_bins], unnormalized (peak weight 1 at each center).
Matrix<double> mel_filterbank(const DspConfig& cfg);

inline constexpr double kLogFloor = 1e-10;

struct MelSpectrogram {
  Matrix<double> values;  // log(M * |X|^2 + kLogFloor), [n_mels x n_frames]
  double frame_rate_hz = 0.0;

  std::size_t n_mels() const { return values.rows(); }
  std::size_t n_frames() const { return values.cols(); }
};

/// Expects a clip already at cfg.target_rate_hz (InvalidRate otherwise).
MelSpectrogram mel_spectrogram(const AudioClip& clip, const DspConfig& cfg);

/// resample -> pad_or_trim -> mel_spectrogram, the emotion front end.
MelSpectrogram mel_from_clip(const AudioClip& clip, const DspConfig& cfg);

}  // namespace emotalk::dsp
