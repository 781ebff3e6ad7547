#include <cmath>
#include <numbers>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/error.hpp"
#include "fft.hpp"

namespace emotalk::dsp {

std::size_t DspConfig::frames_for(std::size_t len) const {
  const auto n = static_cast<std::size_t>(n_fft);
  if (len < n) return 0;
  return (len - n) / static_cast<std::size_t>(hop) + 1;
}

void DspConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (target_rate_hz <= 0) fail("target_rate_hz must be positive");
  if (n_fft <= 0) fail("n_fft must be positive");
  if (hop <= 0 || hop > n_fft) fail("hop must satisfy 0 < hop <= n_fft");
  if (n_mels < 2) fail("n_mels must be at least 2");
  const double fmax = effective_fmax_hz();
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax)) fail("fmin_hz must be below fmax_hz");
  if (fmax > target_rate_hz / 2.0) fail("fmax_hz exceeds the Nyquist frequency");
  if (fixed_len_samples <= static_cast<std::size_t>(n_fft))
    fail("fixed_len_samples must exceed n_fft");
}

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n));
    }
  }
  return w;
}

Spectrum stft(const AudioClip& clip, const DspConfig& cfg) {
  cfg.validate();
  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  if (clip.samples.size() < n_fft) {
    throw Error(Errc::TooShort, "clip has " + std::to_string(clip.samples.size()) +
                                    " samples, n_fft is " + std::to_string(n_fft));
  }
  const std::size_t frames = cfg.frames_for(clip.samples.size());
  const std::size_t bins = cfg.n_bins();
  const auto window = make_window(cfg.window, n_fft);
  const detail::FftPlan plan(n_fft);

  Spectrum out(bins, frames);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = clip.samples.data() + t * hop;
    for (std::size_t i = 0; i < n_fft; ++i) buf[i] = {frame[i] * window[i], 0.0};
    plan.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) out(k, t) = buf[k];
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix<double> mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const auto n_mels = static_cast<std::size_t>(cfg.n_mels);
  const std::size_t bins = cfg.n_bins();
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.effective_fmax_hz());

  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }

  Matrix<double> fb(n_mels, bins, 0.0);
  const double bin_hz = static_cast<double>(cfg.target_rate_hz) / cfg.n_fft;
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    double area = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      fb(m, k) = w;
      area += w;
    }
    if (area <= 0.0) {
      throw Error(Errc::InvalidConfig,
                  "Mel filter " + std::to_string(m) +
                      " covers no FFT bin; lower n_mels or raise n_fft");
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const DspConfig& cfg) {
  if (clip.sample_rate_hz != cfg.target_rate_hz) {
    throw Error(Errc::InvalidRate, "clip at " + std::to_string(clip.sample_rate_hz) +
                                       " Hz, expected " + std::to_string(cfg.target_rate_hz));
  }
  const Spectrum spec = stft(clip, cfg);
  const Matrix<double> fb = mel_filterbank(cfg);

  const std::size_t bins = spec.rows();
  const std::size_t frames = spec.cols();
  Matrix<double> power(bins, frames);
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t t = 0; t < frames; ++t) power(k, t) = std::norm(spec(k, t));
  }

  MelSpectrogram mel;
  mel.values = Matrix<double>(fb.rows(), frames, 0.0);
  mel.frame_rate_hz = static_cast<double>(cfg.target_rate_hz) / cfg.hop;
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    const auto weights = fb.row(m);
    auto out = mel.values.row(m);
    for (std::size_t k = 0; k < bins; ++k) {
      const double w = weights[k];
      if (w == 0.0) continue;
      const auto p = power.row(k);
      for (std::size_t t = 0; t < frames; ++t) out[t] += w * p[t];
    }
    for (auto& v : out) v = std::log(v + kLogFloor);
  }
  return mel;
}

AudioClip pad_or_trim(const AudioClip& clip, std::size_t n) {
  AudioClip out = clip;
  out.samples.resize(n, 0.0);
  return out;
}

MelSpectrogram mel_from_clip(const AudioClip& clip, const DspConfig& cfg) {
  return mel_spectrogram(pad_or_trim(resample(clip, cfg.target_rate_hz), cfg.fixed_len_samples),
                         cfg);
}

}  // namespace emotalk::dsp
