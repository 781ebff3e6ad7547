#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/error.hpp"

namespace emotalk::dsp {

namespace {

constexpr double kKaiserBeta = 8.0;
constexpr int kZeroCrossings = 16;  // per side: 32 taps at the lower rate
constexpr int kTableResolution = 512;
constexpr double kRolloff = 0.90;   // cutoff as a fraction of the lower Nyquist

/// Windowed sinc sampled on [0, kZeroCrossings] in zero-crossing units.
const std::vector<double>& kernel_table() {
  static const std::vector<double> table = [] {
    const std::size_t n = kZeroCrossings * kTableResolution + 2;
    std::vector<double> t(n, 0.0);
    const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = static_cast<double>(i) / kTableResolution;
      if (z >= kZeroCrossings) break;
      const double u = z / kZeroCrossings;
      const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - u * u)) / norm;
      const double sinc = i == 0 ? 1.0 : std::sin(std::numbers::pi * z) / (std::numbers::pi * z);
      t[i] = sinc * window;
    }
    return t;
  }();
  return table;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate_hz) {
  if (target_rate_hz <= 0) {
    throw Error(Errc::InvalidRate, "target rate must be positive, got " +
                                       std::to_string(target_rate_hz));
  }
  if (clip.sample_rate_hz <= 0) {
    throw Error(Errc::InvalidRate, "source rate must be positive");
  }
  if (clip.sample_rate_hz == target_rate_hz) return clip;

  const auto src = static_cast<std::int64_t>(clip.sample_rate_hz);
  const auto dst = static_cast<std::int64_t>(target_rate_hz);
  const auto in_len = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t out_len = std::max<std::int64_t>(in_len > 0 ? 1 : 0, (in_len * dst + src / 2) / src);

  // Filter cutoff in cycles per input sample relative to the input Nyquist.
  const double cutoff = kRolloff * std::min(1.0, static_cast<double>(dst) / static_cast<double>(src));
  const double half_width = kZeroCrossings / cutoff;  // in input samples
  const auto& table = kernel_table();

  AudioClip out;
  out.sample_rate_hz = target_rate_hz;
  out.source_id = clip.source_id;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n * src) / static_cast<double>(dst);
    const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - half_width)));
    const auto last = std::min<std::int64_t>(in_len - 1, static_cast<std::int64_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::int64_t k = first; k <= last; ++k) {
      const double pos = std::abs(t - static_cast<double>(k)) * cutoff * kTableResolution;
      const auto idx = static_cast<std::size_t>(pos);
      if (idx + 1 >= table.size()) continue;
      const double frac = pos - static_cast<double>(idx);
      const double h = table[idx] + frac * (table[idx + 1] - table[idx]);
      acc += clip.samples[static_cast<std::size_t>(k)] * h;
    }
    out.samples[static_cast<std::size_t>(n)] = acc * cutoff;
  }
  return out;
}

}  // namespace emotalk::dsp
