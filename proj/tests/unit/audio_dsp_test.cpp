#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/error.hpp"
#include "support/dsp_oracle.hpp"

using namespace emotalk;
using namespace emotalk::dsp;

namespace {

// Hand-assembled RIFF bytes, independent of encode_wav_*.
std::vector<std::uint8_t> raw_wav(std::uint16_t format, std::uint16_t bits, std::uint16_t channels,
                                  std::uint32_t rate, const std::vector<std::uint8_t>& payload,
                                  bool with_list_chunk = false) {
  std::vector<std::uint8_t> out;
  auto u16 = [&](std::uint16_t v) {
    out.push_back(v & 0xFF);
    out.push_back(v >> 8);
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
  };
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF");
  u32(0);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(channels * bits / 8);
  u16(bits);
  if (with_list_chunk) {
    tag("LIST");
    u32(3);  // odd size, padded to 4
    out.insert(out.end(), {'a', 'b', 'c', 0});
  }
  tag("data");
  u32(static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  const auto riff = static_cast<std::uint32_t>(out.size() - 8);
  std::memcpy(out.data() + 4, &riff, 4);
  return out;
}

std::vector<std::uint8_t> pcm16_payload(const std::vector<std::int16_t>& v) {
  std::vector<std::uint8_t> out(v.size() * 2);
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

std::vector<std::uint8_t> f32_payload(const std::vector<float>& v) {
  std::vector<std::uint8_t> out(v.size() * 4);
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

AudioClip clip_of(std::vector<double> s, int rate) { return {std::move(s), rate, "t"}; }

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no emotalk::Error thrown";
  return Errc::InvalidRequest;
}

}  // namespace

TEST(DecodeAudio, Pcm16ScalesByFullScale) {
  const auto wav = raw_wav(1, 16, 1, 16000, pcm16_payload({0, 16384, -16384}));
  const auto clip = decode_audio(wav, WavFormat::pcm16);
  ASSERT_EQ(clip.samples.size(), 3u);
  EXPECT_NEAR(clip.samples[0], 0.0, 1.0 / 32768);
  EXPECT_NEAR(clip.samples[1], 0.5, 1.0 / 32768);
  EXPECT_NEAR(clip.samples[2], -0.5, 1.0 / 32768);
  EXPECT_EQ(clip.sample_rate_hz, 16000);
}

TEST(DecodeAudio, StereoIsAveragedToMono) {
  const auto wav = raw_wav(3, 32, 2, 8000, f32_payload({1.0f, 0.0f}));
  const auto clip = decode_audio(wav, WavFormat::float32);
  ASSERT_EQ(clip.samples.size(), 1u);
  EXPECT_DOUBLE_EQ(clip.samples[0], 0.5);
}

TEST(DecodeAudio, EmptyDataChunk) {
  const auto wav = raw_wav(1, 16, 1, 16000, {});
  EXPECT_EQ(code_of([&] { decode_audio(wav, WavFormat::pcm16); }), Errc::EmptyAudio);
}

TEST(DecodeAudio, SkipsPaddedForeignChunks) {
  const auto wav = raw_wav(1, 16, 1, 22050, pcm16_payload({-32768, 32767}), true);
  const auto clip = decode_audio(wav, WavFormat::pcm16);
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_EQ(clip.samples[0], -1.0);
  EXPECT_NEAR(clip.samples[1], 1.0, 1.0 / 32768);
}

TEST(DecodeAudio, RejectsOtherContainersAndEncodings) {
  const std::vector<std::uint8_t> ogg{'O', 'g', 'g', 'S', 0, 2, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(code_of([&] { decode_audio(ogg, WavFormat::pcm16); }), Errc::UnsupportedFormat);

  const auto pcm8 = raw_wav(1, 8, 1, 8000, {128, 129});
  EXPECT_EQ(code_of([&] { decode_audio(pcm8, WavFormat::pcm16); }), Errc::UnsupportedFormat);

  const auto pcm16 = raw_wav(1, 16, 1, 8000, pcm16_payload({1, 2}));
  EXPECT_EQ(code_of([&] { decode_audio(pcm16, WavFormat::float32); }), Errc::UnsupportedFormat);
}

TEST(DecodeAudio, MalformedContainers) {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  EXPECT_EQ(code_of([&] { decode_audio(junk, WavFormat::pcm16); }), Errc::MalformedContainer);

  auto truncated = raw_wav(1, 16, 1, 8000, pcm16_payload({1, 2, 3, 4}));
  truncated.resize(truncated.size() - 4);
  EXPECT_EQ(code_of([&] { decode_audio(truncated, WavFormat::pcm16); }), Errc::MalformedContainer);

  EXPECT_EQ(code_of([&] { decode_audio(std::vector<std::uint8_t>{}, WavFormat::pcm16); }),
            Errc::MalformedContainer);

  const auto nan = raw_wav(3, 32, 1, 8000, f32_payload({std::nanf("")}));
  EXPECT_EQ(code_of([&] { decode_audio(nan, WavFormat::float32); }), Errc::MalformedContainer);
}

TEST(DecodeAudio, SniffReportsEncoding) {
  EXPECT_EQ(sniff_wav_format(raw_wav(1, 16, 1, 8000, pcm16_payload({1}))), WavFormat::pcm16);
  EXPECT_EQ(sniff_wav_format(raw_wav(3, 32, 1, 8000, f32_payload({0.1f}))), WavFormat::float32);
  EXPECT_EQ(sniff_wav_format(raw_wav(1, 24, 1, 8000, {0, 0, 0})), std::nullopt);
}

TEST(EncodeWav, Pcm16RoundTripWithinOneQuantum) {
  const auto x = test::uniform_noise(1000, 7);
  const auto clip = clip_of(x, 16000);
  const auto back = decode_audio(encode_wav_pcm16(clip), WavFormat::pcm16);
  ASSERT_EQ(back.samples.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back.samples[i], x[i], 1.0 / 32768);

  const auto back32 = decode_audio(encode_wav_float32(clip), WavFormat::float32);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back32.samples[i], x[i], 1e-7);
}

TEST(Resample, SameRateIsBitwiseIdentity) {
  const auto clip = clip_of(test::uniform_noise(4000, 3), 16000);
  const auto out = resample(clip, 16000);
  EXPECT_EQ(out.samples, clip.samples);
  EXPECT_EQ(out.sample_rate_hz, 16000);
}

TEST(Resample, DownsampledSineKeepsItsPeak) {
  const auto clip = clip_of(test::sine(440.0, 44100, 44100), 44100);
  const auto out = resample(clip, 16000);
  ASSERT_EQ(out.sample_rate_hz, 16000);
  ASSERT_NEAR(static_cast<double>(out.samples.size()), 16000.0, 1.0);
  const double bin_hz = 16000.0 / static_cast<double>(out.samples.size());
  EXPECT_NEAR(test::dominant_frequency_hz(out.samples, 16000), 440.0, bin_hz);
}

TEST(Resample, UpsampledLengthFollowsRatio) {
  const auto out = resample(clip_of(test::uniform_noise(8000, 5, 0.5), 8000), 16000);
  EXPECT_NEAR(static_cast<double>(out.samples.size()), 16000.0, 1.0);
}

TEST(Resample, AmplitudeAndShapeOfPassbandSine) {
  // A 1 kHz tone at 48 kHz lands in the passband: the resampled signal should
  // match the ideal 16 kHz samples away from the edges.
  const auto out = resample(clip_of(test::sine(1000.0, 48000, 48000), 48000), 16000);
  const auto ideal = test::sine(1000.0, 16000, 16000);
  double worst = 0.0;
  for (std::size_t i = 200; i + 200 < ideal.size(); ++i) {
    worst = std::max(worst, std::abs(out.samples[i] - ideal[i]));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Resample, IsLinear) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  for (const int rate : {8000, 22050, 44100}) {
    const auto clip = clip_of(test::uniform_noise(3000, static_cast<std::uint32_t>(rate)), rate);
    const auto base = resample(clip, 16000);
    for (int trial = 0; trial < 5; ++trial) {
      const double a = amp(rng);
      auto scaled = clip;
      for (auto& v : scaled.samples) v *= a;
      const auto out = resample(scaled, 16000);
      ASSERT_EQ(out.samples.size(), base.samples.size());
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        ASSERT_NEAR(out.samples[i], a * base.samples[i], 1e-9);
      }
    }
  }
}

TEST(Resample, RejectsNonPositiveRate) {
  const auto clip = clip_of({0.1, 0.2}, 16000);
  EXPECT_EQ(code_of([&] { resample(clip, 0); }), Errc::InvalidRate);
  EXPECT_EQ(code_of([&] { resample(clip, -8000); }), Errc::InvalidRate);
}

TEST(PadOrTrim, PadsTrimsAndKeepsIdentity) {
  const auto three = clip_of({0.1, 0.2, 0.3}, 16000);
  EXPECT_EQ(pad_or_trim(three, 5).samples, (std::vector<double>{0.1, 0.2, 0.3, 0.0, 0.0}));
  const auto five = clip_of({1, 2, 3, 4, 5}, 16000);
  EXPECT_EQ(pad_or_trim(five, 3).samples, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(pad_or_trim(five, 5).samples, five.samples);
}

TEST(PadOrTrim, Idempotent) {
  std::mt19937 rng(2);
  std::uniform_int_distribution<std::size_t> len(1, 300);
  for (int i = 0; i < 100; ++i) {
    const auto clip = clip_of(test::uniform_noise(len(rng), static_cast<std::uint32_t>(i)), 8000);
    const std::size_t n = len(rng);
    const auto once = pad_or_trim(clip, n);
    EXPECT_EQ(pad_or_trim(once, n).samples, once.samples);
    EXPECT_EQ(once.samples.size(), n);
  }
}

namespace {

DspConfig small_config(int n_fft, int hop, WindowKind w = WindowKind::hann) {
  DspConfig cfg;
  cfg.n_fft = n_fft;
  cfg.hop = hop;
  cfg.window = w;
  cfg.n_mels = 16;
  cfg.fixed_len_samples = 4096;
  return cfg;
}

double max_abs_deviation(const Spectrum& got,
                         const std::vector<std::vector<std::complex<double>>>& want) {
  double worst = 0.0;
  for (std::size_t t = 0; t < want.size(); ++t) {
    for (std::size_t k = 0; k < want[t].size(); ++k) {
      worst = std::max(worst, std::abs(got(k, t) - want[t][k]));
    }
  }
  return worst;
}

}  // namespace

TEST(Stft, ZeroSignalGivesZeroMatrix) {
  const auto cfg = small_config(256, 64);
  const auto spec = stft(clip_of(std::vector<double>(1024, 0.0), 16000), cfg);
  for (const auto& v : spec.data()) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(Stft, BinCenteredSineConcentratesAtItsRow) {
  const auto cfg = small_config(256, 128, WindowKind::rectangular);
  const int k = 10;
  const double f = k * 16000.0 / 256.0;
  const auto x = test::sine(f, 16000, 1024);
  const auto spec = stft(clip_of(x, 16000), cfg);
  const auto oracle = test::naive_stft(x, 256, 128, false);
  ASSERT_EQ(spec.cols(), oracle.size());
  EXPECT_LT(max_abs_deviation(spec, oracle), 1e-6);
  for (std::size_t t = 0; t < spec.cols(); ++t) {
    std::size_t argmax = 0;
    for (std::size_t r = 0; r < spec.rows(); ++r) {
      if (std::abs(spec(r, t)) > std::abs(spec(argmax, t))) argmax = r;
    }
    EXPECT_EQ(argmax, static_cast<std::size_t>(k));
    EXPECT_NEAR(std::abs(spec(k, t)), 0.5 * 256 / 2.0, 1e-6);
  }
}

TEST(Stft, MatchesNaiveDftOnRandomSignal) {
  const auto x = test::uniform_noise(4096, 42);
  const auto cfg = small_config(1024, 256);
  const auto spec = stft(clip_of(x, 16000), cfg);
  const auto oracle = test::naive_stft(x, 1024, 256, true);
  ASSERT_EQ(spec.rows(), 513u);
  ASSERT_EQ(spec.cols(), oracle.size());
  EXPECT_LT(max_abs_deviation(spec, oracle), 1e-6);
}

TEST(Stft, NonPowerOfTwoSizeMatchesOracle) {
  const auto x = test::uniform_noise(2000, 9);
  const auto cfg = small_config(400, 160);
  const auto spec = stft(clip_of(x, 16000), cfg);
  EXPECT_LT(max_abs_deviation(spec, test::naive_stft(x, 400, 160, true)), 1e-6);
}

TEST(Stft, TooShort) {
  const auto cfg = small_config(256, 64);
  EXPECT_EQ(code_of([&] { stft(clip_of(std::vector<double>(255, 0.1), 16000), cfg); }),
            Errc::TooShort);
}

TEST(DspConfigTest, ValidatesInvariants) {
  DspConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.hop = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg = DspConfig{};
  cfg.hop = 2048;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg = DspConfig{};
  cfg.fmax_hz = 9000.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg = DspConfig{};
  cfg.n_mels = 1;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg = DspConfig{};
  cfg.fixed_len_samples = 1024;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
}

TEST(MelFilterbank, TrianglesHavePositiveAreaAndPeakAtCenter) {
  const DspConfig cfg;
  const auto fb = mel_filterbank(cfg);
  ASSERT_EQ(fb.rows(), 64u);
  ASSERT_EQ(fb.cols(), 513u);
  const double bin_hz = 16000.0 / 1024.0;
  const double mel_hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    // Center frequency straight from the scale definition.
    const double center_mel = mel_hi * static_cast<double>(m + 1) / 65.0;
    const double center_hz = 700.0 * (std::pow(10.0, center_mel / 2595.0) - 1.0);
    double area = 0.0;
    std::size_t peak = 0;
    for (std::size_t k = 0; k < fb.cols(); ++k) {
      EXPECT_GE(fb(m, k), 0.0);
      EXPECT_LE(fb(m, k), 1.0);
      area += fb(m, k);
      if (fb(m, k) > fb(m, peak)) peak = k;
    }
    EXPECT_GT(area, 0.0) << "filter " << m;
    EXPECT_LE(std::abs(static_cast<double>(peak) * bin_hz - center_hz), bin_hz) << "filter " << m;
  }
}

TEST(MelFilterbank, DeadFilterIsAConfigError) {
  DspConfig cfg;
  cfg.n_fft = 64;
  cfg.hop = 32;
  cfg.n_mels = 128;
  EXPECT_EQ(code_of([&] { mel_filterbank(cfg); }), Errc::InvalidConfig);
}

TEST(MelSpectrogramTest, SilenceIsLogFloor) {
  const DspConfig cfg;
  const auto mel = mel_spectrogram(clip_of(std::vector<double>(cfg.fixed_len_samples, 0.0), 16000), cfg);
  for (double v : mel.values.data()) EXPECT_DOUBLE_EQ(v, std::log(kLogFloor));
}

TEST(MelSpectrogramTest, ShapeFollowsCenterOffFraming) {
  const DspConfig cfg;
  const auto mel = mel_spectrogram(clip_of(test::uniform_noise(cfg.fixed_len_samples, 1), 16000), cfg);
  EXPECT_EQ(mel.n_mels(), 64u);
  EXPECT_EQ(mel.n_frames(), (80000u - 1024u) / 256u + 1u);
  EXPECT_DOUBLE_EQ(mel.frame_rate_hz, 16000.0 / 256.0);

  for (const int hop : {128, 160, 400, 1024}) {
    DspConfig c;
    c.hop = hop;
    const auto m = mel_spectrogram(clip_of(test::uniform_noise(c.fixed_len_samples, 2), 16000), c);
    EXPECT_EQ(m.n_frames(), (c.fixed_len_samples - 1024) / static_cast<std::size_t>(hop) + 1);
  }
}

TEST(MelSpectrogramTest, WhiteNoiseEnergiesAboveFloor) {
  const DspConfig cfg;
  const auto mel = mel_spectrogram(clip_of(test::uniform_noise(cfg.fixed_len_samples, 77), 16000), cfg);
  for (double v : mel.values.data()) EXPECT_GT(v, std::log(kLogFloor));
}

TEST(MelSpectrogramTest, WrongRateRejected) {
  const DspConfig cfg;
  EXPECT_EQ(code_of([&] { mel_spectrogram(clip_of(std::vector<double>(80000, 0.0), 8000), cfg); }),
            Errc::InvalidRate);
}

TEST(MelSpectrogramTest, TimeReversedSineHasSameBandEnergy) {
  DspConfig cfg;
  // (len - n_fft) divisible by hop so the reversed clip frames mirror the originals.
  const std::size_t len = 1024 + 256 * 300;
  cfg.fixed_len_samples = len;
  const auto x = test::sine(1000.0, 16000, len);
  auto reversed = x;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = mel_spectrogram(clip_of(x, 16000), cfg);
  const auto b = mel_spectrogram(clip_of(reversed, 16000), cfg);
  std::vector<double> ea(a.n_mels(), 0.0), eb(b.n_mels(), 0.0);
  for (std::size_t m = 0; m < a.n_mels(); ++m) {
    for (std::size_t t = 0; t < a.n_frames(); ++t) {
      ea[m] += std::exp(a.values(m, t)) - kLogFloor;
      eb[m] += std::exp(b.values(m, t)) - kLogFloor;
    }
  }
  const double scale = *std::max_element(ea.begin(), ea.end());
  for (std::size_t m = 0; m < ea.size(); ++m) {
    EXPECT_LE(std::abs(ea[m] - eb[m]), 1e-6 * scale) << "band " << m;
  }
}

TEST(MelFromClip, ResamplesAndFixesLength) {
  const DspConfig cfg;
  const auto mel = mel_from_clip(clip_of(test::sine(300.0, 44100, 44100 * 2), 44100), cfg);
  EXPECT_EQ(mel.n_mels(), 64u);
  EXPECT_EQ(mel.n_frames(), cfg.frames_for(cfg.fixed_len_samples));
}
