#include <algorithm>
#include <cmath>
#include <cstring>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/error.hpp"

namespace emotalk::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

struct ParsedWav {
  FmtChunk fmt;
  std::span<const std::uint8_t> data;
};

[[noreturn]] void malformed(const std::string& why) {
  throw Error(Errc::MalformedContainer, "malformed WAV: " + why);
}

bool looks_like_other_container(std::span<const std::uint8_t> b) {
  auto starts = [&](const char* magic, std::size_t n, std::size_t offset = 0) {
    return b.size() >= offset + n && std::memcmp(b.data() + offset, magic, n) == 0;
  };
  return starts("OggS", 4) || starts("fLaC", 4) || starts("ID3", 3) ||
         starts("ftyp", 4, 4) || starts("FORM", 4) || starts("\x1A\x45\xDF\xA3", 4) ||
         (b.size() >= 2 && b[0] == 0xFF && (b[1] & 0xE0) == 0xE0);
}

ParsedWav parse(std::span<const std::uint8_t> b) {
  if (b.empty()) malformed("empty input");
  if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) {
    if (looks_like_other_container(b)) {
      throw Error(Errc::UnsupportedFormat, "only WAV containers are supported");
    }
    malformed("missing RIFF/WAVE header");
  }

  std::optional<FmtChunk> fmt;
  std::optional<std::span<const std::uint8_t>> data;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = read_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t remaining = b.size() - body;
    if (tag_is(b, pos, "fmt ")) {
      if (size < 16 || size > remaining) malformed("bad fmt chunk");
      FmtChunk f;
      f.format = read_u16(b, body);
      f.channels = read_u16(b, body + 2);
      f.sample_rate = read_u32(b, body + 4);
      f.block_align = read_u16(b, body + 12);
      f.bits = read_u16(b, body + 14);
      if (f.format == kFormatExtensible) {
        if (size < 40) malformed("truncated WAVE_FORMAT_EXTENSIBLE");
        f.format = read_u16(b, body + 24);
      }
      fmt = f;
    } else if (tag_is(b, pos, "data")) {
      // Streaming writers leave the size at 0xFFFFFFFF; take what is there.
      if (size == 0xFFFFFFFFu) {
        data = b.subspan(body);
        break;
      }
      if (size > remaining) malformed("data chunk overruns the file");
      data = b.subspan(body, size);
      if (fmt) break;
    }
    if (size > remaining) malformed("chunk overruns the file");
    pos = body + size + (size & 1u);
  }
  if (!fmt) malformed("no fmt chunk");
  if (!data) malformed("no data chunk");
  if (fmt->channels == 0) malformed("zero channels");
  if (fmt->sample_rate == 0) malformed("zero sample rate");
  return {*fmt, *data};
}

std::optional<WavFormat> classify(const FmtChunk& f) {
  if (f.format == kFormatPcm && f.bits == 16) return WavFormat::pcm16;
  if (f.format == kFormatFloat && f.bits == 32) return WavFormat::float32;
  return std::nullopt;
}

void write_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void write_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::vector<std::uint8_t> wav_header(const AudioClip& clip, std::uint16_t format,
                                     std::uint16_t bits) {
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * block);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  write_tag(out, "RIFF");
  write_u32(out, 36 + data_bytes);
  write_tag(out, "WAVE");
  write_tag(out, "fmt ");
  write_u32(out, 16);
  write_u16(out, format);
  write_u16(out, 1);
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * block);
  write_u16(out, block);
  write_u16(out, bits);
  write_tag(out, "data");
  write_u32(out, data_bytes);
  return out;
}

}  // namespace

std::string to_string(WavFormat fmt) {
  return fmt == WavFormat::pcm16 ? "wav-pcm16" : "wav-float32";
}

std::optional<WavFormat> parse_wav_format(std::string_view name) {
  if (name == "wav-pcm16") return WavFormat::pcm16;
  if (name == "wav-float32") return WavFormat::float32;
  return std::nullopt;
}

std::optional<WavFormat> sniff_wav_format(std::span<const std::uint8_t> bytes) {
  try {
    return classify(parse(bytes).fmt);
  } catch (const Error&) {
    return std::nullopt;
  }
}

AudioClip decode_audio(std::span<const std::uint8_t> bytes, WavFormat fmt,
                       std::string source_id) {
  const ParsedWav wav = parse(bytes);
  const auto actual = classify(wav.fmt);
  if (!actual) {
    throw Error(Errc::UnsupportedFormat,
                "WAV sample format " + std::to_string(wav.fmt.format) + "/" +
                    std::to_string(wav.fmt.bits) + " bit is not supported");
  }
  if (*actual != fmt) {
    throw Error(Errc::UnsupportedFormat,
                "container holds " + to_string(*actual) + ", caller expected " + to_string(fmt));
  }

  const std::size_t channels = wav.fmt.channels;
  const std::size_t bytes_per_sample = wav.fmt.bits / 8;
  const std::size_t frame_bytes = channels * bytes_per_sample;
  if (wav.fmt.block_align != 0 && wav.fmt.block_align != frame_bytes) {
    malformed("block_align disagrees with channels and bit depth");
  }
  const std::size_t frames = wav.data.size() / frame_bytes;
  if (frames == 0) throw Error(Errc::EmptyAudio, "WAV data chunk holds no samples");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(wav.fmt.sample_rate);
  clip.source_id = std::move(source_id);
  clip.samples.resize(frames);
  const std::uint8_t* p = wav.data.data();
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      if (fmt == WavFormat::pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += v / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        if (!std::isfinite(v)) malformed("non-finite float sample");
        acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
      }
      p += bytes_per_sample;
    }
    clip.samples[i] = acc / static_cast<double>(channels);
  }
  return clip;
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  auto out = wav_header(clip, kFormatPcm, 16);
  for (double s : clip.samples) {
    const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
    write_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_float32(const AudioClip& clip) {
  auto out = wav_header(clip, kFormatFloat, 32);
  for (double s : clip.samples) {
    const auto f = static_cast<float>(s);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(out, bits);
  }
  return out;
}

}  // namespace emotalk::dsp
