#include "emotalk/emotion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"

namespace emotalk::emotion {

using nlohmann::json;

EmotionLabel label_from_scores(const Probabilities& probs, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(Errc::InvalidConfig, "unknown threshold must lie in [0, 1]");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-12) {
      throw Error(Errc::NotADistribution, "probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(Errc::NotADistribution, "probabilities sum to " + std::to_string(sum));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return probs[best] >= tau ? kConcreteEmotions[best] : EmotionLabel::unknown;
}

Probabilities softmax(const std::array<double, 4>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  Probabilities out{};
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

BaselineEmotionBackend::BaselineEmotionBackend(Weights weights) : weights_(std::move(weights)) {
  if (weights_.w.rows() != 4 || weights_.w.cols() == 0 || weights_.w.cols() % 2 != 0) {
    throw Error(Errc::InvalidConfig, "baseline weights must be 4 x 2*n_mels");
  }
}

BaselineEmotionBackend BaselineEmotionBackend::from_json(const std::string& text) {
  const auto doc = json::parse(text, nullptr, false);
  auto fail = [](const std::string& why) -> BaselineEmotionBackend {
    throw Error(Errc::InvalidConfig, "baseline weights: " + why);
  };
  if (!doc.is_object() || !doc.contains("labels") || !doc.contains("w") || !doc.contains("b")) {
    return fail("expected an object with labels, w and b");
  }
  const auto& labels = doc["labels"];
  const auto& w = doc["w"];
  const auto& b = doc["b"];
  if (!labels.is_array() || labels.size() != 4 || !w.is_array() || w.size() != 4 ||
      !b.is_array() || b.size() != 4) {
    return fail("labels, w and b must each have 4 entries");
  }
  std::array<bool, 4> seen{};
  Weights out;
  const std::size_t width = w[0].is_array() ? w[0].size() : 0;
  out.w = Matrix<double>(4, width);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto label = labels[i].is_string() ? parse_emotion(labels[i].get<std::string>())
                                             : std::nullopt;
    if (!label || *label == EmotionLabel::unknown || seen[index_of(*label)]) {
      return fail("labels must be a permutation of angry, happy, neutral, sad");
    }
    const std::size_t row = index_of(*label);
    seen[row] = true;
    if (!w[i].is_array() || w[i].size() != width) return fail("ragged w matrix");
    for (std::size_t j = 0; j < width; ++j) {
      if (!w[i][j].is_number()) return fail("non-numeric weight");
      out.w(row, j) = w[i][j].get<double>();
    }
    if (!b[i].is_number()) return fail("non-numeric bias");
    out.b[row] = b[i].get<double>();
  }
  return BaselineEmotionBackend(std::move(out));
}

BaselineEmotionBackend BaselineEmotionBackend::from_file(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

std::vector<double> BaselineEmotionBackend::features(const dsp::MelSpectrogram& mel) {
  const std::size_t bands = mel.n_mels();
  const std::size_t frames = mel.n_frames();
  std::vector<double> f(2 * bands, 0.0);
  if (frames == 0) return f;
  for (std::size_t m = 0; m < bands; ++m) {
    const auto row = mel.values.row(m);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(frames);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    f[m] = mean;
    f[bands + m] = std::sqrt(var / static_cast<double>(frames));
  }
  return f;
}

std::array<double, 4> BaselineEmotionBackend::logits(const dsp::MelSpectrogram& mel) const {
  if (mel.n_mels() != n_mels()) {
    throw Error(Errc::ShapeMismatch, "baseline expects " + std::to_string(n_mels()) +
                                         " Mel bands, got " + std::to_string(mel.n_mels()));
  }
  if (mel.n_frames() == 0) throw Error(Errc::ShapeMismatch, "spectrogram has no frames");
  const auto f = features(mel);
  std::array<double, 4> z{};
  for (std::size_t c = 0; c < 4; ++c) {
    const auto wr = weights_.w.row(c);
    z[c] = std::inner_product(wr.begin(), wr.end(), f.begin(), weights_.b[c]);
  }
  return z;
}

Probabilities BaselineEmotionBackend::predict(const dsp::MelSpectrogram& mel) const {
  return softmax(logits(mel));
}

RemoteEmotionBackend::RemoteEmotionBackend(Config cfg)
    : cfg_(std::move(cfg)), client_(cfg_.url, cfg_.api_key, cfg_.retry) {}

Probabilities RemoteEmotionBackend::predict(const dsp::MelSpectrogram& mel) const {
  if (mel.n_mels() != cfg_.n_mels || mel.n_frames() != cfg_.n_frames) {
    throw Error(Errc::ShapeMismatch,
                "remote model expects " + std::to_string(cfg_.n_mels) + "x" +
                    std::to_string(cfg_.n_frames) + ", got " + std::to_string(mel.n_mels()) +
                    "x" + std::to_string(mel.n_frames()));
  }
  json rows = json::array();
  for (std::size_t m = 0; m < mel.n_mels(); ++m) {
    const auto r = mel.values.row(m);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  const HttpResponse res = client_.post_json(json{{"mel", std::move(rows)}}.dump());

  const auto doc = json::parse(res.body, nullptr, false);
  if (!doc.is_object() || !doc.contains("probs") || !doc["probs"].is_object()) {
    throw Error(Errc::BackendRejected, "emotion reply lacks a \"probs\" object", res.status);
  }
  Probabilities p{};
  double sum = 0.0;
  for (auto label : kConcreteEmotions) {
    const auto key = std::string(to_string(label));
    if (!doc["probs"].contains(key)) continue;
    const auto& v = doc["probs"][key];
    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
      throw Error(Errc::NotADistribution, "emotion score for " + key + " is not a probability");
    }
    p[index_of(label)] = v.get<double>();
    sum += p[index_of(label)];
  }
  if (sum <= 0.0) throw Error(Errc::NotADistribution, "emotion scores sum to zero");
  for (auto& v : p) v /= sum;
  return p;
}

BackendStatus RemoteEmotionBackend::status() const {
  return client_.reachable(std::chrono::milliseconds{1000}) ? BackendStatus::up
                                                            : BackendStatus::down;
}

EmotionScores detect_emotion(const dsp::MelSpectrogram& mel, const EmotionBackend& backend,
                             double tau) {
  EmotionScores s;
  s.probs = backend.predict(mel);
  s.decided = label_from_scores(s.probs, tau);
  s.backend_id = backend.id();
  return s;
}

std::unique_ptr<EmotionBackend> make_emotion_backend_from_env(const dsp::DspConfig& dsp) {
  const std::string kind = env_or("ET_EMOTION_BACKEND", "baseline");
  if (kind == "baseline") {
    const auto path = env_or("ET_EMOTION_WEIGHTS", (data_dir() / "models" / "baseline_zero.json").string());
    return std::make_unique<BaselineEmotionBackend>(BaselineEmotionBackend::from_file(path));
  }
  if (kind == "remote") {
    RemoteEmotionBackend::Config cfg;
    const auto url = env("ET_EMOTION_API_BASE");
    if (!url) throw Error(Errc::InvalidConfig, "ET_EMOTION_BACKEND=remote requires ET_EMOTION_API_BASE");
    cfg.url = *url;
    cfg.api_key = env_or("ET_EMOTION_API_KEY", "");
    cfg.n_mels = static_cast<std::size_t>(dsp.n_mels);
    cfg.n_frames = dsp.frames_for(dsp.fixed_len_samples);
    return std::make_unique<RemoteEmotionBackend>(std::move(cfg));
  }
  throw Error(Errc::InvalidConfig, "ET_EMOTION_BACKEND must be baseline or remote, got " + kind);
}

}  // namespace emotalk::emotion
