#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/backend_status.hpp"
#include "emotalk/http_client.hpp"
#include "emotalk/labels.hpp"
#include "emotalk/matrix.hpp"

namespace emotalk::emotion {

/// Probabilities over the concrete labels, indexed like kConcreteEmotions.
using Probabilities = std::array<double, 4>;

inline constexpr double kDefaultUnknownThreshold = 0.40;

struct EmotionScores {
  Probabilities probs{};
  EmotionLabel decided = EmotionLabel::unknown;
  std::string backend_id;

  double prob(EmotionLabel l) const { return probs.at(index_of(l)); }
};

/// Argmax over `probs` when the winning probability reaches `tau`, else
/// unknown. Ties go to the first label in angry < happy < neutral < sad.
/// Throws NotADistribution unless probs are in [0,1] and sum to 1 +- 1e-6.
EmotionLabel label_from_scores(const Probabilities& probs, double tau);

/// Numerically stable softmax.
Probabilities softmax(const std::array<double, 4>& logits);

class EmotionBackend {
 public:
  virtual ~EmotionBackend() = default;
  /// Throws ShapeMismatch for a spectrogram of the wrong shape and
  /// BackendUnavailable when the model cannot be reached.
  virtual Probabilities predict(const dsp::MelSpectrogram& mel) const = 0;
  virtual std::string id() const = 0;
  virtual BackendStatus status() const = 0;
};

/// Multinomial logistic model over per-band mean and standard deviation
/// of the log-Mel matrix: features = [mean_0..mean_{n-1}, std_0..std_{n-1}].
class BaselineEmotionBackend final : public EmotionBackend {
 public:
  struct Weights {
    Matrix<double> w;          // [4 x 2*n_mels], rows in kConcreteEmotions order
    std::array<double, 4> b{};
  };

  explicit BaselineEmotionBackend(Weights weights);

  /// {"labels": [4 labels], "w": [[...]], "b": [...]}; rows follow "labels".
  static BaselineEmotionBackend from_json(const std::string& text);
  static BaselineEmotionBackend from_file(const std::filesystem::path& path);

  static std::vector<double> features(const dsp::MelSpectrogram& mel);
  std::array<double, 4> logits(const dsp::MelSpectrogram& mel) const;

  Probabilities predict(const dsp::MelSpectrogram& mel) const override;
  std::string id() const override { return "baseline"; }
  BackendStatus status() const override { return BackendStatus::stub; }

  std::size_t n_mels() const { return weights_.w.cols() / 2; }
  const Weights& weights() const { return weights_; }

 private:
  Weights weights_;
};

/// POST {"mel": [[...]]} -> {"probs": {"angry": p, ...}}. Missing labels
/// count as 0 and the four concrete probabilities are renormalized.
class RemoteEmotionBackend final : public EmotionBackend {
 public:
  struct Config {
    std::string url;
    std::string api_key;
    std::size_t n_mels = 64;
    std::size_t n_frames = 309;
    RetryPolicy retry;
  };

  explicit RemoteEmotionBackend(Config cfg);

  Probabilities predict(const dsp::MelSpectrogram& mel) const override;
  std::string id() const override { return "remote"; }
  BackendStatus status() const override;

 private:
  Config cfg_;
  HttpClient client_;
};

EmotionScores detect_emotion(const dsp::MelSpectrogram& mel, const EmotionBackend& backend,
                             double tau = kDefaultUnknownThreshold);

/// ET_EMOTION_BACKEND in {baseline, remote}; ET_EMOTION_WEIGHTS for the
/// baseline, ET_EMOTION_API_BASE for the remote service.
std::unique_ptr<EmotionBackend> make_emotion_backend_from_env(const dsp::DspConfig& dsp);

}  // namespace emotalk::emotion
