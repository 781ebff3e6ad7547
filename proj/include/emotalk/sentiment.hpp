#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emotalk/backend_status.hpp"
#include "emotalk/emotion.hpp"
#include "emotalk/http_client.hpp"
#include "emotalk/labels.hpp"

namespace emotalk::sentiment {

class SentimentBackend {
 public:
  virtual ~SentimentBackend() = default;
  virtual SentimentLabel classify(std::string_view text) const = 0;
  virtual std::string id() const = 0;
  virtual BackendStatus status() const = 0;
};

/// Lower-cased word tokens. Letters are ASCII alphanumerics and any
/// non-ASCII UTF-8 sequence; Latin-1 capitals (Á, Ç, É, ...) fold to lower case.
std::vector<std::string> tokenize(std::string_view text);

/// score = #positive hits - #negative hits; >0 happy, <0 sad, 0 neutral.
class LexiconSentimentBackend final : public SentimentBackend {
 public:
  LexiconSentimentBackend(std::set<std::string> positive, std::set<std::string> negative);
  /// UTF-8 word lists, one per line; blank lines and '#' comments ignored.
  static LexiconSentimentBackend from_files(const std::filesystem::path& positive,
                                            const std::filesystem::path& negative);

  int score(std::string_view text) const;
  SentimentLabel classify(std::string_view text) const override;
  std::string id() const override { return "lexicon"; }
  BackendStatus status() const override { return BackendStatus::stub; }

 private:
  std::set<std::string> positive_;
  std::set<std::string> negative_;
};

/// POST {"text": ...} -> {"label": "sad" | "neutral" | "happy"}.
class RemoteSentimentBackend final : public SentimentBackend {
 public:
  struct Config {
    std::string url;
    std::string api_key;
    RetryPolicy retry;
  };

  explicit RemoteSentimentBackend(Config cfg);

  SentimentLabel classify(std::string_view text) const override;
  std::string id() const override { return "remote"; }
  BackendStatus status() const override;

 private:
  Config cfg_;
  HttpClient client_;
};

/// Empty or whitespace-only text is neutral without consulting the backend.
SentimentLabel classify_sentiment(std::string_view text, const SentimentBackend& backend);

enum class FusionBranch { audio_priority, text_fallback, neutral_default };
std::string_view to_string(FusionBranch b);

struct EmotionalState {
  EmotionLabel audio = EmotionLabel::unknown;
  SentimentLabel text = SentimentLabel::neutral;
  EmotionLabel final = EmotionLabel::neutral;
  FusionBranch rationale = FusionBranch::neutral_default;

  friend bool operator==(const EmotionalState&, const EmotionalState&) = default;
};

/// Audio decides whenever it did not abstain; otherwise the text sentiment
/// carries over onto the shared label. Never yields unknown.
EmotionalState fuse_states(EmotionLabel audio_decided, SentimentLabel text);
EmotionalState fuse_states(const emotion::EmotionScores& audio, SentimentLabel text);

/// ET_SENTIMENT_BACKEND in {lexicon, remote}; ET_LEXICON_POS / ET_LEXICON_NEG
/// default to the shipped word lists.
std::unique_ptr<SentimentBackend> make_sentiment_backend_from_env();

}  // namespace emotalk::sentiment
