#include "emotalk/sentiment.hpp"

#include <sstream>

#include <json.hpp>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"

namespace emotalk::sentiment {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::set<std::string> load_word_list(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    for (auto& w : tokenize(line)) words.insert(std::move(w));
  }
  return words;
}

bool is_blank(std::string_view text) {
  return text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (!is_word_byte(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c + 32));
    } else if (c == 0xC3 && i + 1 < text.size()) {
      // U+00C0..U+00DE (minus U+00D7) map to U+00E0..U+00FE.
      auto next = static_cast<unsigned char>(text[i + 1]);
      if (next >= 0x80 && next <= 0x9E && next != 0x97) next += 0x20;
      cur.push_back(static_cast<char>(c));
      cur.push_back(static_cast<char>(next));
      ++i;
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

LexiconSentimentBackend::LexiconSentimentBackend(std::set<std::string> positive,
                                                 std::set<std::string> negative)
    : positive_(std::move(positive)), negative_(std::move(negative)) {}

LexiconSentimentBackend LexiconSentimentBackend::from_files(const std::filesystem::path& positive,
                                                            const std::filesystem::path& negative) {
  return {load_word_list(positive), load_word_list(negative)};
}

int LexiconSentimentBackend::score(std::string_view text) const {
  int s = 0;
  for (const auto& w : tokenize(text)) {
    if (positive_.contains(w)) ++s;
    if (negative_.contains(w)) --s;
  }
  return s;
}

SentimentLabel LexiconSentimentBackend::classify(std::string_view text) const {
  const int s = score(text);
  if (s > 0) return SentimentLabel::happy;
  if (s < 0) return SentimentLabel::sad;
  return SentimentLabel::neutral;
}

RemoteSentimentBackend::RemoteSentimentBackend(Config cfg)
    : cfg_(std::move(cfg)), client_(cfg_.url, cfg_.api_key, cfg_.retry) {}

SentimentLabel RemoteSentimentBackend::classify(std::string_view text) const {
  const HttpResponse res = client_.post_json(nlohmann::json{{"text", std::string(text)}}.dump());
  const auto doc = nlohmann::json::parse(res.body, nullptr, false);
  if (doc.is_object() && doc.contains("label") && doc["label"].is_string()) {
    if (auto l = parse_sentiment(doc["label"].get<std::string>())) return *l;
  }
  throw Error(Errc::BackendRejected, "sentiment reply lacks a valid \"label\": " + res.body,
              res.status);
}

BackendStatus RemoteSentimentBackend::status() const {
  return client_.reachable(std::chrono::milliseconds{1000}) ? BackendStatus::up
                                                            : BackendStatus::down;
}

SentimentLabel classify_sentiment(std::string_view text, const SentimentBackend& backend) {
  if (is_blank(text)) return SentimentLabel::neutral;
  return backend.classify(text);
}

std::string_view to_string(FusionBranch b) {
  switch (b) {
    case FusionBranch::audio_priority: return "audio-priority";
    case FusionBranch::text_fallback: return "text-fallback";
    case FusionBranch::neutral_default: return "neutral-default";
  }
  return "neutral-default";
}

EmotionalState fuse_states(EmotionLabel audio_decided, SentimentLabel text) {
  EmotionalState s{audio_decided, text, EmotionLabel::neutral, FusionBranch::neutral_default};
  if (audio_decided != EmotionLabel::unknown) {
    s.final = audio_decided;
    s.rationale = FusionBranch::audio_priority;
  } else if (text == SentimentLabel::sad) {
    s.final = EmotionLabel::sad;
    s.rationale = FusionBranch::text_fallback;
  } else if (text == SentimentLabel::happy) {
    s.final = EmotionLabel::happy;
    s.rationale = FusionBranch::text_fallback;
  }
  return s;
}

EmotionalState fuse_states(const emotion::EmotionScores& audio, SentimentLabel text) {
  return fuse_states(audio.decided, text);
}

std::unique_ptr<SentimentBackend> make_sentiment_backend_from_env() {
  const std::string kind = env_or("ET_SENTIMENT_BACKEND", "lexicon");
  if (kind == "lexicon") {
    const auto pos = env_or("ET_LEXICON_POS", (data_dir() / "lexicon" / "positive.txt").string());
    const auto neg = env_or("ET_LEXICON_NEG", (data_dir() / "lexicon" / "negative.txt").string());
    return std::make_unique<LexiconSentimentBackend>(LexiconSentimentBackend::from_files(pos, neg));
  }
  if (kind == "remote") {
    const auto url = env("ET_SENTIMENT_API_BASE");
    if (!url) throw Error(Errc::InvalidConfig, "ET_SENTIMENT_BACKEND=remote requires ET_SENTIMENT_API_BASE");
    return std::make_unique<RemoteSentimentBackend>(
        RemoteSentimentBackend::Config{*url, env_or("ET_SENTIMENT_API_KEY", ""), RetryPolicy{}});
  }
  throw Error(Errc::InvalidConfig, "ET_SENTIMENT_BACKEND must be lexicon or remote, got " + kind);
}

}  // namespace emotalk::sentiment
