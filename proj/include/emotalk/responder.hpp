#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emotalk/backend_status.hpp"
#include "emotalk/domain.hpp"
#include "emotalk/http_client.hpp"
#include "emotalk/sentiment.hpp"

namespace emotalk::responder {

struct ResponderConfig {
  std::size_t history_turns = 10;
  double temperature = 0.7;
  int max_tokens = 512;
  std::string model = "gpt-3.5-turbo";
};

/// System prompt with named placeholders: {emotion} (English label) and
/// {emotion_pt} (Portuguese adjective). Unknown placeholders are left as is.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);
  static PromptTemplate from_file(const std::filesystem::path& path);

  std::string render(EmotionLabel emotion) const;
  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

enum class Role { user, assistant };
std::string_view to_string(Role r);

struct HistoryMessage {
  Role role = Role::user;
  std::string text;

  friend bool operator==(const HistoryMessage&, const HistoryMessage&) = default;
};

struct PromptBundle {
  std::string system_text;
  std::vector<HistoryMessage> history;  // user/assistant pairs, oldest first
  sentiment::EmotionalState state;
  std::string user_text;

  std::size_t history_turns() const { return history.size() / 2; }

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// Keeps the last cfg.history_turns turns of `history` (already in
/// ascending turn order), each expanded into a user and an assistant
/// message. Throws EmptyMessage for blank user_text.
PromptBundle build_prompt(std::span<const ConversationTurn> history,
                          const sentiment::EmotionalState& state, std::string_view user_text,
                          const PromptTemplate& tmpl, const ResponderConfig& cfg);

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 512;
  /// Emotion the prompt is conditioned on; unknown for non-conversational
  /// requests. Wire backends ignore it.
  EmotionLabel emotion = EmotionLabel::unknown;
};

ChatRequest to_chat_request(const PromptBundle& bundle, const ResponderConfig& cfg);

struct ChatCompletion {
  std::string text;
  std::string model_id;
  std::string finish_reason;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws on transport failure, rejection or malformed replies.
  virtual ChatCompletion complete(const ChatRequest& request) const = 0;
  virtual std::string id() const = 0;
  virtual BackendStatus status() const = 0;
};

/// Replies with a fixed template, substituting {emotion}.
class StubChatBackend final : public ChatBackend {
 public:
  explicit StubChatBackend(std::string reply_template = "OK:{emotion}");

  ChatCompletion complete(const ChatRequest& request) const override;
  std::string id() const override { return "stub"; }
  BackendStatus status() const override { return BackendStatus::stub; }

 private:
  std::string reply_template_;
};

/// Provider-style chat completion: POST {api_base}/chat/completions with
/// {"model", "messages", "temperature", "max_tokens"}, reading
/// choices[0].message.content.
class OpenAiChatBackend final : public ChatBackend {
 public:
  struct Config {
    std::string api_base;
    std::string api_key;
    RetryPolicy retry;
  };

  explicit OpenAiChatBackend(Config cfg);

  ChatCompletion complete(const ChatRequest& request) const override;
  std::string id() const override { return "openai-compatible"; }
  BackendStatus status() const override;

 private:
  Config cfg_;
  HttpClient client_;
};

/// One canned Portuguese sentence per emotion label.
class Fallbacks {
 public:
  explicit Fallbacks(std::map<EmotionLabel, std::string> lines);
  /// JSON object label -> sentence; all four concrete labels are required.
  static Fallbacks from_file(const std::filesystem::path& path);

  const std::string& line(EmotionLabel l) const;

 private:
  std::map<EmotionLabel, std::string> lines_;
};

struct GeneratedReply {
  std::string text;
  std::string model_id;
  std::string finish_reason;
  bool fallback_used = false;
};

/// Never throws for backend trouble: any failure or an empty completion
/// yields the fallback line for bundle.state.final.
GeneratedReply generate_response(const PromptBundle& bundle, const ChatBackend& backend,
                                 const Fallbacks& fallbacks, const ResponderConfig& cfg);

/// ET_LLM_BACKEND=stub (reply from ET_LLM_STUB_REPLY) or the HTTP client
/// configured by ET_LLM_API_BASE, ET_LLM_API_KEY and ET_LLM_TIMEOUT_MS.
std::unique_ptr<ChatBackend> make_chat_backend_from_env();
ResponderConfig responder_config_from_env();
PromptTemplate prompt_template_from_env();
Fallbacks fallbacks_from_env();

}  // namespace emotalk::responder
