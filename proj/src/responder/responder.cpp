#include "emotalk/responder.hpp"

#include <spdlog/spdlog.h>

#include <json.hpp>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"

namespace emotalk::responder {

using nlohmann::json;

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

bool is_blank(std::string_view text) {
  return text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  if (is_blank(text_)) throw Error(Errc::InvalidConfig, "prompt template is empty");
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  return PromptTemplate(read_file(path));
}

std::string PromptTemplate::render(EmotionLabel emotion) const {
  std::string out = text_;
  replace_all(out, "{emotion_pt}", portuguese_name(emotion));
  replace_all(out, "{emotion}", to_string(emotion));
  return out;
}

std::string_view to_string(Role r) { return r == Role::user ? "user" : "assistant"; }

PromptBundle build_prompt(std::span<const ConversationTurn> history,
                          const sentiment::EmotionalState& state, std::string_view user_text,
                          const PromptTemplate& tmpl, const ResponderConfig& cfg) {
  if (is_blank(user_text)) throw Error(Errc::EmptyMessage, "user message is empty");
  PromptBundle b;
  b.system_text = tmpl.render(state.final);
  b.state = state;
  b.user_text = std::string(user_text);
  const std::size_t keep = std::min(history.size(), cfg.history_turns);
  const auto recent = history.subspan(history.size() - keep);
  b.history.reserve(2 * keep);
  for (const auto& turn : recent) {
    b.history.push_back({Role::user, turn.user_text});
    b.history.push_back({Role::assistant, turn.reply_text});
  }
  return b;
}

ChatRequest to_chat_request(const PromptBundle& bundle, const ResponderConfig& cfg) {
  ChatRequest r;
  r.model = cfg.model;
  r.temperature = cfg.temperature;
  r.max_tokens = cfg.max_tokens;
  r.emotion = bundle.state.final;
  r.messages.push_back({"system", bundle.system_text});
  for (const auto& m : bundle.history) r.messages.push_back({std::string(to_string(m.role)), m.text});
  r.messages.push_back({"user", bundle.user_text});
  return r;
}

StubChatBackend::StubChatBackend(std::string reply_template)
    : reply_template_(std::move(reply_template)) {}

ChatCompletion StubChatBackend::complete(const ChatRequest& request) const {
  std::string text = reply_template_;
  replace_all(text, "{emotion}", to_string(request.emotion));
  return {text, "stub", "stop"};
}

OpenAiChatBackend::OpenAiChatBackend(Config cfg)
    : cfg_(std::move(cfg)), client_(cfg_.api_base + "/chat/completions", cfg_.api_key, cfg_.retry) {}

ChatCompletion OpenAiChatBackend::complete(const ChatRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  const json body{{"model", request.model},
                  {"messages", std::move(messages)},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
  const HttpResponse res = client_.post_json(body.dump());

  const auto doc = json::parse(res.body, nullptr, false);
  const json* choice = nullptr;
  if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() &&
      !doc["choices"].empty()) {
    choice = &doc["choices"][0];
  }
  if (choice == nullptr || !choice->contains("message") || !(*choice)["message"].contains("content") ||
      !(*choice)["message"]["content"].is_string()) {
    throw Error(Errc::BackendRejected, "chat reply lacks choices[0].message.content", res.status);
  }
  ChatCompletion c;
  c.text = (*choice)["message"]["content"].get<std::string>();
  c.model_id = doc.value("model", request.model);
  c.finish_reason = choice->contains("finish_reason") && (*choice)["finish_reason"].is_string()
                        ? (*choice)["finish_reason"].get<std::string>()
                        : "";
  return c;
}

BackendStatus OpenAiChatBackend::status() const {
  return client_.reachable(std::chrono::milliseconds{1000}) ? BackendStatus::up
                                                            : BackendStatus::down;
}

Fallbacks::Fallbacks(std::map<EmotionLabel, std::string> lines) : lines_(std::move(lines)) {
  for (auto l : kConcreteEmotions) {
    const auto it = lines_.find(l);
    if (it == lines_.end() || is_blank(it->second)) {
      throw Error(Errc::InvalidConfig, "fallback line missing for " + std::string(to_string(l)));
    }
  }
  lines_.try_emplace(EmotionLabel::unknown, lines_.at(EmotionLabel::neutral));
}

Fallbacks Fallbacks::from_file(const std::filesystem::path& path) {
  const auto doc = json::parse(read_file(path), nullptr, false);
  if (!doc.is_object()) throw Error(Errc::InvalidConfig, "fallback file must be a JSON object");
  std::map<EmotionLabel, std::string> lines;
  for (const auto& [key, value] : doc.items()) {
    const auto label = parse_emotion(key);
    if (!label || !value.is_string()) {
      throw Error(Errc::InvalidConfig, "bad fallback entry '" + key + "'");
    }
    lines[*label] = value.get<std::string>();
  }
  return Fallbacks(std::move(lines));
}

const std::string& Fallbacks::line(EmotionLabel l) const { return lines_.at(l); }

GeneratedReply generate_response(const PromptBundle& bundle, const ChatBackend& backend,
                                 const Fallbacks& fallbacks, const ResponderConfig& cfg) {
  try {
    ChatCompletion c = backend.complete(to_chat_request(bundle, cfg));
    if (!is_blank(c.text)) return {std::move(c.text), std::move(c.model_id), std::move(c.finish_reason), false};
    spdlog::warn("chat backend {} returned an empty reply; using fallback", backend.id());
  } catch (const Error& e) {
    spdlog::warn("chat backend {} failed ({}: {}); using fallback", backend.id(), to_string(e.code()),
                 e.what());
  } catch (const std::exception& e) {
    spdlog::warn("chat backend {} failed: {}; using fallback", backend.id(), e.what());
  }
  return {fallbacks.line(bundle.state.final), "fallback", "fallback", true};
}

std::unique_ptr<ChatBackend> make_chat_backend_from_env() {
  if (env_or("ET_LLM_BACKEND", "http") == "stub") {
    return std::make_unique<StubChatBackend>(env_or("ET_LLM_STUB_REPLY", "OK:{emotion}"));
  }
  OpenAiChatBackend::Config cfg;
  cfg.api_base = env_or("ET_LLM_API_BASE", "https://api.openai.com/v1");
  cfg.api_key = env_or("ET_LLM_API_KEY", "");
  cfg.retry.timeout = std::chrono::milliseconds{env_int_or("ET_LLM_TIMEOUT_MS", 30000)};
  return std::make_unique<OpenAiChatBackend>(std::move(cfg));
}

ResponderConfig responder_config_from_env() {
  ResponderConfig cfg;
  cfg.model = env_or("ET_LLM_MODEL", cfg.model);
  return cfg;
}

PromptTemplate prompt_template_from_env() {
  return PromptTemplate::from_file(
      env_or("ET_PROMPT_TEMPLATE", (data_dir() / "templates" / "system_prompt.txt").string()));
}

Fallbacks fallbacks_from_env() {
  return Fallbacks::from_file(
      env_or("ET_FALLBACKS", (data_dir() / "templates" / "fallbacks.json").string()));
}

}  // namespace emotalk::responder
