#include <httplib.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"
#include "emotalk/service.hpp"

namespace emotalk::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

json to_json(const Psychologist& p) { return {{"id", p.id}, {"name", p.name}, {"email", p.email}}; }

json to_json(const ConversationTurn& t) {
  return {{"id", t.id},
          {"patient_id", t.patient_id},
          {"turn_index", t.turn_index},
          {"user_text", t.user_text},
          {"reply_text", t.reply_text},
          {"audio_emotion", to_string(t.audio_emotion)},
          {"text_sentiment", to_string(t.text_sentiment)},
          {"final_emotion", to_string(t.final_emotion)},
          {"created_at", format_iso8601(t.created_at)}};
}

json to_json(const Patient& p, const db::Store& store) {
  json out{{"id", p.id}, {"name", p.name}, {"psychologist_id", p.psychologist_id}};
  const auto latest = store.get_history(p.id, 1);
  out["turn_count"] = latest.empty() ? 0 : latest.back().turn_index + 1;
  out["latest_emotion"] = latest.empty() ? json(nullptr) : json(to_string(latest.back().final_emotion));
  return out;
}

json to_json(const MessageResponse& r) {
  json probs = json::object();
  for (auto l : kConcreteEmotions) probs[std::string(to_string(l))] = r.audio.prob(l);
  return {{"conversation_turn", to_json(r.turn)},
          {"transcript",
           {{"text", r.transcript.text},
            {"language", r.transcript.language},
            {"backend_id", r.transcript.backend_id},
            {"latency_ms", r.transcript.latency_ms},
            {"silence", r.transcript.silence}}},
          {"audio", {{"probs", probs}, {"decided", to_string(r.audio.decided)}, {"backend_id", r.audio.backend_id}}},
          {"state",
           {{"audio", to_string(r.state.audio)},
            {"text", to_string(r.state.text)},
            {"final", to_string(r.state.final)},
            {"rationale", to_string(r.state.rationale)}}},
          {"reply",
           {{"text", r.reply.text},
            {"model_id", r.reply.model_id},
            {"finish_reason", r.reply.finish_reason},
            {"fallback_used", r.reply.fallback_used}}},
          {"degraded", {{"emotion", r.emotion_degraded}, {"sentiment", r.sentiment_degraded}}}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                int detail = 0) {
  json err{{"code", code}, {"message", message}};
  if (detail != 0) err["detail"] = detail;
  send_json(res, status, {{"error", err}});
}

std::int64_t path_id(const httplib::Request& req) {
  try {
    return std::stoll(req.matches[1].str());
  } catch (const std::exception&) {
    throw Error(Errc::InvalidRequest, "id out of range: " + req.matches[1].str());
  }
}

json body_json(const httplib::Request& req) {
  auto doc = json::parse(req.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::InvalidRequest, "body must be a JSON object");
  return doc;
}

std::string required_string(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) throw Error(Errc::InvalidRequest, std::string("missing string field ") + key);
  return it->get<std::string>();
}

std::int64_t required_int(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_number_integer()) {
    throw Error(Errc::InvalidRequest, std::string("missing integer field ") + key);
  }
  return it->get<std::int64_t>();
}

std::optional<std::int64_t> positive_query(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const std::string v = req.get_param_value(key);
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || n < 1) throw Error(Errc::InvalidRequest, std::string(key) + " must be a positive integer");
  return n;
}

bool same_token(std::string_view given, std::string_view expected) {
  if (given.size() != expected.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < given.size(); ++i) diff |= static_cast<unsigned char>(given[i] ^ expected[i]);
  return diff == 0;
}

}  // namespace

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownPatient:
    case Errc::UnknownPsychologist:
      return 404;
    case Errc::MalformedContainer:
    case Errc::UnsupportedFormat:
    case Errc::EmptyAudio:
    case Errc::AudioTooLong:
    case Errc::InvalidRate:
    case Errc::TooShort:
      return 422;
    case Errc::PayloadTooLarge:
      return 413;
    case Errc::InvalidRequest:
    case Errc::InvalidEmail:
    case Errc::EmptyMessage:
      return 400;
    case Errc::PsychologistHasPatients:
      return 409;
    case Errc::TranscriptionUnavailable:
    case Errc::SmtpConnectFailed:
    case Errc::SmtpRejected:
    case Errc::BackendUnavailable:
    case Errc::BackendRejected:
      return 502;
    case Errc::Timeout:
      return 504;
    default:
      return 500;
  }
}

ServerConfig server_config_from_env() {
  ServerConfig c;
  c.host = env_or("ET_HOST", c.host);
  c.port = static_cast<int>(env_int_or("ET_PORT", c.port));
  c.auth_token = env_or("ET_AUTH_TOKEN", "");
  c.cors_origin = env_or("ET_CORS_ORIGIN", "");
  c.smtp = reporting::smtp_config_from_env();
  c.report_strings = std::make_shared<reporting::ReportStrings>(reporting::report_strings_from_env());
  return c;
}

ApiServer::ApiServer(const Pipeline& pipeline, ServerConfig cfg, Clock clock)
    : pipeline_(pipeline), cfg_(std::move(cfg)), clock_(std::move(clock)), server_(std::make_unique<httplib::Server>()) {
  if (!cfg_.report_strings) {
    cfg_.report_strings = std::make_shared<reporting::ReportStrings>(reporting::report_strings_from_env());
  }
  if (cfg_.auth_token.empty()) spdlog::warn("ET_AUTH_TOKEN is not set; the API accepts unauthenticated requests");
  routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  port_ = cfg_.port == 0 ? server_->bind_to_any_port(cfg_.host) : cfg_.port;
  if (port_ < 0 || (cfg_.port != 0 && !server_->bind_to_port(cfg_.host, cfg_.port))) {
    throw Error(Errc::InvalidConfig, "cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
  }
  return port_;
}

int ApiServer::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ApiServer::run() {
  bind();
  spdlog::info("listening on {}:{}", cfg_.host, port_);
  server_->listen_after_bind();
}

void ApiServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::routes() {
  auto& srv = *server_;
  const std::size_t workers = std::max<std::size_t>(cfg_.worker_threads, 1);
  srv.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  // room for the multipart envelope around a maximal audio part
  srv.set_payload_max_length(pipeline_.config().max_audio_bytes + (1u << 20));
  srv.set_read_timeout(30, 0);

  if (!cfg_.cors_origin.empty()) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", cfg_.cors_origin},
                             {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                             {"Vary", "Origin"}});
  }

  srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (req.method == "OPTIONS" || req.path == "/healthz" || cfg_.auth_token.empty()) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    const std::string header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (header.size() > kBearer.size() && header.compare(0, kBearer.size(), kBearer) == 0 &&
        same_token(std::string_view(header).substr(kBearer.size()), cfg_.auth_token)) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    res.set_header("WWW-Authenticate", "Bearer");
    send_error(res, 401, "Unauthorized", "missing or invalid bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.set_exception_handler([](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      const int status = http_status(e.code());
      if (status >= 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, status, to_string(e.code()), e.what(), e.detail());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "Internal", e.what());
    }
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    switch (res.status) {
      case 404: send_error(res, 404, "NotFound", "no such route"); break;
      case 413: send_error(res, 413, to_string(Errc::PayloadTooLarge), "request body too large"); break;
      default: send_error(res, res.status, "HttpError", httplib::status_message(res.status));
    }
  });

  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  auto health = [this](const httplib::Request&, httplib::Response& res) {
    const auto& b = pipeline_.backends();
    const auto smtp = reporting::smtp_reachable(cfg_.smtp, std::chrono::milliseconds(500)) ? BackendStatus::up
                                                                                          : BackendStatus::down;
    send_json(res, 200,
              {{"status", "ok"},
               {"backends",
                {{"asr", to_string(b.asr->status())},
                 {"emotion", to_string(b.emotion->status())},
                 {"sentiment", to_string(b.sentiment->status())},
                 {"chat", to_string(b.chat->status())},
                 {"smtp", to_string(smtp)}}}});
  };
  srv.Get("/healthz", health);
  srv.Get("/api/v1/healthz", health);

  db::Store& store = pipeline_.store();

  srv.Post("/api/v1/psychologists", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto doc = body_json(req);
    send_json(res, 201, to_json(store.upsert_psychologist(required_string(doc, "name"), required_string(doc, "email"))));
  });
  srv.Get("/api/v1/psychologists", [&store](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& p : store.list_psychologists()) out.push_back(to_json(p));
    send_json(res, 200, out);
  });
  srv.Get(R"(/api/v1/psychologists/(\d+))", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto id = path_id(req);
    const auto p = store.find_psychologist(id);
    if (!p) throw Error(Errc::UnknownPsychologist, "no psychologist with id " + std::to_string(id));
    send_json(res, 200, to_json(*p));
  });
  srv.Delete(R"(/api/v1/psychologists/(\d+))", [&store](const httplib::Request& req, httplib::Response& res) {
    store.delete_psychologist(path_id(req));
    res.status = 204;
  });

  srv.Post("/api/v1/patients", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto doc = body_json(req);
    const auto p = store.upsert_patient(required_string(doc, "name"), required_int(doc, "psychologist_id"));
    send_json(res, 201, to_json(p, store));
  });
  srv.Get("/api/v1/patients", [&store](const httplib::Request& req, httplib::Response& res) {
    json out = json::array();
    for (const auto& p : store.list_patients(positive_query(req, "psychologist_id"))) out.push_back(to_json(p, store));
    send_json(res, 200, out);
  });
  srv.Get(R"(/api/v1/patients/(\d+))", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto id = path_id(req);
    const auto p = store.find_patient(id);
    if (!p) throw Error(Errc::UnknownPatient, "no patient with id " + std::to_string(id));
    send_json(res, 200, to_json(*p, store));
  });
  srv.Put(R"(/api/v1/patients/(\d+))", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto id = path_id(req);
    if (!store.find_patient(id)) throw Error(Errc::UnknownPatient, "no patient with id " + std::to_string(id));
    const auto doc = body_json(req);
    send_json(res, 200,
              to_json(store.upsert_patient(required_string(doc, "name"), required_int(doc, "psychologist_id"), id), store));
  });

  srv.Post(R"(/api/v1/patients/(\d+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto id = path_id(req);
    if (!req.is_multipart_form_data() || !req.has_file("audio")) {
      throw Error(Errc::InvalidRequest, "expected multipart/form-data with an \"audio\" field");
    }
    std::optional<dsp::WavFormat> fmt;
    if (req.has_file("format")) {
      const auto name = req.get_file_value("format").content;
      fmt = dsp::parse_wav_format(name);
      if (!fmt) throw Error(Errc::UnsupportedFormat, "unsupported format " + name);
    }
    const auto& audio = req.get_file_value("audio").content;
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(audio.data()), audio.size());
    send_json(res, 200, to_json(pipeline_.handle_message(id, bytes, fmt)));
  });

  srv.Get(R"(/api/v1/patients/(\d+)/conversations)", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto limit = positive_query(req, "limit");
    json out = json::array();
    const auto turns = store.get_history(path_id(req), limit ? std::optional<std::size_t>(*limit) : std::nullopt);
    for (const auto& t : turns) out.push_back(to_json(t));
    send_json(res, 200, out);
  });

  srv.Get(R"(/api/v1/patients/(\d+)/report)", [this, &store](const httplib::Request& req, httplib::Response& res) {
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "markdown";
    if (format != "markdown" && format != "html") throw Error(Errc::InvalidRequest, "format must be markdown or html");
    const auto report = reporting::build_report(store, path_id(req), *cfg_.report_strings, clock_());
    const auto f = format == "html" ? reporting::Format::html : reporting::Format::markdown;
    res.set_content(reporting::render_report(report, f, *cfg_.report_strings),
                    format == "html" ? "text/html; charset=utf-8" : "text/markdown; charset=utf-8");
  });

  srv.Post(R"(/api/v1/patients/(\d+)/report)", [this, &store](const httplib::Request& req, httplib::Response& res) {
    const auto report = reporting::build_report(store, path_id(req), *cfg_.report_strings, clock_());
    const auto receipt = reporting::send_report_email(report, cfg_.smtp, *cfg_.report_strings, clock_);
    send_json(res, 200,
              {{"message_id", receipt.message_id},
               {"accepted_at", format_iso8601(receipt.accepted_at)},
               {"recipient", report.psychologist.email},
               {"turns", report.turns.size()}});
  });
}

}  // namespace emotalk::service
