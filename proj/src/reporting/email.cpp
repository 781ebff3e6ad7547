#include <curl/curl.h>
#include <openssl/evp.h>

#include <cstdio>
#include <cstring>
#include <mutex>
#include <random>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"
#include "emotalk/http_client.hpp"
#include "emotalk/reporting.hpp"

namespace emotalk::reporting {

namespace {

std::string base64(std::string_view in) {
  std::string out(4 * ((in.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(in.data()),
                                static_cast<int>(in.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_lines(std::string_view in) {
  const std::string flat = base64(in);
  std::string out;
  for (std::size_t i = 0; i < flat.size(); i += 76) {
    out += flat.substr(i, 76);
    out += "\r\n";
  }
  return out;
}

bool is_ascii_printable(std::string_view s) {
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u > 0x7E) return false;
  }
  return true;
}

// RFC 2047 B-encoding, split on UTF-8 boundaries so each word stays
// under the 75-character limit.
std::string encode_header_words(std::string_view text) {
  if (is_ascii_printable(text)) return std::string(text);
  constexpr std::size_t kChunk = 39;  // 52 base64 chars, leaving room for "Subject: "
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = std::min(text.size(), pos + kChunk);
    while (end < text.size() && end > pos && (static_cast<unsigned char>(text[end]) & 0xC0) == 0x80) {
      --end;
    }
    if (!out.empty()) out += "\r\n ";
    out += "=?UTF-8?B?" + base64(text.substr(pos, end - pos)) + "?=";
    pos = end;
  }
  return out;
}

std::string crlf(std::string_view text) {
  std::string out;
  out.reserve(text.size() + text.size() / 16);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' && (i == 0 || text[i - 1] != '\r')) out += '\r';
    out += text[i];
  }
  return out;
}

std::string domain_of(const std::string& address) {
  const auto at = address.rfind('@');
  return at == std::string::npos || at + 1 == address.size() ? "localhost" : address.substr(at + 1);
}

std::string random_hex(std::size_t bytes) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::string out;
  char buf[3];
  for (std::size_t i = 0; i < bytes; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned>(rng() & 0xFF));
    out += buf;
  }
  return out;
}

struct Payload {
  std::string data;
  std::size_t offset = 0;
};

std::size_t read_payload(char* buffer, std::size_t size, std::size_t nitems, void* user) {
  auto* p = static_cast<Payload*>(user);
  const std::size_t n = std::min(size * nitems, p->data.size() - p->offset);
  std::memcpy(buffer, p->data.data() + p->offset, n);
  p->offset += n;
  return n;
}

void ensure_curl() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

struct CurlDeleter {
  void operator()(CURL* c) const { curl_easy_cleanup(c); }
};
struct SlistDeleter {
  void operator()(curl_slist* s) const { curl_slist_free_all(s); }
};

}  // namespace

SmtpConfig smtp_config_from_env() {
  SmtpConfig c;
  c.host = env_or("ET_SMTP_HOST", c.host);
  c.port = static_cast<int>(env_int_or("ET_SMTP_PORT", c.port));
  c.user = env_or("ET_SMTP_USER", "");
  c.pass = env_or("ET_SMTP_PASS", "");
  c.from = env_or("ET_SMTP_FROM", c.from);
  return c;
}

std::string build_mime(const EmailMessage& m, const std::string& boundary) {
  std::string out;
  out += "From: " + m.from + "\r\n";
  out += "To: " + m.to + "\r\n";
  out += "Subject: " + encode_header_words(m.subject) + "\r\n";
  out += "Date: " + format_rfc5322(m.date) + "\r\n";
  out += "Message-ID: " + m.message_id + "\r\n";
  out += "MIME-Version: 1.0\r\n";
  out += "Content-Type: multipart/alternative; boundary=\"" + boundary + "\"\r\n";
  out += "\r\n";
  auto part = [&](const char* type, const std::string& body) {
    out += "--" + boundary + "\r\n";
    out += std::string("Content-Type: ") + type + "; charset=UTF-8\r\n";
    out += "Content-Transfer-Encoding: base64\r\n\r\n";
    const std::string encoded = base64_lines(crlf(body));
    // the CRLF before the next delimiter belongs to the delimiter
    out += encoded.empty() ? "\r\n" : encoded;
  };
  part("text/plain", m.text_body);
  part("text/html", m.html_body);
  out += "--" + boundary + "--\r\n";
  return out;
}

EmailMessage compose_report_email(const Report& report, const ReportStrings& strings,
                                  const SmtpConfig& smtp, Timestamp now) {
  EmailMessage m;
  m.from = smtp.from;
  m.to = report.psychologist.email;
  m.subject = strings.format("subject", {{"patient", report.patient.name}});
  m.date = now;
  m.message_id = "<" + std::to_string(now.time_since_epoch().count()) + "." + random_hex(8) + "@" +
                 domain_of(smtp.from) + ">";
  m.text_body = render_report(report, Format::markdown, strings);
  m.html_body = render_report(report, Format::html, strings);
  return m;
}

DeliveryReceipt send_email(const EmailMessage& message, const SmtpConfig& smtp, const Clock& clock) {
  if (!db::is_valid_email(message.to)) {
    throw Error(Errc::InvalidEmail, "invalid recipient address: " + message.to);
  }
  ensure_curl();
  std::unique_ptr<CURL, CurlDeleter> curl(curl_easy_init());
  if (!curl) throw Error(Errc::SmtpConnectFailed, "cannot initialise SMTP client");

  const std::string scheme = smtp.port == 465 ? "smtps://" : "smtp://";
  const std::string url = scheme + smtp.host + ":" + std::to_string(smtp.port);
  const std::string mail_from = "<" + smtp.from + ">";
  std::unique_ptr<curl_slist, SlistDeleter> rcpt(
      curl_slist_append(nullptr, ("<" + message.to + ">").c_str()));
  Payload payload{build_mime(message, "=_emotalk_" + random_hex(12)), 0};
  char errbuf[CURL_ERROR_SIZE] = {0};

  CURL* c = curl.get();
  curl_easy_setopt(c, CURLOPT_URL, url.c_str());
  curl_easy_setopt(c, CURLOPT_MAIL_FROM, mail_from.c_str());
  curl_easy_setopt(c, CURLOPT_MAIL_RCPT, rcpt.get());
  curl_easy_setopt(c, CURLOPT_READFUNCTION, read_payload);
  curl_easy_setopt(c, CURLOPT_READDATA, &payload);
  curl_easy_setopt(c, CURLOPT_UPLOAD, 1L);
  curl_easy_setopt(c, CURLOPT_USE_SSL, static_cast<long>(CURLUSESSL_TRY));
  curl_easy_setopt(c, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(c, CURLOPT_CONNECTTIMEOUT_MS, static_cast<long>(smtp.timeout.count()));
  curl_easy_setopt(c, CURLOPT_TIMEOUT_MS, static_cast<long>(smtp.timeout.count()));
  curl_easy_setopt(c, CURLOPT_ERRORBUFFER, errbuf);
  if (!smtp.user.empty()) {
    curl_easy_setopt(c, CURLOPT_USERNAME, smtp.user.c_str());
    curl_easy_setopt(c, CURLOPT_PASSWORD, smtp.pass.c_str());
  }

  const CURLcode rc = curl_easy_perform(c);
  if (rc == CURLE_OK) return DeliveryReceipt{message.message_id, clock()};

  long reply = 0;
  curl_easy_getinfo(c, CURLINFO_RESPONSE_CODE, &reply);
  const std::string why = errbuf[0] != '\0' ? errbuf : curl_easy_strerror(rc);
  if (reply >= 400) {
    throw Error(Errc::SmtpRejected, "SMTP server " + url + " replied " + std::to_string(reply) + ": " + why,
                static_cast<int>(reply));
  }
  throw Error(Errc::SmtpConnectFailed, "SMTP delivery via " + url + " failed: " + why);
}

DeliveryReceipt send_report_email(const Report& report, const SmtpConfig& smtp,
                                  const ReportStrings& strings, const Clock& clock) {
  return send_email(compose_report_email(report, strings, smtp, clock()), smtp, clock);
}

bool smtp_reachable(const SmtpConfig& smtp, std::chrono::milliseconds timeout) {
  return tcp_probe(smtp.host, smtp.port, timeout);
}

}  // namespace emotalk::reporting
