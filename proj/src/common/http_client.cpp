#include "emotalk/http_client.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

#include "emotalk/error.hpp"

namespace emotalk {

std::chrono::milliseconds RetryPolicy::backoff_before(int retry) const {
  if (backoff.empty()) return std::chrono::milliseconds{0};
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(retry), backoff.size() - 1);
  return backoff[idx];
}

ParsedUrl parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::InvalidConfig, "URL without scheme: " + std::string(url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string_view::npos) {
    out.origin = std::string(url);
    out.path = "/";
  } else {
    out.origin = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  return out;
}

namespace {

struct HostPort {
  std::string host;
  int port;
};

HostPort split_origin(const std::string& origin) {
  const auto scheme_end = origin.find("://");
  const bool https = origin.compare(0, scheme_end, "https") == 0;
  std::string authority = origin.substr(scheme_end + 3);
  int port = https ? 443 : 80;
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos && authority.find(']', colon) == std::string::npos) {
    port = std::stoi(authority.substr(colon + 1));
    authority.resize(colon);
  }
  return {authority, port};
}

bool is_timeout(httplib::Error err) {
  return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
}

template <class Attempt>
HttpResponse run_with_retries(const std::string& url, const RetryPolicy& policy,
                              Attempt&& attempt) {
  std::string last_failure;
  bool last_was_timeout = false;
  for (int i = 0; i <= policy.max_retries; ++i) {
    if (i > 0) std::this_thread::sleep_for(policy.backoff_before(i - 1));
    httplib::Result res = attempt();
    if (!res) {
      last_was_timeout = is_timeout(res.error());
      last_failure = httplib::to_string(res.error());
      spdlog::warn("POST {} attempt {} failed: {}", url, i + 1, last_failure);
      continue;
    }
    if (res->status >= 500) {
      last_was_timeout = false;
      last_failure = "HTTP " + std::to_string(res->status);
      spdlog::warn("POST {} attempt {} failed: {}", url, i + 1, last_failure);
      continue;
    }
    if (res->status >= 400) {
      throw Error(Errc::BackendRejected, res->body, res->status);
    }
    return HttpResponse{res->status, res->body, i};
  }
  throw Error(last_was_timeout ? Errc::Timeout : Errc::BackendUnavailable,
              url + ": " + last_failure);
}

}  // namespace

HttpClient::HttpClient(std::string url, std::string bearer_token, RetryPolicy policy)
    : url_(std::move(url)),
      parsed_(parse_url(url_)),
      bearer_(std::move(bearer_token)),
      policy_(std::move(policy)) {}

namespace {

httplib::Client make_client(const ParsedUrl& parsed, const std::string& bearer,
                            std::chrono::milliseconds timeout) {
  httplib::Client cli(parsed.origin);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  if (!bearer.empty()) cli.set_bearer_token_auth(bearer);
  return cli;
}

}  // namespace

HttpResponse HttpClient::post_json(const std::string& json_body) const {
  return run_with_retries(url_, policy_, [&] {
    auto cli = make_client(parsed_, bearer_, policy_.timeout);
    return cli.Post(parsed_.path, json_body, "application/json");
  });
}

HttpResponse HttpClient::post_multipart(const std::vector<MultipartField>& fields) const {
  httplib::MultipartFormDataItems items;
  items.reserve(fields.size());
  for (const auto& f : fields) {
    items.push_back({f.name, f.content, f.filename, f.content_type});
  }
  return run_with_retries(url_, policy_, [&] {
    auto cli = make_client(parsed_, bearer_, policy_.timeout);
    return cli.Post(parsed_.path, items);
  });
}

bool HttpClient::reachable(std::chrono::milliseconds timeout) const {
  const auto hp = split_origin(parsed_.origin);
  return tcp_probe(hp.host, hp.port, timeout);
}

bool tcp_probe(const std::string& host, int port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (getaddrinfo(host.c_str(), service.c_str(), &hints, &found) != 0) return false;
  bool ok = false;
  for (addrinfo* ai = found; ai != nullptr && !ok; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc == 0) {
      ok = true;
    } else if (errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      if (::poll(&pfd, 1, static_cast<int>(timeout.count())) == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        ok = err == 0;
      }
    }
    ::close(fd);
  }
  freeaddrinfo(found);
  return ok;
}

}  // namespace emotalk
