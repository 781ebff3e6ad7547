#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace emotalk {

/// Retry contract shared by every remote backend: `max_retries` extra
/// attempts after the first, waiting `backoff[i]` before retry i (the last
/// entry repeats), each attempt bounded by `timeout`.
struct RetryPolicy {
  int max_retries = 2;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds{500},
                                                 std::chrono::milliseconds{1000}};
  std::chrono::milliseconds timeout{30000};

  std::chrono::milliseconds backoff_before(int retry) const;
};

struct MultipartField {
  std::string name;
  std::string content;
  std::string filename;      // empty for plain form fields
  std::string content_type;  // empty for plain form fields
};

struct HttpResponse {
  int status = 0;
  std::string body;
  int retries = 0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

ParsedUrl parse_url(std::string_view url);

/// Minimal JSON/multipart POST client. Instances are immutable and may be
/// shared across threads; every request opens its own connection.
///
/// 5xx replies and transport failures are retried under the policy; a 4xx
/// reply throws BackendRejected (detail = status, message = body) at once.
/// Exhausting the retries throws Timeout when the last failure was a
/// timeout, BackendUnavailable otherwise.
class HttpClient {
 public:
  HttpClient(std::string url, std::string bearer_token, RetryPolicy policy);

  HttpResponse post_json(const std::string& json_body) const;
  HttpResponse post_multipart(const std::vector<MultipartField>& fields) const;

  /// True when a TCP connection to the endpoint can be opened.
  bool reachable(std::chrono::milliseconds timeout) const;

  const std::string& url() const noexcept { return url_; }
  const RetryPolicy& policy() const noexcept { return policy_; }

 private:
  std::string url_;
  ParsedUrl parsed_;
  std::string bearer_;
  RetryPolicy policy_;
};

/// Plain TCP reachability probe.
bool tcp_probe(const std::string& host, int port, std::chrono::milliseconds timeout);

}  // namespace emotalk
