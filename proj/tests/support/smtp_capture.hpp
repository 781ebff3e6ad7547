#pragma once

// Minimal loopback SMTP server that records what clients send. Enough of
// RFC 5321 for libcurl: EHLO/HELO, MAIL, RCPT, DATA, RSET, NOOP, QUIT.
// It never offers STARTTLS or AUTH.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace emotalk::test {

struct CapturedMail {
  std::string mail_from;
  std::vector<std::string> rcpt_to;
  std::string data;  // dot-unstuffed, CRLF line endings, without the final "."
};

class SmtpCaptureServer {
 public:
  /// rcpt_reply / data_reply: the code answered to RCPT TO and after DATA.
  explicit SmtpCaptureServer(int rcpt_reply = 250, int data_reply = 250)
      : rcpt_reply_(rcpt_reply), data_reply_(data_reply) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    ::listen(listen_fd_, 16);
    thread_ = std::thread([this] { accept_loop(); });
  }

  SmtpCaptureServer(const SmtpCaptureServer&) = delete;
  SmtpCaptureServer& operator=(const SmtpCaptureServer&) = delete;

  ~SmtpCaptureServer() {
    stop_ = true;
    thread_.join();
    ::close(listen_fd_);
  }

  int port() const { return port_; }

  std::vector<CapturedMail> messages() const {
    std::lock_guard lock(mutex_);
    return messages_;
  }

 private:
  void accept_loop() {
    while (!stop_) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 50) != 1) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      serve(fd);
      ::close(fd);
    }
  }

  // Reads one CRLF-terminated line; false on EOF, timeout or shutdown.
  bool read_line(int fd, std::string& buffer, std::string& line) {
    for (;;) {
      const auto eol = buffer.find("\r\n");
      if (eol != std::string::npos) {
        line = buffer.substr(0, eol);
        buffer.erase(0, eol + 2);
        return true;
      }
      pollfd pfd{fd, POLLIN, 0};
      if (stop_ || ::poll(&pfd, 1, 2000) != 1) return false;
      char chunk[4096];
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) return false;
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  static void reply(int fd, const std::string& text) {
    const std::string wire = text + "\r\n";
    ::send(fd, wire.data(), wire.size(), MSG_NOSIGNAL);
  }

  static bool starts_with_ci(const std::string& s, const char* prefix) {
    for (std::size_t i = 0; prefix[i] != '\0'; ++i) {
      if (i >= s.size() || std::toupper(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    }
    return true;
  }

  void serve(int fd) {
    std::string buffer, line;
    CapturedMail current;
    reply(fd, "220 capture.test ESMTP ready");
    while (read_line(fd, buffer, line)) {
      if (starts_with_ci(line, "EHLO")) {
        reply(fd, "250-capture.test greets you");
        reply(fd, "250-8BITMIME");
        reply(fd, "250 SIZE 52428800");
      } else if (starts_with_ci(line, "HELO")) {
        reply(fd, "250 capture.test");
      } else if (starts_with_ci(line, "MAIL FROM:")) {
        current = {};
        current.mail_from = line.substr(10);
        reply(fd, "250 sender ok");
      } else if (starts_with_ci(line, "RCPT TO:")) {
        if (rcpt_reply_ == 250) {
          current.rcpt_to.push_back(line.substr(8));
          reply(fd, "250 recipient ok");
        } else {
          reply(fd, std::to_string(rcpt_reply_) + " mailbox unavailable");
        }
      } else if (starts_with_ci(line, "DATA")) {
        reply(fd, "354 end data with <CR><LF>.<CR><LF>");
        std::string data;
        while (read_line(fd, buffer, line) && line != ".") {
          if (!line.empty() && line[0] == '.') line.erase(0, 1);
          data += line + "\r\n";
        }
        current.data = std::move(data);
        if (data_reply_ == 250) {
          {
            std::lock_guard lock(mutex_);
            messages_.push_back(current);
          }
          reply(fd, "250 queued");
        } else {
          reply(fd, std::to_string(data_reply_) + " message rejected");
        }
      } else if (starts_with_ci(line, "RSET") || starts_with_ci(line, "NOOP")) {
        reply(fd, "250 ok");
      } else if (starts_with_ci(line, "QUIT")) {
        reply(fd, "221 bye");
        return;
      } else {
        reply(fd, "502 command not implemented");
      }
    }
  }

  int rcpt_reply_;
  int data_reply_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<CapturedMail> messages_;
};

}  // namespace emotalk::test
