#pragma once

// Just enough MIME parsing to read back what the mailer produced. Written
// against RFC 2045/2046 directly; shares no code with the library.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emotalk::test {

inline std::string base64_decode(const std::string& in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    const int v = value(c);
    if (v < 0) continue;  // whitespace, line breaks, padding
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

struct MimePart {
  std::map<std::string, std::string> headers;  // lower-cased names
  std::string body;                            // decoded
};

struct MimeMessage {
  std::map<std::string, std::string> headers;
  std::vector<MimePart> parts;
};

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Unfolds and splits a CRLF header block.
inline std::map<std::string, std::string> parse_headers(const std::string& block) {
  std::map<std::string, std::string> out;
  std::string last;
  std::size_t pos = 0;
  while (pos < block.size()) {
    auto eol = block.find("\r\n", pos);
    if (eol == std::string::npos) eol = block.size();
    const std::string line = block.substr(pos, eol - pos);
    pos = eol + 2;
    if (line.empty()) continue;
    if ((line[0] == ' ' || line[0] == '\t') && !last.empty()) {
      out[last] += line;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    last = lower(line.substr(0, colon));
    auto value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    out[last] = value;
  }
  return out;
}

// Decodes a header made of =?UTF-8?B?...?= words (other text kept as is).
inline std::string decode_words(const std::string& value) {
  std::string out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const auto start = value.find("=?", pos);
    if (start == std::string::npos) {
      out += value.substr(pos);
      break;
    }
    const std::string between = value.substr(pos, start - pos);
    if (between.find_first_not_of(" \t") != std::string::npos) out += between;
    const auto q1 = value.find('?', start + 2);
    const auto q2 = value.find('?', q1 + 1);
    const auto end = value.find("?=", q2 + 1);
    out += base64_decode(value.substr(q2 + 1, end - q2 - 1));
    pos = end + 2;
  }
  return out;
}

inline std::optional<MimeMessage> parse_mime(const std::string& raw) {
  const auto split = raw.find("\r\n\r\n");
  if (split == std::string::npos) return std::nullopt;
  MimeMessage msg;
  msg.headers = parse_headers(raw.substr(0, split + 2));
  const auto& ctype = msg.headers["content-type"];
  const auto b = ctype.find("boundary=\"");
  if (b == std::string::npos) return std::nullopt;
  const auto b_end = ctype.find('"', b + 10);
  const std::string delim = "--" + ctype.substr(b + 10, b_end - b - 10);
  const std::string body = raw.substr(split + 4);

  std::size_t pos = body.find(delim);
  while (pos != std::string::npos) {
    pos += delim.size();
    if (body.compare(pos, 2, "--") == 0) break;
    pos += 2;  // CRLF after the delimiter
    const auto next = body.find("\r\n" + delim, pos);
    if (next == std::string::npos) return std::nullopt;
    const std::string chunk = body.substr(pos, next - pos);
    const auto hsplit = chunk.find("\r\n\r\n");
    if (hsplit == std::string::npos) return std::nullopt;
    MimePart part;
    part.headers = parse_headers(chunk.substr(0, hsplit + 2));
    const std::string payload = chunk.substr(hsplit + 4);
    part.body = lower(part.headers["content-transfer-encoding"]) == "base64" ? base64_decode(payload)
                                                                           : payload;
    msg.parts.push_back(std::move(part));
    pos = next + 2;
  }
  return msg;
}

}  // namespace emotalk::test
