#include "gridcert/url.hpp"

#include "gridcert/error.hpp"

namespace gridcert::url {
namespace {

bool unreserved(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
         c == '.' || c == '_' || c == '~';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

std::string percent_encode(std::string_view raw) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size() * 3);
  for (unsigned char c : raw) {
    if (unreserved(c)) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xf];
    }
  }
  return out;
}

bool percent_decode(std::string_view encoded, std::string& out) {
  out.clear();
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    char c = encoded[i];
    if (c == '%') {
      if (i + 2 >= encoded.size()) return false;
      int hi = hex_value(encoded[i + 1]);
      int lo = hex_value(encoded[i + 2]);
      if (hi < 0 || lo < 0) return false;
      out += static_cast<char>(hi * 16 + lo);
      i += 2;
    } else if (c == '+') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return true;
}

bool is_absolute(std::string_view u) {
  auto colon = u.find("://");
  if (colon == std::string_view::npos || colon == 0) return false;
  for (std::size_t i = 0; i < colon; ++i) {
    char c = u[i];
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (i > 0 && (c == '+' || c == '-' || c == '.' ||
                                                                          (c >= '0' && c <= '9')));
    if (!ok) return false;
  }
  return u.size() > colon + 3;
}

Parts split(std::string_view absolute_url) {
  if (!is_absolute(absolute_url)) {
    throw Error(Errc::MalformedReturnUrl, "not an absolute URL: " + std::string(absolute_url));
  }
  auto authority_start = absolute_url.find("://") + 3;
  auto path_start = absolute_url.find_first_of("/?", authority_start);
  Parts p;
  p.origin = std::string(absolute_url.substr(0, path_start));
  if (path_start == std::string_view::npos) {
    p.path = "/";
    return p;
  }
  std::string rest(absolute_url.substr(path_start));
  auto q = rest.find('?');
  p.path = rest.substr(0, q);
  if (p.path.empty()) p.path = "/";
  if (q != std::string::npos) p.query = rest.substr(q + 1);
  return p;
}

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  while (!query.empty()) {
    auto amp = query.find('&');
    auto pair = query.substr(0, amp);
    query.remove_prefix(amp == std::string_view::npos ? query.size() : amp + 1);
    if (pair.empty()) continue;
    auto eq = pair.find('=');
    std::string key, value;
    if (!percent_decode(pair.substr(0, eq), key)) continue;
    if (eq != std::string_view::npos && !percent_decode(pair.substr(eq + 1), value)) continue;
    out.emplace(std::move(key), std::move(value));
  }
  return out;
}

std::string append_query(std::string base, std::string_view key, std::string_view value) {
  base += base.find('?') == std::string::npos ? '?' : '&';
  base += percent_encode(key);
  base += '=';
  base += percent_encode(value);
  return base;
}

}  // namespace gridcert::url
