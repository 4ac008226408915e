#pragma once

#include <map>
#include <string>
#include <string_view>

namespace gridcert::url {

// RFC 3986 percent-encoding; everything outside the unreserved set is escaped.
std::string percent_encode(std::string_view raw);
// Strict decoding: rejects truncated or non-hex escapes. Returns false on error.
bool percent_decode(std::string_view encoded, std::string& out);

bool is_absolute(std::string_view u);

struct Parts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
  std::string query;   // without '?'
};
// Throws MalformedReturnUrl for anything that is not scheme://authority[/path][?query].
Parts split(std::string_view absolute_url);

std::map<std::string, std::string> parse_query(std::string_view query);
std::string append_query(std::string base, std::string_view key, std::string_view value);

}  // namespace gridcert::url
