#include "gridcert/browser.hpp"

#include "gridcert/error.hpp"
#include "gridcert/url.hpp"
#include "http.hpp"

namespace gridcert {
namespace {

std::string host_of(const std::string& absolute) {
  auto origin = url::split(absolute).origin;
  auto start = origin.find("://") + 3;
  auto host = origin.substr(start);
  auto at = host.rfind('@');
  if (at != std::string::npos) host = host.substr(at + 1);
  auto colon = host.rfind(':');
  if (colon != std::string::npos && host.find(']') == std::string::npos) host = host.substr(0, colon);
  return host;
}

bool is_redirect(int status) {
  return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

}  // namespace

Browser::Result Browser::get(const std::string& start, int max_redirects) {
  Result result;
  std::string current = start;
  for (;;) {
    const auto host = host_of(current);
    http::Headers headers;
    auto cookies = cookie_header(host);
    if (!cookies.empty()) headers.emplace("Cookie", cookies);

    auto r = http::send("GET", current, {}, {}, headers);
    for (const auto& [k, v] : r.headers) {
      if (k == "Set-Cookie" || k == "set-cookie") store_cookie(host, v);
    }
    Hop hop{current, r.status, !r.header("X-Interactive").empty()};
    result.hops.push_back(hop);
    if (hop.interactive) ++result.interactive_steps;

    if (!is_redirect(r.status)) {
      result.status = r.status;
      result.body = std::move(r.body);
      result.final_url = current;
      return result;
    }
    auto location = r.header("Location");
    if (location.empty()) throw Error(Errc::MalformedReturnUrl, "redirect without Location from " + current);
    if (!url::is_absolute(location)) location = url::split(current).origin + location;
    if (++result.redirects > max_redirects) {
      result.status = r.status;
      result.final_url = current;
      return result;
    }
    current = location;
  }
}

void Browser::set_cookie(const std::string& host, const std::string& name, const std::string& value) {
  std::lock_guard lock(mu_);
  jar_[host][name] = url::percent_encode(value);
}

std::string Browser::cookie(const std::string& host, const std::string& name) const {
  std::lock_guard lock(mu_);
  auto h = jar_.find(host);
  if (h == jar_.end()) return {};
  auto c = h->second.find(name);
  if (c == h->second.end()) return {};
  std::string decoded;
  return url::percent_decode(c->second, decoded) ? decoded : std::string{};
}

void Browser::clear_cookies() {
  std::lock_guard lock(mu_);
  jar_.clear();
}

std::string Browser::cookie_header(const std::string& host) const {
  std::lock_guard lock(mu_);
  std::string out;
  auto h = jar_.find(host);
  if (h == jar_.end()) return out;
  for (const auto& [name, value] : h->second) {
    if (!out.empty()) out += "; ";
    out += name + "=" + value;
  }
  return out;
}

void Browser::store_cookie(const std::string& host, const std::string& set_cookie) {
  auto semi = set_cookie.find(';');
  auto pair = set_cookie.substr(0, semi);
  auto eq = pair.find('=');
  if (eq == std::string::npos || eq == 0) return;
  auto name = pair.substr(0, eq);
  auto value = pair.substr(eq + 1);
  bool expire = set_cookie.find("Max-Age=0", semi == std::string::npos ? set_cookie.size() : semi) !=
                std::string::npos;
  std::lock_guard lock(mu_);
  if (expire) {
    jar_[host].erase(name);
  } else {
    jar_[host][name] = value;
  }
}

}  // namespace gridcert
