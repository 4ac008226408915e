#include "http.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gridcert/error.hpp"
#include "gridcert/url.hpp"

namespace gridcert::http {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Request convert(const httplib::Request& r) {
  Request out;
  out.method = r.method;
  // Raw, still percent-encoded; routing already happened on the decoded form.
  auto q = r.target.find('?');
  out.path = r.target.substr(0, q);
  if (q != std::string::npos) out.query = r.target.substr(q + 1);
  out.body = r.body;
  for (const auto& [k, v] : r.headers) out.headers.emplace(k, v);
  out.params = url::parse_query(out.query);
  for (std::size_t i = 1; i < r.matches.size(); ++i) out.captures.push_back(r.matches[i].str());
  return out;
}

void apply(const Response& in, httplib::Response& out) {
  out.status = in.status;
  for (const auto& [k, v] : in.headers) out.headers.emplace(k, v);
  out.set_content(in.body, in.content_type);
}

httplib::Server::Handler wrap(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    Response r;
    try {
      r = h(convert(req));
    } catch (const std::exception& e) {
      r = error_response(500, e);
    }
    apply(r, res);
  };
}

}  // namespace

std::string Request::header(std::string_view name) const {
  auto want = lower(name);
  for (const auto& [k, v] : headers) {
    if (lower(k) == want) return v;
  }
  return {};
}

std::string Request::cookie(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (lower(k) != "cookie") continue;
    std::string_view rest = v;
    while (!rest.empty()) {
      auto semi = rest.find(';');
      auto pair = rest.substr(0, semi);
      rest.remove_prefix(semi == std::string_view::npos ? rest.size() : semi + 1);
      while (!pair.empty() && pair.front() == ' ') pair.remove_prefix(1);
      auto eq = pair.find('=');
      if (eq != std::string_view::npos && pair.substr(0, eq) == name) {
        std::string decoded;
        if (url::percent_decode(pair.substr(eq + 1), decoded)) return decoded;
        return {};
      }
    }
  }
  return {};
}

std::string Request::param(std::string_view name) const {
  auto it = params.find(std::string(name));
  return it == params.end() ? std::string{} : it->second;
}

std::string Response::header(std::string_view name) const {
  auto want = lower(name);
  for (const auto& [k, v] : headers) {
    if (lower(k) == want) return v;
  }
  return {};
}

Response Response::text(int status, std::string body) {
  Response r;
  r.status = status;
  r.body = std::move(body);
  return r;
}

Response Response::json(int status, std::string body) {
  Response r;
  r.status = status;
  r.body = std::move(body);
  r.content_type = "application/json";
  return r;
}

Response Response::redirect(int status, std::string location) {
  Response r;
  r.status = status;
  r.headers.emplace("Location", std::move(location));
  return r;
}

Response& Response::set_cookie(std::string_view name, std::string_view value, bool expire) {
  std::string c = std::string(name) + "=" + url::percent_encode(value) + "; Path=/; HttpOnly";
  if (expire) c += "; Max-Age=0";
  headers.emplace("Set-Cookie", std::move(c));
  return *this;
}

// --- Server -----------------------------------------------------------------------

struct Server::Impl {
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
};

Server::Server() : impl_(std::make_unique<Impl>()) {}

Server::~Server() { stop(); }

void Server::get(const std::string& pattern, Handler h) { impl_->server.Get(pattern, wrap(std::move(h))); }

void Server::post(const std::string& pattern, Handler h) { impl_->server.Post(pattern, wrap(std::move(h))); }

void Server::reject_other_methods(const std::string& pattern) {
  auto reject = [](const httplib::Request&, httplib::Response& res) {
    res.status = 405;
    res.set_header("Allow", "GET");
    res.set_content("only GET is supported on this endpoint", "text/plain");
  };
  impl_->server.Post(pattern, reject);
  impl_->server.Put(pattern, reject);
  impl_->server.Delete(pattern, reject);
  impl_->server.Patch(pattern, reject);
}

int Server::start(const std::string& host, int port) {
  if (running()) return impl_->port;
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port <= 0) throw Error(Errc::ServiceUnavailable, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void Server::stop() {
  if (!impl_) return;
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

bool Server::running() const { return impl_->thread.joinable() && impl_->server.is_running(); }

std::string Server::base_url() const { return "http://" + impl_->host + ":" + std::to_string(impl_->port); }

// --- Client -----------------------------------------------------------------------

Response send(std::string_view method, std::string_view target, std::string_view body,
              std::string_view content_type, const Headers& headers, std::chrono::seconds timeout) {
  auto parts = url::split(target);
  httplib::Client cli(parts.origin);
  cli.set_follow_location(false);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  std::string path = parts.path + (parts.query.empty() ? "" : "?" + parts.query);

  httplib::Result res;
  if (method == "GET") {
    res = cli.Get(path, h);
  } else if (method == "POST") {
    res = cli.Post(path, h, std::string(body), std::string(content_type));
  } else if (method == "PUT") {
    res = cli.Put(path, h, std::string(body), std::string(content_type));
  } else if (method == "DELETE") {
    res = cli.Delete(path, h, std::string(body), std::string(content_type));
  } else {
    throw Error(Errc::InvalidConfig, "unsupported method " + std::string(method));
  }
  if (!res) {
    throw Error(Errc::ServiceUnavailable,
                std::string(target) + ": " + httplib::to_string(res.error()));
  }
  Response out;
  out.status = res->status;
  out.body = res->body;
  out.content_type = res->get_header_value("Content-Type");
  for (const auto& [k, v] : res->headers) out.headers.emplace(k, v);
  return out;
}

void throw_remote_error(const Response& r, std::string_view context) {
  Errc code = Errc::ServiceUnavailable;
  std::string detail = std::string(context) + ": HTTP " + std::to_string(r.status);
  try {
    auto j = nlohmann::json::parse(r.body);
    Errc parsed;
    if (j.contains("error") && errc_from_string(j["error"].get<std::string>(), parsed)) code = parsed;
    if (j.contains("detail")) detail = j["detail"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  throw Error(code, detail);
}

Response error_response(int status, const std::exception& e) {
  nlohmann::json j;
  if (const auto* ge = dynamic_cast<const Error*>(&e)) {
    j["error"] = std::string(to_string(ge->code()));
    j["detail"] = ge->detail();
  } else {
    j["error"] = "Internal";
    j["detail"] = e.what();
  }
  return Response::json(status, j.dump());
}

}  // namespace gridcert::http
