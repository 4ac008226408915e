#pragma once

// Internal HTTP plumbing over cpp-httplib. Only http.cpp includes httplib.h.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace gridcert::http {

using Headers = std::multimap<std::string, std::string>;

struct Request {
  std::string method;
  std::string path;   // as sent, not percent-decoded
  std::string query;  // raw, without '?'
  std::string body;
  Headers headers;
  std::map<std::string, std::string> params;
  std::vector<std::string> captures;  // regex groups of the matched route

  std::string header(std::string_view name) const;
  std::string cookie(std::string_view name) const;
  std::string param(std::string_view name) const;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "text/plain";
  Headers headers;

  std::string header(std::string_view name) const;

  static Response text(int status, std::string body);
  static Response json(int status, std::string body);
  static Response redirect(int status, std::string location);
  Response& set_cookie(std::string_view name, std::string_view value, bool expire = false);
};

using Handler = std::function<Response(const Request&)>;

class Server {
 public:
  Server();
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void get(const std::string& pattern, Handler h);
  void post(const std::string& pattern, Handler h);
  // Any other method on these patterns is answered with 405.
  void reject_other_methods(const std::string& pattern);

  // Binds to host:port (0 = ephemeral) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  bool running() const;
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Issues one request without following redirects. Throws
// Error(ServiceUnavailable) when the server cannot be reached.
Response send(std::string_view method, std::string_view url, std::string_view body = {},
              std::string_view content_type = "application/json", const Headers& headers = {},
              std::chrono::seconds timeout = std::chrono::seconds{30});

// Maps a JSON error document {"error": "...", "detail": "..."} back to Error.
[[noreturn]] void throw_remote_error(const Response& r, std::string_view context);
Response error_response(int status, const std::exception& e);

}  // namespace gridcert::http
