#pragma once

// Scripted browser: follows redirects with GET, keeps a per-host cookie jar
// and counts responses that would have needed a human.

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace gridcert {

class Browser {
 public:
  struct Hop {
    std::string url;
    int status = 0;
    bool interactive = false;
  };

  struct Result {
    int status = 0;
    std::string body;
    std::string final_url;
    // Every request made, the initial one included.
    std::vector<Hop> hops;
    int redirects = 0;
    int interactive_steps = 0;
  };

  // Throws ServiceUnavailable when a hop cannot be reached.
  Result get(const std::string& url, int max_redirects = 16);

  // Cookies are scoped to the host; ports are ignored like real browsers do.
  void set_cookie(const std::string& host, const std::string& name, const std::string& value);
  std::string cookie(const std::string& host, const std::string& name) const;
  void clear_cookies();

 private:
  std::string cookie_header(const std::string& host) const;
  void store_cookie(const std::string& host, const std::string& set_cookie);

  mutable std::mutex mu_;
  std::map<std::string, std::map<std::string, std::string>> jar_;  // host -> name -> raw value
};

}  // namespace gridcert
