#pragma once

// Simulated federation: identity provider, service-provider session cache and
// the assertion-renewal redirect state machine.

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gridcert/clock.hpp"
#include "gridcert/crypto.hpp"
#include "gridcert/model.hpp"

namespace gridcert::sso {

inline constexpr std::size_t kDefaultReturnUrlLimit = 2000;

using CookieMap = std::map<std::string, std::string>;

struct IdpSession {
  std::string id;
  std::string user_id;
  Timestamp created_at{};
  Duration validity{kDefaultSessionValidity};

  bool active(Timestamp now) const noexcept { return now <= created_at + validity; }
};

struct SpSession {
  std::string id;
  Assertion assertion;
  std::string idp_session_id;
  Timestamp created_at{};
  Duration validity{kDefaultSessionValidity};

  bool active(Timestamp now) const noexcept { return now <= created_at + validity; }
};

// One hop of a browser redirect chain. Only GET exists: there is deliberately
// no field that could carry a request body.
struct RedirectStep {
  enum class Kind { Logout, RenewEntry, ReAuth, Return };

  Kind kind;
  std::string url;
  CookieMap cookies;
  bool interactive = false;

  static constexpr std::string_view method = "GET";
};

static_assert(RedirectStep::method == "GET");

std::string_view to_string(RedirectStep::Kind k) noexcept;

bool verify_assertion(const Assertion& a, const crypto::PublicKey& idp_key);

class IdentityProvider {
 public:
  struct Config {
    std::string entity_id = "https://idp.simfed.example/idp";
    Duration session_validity{kDefaultSessionValidity};
    Duration assertion_validity{kDefaultAssertionValidity};
  };

  IdentityProvider();
  explicit IdentityProvider(Config config);

  void register_user(std::string user_id, std::map<std::string, std::string> attributes = {});
  bool has_user(std::string_view user_id) const;

  // Throws UnknownUser.
  IdpSession login(std::string_view user_id, Timestamp now);
  std::optional<IdpSession> find_session(std::string_view session_id) const;

  // Throws SessionExpired when the session is no longer active.
  Assertion issue_assertion(const IdpSession& session, Timestamp now) const;
  Assertion issue_assertion(std::string_view session_id, Timestamp now) const;

  const crypto::PublicKey& public_key() const noexcept { return public_key_; }
  const Config& config() const noexcept { return config_; }

 private:
  Config config_;
  crypto::PrivateKey signing_key_;
  crypto::PublicKey public_key_;
  mutable std::mutex mu_;
  std::map<std::string, std::map<std::string, std::string>, std::less<>> users_;
  std::map<std::string, IdpSession, std::less<>> sessions_;
};

class ServiceProvider {
 public:
  struct Config {
    Duration session_validity{kDefaultSessionValidity};
  };

  ServiceProvider() = default;
  explicit ServiceProvider(Config config) : config_(config) {}

  SpSession establish(Assertion assertion, std::string idp_session_id, Timestamp now);
  std::optional<SpSession> find(std::string_view session_id) const;
  bool contains(std::string_view session_id) const;

  // Destroys the cached session and redirects to return_url. Throws NoSuchSession.
  RedirectStep logout(std::string_view session_id, std::string return_url);

 private:
  Config config_;
  mutable std::mutex mu_;
  std::map<std::string, SpSession, std::less<>> sessions_;
};

// base + "/" + percent-encoded(original) as a single trailing path segment.
// Throws UrlTooLong when original exceeds limit, MalformedReturnUrl when it
// is not absolute.
std::string encode_return_url(std::string_view base, std::string_view original,
                              std::size_t limit = kDefaultReturnUrlLimit);
// Decodes the trailing path segment of a renewal URL. Throws MalformedReturnUrl.
std::string decode_return_url(std::string_view renewal_url);

class AssertionRenewal {
 public:
  struct Config {
    std::string logout_url = "https://sp.simfed.example/sp/logout";
    std::string renew_url = "https://sp.simfed.example/renew";
    std::string idp_url = "https://idp.simfed.example/idp/assert";
    std::string session_cookie = "sp-session";
    std::size_t max_return_url = kDefaultReturnUrlLimit;
    // Cookies that survive the logout hop; everything else is dropped there.
    std::set<std::string> cookie_whitelist;
  };

  struct Result {
    SpSession session;
    std::vector<RedirectStep> trace;
  };

  AssertionRenewal(Config config, IdentityProvider& idp, ServiceProvider& sp)
      : config_(std::move(config)), idp_(idp), sp_(sp) {}

  // Logout, re-enter the renewal URL, re-authenticate at the IdP, return to
  // original_url. Throws SessionExpired, UrlTooLong or NoSuchSession.
  Result run(const SpSession& session, std::string_view original_url, Timestamp now,
             const CookieMap& carried = {});

  std::string renewal_url_for(std::string_view original_url) const {
    return encode_return_url(config_.renew_url, original_url, config_.max_return_url);
  }

 private:
  Config config_;
  IdentityProvider& idp_;
  ServiceProvider& sp_;
};

}  // namespace gridcert::sso
