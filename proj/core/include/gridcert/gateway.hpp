#pragma once

// The credential endpoints (slcs-init, voms-proxy-init, renew) and the portal
// side with its certificate/proxy guards. The two run as separate HTTP
// services and only talk through browser redirects and cookies.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridcert/clock.hpp"
#include "gridcert/event_log.hpp"
#include "gridcert/proxy.hpp"
#include "gridcert/slcs_client.hpp"
#include "gridcert/sso.hpp"
#include "gridcert/store.hpp"

namespace gridcert {
namespace http {
class Server;
struct Request;
struct Response;
}  // namespace http

namespace gateway {

namespace fs = std::filesystem;

inline constexpr std::string_view kCertificateFile = "usercert.pem";
inline constexpr std::string_view kKeyFile = "userkey.pem";
inline constexpr std::string_view kPassphraseFile = "userkey.pass";
inline constexpr std::string_view kProxyFile = "proxy.pem";

struct CookieNames {
  std::string session = "sp-session";
  std::string location = "gcl-location";
  std::string secret = "gcl-secret";
};

struct GatewayConfig {
  fs::path store_root;
  // Handshake locations must lie strictly inside this directory; defaults to store_root.
  std::optional<fs::path> prefix_allowlist;
  // When false, credentials go to store_root/<user> with no marker check.
  bool require_handshake = true;
  std::string sp_logout_url;
  std::string idp_assert_url;
  std::size_t max_return_url = sso::kDefaultReturnUrlLimit;
  CookieNames cookies;
};

class CredentialGateway {
 public:
  CredentialGateway(GatewayConfig config, sso::ServiceProvider& sp, slcs::SlcsFactoryConfig slcs,
                    proxy::ProxyFactoryConfig proxy, const Clock& clock);
  ~CredentialGateway();

  int start(int port = 0);
  void stop();
  std::string base_url() const;
  std::string slcs_init_url() const { return base_url() + "/gcl/slcs-init"; }
  std::string voms_proxy_init_url() const { return base_url() + "/gcl/voms-proxy-init"; }
  std::string renew_url() const { return base_url() + "/gcl/renew"; }

  void set_event_log(EventLog* log) noexcept { log_ = log; }

 private:
  http::Response slcs_init(const http::Request& req);
  http::Response voms_proxy_init(const http::Request& req);
  http::Response renew(const http::Request& req);
  http::Response renewal_redirect(const std::string& self) const;
  http::Response finish(const http::Request& req, std::string listing) const;
  std::string self_url(const http::Request& req) const;
  fs::path prefix() const;

  GatewayConfig config_;
  sso::ServiceProvider& sp_;
  slcs::SlcsFactoryConfig slcs_;
  proxy::ProxyFactoryConfig proxy_;
  const Clock& clock_;
  EventLog* log_ = nullptr;
  std::unique_ptr<http::Server> server_;
};

using Environment = std::map<std::string, std::string>;

struct GuardOutcome {
  enum class Kind { Pass, Redirect };
  Kind kind = Kind::Redirect;
  Environment environment;  // set on Pass
  std::string location;     // set on Redirect
  std::map<std::string, std::string> cookies;

  bool passed() const noexcept { return kind == Kind::Pass; }
};

struct PortalConfig {
  fs::path store_root;
  std::string slcs_init_url;
  std::string voms_proxy_init_url;
  std::string idp_assert_url;
  Duration certificate_min_remaining{86'400};
  Duration proxy_min_remaining{3'600};
  std::vector<std::string> default_vos = {"life"};
  std::string certificate_variable = "X509_USER_CERT";
  std::string key_variable = "X509_USER_KEY";
  std::string proxy_variable = "X509_USER_PROXY";
  CookieNames cookies;
};

struct PortalRequest {
  std::string user;
  std::string url;
  std::map<std::string, std::string> params;
};

// Returns the response body for a request that passed its guard.
using PortalHandler = std::function<std::string(const PortalRequest&, const Environment&)>;

class Portal {
 public:
  Portal(PortalConfig config, sso::ServiceProvider& sp, const Clock& clock);
  ~Portal();

  // Register before start().
  void login_required(const std::string& path, PortalHandler handler);
  void certificate_required(const std::string& path, PortalHandler handler);
  void gridproxy_required(const std::string& path, PortalHandler handler);

  int start(int port = 0);
  void stop();
  std::string base_url() const;

  // Guard decisions for an already authenticated user. The hot path only
  // stats the credential and its sidecar.
  GuardOutcome guard_certificate(const std::string& user, const std::string& url);
  GuardOutcome guard_proxy(const std::string& user, const std::string& url);

  void set_user_vos(const std::string& user, std::vector<std::string> vos);
  std::vector<std::string> vos_for(const std::string& user) const;
  std::optional<fs::path> location_of(const std::string& user) const;

 private:
  enum class Need { Login, Certificate, Proxy };
  void route(const std::string& path, Need need, PortalHandler handler);
  GuardOutcome acquire_certificate(const std::string& user, const std::string& url);

  PortalConfig config_;
  sso::ServiceProvider& sp_;
  const Clock& clock_;
  mutable std::mutex mu_;
  std::map<std::string, fs::path> locations_;
  // Handshakes handed out but not yet consumed, reused by concurrent first visits.
  std::map<std::string, store::MarkerHandshake> pending_;
  std::map<std::string, std::vector<std::string>> user_vos_;
  std::unique_ptr<http::Server> server_;
};

}  // namespace gateway
}  // namespace gridcert
