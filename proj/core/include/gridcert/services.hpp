#pragma once

// Loopback HTTP front-ends for the simulators, and a bundle that boots all of
// them in-process for tests, the demo and --self-contained CLI runs.

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridcert/ca.hpp"
#include "gridcert/clock.hpp"
#include "gridcert/proxy.hpp"
#include "gridcert/slcs_client.hpp"
#include "gridcert/sso.hpp"
#include "gridcert/voms.hpp"

namespace gridcert {
namespace http {
class Server;
}

namespace services {

inline constexpr std::string_view kIdpSessionCookie = "idp-session";
inline constexpr std::string_view kSpSessionCookie = "sp-session";
// Set on every response that would need a human in front of the browser.
inline constexpr std::string_view kInteractiveHeader = "X-Interactive";

// GET  /idp/login?user=&return=   interactive login, sets idp-session
// GET  /idp/assert?return=        assertion from the IdP session, sets sp-session
// GET  /sp/logout?return=         drops the SP session and non-whitelisted cookies
// POST /idp/ecp                   {"user": ...} -> assertion JSON (non-browser clients)
class SsoService {
 public:
  SsoService(sso::IdentityProvider& idp, sso::ServiceProvider& sp, const Clock& clock,
             std::set<std::string> cookie_whitelist = {std::string(kIdpSessionCookie), "gcl-location",
                                                       "gcl-secret"});
  ~SsoService();

  int start(int port = 0);
  void stop();
  std::string base_url() const;
  std::string login_url() const { return base_url() + "/idp/login"; }
  std::string assert_url() const { return base_url() + "/idp/assert"; }
  std::string logout_url() const { return base_url() + "/sp/logout"; }
  std::string ecp_url() const { return base_url() + "/idp/ecp"; }

 private:
  sso::IdentityProvider& idp_;
  sso::ServiceProvider& sp_;
  const Clock& clock_;
  std::set<std::string> whitelist_;
  std::unique_ptr<http::Server> server_;
};

// POST /slcs/login         assertion JSON -> login response JSON
// POST /slcs/certificate   {"csr", "token", "lifetime"} -> PEM
// GET  /slcs/ca            CA certificate PEM
class CaService {
 public:
  CaService(ca::CertificateAuthority& ca, const Clock& clock);
  ~CaService();

  int start(int port = 0);
  void stop();
  std::string base_url() const;
  std::string login_url() const { return base_url() + "/slcs/login"; }
  std::string sign_url() const { return base_url() + "/slcs/certificate"; }

 private:
  ca::CertificateAuthority& ca_;
  const Clock& clock_;
  std::unique_ptr<http::Server> server_;
};

// POST /voms/<vo>/grant   {"holder", "fqans", "lifetime"} -> grant JSON
class VomsService {
 public:
  explicit VomsService(const Clock& clock);
  ~VomsService();

  void add(const voms::VomsServer& server);
  int start(int port = 0);
  void stop();
  std::string base_url() const;
  std::string endpoint(std::string_view vo) const { return base_url() + "/voms/" + std::string(vo) + "/grant"; }

 private:
  const Clock& clock_;
  std::map<std::string, const voms::VomsServer*, std::less<>> servers_;
  std::unique_ptr<http::Server> server_;
};

// Requests an assertion over the ECP endpoint. Throws UnknownUser or ServiceUnavailable.
Assertion ecp_assertion(std::string_view ecp_url, std::string_view user);

// Everything the pipeline talks to, on ephemeral loopback ports.
class SimulatedFederation {
 public:
  struct Options {
    bool start_sso = true;
    bool start_ca = true;
    bool start_voms = true;
    ca::CaConfig ca;
    sso::IdentityProvider::Config idp;
    sso::ServiceProvider::Config sp;
    std::vector<std::string> vos = {"life"};
  };

  SimulatedFederation(const Clock& clock, Options options);
  explicit SimulatedFederation(const Clock& clock) : SimulatedFederation(clock, Options{}) {}
  ~SimulatedFederation();

  // Registers the user at the IdP and as a member of every simulated VO.
  SubjectDn enroll(const std::string& user, const std::vector<std::string>& vos = {});

  void stop();

  slcs::SlcsFactoryConfig slcs_config(const std::filesystem::path& store) const;
  proxy::ProxyFactoryConfig proxy_config(const std::filesystem::path& store) const;

  sso::IdentityProvider& idp() noexcept { return idp_; }
  sso::ServiceProvider& sp() noexcept { return sp_; }
  ca::CertificateAuthority& ca() noexcept { return ca_; }
  voms::VomsServer& vo(std::string_view name);
  SsoService& sso_http() noexcept { return sso_http_; }
  CaService& ca_http() noexcept { return ca_http_; }
  VomsService& voms_http() noexcept { return voms_http_; }
  const Options& options() const noexcept { return options_; }

 private:
  const Clock& clock_;
  Options options_;
  sso::IdentityProvider idp_;
  sso::ServiceProvider sp_;
  ca::CertificateAuthority ca_;
  std::map<std::string, std::unique_ptr<voms::VomsServer>, std::less<>> vos_;
  SsoService sso_http_;
  CaService ca_http_;
  VomsService voms_http_;
};

}  // namespace services
}  // namespace gridcert
