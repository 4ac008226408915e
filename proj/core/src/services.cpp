#include "gridcert/services.hpp"

#include <algorithm>

#include <json.hpp>

#include "gridcert/error.hpp"
#include "gridcert/url.hpp"
#include "http.hpp"

namespace gridcert::services {

using nlohmann::json;

namespace {

constexpr std::string_view kUnreachable = "http://127.0.0.1:1";

int status_for(Errc c) {
  switch (c) {
    case Errc::UnknownUser:
    case Errc::SessionExpired:
    case Errc::InvalidAssertion:
    case Errc::ExpiredAssertion:
      return 401;
    case Errc::InvalidToken:
    case Errc::DnMismatch:
    case Errc::AttributeDenied:
      return 403;
    case Errc::UnknownVo:
      return 404;
    default:
      return 400;
  }
}

http::Response fail(const Error& e) { return http::error_response(status_for(e.code()), e); }

http::Response interactive(http::Response r) {
  r.headers.emplace(std::string(kInteractiveHeader), "1");
  return r;
}


}  // namespace

// --- SSO ------------------------------------------------------------------------------

SsoService::SsoService(sso::IdentityProvider& idp, sso::ServiceProvider& sp, const Clock& clock,
                       std::set<std::string> cookie_whitelist)
    : idp_(idp), sp_(sp), clock_(clock), whitelist_(std::move(cookie_whitelist)),
      server_(std::make_unique<http::Server>()) {
  server_->get("/idp/login", [this](const http::Request& req) {
    try {
      auto s = idp_.login(req.param("user"), clock_.now());
      auto ret = req.param("return");
      auto r = ret.empty() ? http::Response::text(200, "logged in\n") : http::Response::redirect(302, ret);
      r.set_cookie(kIdpSessionCookie, s.id);
      return interactive(std::move(r));
    } catch (const Error& e) {
      return interactive(fail(e));
    }
  });

  server_->get("/idp/assert", [this](const http::Request& req) {
    const auto now = clock_.now();
    const auto sid = req.cookie(kIdpSessionCookie);
    try {
      auto session = idp_.find_session(sid);
      if (!session) throw Error(Errc::SessionExpired, "no IdP session; login required");
      auto a = idp_.issue_assertion(*session, now);
      auto sp = sp_.establish(std::move(a), session->id, now);
      auto ret = req.param("return");
      auto r = ret.empty() ? http::Response::json(200, json{{"session", sp.id}}.dump())
                           : http::Response::redirect(302, ret);
      r.set_cookie(kSpSessionCookie, sp.id);
      return r;
    } catch (const Error& e) {
      return interactive(fail(e));
    }
  });

  server_->get("/sp/logout", [this](const http::Request& req) {
    auto sid = req.cookie(kSpSessionCookie);
    if (!sid.empty() && sp_.contains(sid)) sp_.logout(sid, {});
    auto ret = req.param("return");
    auto r = ret.empty() ? http::Response::text(200, "logged out\n") : http::Response::redirect(302, ret);
    for (const auto& [k, v] : req.headers) {
      if (k != "Cookie" && k != "cookie") continue;
      std::string_view rest = v;
      while (!rest.empty()) {
        auto semi = rest.find(';');
        auto pair = rest.substr(0, semi);
        rest.remove_prefix(semi == std::string_view::npos ? rest.size() : semi + 1);
        while (!pair.empty() && pair.front() == ' ') pair.remove_prefix(1);
        auto name = std::string(pair.substr(0, pair.find('=')));
        if (!name.empty() && !whitelist_.count(name)) r.set_cookie(name, "", true);
      }
    }
    return r;
  });

  server_->post("/idp/ecp", [this](const http::Request& req) {
    try {
      std::string user;
      try {
        user = json::parse(req.body).at("user").get<std::string>();
      } catch (const json::exception&) {
        throw Error(Errc::MalformedAssertion, "expected {\"user\": ...}");
      }
      const auto now = clock_.now();
      auto s = idp_.login(user, now);
      return http::Response::json(200, serialize_assertion(idp_.issue_assertion(s, now)));
    } catch (const Error& e) {
      return fail(e);
    }
  });

  for (const char* p : {"/idp/login", "/idp/assert", "/sp/logout"}) server_->reject_other_methods(p);
}

SsoService::~SsoService() = default;
int SsoService::start(int port) { return server_->start("127.0.0.1", port); }
void SsoService::stop() { server_->stop(); }
std::string SsoService::base_url() const { return server_->running() ? server_->base_url() : std::string(kUnreachable); }

Assertion ecp_assertion(std::string_view ecp_url, std::string_view user) {
  auto r = http::send("POST", ecp_url, json{{"user", user}}.dump());
  if (r.status != 200) http::throw_remote_error(r, "ecp");
  return parse_assertion(r.body);
}

// --- CA -------------------------------------------------------------------------------

CaService::CaService(ca::CertificateAuthority& ca, const Clock& clock)
    : ca_(ca), clock_(clock), server_(std::make_unique<http::Server>()) {
  server_->post("/slcs/login", [this](const http::Request& req) {
    try {
      Assertion a;
      try {
        a = parse_assertion(req.body);
      } catch (const Error& e) {
        throw Error(Errc::InvalidAssertion, e.detail());
      }
      return http::Response::json(200, serialize_login_response(ca_.login(a, clock_.now())));
    } catch (const Error& e) {
      return fail(e);
    }
  });

  server_->post("/slcs/certificate", [this](const http::Request& req) {
    try {
      std::string csr, token;
      std::int64_t lifetime = 0;
      try {
        auto j = json::parse(req.body);
        csr = j.at("csr").get<std::string>();
        token = j.at("token").get<std::string>();
        lifetime = j.at("lifetime").get<std::int64_t>();
      } catch (const json::exception& e) {
        throw Error(Errc::IssuanceFailed, std::string("malformed signing request: ") + e.what());
      }
      auto pem = ca_.sign_csr(csr, token, Duration{lifetime}, clock_.now());
      auto r = http::Response::text(200, std::move(pem));
      r.content_type = "application/x-pem-file";
      return r;
    } catch (const Error& e) {
      return fail(e);
    }
  });

  server_->get("/slcs/ca", [this](const http::Request&) {
    auto r = http::Response::text(200, ca_.certificate_pem());
    r.content_type = "application/x-pem-file";
    return r;
  });
}

CaService::~CaService() = default;
int CaService::start(int port) { return server_->start("127.0.0.1", port); }
void CaService::stop() { server_->stop(); }
std::string CaService::base_url() const { return server_->running() ? server_->base_url() : std::string(kUnreachable); }

// --- VOMS -----------------------------------------------------------------------------

VomsService::VomsService(const Clock& clock) : clock_(clock), server_(std::make_unique<http::Server>()) {
  server_->post(R"(/voms/([A-Za-z0-9_.\-]+)/grant)", [this](const http::Request& req) {
    try {
      auto it = servers_.find(req.captures.at(0));
      if (it == servers_.end()) throw Error(Errc::UnknownVo, req.captures.at(0));
      SubjectDn holder;
      std::vector<Fqan> requested;
      std::int64_t lifetime = 0;
      try {
        auto j = json::parse(req.body);
        holder = SubjectDn::parse(j.at("holder").get<std::string>());
        for (const auto& f : j.at("fqans")) requested.push_back(Fqan::parse(f.get<std::string>()));
        lifetime = j.at("lifetime").get<std::int64_t>();
      } catch (const json::exception& e) {
        throw Error(Errc::AttributeDenied, std::string("malformed grant request: ") + e.what());
      }
      auto g = it->second->grant(holder, requested, Duration{lifetime}, clock_.now());
      return http::Response::json(200, voms::serialize_grant(g));
    } catch (const Error& e) {
      return fail(e);
    }
  });
}

VomsService::~VomsService() = default;
void VomsService::add(const voms::VomsServer& server) { servers_[server.vo()] = &server; }
int VomsService::start(int port) { return server_->start("127.0.0.1", port); }
void VomsService::stop() { server_->stop(); }
std::string VomsService::base_url() const {
  return server_->running() ? server_->base_url() : std::string(kUnreachable);
}

// --- bundle ---------------------------------------------------------------------------

SimulatedFederation::SimulatedFederation(const Clock& clock, Options options)
    : clock_(clock),
      options_(std::move(options)),
      idp_(options_.idp),
      sp_(options_.sp),
      ca_(options_.ca, clock.now()),
      sso_http_(idp_, sp_, clock),
      ca_http_(ca_, clock),
      voms_http_(clock) {
  ca_.trust_idp(idp_.config().entity_id, idp_.public_key());
  for (const auto& vo : options_.vos) {
    auto server = std::make_unique<voms::VomsServer>(vo, "voms." + vo + ".simfed.example");
    voms_http_.add(*server);
    vos_.emplace(vo, std::move(server));
  }
  if (options_.start_sso) sso_http_.start();
  if (options_.start_ca) ca_http_.start();
  if (options_.start_voms) voms_http_.start();
}

SimulatedFederation::~SimulatedFederation() { stop(); }

void SimulatedFederation::stop() {
  voms_http_.stop();
  ca_http_.stop();
  sso_http_.stop();
}

SubjectDn SimulatedFederation::enroll(const std::string& user, const std::vector<std::string>& vos) {
  idp_.register_user(user, {{"homeOrganization", "simfed.example"}});
  Assertion probe;
  probe.subject = user;
  auto dn = ca_.map_dn(probe);
  for (auto& [name, server] : vos_) {
    bool wanted = vos.empty() || std::find(vos.begin(), vos.end(), name) != vos.end();
    if (wanted) server->add_member(dn);
  }
  return dn;
}

voms::VomsServer& SimulatedFederation::vo(std::string_view name) {
  auto it = vos_.find(name);
  if (it == vos_.end()) throw Error(Errc::UnknownVo, std::string(name));
  return *it->second;
}

slcs::SlcsFactoryConfig SimulatedFederation::slcs_config(const std::filesystem::path& store) const {
  slcs::SlcsFactoryConfig c;
  c.login_url = ca_http_.login_url();
  c.sign_url = ca_http_.sign_url();
  c.store_directory = store;
  c.ca_certificate_pem = ca_.certificate_pem();
  c.default_lifetime = options_.ca.constraints.max_lifetime;
  return c;
}

proxy::ProxyFactoryConfig SimulatedFederation::proxy_config(const std::filesystem::path& store) const {
  proxy::ProxyFactoryConfig c;
  c.store_directory = store;
  for (const auto& [name, server] : vos_) {
    c.voms_endpoints.emplace(name, proxy::VomsEndpoint{voms_http_.endpoint(name), server->issuer_name(),
                                                       server->public_key()});
  }
  return c;
}

}  // namespace gridcert::services
