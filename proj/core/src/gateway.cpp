#include "gridcert/gateway.hpp"

#include <fstream>
#include <sstream>

#include "gridcert/error.hpp"
#include "gridcert/url.hpp"
#include "http.hpp"

namespace gridcert::gateway {
namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& i : items) out += (out.empty() ? "" : ",") + i;
  return out;
}

std::optional<Duration> lifetime_param(const http::Request& req) {
  auto v = req.param("lifetime");
  if (v.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    auto n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return Duration{n};
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, "lifetime must be an integer number of seconds");
  }
}

std::string read_small_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::StorageFailed, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// --- credential endpoints ---------------------------------------------------------------

CredentialGateway::CredentialGateway(GatewayConfig config, sso::ServiceProvider& sp, slcs::SlcsFactoryConfig slcs,
                                     proxy::ProxyFactoryConfig proxy, const Clock& clock)
    : config_(std::move(config)),
      sp_(sp),
      slcs_(std::move(slcs)),
      proxy_(std::move(proxy)),
      clock_(clock),
      server_(std::make_unique<http::Server>()) {
  if (config_.store_root.empty()) throw Error(Errc::InvalidConfig, "gateway store root unset");
  store::CredentialStore root(config_.store_root);
  config_.store_root = root.root();
  server_->get("/gcl/slcs-init", [this](const http::Request& r) { return slcs_init(r); });
  server_->get("/gcl/voms-proxy-init", [this](const http::Request& r) { return voms_proxy_init(r); });
  server_->get(R"(/gcl/renew/(.+))", [this](const http::Request& r) { return renew(r); });
  for (const char* p : {"/gcl/slcs-init", "/gcl/voms-proxy-init", R"(/gcl/renew/(.+))"}) {
    server_->reject_other_methods(p);
  }
}

CredentialGateway::~CredentialGateway() = default;
int CredentialGateway::start(int port) { return server_->start("127.0.0.1", port); }
void CredentialGateway::stop() { server_->stop(); }
std::string CredentialGateway::base_url() const { return server_->base_url(); }

fs::path CredentialGateway::prefix() const { return config_.prefix_allowlist.value_or(config_.store_root); }

std::string CredentialGateway::self_url(const http::Request& req) const {
  return base_url() + req.path + (req.query.empty() ? "" : "?" + req.query);
}

http::Response CredentialGateway::renewal_redirect(const std::string& self) const {
  std::string renewal;
  try {
    renewal = sso::encode_return_url(renew_url(), self, config_.max_return_url);
  } catch (const Error& e) {
    return http::error_response(e.code() == Errc::UrlTooLong ? 414 : 400, e);
  }
  return http::Response::redirect(302, url::append_query(config_.sp_logout_url, "return", renewal));
}

http::Response CredentialGateway::finish(const http::Request& req, std::string listing) const {
  auto ret = req.param("return");
  if (!ret.empty() && url::is_absolute(ret)) return http::Response::redirect(303, ret);
  return http::Response::text(200, std::move(listing));
}

http::Response CredentialGateway::slcs_init(const http::Request& req) {
  const auto now = clock_.now();
  const auto sid = req.cookie(config_.cookies.session);
  auto session = sid.empty() ? std::nullopt : sp_.find(sid);
  if (!session) return http::Response::text(401, "no service-provider session\n");
  const std::string self = self_url(req);
  if (!session->active(now)) return renewal_redirect(self);

  std::optional<Duration> lifetime;
  fs::path location;
  std::string secret;
  try {
    lifetime = lifetime_param(req);
    if (config_.require_handshake) {
      secret = req.cookie(config_.cookies.secret);
      location = store::check_handshake(req.cookie(config_.cookies.location), secret, prefix());
    } else {
      if (!store::valid_user_id(session->assertion.subject)) {
        throw Error(Errc::PrefixViolation, "user id not usable as a directory name");
      }
      location = store::CredentialStore(config_.store_root).user_directory(session->assertion.subject);
    }
  } catch (const Error& e) {
    return http::error_response(e.code() == Errc::InvalidConfig ? 400 : 403, e);
  }

  auto cfg = slcs_;
  cfg.store_directory = location;
  slcs::IssuedCredential issued;
  try {
    slcs::SlcsFactory factory(cfg, clock_);
    factory.set_event_log(log_);
    issued = factory.request(session->assertion, lifetime);
  } catch (const Error& e) {
    if (e.code() == Errc::ExpiredAssertion) return renewal_redirect(self);
    return http::error_response(502, e);
  }

  const fs::path cert = location / kCertificateFile;
  const fs::path key = location / kKeyFile;
  const fs::path pass = location / kPassphraseFile;
  if (config_.require_handshake) {
    try {
      store::consume_handshake(location, secret, prefix());
    } catch (const Error& e) {
      // Another request holding the same handshake won; its credential stands.
      if (fs::exists(cert)) return finish(req, "credential already issued\n");
      return http::error_response(403, e);
    }
  }
  try {
    store::persist_atomically(
        {{cert, issued.certificate_pem, store::kOwnerOnly | fs::perms::group_read | fs::perms::others_read,
          issued.not_after},
         {key, issued.encrypted_key_pem, store::kOwnerOnly, std::nullopt},
         {pass, issued.passphrase + "\n", store::kOwnerOnly, std::nullopt}},
        clock_.now(), log_);
  } catch (const Error& e) {
    return http::error_response(500, e);
  }
  return finish(req, "certificate: " + cert.string() + "\nprivate-key: " + key.string() +
                         "\nsubject: " + issued.subject.str() + "\n");
}

http::Response CredentialGateway::voms_proxy_init(const http::Request& req) {
  fs::path location;
  std::string secret;
  std::optional<Duration> lifetime;
  try {
    lifetime = lifetime_param(req);
    if (config_.require_handshake) {
      secret = req.cookie(config_.cookies.secret);
      location = store::check_handshake(req.cookie(config_.cookies.location), secret, prefix());
    } else {
      auto user = req.param("user");
      if (!store::valid_user_id(user)) throw Error(Errc::PrefixViolation, "missing or invalid user");
      location = config_.store_root / user;
    }
  } catch (const Error& e) {
    return http::error_response(e.code() == Errc::InvalidConfig ? 400 : 403, e);
  }

  const fs::path cert = location / kCertificateFile;
  const fs::path key = location / kKeyFile;
  const fs::path pass = location / kPassphraseFile;
  if (!fs::exists(cert) || !fs::exists(key) || !fs::exists(pass)) {
    return http::Response::text(404, "no credential at " + location.string() + "\n");
  }

  proxy::ProxyFactory::Built built;
  try {
    auto passphrase = read_small_file(pass);
    while (!passphrase.empty() && (passphrase.back() == '\n' || passphrase.back() == '\r')) passphrase.pop_back();
    auto credential = slcs::load_credential(cert, key, passphrase);
    auto cfg = proxy_;
    cfg.store_directory = location;
    proxy::ProxyFactory factory(cfg, clock_);
    built = factory.create(credential, split_list(req.param("vos")), lifetime);
  } catch (const Error& e) {
    switch (e.code()) {
      case Errc::UnknownVo:
      case Errc::InvalidConfig:
        return http::error_response(400, e);
      case Errc::CredentialExpired:
        return http::error_response(409, e);
      case Errc::StorageFailed:
      case Errc::CryptoFailure:
        return http::error_response(404, e);
      default:
        return http::error_response(502, e);
    }
  }

  const fs::path out = location / kProxyFile;
  if (config_.require_handshake) {
    try {
      store::consume_handshake(location, secret, prefix());
    } catch (const Error& e) {
      if (fs::exists(out)) return finish(req, "proxy already issued\n");
      return http::error_response(403, e);
    }
  }
  try {
    store::persist_atomically({{out, built.bundle_pem, store::kOwnerOnly, built.credential.not_after}},
                              clock_.now(), log_);
  } catch (const Error& e) {
    return http::error_response(500, e);
  }
  std::string fqans;
  for (const auto& f : built.credential.fqans) fqans += (fqans.empty() ? "" : ",") + f.str();
  return finish(req, "proxy: " + out.string() + "\nfqans: " + fqans + "\n");
}

http::Response CredentialGateway::renew(const http::Request& req) {
  const std::string self = self_url(req);
  std::string original;
  try {
    original = sso::decode_return_url(self);
  } catch (const Error& e) {
    return http::error_response(400, e);
  }
  const auto now = clock_.now();
  const auto sid = req.cookie(config_.cookies.session);
  auto session = sid.empty() ? std::nullopt : sp_.find(sid);
  if (session && session->active(now) && !assertion_expired(session->assertion, now)) {
    return http::Response::redirect(302, original);
  }
  return http::Response::redirect(302, url::append_query(config_.idp_assert_url, "return", self));
}

// --- portal --------------------------------------------------------------------------------

Portal::Portal(PortalConfig config, sso::ServiceProvider& sp, const Clock& clock)
    : config_(std::move(config)), sp_(sp), clock_(clock), server_(std::make_unique<http::Server>()) {
  if (config_.store_root.empty()) throw Error(Errc::InvalidConfig, "portal store root unset");
  config_.store_root = store::CredentialStore(config_.store_root).root();
}

Portal::~Portal() = default;
int Portal::start(int port) { return server_->start("127.0.0.1", port); }
void Portal::stop() { server_->stop(); }
std::string Portal::base_url() const { return server_->base_url(); }

void Portal::login_required(const std::string& path, PortalHandler handler) {
  route(path, Need::Login, std::move(handler));
}
void Portal::certificate_required(const std::string& path, PortalHandler handler) {
  route(path, Need::Certificate, std::move(handler));
}
void Portal::gridproxy_required(const std::string& path, PortalHandler handler) {
  route(path, Need::Proxy, std::move(handler));
}

void Portal::route(const std::string& path, Need need, PortalHandler handler) {
  server_->get(path, [this, need, handler = std::move(handler)](const http::Request& req) {
    const std::string self = base_url() + req.path + (req.query.empty() ? "" : "?" + req.query);
    const auto sid = req.cookie(config_.cookies.session);
    auto session = sid.empty() ? std::nullopt : sp_.find(sid);
    if (!session || !session->active(clock_.now())) {
      return http::Response::redirect(302, url::append_query(config_.idp_assert_url, "return", self));
    }
    PortalRequest pr{session->assertion.subject, self, req.params};
    GuardOutcome outcome;
    if (need == Need::Login) {
      outcome.kind = GuardOutcome::Kind::Pass;
    } else if (need == Need::Certificate) {
      outcome = guard_certificate(pr.user, self);
    } else {
      outcome = guard_proxy(pr.user, self);
    }
    if (!outcome.passed()) {
      auto r = http::Response::redirect(302, outcome.location);
      for (const auto& [k, v] : outcome.cookies) r.set_cookie(k, v);
      return r;
    }
    try {
      return http::Response::text(200, handler(pr, outcome.environment));
    } catch (const std::exception& e) {
      return http::error_response(500, e);
    }
  });
  server_->reject_other_methods(path);
}

GuardOutcome Portal::acquire_certificate(const std::string& user, const std::string& url) {
  // Caller holds mu_.
  store::MarkerHandshake hs;
  auto pending = pending_.find(user);
  if (pending != pending_.end() && fs::exists(pending->second.location / store::kMarkerFileName) &&
      !fs::exists(pending->second.location / kCertificateFile)) {
    hs = pending->second;
  } else {
    hs = store::prepare_handshake(config_.store_root, user);
    pending_[user] = hs;
    locations_[user] = hs.location;
  }
  GuardOutcome out;
  out.kind = GuardOutcome::Kind::Redirect;
  out.location = url::append_query(config_.slcs_init_url, "return", url);
  out.cookies = {{config_.cookies.location, hs.location.string()}, {config_.cookies.secret, hs.secret}};
  return out;
}

GuardOutcome Portal::guard_certificate(const std::string& user, const std::string& url) {
  const auto now = clock_.now();
  std::lock_guard lock(mu_);
  auto it = locations_.find(user);
  if (it == locations_.end() ||
      !store::freshness_check(it->second / kCertificateFile, config_.certificate_min_remaining, now)) {
    return acquire_certificate(user, url);
  }
  GuardOutcome out;
  out.kind = GuardOutcome::Kind::Pass;
  out.environment = {{config_.certificate_variable, (it->second / kCertificateFile).string()},
                     {config_.key_variable, (it->second / kKeyFile).string()}};
  return out;
}

GuardOutcome Portal::guard_proxy(const std::string& user, const std::string& url) {
  auto out = guard_certificate(user, url);
  if (!out.passed()) return out;
  const auto now = clock_.now();
  std::lock_guard lock(mu_);
  const fs::path location = locations_.at(user);
  if (store::freshness_check(location / kProxyFile, config_.proxy_min_remaining, now)) {
    out.environment[config_.proxy_variable] = (location / kProxyFile).string();
    return out;
  }
  auto hs = store::rearm_handshake(location);
  std::vector<std::string> vos;
  auto custom = user_vos_.find(user);
  vos = custom == user_vos_.end() ? config_.default_vos : custom->second;

  GuardOutcome redirect;
  redirect.kind = GuardOutcome::Kind::Redirect;
  std::string target = config_.voms_proxy_init_url;
  if (!vos.empty()) target = url::append_query(target, "vos", join(vos));
  redirect.location = url::append_query(target, "return", url);
  redirect.cookies = {{config_.cookies.location, hs.location.string()}, {config_.cookies.secret, hs.secret}};
  return redirect;
}

void Portal::set_user_vos(const std::string& user, std::vector<std::string> vos) {
  std::lock_guard lock(mu_);
  user_vos_[user] = std::move(vos);
}

std::vector<std::string> Portal::vos_for(const std::string& user) const {
  std::lock_guard lock(mu_);
  auto it = user_vos_.find(user);
  return it == user_vos_.end() ? config_.default_vos : it->second;
}

std::optional<fs::path> Portal::location_of(const std::string& user) const {
  std::lock_guard lock(mu_);
  auto it = locations_.find(user);
  if (it == locations_.end()) return std::nullopt;
  return it->second;
}

}  // namespace gridcert::gateway
