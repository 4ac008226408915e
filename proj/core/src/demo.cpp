#include "gridcert/demo.hpp"

#include <fstream>

#include "gridcert/browser.hpp"
#include "gridcert/error.hpp"
#include "gridcert/gateway.hpp"
#include "gridcert/proxy.hpp"
#include "gridcert/services.hpp"
#include "gridcert/url.hpp"

namespace gridcert::demo {
namespace {

void write_public(const fs::path& p, const std::string& contents) {
  store::persist_atomically({{p, contents, store::kOwnerOnly | fs::perms::group_read | fs::perms::others_read,
                              std::nullopt}},
                            SystemClock{}.now());
}

void record(DemoResult& result, std::ostream& log, const std::string& phase, const Browser::Result& r) {
  log << phase << "\n";
  for (const auto& hop : r.hops) {
    std::string line = "  GET " + hop.url + " -> " + std::to_string(hop.status);
    if (hop.interactive) line += " (interactive)";
    log << line << "\n";
    result.trace.push_back(line);
  }
  result.redirects += r.redirects;
  result.interactive_steps += r.interactive_steps;
}

}  // namespace

DemoResult run_demo(const DemoOptions& options, std::ostream& log) {
  DemoResult result;
  try {
    if (options.store_dir.empty()) throw Error(Errc::InvalidConfig, "store directory unset");
    fs::create_directories(options.store_dir);
    store::CredentialStore store(options.store_dir);
    const fs::path root = store.root();

    ManualClock clock(SystemClock{}.now());
    services::SimulatedFederation::Options fed_opts;
    fed_opts.vos = {options.vo};
    services::SimulatedFederation fed(clock, fed_opts);
    fed.enroll(options.user);

    result.ca_certificate = root / "ca.pem";
    write_public(result.ca_certificate, fed.ca().certificate_pem());
    result.voms_anchor = root / (options.vo + "-voms.pub");
    write_public(result.voms_anchor, fed.vo(options.vo).public_key().to_pem());

    auto slcs_cfg = fed.slcs_config(root);
    if (options.ca_url) {
      slcs_cfg.login_url = *options.ca_url + "/slcs/login";
      slcs_cfg.sign_url = *options.ca_url + "/slcs/certificate";
    }

    gateway::GatewayConfig gw_cfg;
    gw_cfg.store_root = root;
    gw_cfg.sp_logout_url = fed.sso_http().logout_url();
    gw_cfg.idp_assert_url = fed.sso_http().assert_url();
    gateway::CredentialGateway gw(gw_cfg, fed.sp(), slcs_cfg, fed.proxy_config(root), clock);
    gw.start();

    gateway::PortalConfig portal_cfg;
    portal_cfg.store_root = root;
    portal_cfg.slcs_init_url = gw.slcs_init_url();
    portal_cfg.voms_proxy_init_url = gw.voms_proxy_init_url();
    portal_cfg.idp_assert_url = fed.sso_http().assert_url();
    portal_cfg.default_vos = {options.vo};
    gateway::Portal portal(portal_cfg, fed.sp(), clock);
    portal.login_required("/home", [](const gateway::PortalRequest& r, const gateway::Environment&) {
      return "welcome " + r.user + "\n";
    });
    portal.gridproxy_required("/submit", [](const gateway::PortalRequest&, const gateway::Environment& env) {
      std::string out;
      for (const auto& [k, v] : env) out += k + "=" + v + "\n";
      return out;
    });
    portal.start();

    log << "services: idp " << fed.sso_http().base_url() << ", ca " << fed.ca_http().base_url() << ", voms "
        << fed.voms_http().base_url() << ", gateway " << gw.base_url() << ", portal " << portal.base_url()
        << "\n";

    Browser browser;
    const std::string submit = portal.base_url() + "/submit";
    std::string first_target = options.stale_assertion ? portal.base_url() + "/home" : submit;
    auto login = browser.get(url::append_query(url::append_query(fed.sso_http().login_url(), "user", options.user),
                                               "return", first_target));
    record(result, log, "(1) federated login", login);
    if (login.status != 200) {
      throw Error(Errc::IssuanceFailed, "browser ended on HTTP " + std::to_string(login.status) + ": " + login.body);
    }

    Browser::Result visit = login;
    if (options.stale_assertion) {
      clock.advance(options.stale_by);
      log << "clock advanced " << options.stale_by.count() << " s; the session assertion has expired\n";
      visit = browser.get(submit);
      record(result, log, "(2)-(7) guarded page, with assertion renewal", visit);
    } else {
      // The login already landed on the guarded page.
      log << "(2)-(7) guard, certificate and proxy acquisition happened within the login redirects\n";
    }
    if (visit.status != 200) {
      throw Error(Errc::IssuanceFailed, "guarded page answered HTTP " + std::to_string(visit.status) + ": " +
                                            visit.body);
    }
    result.handler_output = visit.body;

    auto location = portal.location_of(options.user);
    if (!location) throw Error(Errc::IssuanceFailed, "portal has no credential location");
    result.certificate = *location / gateway::kCertificateFile;
    result.private_key = *location / gateway::kKeyFile;
    result.passphrase_file = *location / gateway::kPassphraseFile;
    result.proxy = *location / gateway::kProxyFile;

    auto p = proxy::load_proxy(result.proxy);
    result.fqans = p.fqans;
    auto check = proxy::verify_proxy(p, fed.ca().certificate(), clock.now(), fed.proxy_config(root).grant_anchors());
    if (!check) {
      std::string why;
      for (const auto& r : check.reasons) why += "; " + r;
      throw Error(Errc::CryptoFailure, "proxy failed verification" + why);
    }
    bool has_vo = false;
    for (const auto& f : p.fqans) has_vo = has_vo || f.str() == "/" + options.vo;
    if (!has_vo) throw Error(Errc::AttributeDenied, "proxy carries no /" + options.vo + " attribute");

    portal.stop();
    gw.stop();
    fed.stop();
    result.ok = true;
  } catch (const std::exception& e) {
    result.failure = e.what();
  }
  return result;
}

}  // namespace gridcert::demo
