// gridcert: obtain short-lived certificates and proxies from the command line.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "gridcert/clock.hpp"
#include "gridcert/demo.hpp"
#include "gridcert/error.hpp"
#include "gridcert/properties.hpp"
#include "gridcert/proxy.hpp"
#include "gridcert/services.hpp"
#include "gridcert/slcs_client.hpp"
#include "gridcert/store.hpp"

namespace fs = std::filesystem;
using namespace gridcert;

namespace {

const std::vector<std::string> kDemoUsers = {"alice", "bob"};

int report(const std::exception& e) {
  if (const auto* ge = dynamic_cast<const Error*>(&e)) {
    std::cerr << "error: " << to_string(ge->code()) << ": " << ge->detail() << "\n";
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}

std::string iso(Timestamp t) {
  auto secs = static_cast<time_t>(to_unix(t));
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path prepare_store(const fs::path& dir) {
  fs::create_directories(dir);
  fs::permissions(dir, fs::perms::owner_all);
  return fs::canonical(dir);
}

void write_public(const fs::path& p, const std::string& contents) {
  store::persist_atomically(
      {{p, contents, store::kOwnerOnly | fs::perms::group_read | fs::perms::others_read, std::nullopt}},
      SystemClock{}.now());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto s = ss.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::vector<std::string> split_vos(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::istringstream in(r);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
  }
  return out;
}

// --- slcs-init ------------------------------------------------------------------

struct SlcsInitArgs {
  std::string user;
  std::string config;
  std::string store_dir = "gridcert-store";
  bool self_contained = false;
  std::optional<std::int64_t> lifetime;
};

int slcs_init(const SlcsInitArgs& a) {
  SystemClock clock;
  std::unique_ptr<services::SimulatedFederation> fed;
  slcs::SlcsFactoryConfig cfg;
  Assertion assertion;
  const fs::path store_dir = prepare_store(a.store_dir);

  if (a.self_contained) {
    fed = std::make_unique<services::SimulatedFederation>(clock);
    for (const auto& u : kDemoUsers) fed->enroll(u);
    cfg = fed->slcs_config(store_dir);
    write_public(store_dir / "ca.pem", fed->ca().certificate_pem());
    std::cout << "ca-certificate: " << (store_dir / "ca.pem").string() << "\n";
    assertion = services::ecp_assertion(fed->sso_http().ecp_url(), a.user);
  } else {
    if (a.config.empty()) throw Error(Errc::InvalidConfig, "--config or --self-contained is required");
    auto props = Properties::load(a.config);
    props.set("slcs.store_dir", store_dir.string());
    cfg = slcs::SlcsFactoryConfig::from_properties(props);
    assertion = services::ecp_assertion(props.require("sso.ecp_url"), a.user);
  }

  slcs::SlcsFactory factory(cfg, clock);
  const std::string stem = a.user + "-" + crypto::random_hex(8);
  slcs::CredentialOverrides where;
  where.certificate_path = store_dir / (stem + ".pem");
  where.private_key_path = store_dir / (stem + ".key");
  where.passphrase_path = store_dir / (stem + ".pass");
  std::optional<Duration> lifetime;
  if (a.lifetime) lifetime = Duration{*a.lifetime};

  auto c = factory.new_slcs(assertion, where, lifetime);
  const auto granted = c.not_after - c.not_before;
  if (lifetime && granted < *lifetime) {
    std::cerr << "warning: requested lifetime " << lifetime->count() << " s exceeds the CA maximum; certificate is valid for "
              << granted.count() << " s\n";
  }
  std::cout << "certificate: " << c.certificate_path.string() << "\n"
            << "private-key: " << c.private_key_path.string() << "\n"
            << "passphrase-file: " << where.passphrase_path->string() << "\n"
            << "subject: " << c.subject.str() << "\n"
            << "not-before: " << iso(c.not_before) << "\n"
            << "not-after: " << iso(c.not_after) << "\n"
            << "lifetime: " << granted.count() << "\n";
  return 0;
}

// --- proxy-init -----------------------------------------------------------------

struct ProxyInitArgs {
  std::string cert;
  std::string key;
  std::string passphrase;
  std::string passphrase_file;
  std::vector<std::string> vos;
  std::optional<std::int64_t> lifetime;
  std::string out;
  std::string config;
  std::string store_dir = "gridcert-store";
  bool self_contained = false;
};

int proxy_init(const ProxyInitArgs& a) {
  SystemClock clock;
  std::string passphrase = a.passphrase;
  if (!a.passphrase_file.empty()) passphrase = read_text(a.passphrase_file);
  auto credential = slcs::load_credential(a.cert, a.key, passphrase);
  const fs::path store_dir = prepare_store(a.store_dir);

  std::unique_ptr<services::SimulatedFederation> fed;
  proxy::ProxyFactoryConfig cfg;
  if (a.self_contained) {
    services::SimulatedFederation::Options opts;
    opts.start_sso = false;
    opts.start_ca = false;
    fed = std::make_unique<services::SimulatedFederation>(clock, opts);
    for (auto& vo : opts.vos) fed->vo(vo).add_member(credential.subject);
    cfg = fed->proxy_config(store_dir);
    for (auto& vo : opts.vos) {
      auto anchor = store_dir / (vo + "-voms.pub");
      write_public(anchor, fed->vo(vo).public_key().to_pem());
      std::cout << "voms-anchor: " << anchor.string() << "\n";
    }
  } else if (!a.config.empty()) {
    auto props = Properties::load(a.config);
    props.set("proxy.store_dir", store_dir.string());
    cfg = proxy::ProxyFactoryConfig::from_properties(props);
  } else {
    cfg.store_directory = store_dir;
  }

  proxy::ProxyFactory factory(cfg, clock);
  std::optional<Duration> lifetime;
  if (a.lifetime) lifetime = Duration{*a.lifetime};
  std::optional<fs::path> out;
  if (!a.out.empty()) out = fs::path(a.out);
  auto p = factory.new_proxy(credential, split_vos(a.vos), lifetime, out);

  std::string fqans;
  for (const auto& f : p.fqans) fqans += (fqans.empty() ? "" : ",") + f.str();
  std::cout << "proxy: " << p.proxy_path.string() << "\n"
            << "subject: " << crypto::Certificate::from_pem(p.chain.front()).subject().str() << "\n"
            << "not-after: " << iso(p.not_after) << "\n"
            << "fqans: " << fqans << "\n";
  return 0;
}

// --- demo-flow ------------------------------------------------------------------

struct DemoArgs {
  bool self_contained = false;
  bool stale_assertion = false;
  std::string store_dir = "gridcert-demo";
  std::string user = "alice";
  std::string vo = "life";
  std::string ca_url;
};

int demo_flow(const DemoArgs& a) {
  if (!a.self_contained && a.ca_url.empty()) {
    throw Error(Errc::InvalidConfig, "demo-flow runs against in-process services; pass --self-contained");
  }
  demo::DemoOptions o;
  o.user = a.user;
  o.vo = a.vo;
  o.store_dir = prepare_store(a.store_dir);
  o.stale_assertion = a.stale_assertion;
  if (!a.ca_url.empty()) o.ca_url = a.ca_url;

  auto r = demo::run_demo(o, std::cout);
  if (!r.ok) {
    std::cerr << "error: " << r.failure << "\n";
    return 1;
  }
  std::string fqans;
  for (const auto& f : r.fqans) fqans += (fqans.empty() ? "" : ",") + f.str();
  std::cout << "redirects: " << r.redirects << "\n"
            << "interactive-steps: " << r.interactive_steps << "\n"
            << "certificate: " << r.certificate.string() << "\n"
            << "private-key: " << r.private_key.string() << "\n"
            << "passphrase-file: " << r.passphrase_file.string() << "\n"
            << "proxy: " << r.proxy.string() << "\n"
            << "ca-certificate: " << r.ca_certificate.string() << "\n"
            << "voms-anchor: " << r.voms_anchor.string() << "\n"
            << "fqans: " << fqans << "\n"
            << "handler-environment:\n"
            << r.handler_output;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Short-lived grid credentials from a federated login"};
  app.require_subcommand(1);

  SlcsInitArgs si;
  auto* cmd_si = app.add_subcommand("slcs-init", "Obtain a short-lived certificate from the online CA");
  cmd_si->add_option("--user", si.user, "Federation user id")->required();
  cmd_si->add_option("--config", si.config, "key=value configuration file");
  cmd_si->add_option("--store-dir", si.store_dir, "Directory for the certificate and key");
  cmd_si->add_flag("--self-contained", si.self_contained, "Boot the simulators on loopback ports");
  cmd_si->add_option("--lifetime", si.lifetime, "Requested lifetime in seconds")->check(CLI::PositiveNumber);

  ProxyInitArgs pi;
  auto* cmd_pi = app.add_subcommand("proxy-init", "Derive a proxy certificate from a credential");
  cmd_pi->add_option("--cert", pi.cert, "End-entity certificate (PEM)")->required()->check(CLI::ExistingFile);
  cmd_pi->add_option("--key", pi.key, "Encrypted private key (PEM)")->required()->check(CLI::ExistingFile);
  auto* pass = cmd_pi->add_option("--passphrase", pi.passphrase, "Key passphrase");
  cmd_pi->add_option("--passphrase-file", pi.passphrase_file, "File holding the key passphrase")
      ->check(CLI::ExistingFile)
      ->excludes(pass);
  cmd_pi->add_option("--vos", pi.vos, "VO names or FQANs, comma separated");
  cmd_pi->add_option("--lifetime", pi.lifetime, "Proxy lifetime in seconds")->check(CLI::PositiveNumber);
  cmd_pi->add_option("--out", pi.out, "Output file for the proxy bundle");
  cmd_pi->add_option("--config", pi.config, "key=value configuration file");
  cmd_pi->add_option("--store-dir", pi.store_dir, "Directory for the proxy");
  cmd_pi->add_flag("--self-contained", pi.self_contained, "Boot an attribute server on a loopback port");

  DemoArgs da;
  auto* cmd_demo = app.add_subcommand("demo-flow", "Run the whole login-to-proxy sequence and print the trace");
  cmd_demo->add_flag("--self-contained", da.self_contained, "Boot all services in-process");
  cmd_demo->add_flag("--stale-assertion", da.stale_assertion, "Let the assertion expire first");
  cmd_demo->add_option("--store-dir", da.store_dir, "Credential store root");
  cmd_demo->add_option("--user", da.user, "Federation user id");
  cmd_demo->add_option("--vo", da.vo, "VO to request attributes from");
  cmd_demo->add_option("--ca-url", da.ca_url, "Use this CA instead of the simulated one");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_si) return slcs_init(si);
    if (*cmd_pi) return proxy_init(pi);
    if (*cmd_demo) return demo_flow(da);
  } catch (const std::exception& e) {
    return report(e);
  }
  return 1;
}
