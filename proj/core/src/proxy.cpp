#include "gridcert/proxy.hpp"

#include <openssl/objects.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "gridcert/error.hpp"
#include "gridcert/store.hpp"
#include "gridcert/x509_builder.hpp"

namespace gridcert::proxy {
namespace {

std::string read_file(const fs::path& p, Errc code) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(code, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t random_serial() {
  std::uint64_t v = 0;
  while (v == 0) {
    for (auto x : crypto::random_bytes(8)) v = (v << 8) | x;
    v &= 0x7fff'ffff'ffff'ffffULL;
  }
  return v;
}

// VO name -> requested FQANs, in first-mention order.
std::vector<std::pair<std::string, std::vector<Fqan>>> group_by_vo(const std::vector<std::string>& vos) {
  std::vector<std::pair<std::string, std::vector<Fqan>>> out;
  for (const auto& v : vos) {
    Fqan f;
    try {
      f = Fqan::from_request(v);
    } catch (const Error& e) {
      throw Error(Errc::UnknownVo, e.detail());
    }
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == f.vo; });
    if (it == out.end()) {
      out.push_back({f.vo, {f}});
    } else if (std::find(it->second.begin(), it->second.end(), f) == it->second.end()) {
      it->second.push_back(f);
    }
  }
  return out;
}

// ProxyCertInfo ::= SEQUENCE { proxyPolicy SEQUENCE { policyLanguage id-ppl-inheritAll } }
constexpr std::string_view kProxyCertInfoOid = "1.3.6.1.5.5.7.1.14";
const std::string kInheritAllPolicy("\x30\x0c\x30\x0a\x06\x08\x2b\x06\x01\x05\x05\x07\x15\x01", 14);

std::string last_cn(const SubjectDn& dn) {
  const auto& rdns = dn.rdns();
  return rdns.empty() ? std::string{} : rdns.back().value;
}

}  // namespace

ProxyFactoryConfig ProxyFactoryConfig::from_properties(const Properties& p) {
  ProxyFactoryConfig c;
  c.store_directory = p.require("proxy.store_dir");
  c.default_lifetime = p.get_duration_or("proxy.default_lifetime", c.default_lifetime);
  c.key_size = static_cast<int>(p.get_int_or("proxy.key_size", c.key_size));
  if (c.default_lifetime.count() <= 0) throw Error(Errc::InvalidConfig, "proxy.default_lifetime must be positive");
  std::set<std::string> vos;
  for (const auto& [key, value] : p.with_prefix("proxy.voms.")) {
    auto dot = key.find('.');
    if (dot == std::string::npos) throw Error(Errc::InvalidConfig, "bad key proxy.voms." + key);
    vos.insert(key.substr(0, dot));
  }
  for (const auto& vo : vos) {
    const std::string base = "proxy.voms." + vo + ".";
    VomsEndpoint e;
    e.url = p.require(base + "url");
    e.issuer = p.require(base + "issuer");
    e.trust_anchor = crypto::PublicKey::from_pem(read_file(p.require(base + "anchor"), Errc::InvalidConfig));
    c.voms_endpoints.emplace(vo, std::move(e));
  }
  return c;
}

GrantAnchors ProxyFactoryConfig::grant_anchors() const {
  GrantAnchors out;
  for (const auto& [vo, e] : voms_endpoints) out.emplace(e.issuer, e.trust_anchor);
  return out;
}

// --- verification -------------------------------------------------------------------

VerifyResult verify_proxy(const ProxyCredential& p, const crypto::Certificate& trust_anchor, Timestamp now,
                          const GrantAnchors& grant_anchors) {
  VerifyResult r;
  auto fail = [&](std::string why) { r.reasons.push_back(std::move(why)); };

  std::vector<crypto::Certificate> chain;
  try {
    for (const auto& pem : p.chain) chain.push_back(crypto::Certificate::from_pem(pem));
  } catch (const Error& e) {
    fail(std::string("unparseable certificate: ") + e.what());
    return r;
  }
  if (chain.size() < 2) {
    fail("chain must hold at least one proxy and the end-entity certificate");
    return r;
  }

  auto in_window = [&](const crypto::Certificate& c, const std::string& label) {
    if (now < c.not_before() || now > c.not_after()) fail(label + " not valid at check time");
  };

  const auto& ee = chain.back();
  if (!ee.signed_by(trust_anchor.public_key())) fail("end-entity certificate not signed by trust anchor");
  if (ee.issuer() != trust_anchor.subject()) fail("end-entity issuer differs from trust anchor subject");
  if (ee.is_proxy()) fail("last certificate in chain is itself a proxy");
  in_window(ee, "end-entity certificate");
  in_window(trust_anchor, "trust anchor");

  std::vector<Fqan> embedded;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const auto& c = chain[i];
    const auto& parent = chain[i + 1];
    const std::string label = "proxy level " + std::to_string(chain.size() - 1 - i);
    if (!c.is_proxy()) fail(label + " lacks the proxyCertInfo extension");
    if (!c.signed_by(parent.public_key())) fail(label + " not signed by its issuer's key");
    if (c.issuer() != parent.subject()) fail(label + " issuer name differs from parent subject");
    if (!c.subject().extends_by_one_cn(parent.subject())) fail(label + " subject does not extend issuer by one CN");
    if (last_cn(c.subject()) != c.serial_decimal()) fail(label + " appended CN differs from serial number");
    if (c.not_after() > parent.not_after()) fail(label + " outlives its issuer");
    in_window(c, label);

    auto ext = c.extension_value(voms::kGrantExtensionOid);
    if (!ext) continue;
    std::vector<voms::AttributeGrant> grants;
    try {
      grants = voms::decode_grants(crypto::der_octet_string_content(*ext));
    } catch (const std::exception& e) {
      fail(label + " grant extension unreadable: " + e.what());
      continue;
    }
    for (const auto& g : grants) {
      auto anchor = grant_anchors.find(g.issuer);
      if (anchor == grant_anchors.end()) {
        fail(label + " grant issuer " + g.issuer + " is not trusted");
      } else if (!g.verify(anchor->second)) {
        fail(label + " grant signature invalid");
      }
      if (g.holder != c.subject()) fail(label + " grant holder differs from certificate subject");
      if (!g.valid_at(now)) fail(label + " grant not valid at check time");
      embedded.insert(embedded.end(), g.fqans.begin(), g.fqans.end());
    }
  }
  if (embedded != p.fqans) fail("declared FQANs differ from embedded grants");

  if (!p.proxy_path.empty()) {
    try {
      auto bundle = read_file(p.proxy_path, Errc::CryptoFailure);
      auto key = crypto::PrivateKey::from_pem(bundle);
      if (!(key.public_key() == chain.front().public_key())) fail("bundled key does not match proxy certificate");
    } catch (const Error& e) {
      fail(std::string("proxy file unreadable: ") + e.what());
    }
  }

  r.ok = r.reasons.empty();
  return r;
}

ProxyCredential load_proxy(const fs::path& bundle) {
  auto pem = read_file(bundle, Errc::CryptoFailure);
  ProxyCredential p;
  p.proxy_path = bundle;
  auto certs = crypto::Certificate::all_from_pem(pem);
  if (certs.empty()) throw Error(Errc::CryptoFailure, "no certificates in " + bundle.string());
  for (const auto& c : certs) p.chain.push_back(c.to_pem());
  p.not_after = certs.front().not_after();
  if (auto ext = certs.front().extension_value(voms::kGrantExtensionOid)) {
    for (const auto& g : voms::decode_grants(crypto::der_octet_string_content(*ext))) {
      p.fqans.insert(p.fqans.end(), g.fqans.begin(), g.fqans.end());
    }
  }
  return p;
}

// --- factory -------------------------------------------------------------------------

ProxyFactory::ProxyFactory(ProxyFactoryConfig config, const Clock& clock) : config_(std::move(config)), clock_(clock) {
  if (config_.default_lifetime.count() <= 0) throw Error(Errc::InvalidConfig, "default lifetime must be positive");
  for (const auto& [vo, e] : config_.voms_endpoints) {
    if (e.url.empty() || e.issuer.empty() || !e.trust_anchor) {
      throw Error(Errc::InvalidConfig, "incomplete attribute endpoint for " + vo);
    }
  }
}

ProxyFactory::Built ProxyFactory::create(const Credential& credential, const std::vector<std::string>& vos,
                                         std::optional<Duration> lifetime) const {
  const Timestamp now = clock_.now();
  auto ee = crypto::Certificate::from_pem(read_file(credential.certificate_path, Errc::CredentialExpired));
  if (now < ee.not_before() || now > ee.not_after()) {
    throw Error(Errc::CredentialExpired, ee.subject().str() + " is outside its validity window");
  }
  auto ee_key = crypto::PrivateKey::from_pem(read_file(credential.private_key_path, Errc::CredentialExpired),
                                             credential.passphrase);
  if (!(ee_key.public_key() == ee.public_key())) {
    throw Error(Errc::CryptoFailure, "credential key does not match certificate");
  }

  auto requested = group_by_vo(vos);
  for (const auto& [vo, fqans] : requested) {
    if (!config_.voms_endpoints.count(vo)) throw Error(Errc::UnknownVo, vo);
  }

  const Duration want = lifetime.value_or(config_.default_lifetime);
  if (want.count() <= 0) throw Error(Errc::InvalidConfig, "proxy lifetime must be positive");
  const Timestamp not_after = std::min(now + want, ee.not_after());

  const std::uint64_t serial = random_serial();
  const SubjectDn subject = ee.subject().with_appended_cn(std::to_string(serial));

  std::vector<voms::AttributeGrant> grants;
  for (const auto& [vo, fqans] : requested) {
    const auto& endpoint = config_.voms_endpoints.find(vo)->second;
    auto g = voms::voms_fetch(endpoint.url, subject, fqans, not_after - now);
    if (g.issuer != endpoint.issuer || !g.verify(endpoint.trust_anchor)) {
      throw Error(Errc::AttributeDenied, "grant from " + vo + " does not verify");
    }
    if (g.holder != subject) throw Error(Errc::AttributeDenied, "grant from " + vo + " names another holder");
    grants.push_back(std::move(g));
  }

  auto key = crypto::PrivateKey::generate_rsa(config_.key_size);
  crypto::CertificateBuilder b;
  b.serial(serial)
      .subject(subject)
      .validity(now, not_after)
      .public_key(key.public_key())
      .raw_extension(std::string(kProxyCertInfoOid), true, kInheritAllPolicy)
      .extension(NID_key_usage, "critical,digitalSignature,keyEncipherment");
  if (!grants.empty()) {
    b.raw_extension(std::string(voms::kGrantExtensionOid), false,
                    crypto::der_octet_string(voms::encode_grants(grants)));
  }
  auto cert = b.sign(ee_key, &ee);

  Built out;
  out.credential.chain = {cert.to_pem(), ee.to_pem()};
  out.credential.not_after = not_after;
  for (const auto& g : grants) {
    out.credential.fqans.insert(out.credential.fqans.end(), g.fqans.begin(), g.fqans.end());
  }
  out.bundle_pem = out.credential.chain[0] + key.to_pem() + out.credential.chain[1];
  return out;
}

ProxyCredential ProxyFactory::new_proxy(const Credential& credential, const std::vector<std::string>& vos,
                                        std::optional<Duration> lifetime, std::optional<fs::path> output) const {
  auto built = create(credential, vos, lifetime);
  fs::path target = output.value_or(config_.store_directory / ("x509up_" + crypto::random_hex(16) + ".pem"));
  store::persist_atomically({{target, built.bundle_pem, store::kOwnerOnly, built.credential.not_after}},
                            clock_.now());
  built.credential.proxy_path = target;
  return std::move(built.credential);
}

}  // namespace gridcert::proxy
