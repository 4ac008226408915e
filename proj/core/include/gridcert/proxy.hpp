#pragma once

// RFC 3820 proxy certificates derived from a Credential, optionally carrying
// signed attribute grants from one or more VO servers.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcert/clock.hpp"
#include "gridcert/crypto.hpp"
#include "gridcert/model.hpp"
#include "gridcert/properties.hpp"
#include "gridcert/voms.hpp"

namespace gridcert::proxy {

namespace fs = std::filesystem;

inline constexpr Duration kDefaultProxyLifetime{43'200};

struct VomsEndpoint {
  std::string url;     // POST target, e.g. http://host:port/voms/life/grant
  std::string issuer;  // name the server signs grants with
  crypto::PublicKey trust_anchor;
};

// Grant issuer name -> verification key.
using GrantAnchors = std::map<std::string, crypto::PublicKey, std::less<>>;

struct ProxyFactoryConfig {
  std::map<std::string, VomsEndpoint, std::less<>> voms_endpoints;
  Duration default_lifetime = kDefaultProxyLifetime;
  fs::path store_directory;
  int key_size = 2048;

  // Keys: proxy.store_dir, proxy.default_lifetime, proxy.key_size and, per VO,
  // proxy.voms.<vo>.url, proxy.voms.<vo>.issuer, proxy.voms.<vo>.anchor (PEM
  // public key file). Throws InvalidConfig.
  static ProxyFactoryConfig from_properties(const Properties& p);

  GrantAnchors grant_anchors() const;
};

struct VerifyResult {
  bool ok = false;
  std::vector<std::string> reasons;
  explicit operator bool() const noexcept { return ok; }
};

// Chain signatures up to trust_anchor, the one-CN naming rule at each proxy
// level, validity windows containing now, and every embedded grant.
VerifyResult verify_proxy(const ProxyCredential& p, const crypto::Certificate& trust_anchor, Timestamp now,
                          const GrantAnchors& grant_anchors = {});

// Reads a PEM bundle (proxy cert, proxy key, end-entity cert) back into a ProxyCredential.
ProxyCredential load_proxy(const fs::path& bundle);

class ProxyFactory {
 public:
  ProxyFactory(ProxyFactoryConfig config, const Clock& clock);

  // Throws CredentialExpired, UnknownVo, AttributeDenied, StorageFailed.
  // vos entries are VO names ("life") or FQANs ("/life/Role=x").
  ProxyCredential new_proxy(const Credential& credential, const std::vector<std::string>& vos = {},
                            std::optional<Duration> lifetime = {},
                            std::optional<fs::path> output = std::nullopt) const;

  struct Built {
    ProxyCredential credential;  // proxy_path left empty
    std::string bundle_pem;
  };
  // Same as new_proxy without touching the filesystem.
  Built create(const Credential& credential, const std::vector<std::string>& vos = {},
               std::optional<Duration> lifetime = {}) const;

  VerifyResult verify(const ProxyCredential& p, const crypto::Certificate& trust_anchor) const {
    return verify_proxy(p, trust_anchor, clock_.now(), config_.grant_anchors());
  }

  const ProxyFactoryConfig& config() const noexcept { return config_; }

 private:
  ProxyFactoryConfig config_;
  const Clock& clock_;
};

}  // namespace gridcert::proxy
