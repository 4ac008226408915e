#pragma once

// Value types shared by every module. Nothing in here performs I/O.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridcert/clock.hpp"

namespace gridcert {

// Hard ceiling on SLCS certificate lifetime.
inline constexpr Duration kMaxCertificateLifetime{1'000'000};
// Identity-provider defaults.
inline constexpr Duration kDefaultAssertionValidity{300};
inline constexpr Duration kDefaultSessionValidity{28'800};

struct Rdn {
  std::string attribute;
  std::string value;

  bool operator==(const Rdn&) const = default;
};

// Ordered subject distinguished name. Canonical text form is the
// slash-separated rendering "/C=CH/O=Example/CN=Alice"; '/' and '\' inside
// values are backslash-escaped so that parsing is lossless.
class SubjectDn {
 public:
  SubjectDn() = default;
  explicit SubjectDn(std::vector<Rdn> rdns);

  static SubjectDn parse(std::string_view canonical);

  const std::vector<Rdn>& rdns() const noexcept { return rdns_; }
  bool empty() const noexcept { return rdns_.empty(); }
  std::string str() const;

  // Proxy naming: issuer DN plus exactly one trailing CN.
  SubjectDn with_appended_cn(std::string value) const;
  // True iff *this == base + one CN component.
  bool extends_by_one_cn(const SubjectDn& base) const;

  friend bool operator==(const SubjectDn& a, const SubjectDn& b) { return a.str() == b.str(); }

 private:
  std::vector<Rdn> rdns_;
};

std::string canonicalize_dn(const std::vector<Rdn>& rdns);
inline std::string canonicalize_dn(const SubjectDn& dn) { return canonicalize_dn(dn.rdns()); }

// VOMS fully-qualified attribute name: /vo[/group...][/Role=r][/Capability=c]
struct Fqan {
  std::string vo;
  std::vector<std::string> groups;
  std::optional<std::string> role;
  std::optional<std::string> capability;

  static Fqan parse(std::string_view text);
  // Accepts either a bare VO name ("life") or a full FQAN ("/life/Role=x").
  static Fqan from_request(std::string_view text);
  std::string str() const;

  bool operator==(const Fqan&) const = default;
};

// Simplified signed SSO assertion. The signature is an Ed25519 signature
// (base64) over signing_input().
struct Assertion {
  std::string id;
  std::string subject;
  std::string issuer;
  Timestamp issued_at{};
  Duration validity{kDefaultAssertionValidity};
  std::map<std::string, std::string> attributes;
  std::string signature;

  std::string signing_input() const;
  bool expired(Timestamp now) const noexcept { return now > issued_at + validity; }
};

bool assertion_expired(const Assertion& a, Timestamp now) noexcept;

std::string serialize_assertion(const Assertion& a);
Assertion parse_assertion(std::string_view text);

enum class KeyUsage : std::uint32_t {
  None = 0,
  DigitalSignature = 1u << 0,
  KeyEncipherment = 1u << 1,
  DataEncipherment = 1u << 2,
  ClientAuth = 1u << 3,
};

constexpr KeyUsage operator|(KeyUsage a, KeyUsage b) noexcept {
  return static_cast<KeyUsage>(static_cast<std::uint32_t>(a) | static_cast<std::uint32_t>(b));
}
constexpr bool has_usage(KeyUsage set, KeyUsage flag) noexcept {
  return (static_cast<std::uint32_t>(set) & static_cast<std::uint32_t>(flag)) != 0;
}

struct CertificateConstraints {
  Duration max_lifetime{kMaxCertificateLifetime};
  int key_size_min = 2048;
  KeyUsage allowed_key_usages =
      KeyUsage::DigitalSignature | KeyUsage::KeyEncipherment | KeyUsage::ClientAuth;

  // Throws Errc::InvalidConfig when max_lifetime exceeds the hard ceiling.
  void validate() const;
  bool operator==(const CertificateConstraints&) const = default;
};

struct SlcsLoginResponse {
  SubjectDn dn;
  std::string auth_token;
  CertificateConstraints constraints;
};

std::string serialize_login_response(const SlcsLoginResponse& r);
SlcsLoginResponse parse_login_response(std::string_view text);

struct Credential {
  std::filesystem::path certificate_path;
  std::filesystem::path private_key_path;
  std::string passphrase;
  SubjectDn subject;
  Timestamp not_before{};
  Timestamp not_after{};
};

struct ProxyCredential {
  // PEM certificates, proxy first and end-entity last.
  std::vector<std::string> chain;
  // PEM bundle holding proxy cert, proxy key and end-entity cert.
  std::filesystem::path proxy_path;
  std::vector<Fqan> fqans;
  Timestamp not_after{};
};

}  // namespace gridcert
