#pragma once

// Simulated VO attribute issuer and the signed attribute grant it hands out.

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridcert/clock.hpp"
#include "gridcert/crypto.hpp"
#include "gridcert/model.hpp"

namespace gridcert::voms {

// Non-critical extension carrying the JSON-encoded list of signed grants.
inline constexpr std::string_view kGrantExtensionOid = "1.3.6.1.3.5823.1.1";
inline constexpr Duration kMaxGrantLifetime{86'400};

struct AttributeGrant {
  SubjectDn holder;
  std::string issuer;
  std::vector<Fqan> fqans;
  Timestamp not_before{};
  Timestamp not_after{};
  std::string signature;  // base64 Ed25519 over payload()

  // Canonical JSON of every field except the signature.
  std::string payload() const;
  bool verify(const crypto::PublicKey& issuer_key) const;
  bool valid_at(Timestamp now) const noexcept { return not_before <= now && now <= not_after; }
};

std::string serialize_grant(const AttributeGrant& g);
AttributeGrant parse_grant(std::string_view json);

// Extension payload: [{"payload": <base64>, "signature": <base64>}, ...].
std::string encode_grants(const std::vector<AttributeGrant>& grants);
std::vector<AttributeGrant> decode_grants(std::string_view text);

class VomsServer {
 public:
  VomsServer(std::string vo, std::string issuer_name);

  const std::string& vo() const noexcept { return vo_; }
  const std::string& issuer_name() const noexcept { return issuer_; }
  const crypto::PublicKey& public_key() const noexcept { return public_key_; }

  // Registers member with the given FQANs; the bare VO group is always held.
  void add_member(const SubjectDn& member, const std::vector<Fqan>& fqans = {});

  // Members are matched on the holder itself or, for proxy subjects, on the
  // DN one CN shorter. Throws AttributeDenied for non-members and for
  // requests naming another VO.
  AttributeGrant grant(const SubjectDn& holder, const std::vector<Fqan>& requested, Duration lifetime,
                       Timestamp now) const;

 private:
  std::string vo_;
  std::string issuer_;
  crypto::PrivateKey key_;
  crypto::PublicKey public_key_;
  mutable std::mutex mu_;
  std::map<std::string, std::set<std::string>> members_;  // DN -> FQAN strings
};

// Client for POST <endpoint>. Any failure, transport included, surfaces as
// AttributeDenied so that callers never fall back to a plain proxy.
AttributeGrant voms_fetch(std::string_view endpoint, const SubjectDn& holder, const std::vector<Fqan>& requested,
                          Duration lifetime);

}  // namespace gridcert::voms
