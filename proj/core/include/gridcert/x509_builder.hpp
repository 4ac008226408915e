#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gridcert/crypto.hpp"

namespace gridcert::crypto {

// Accumulates X.509v3 fields and signs with SHA-256. Extensions given in
// OpenSSL config syntax are resolved at sign() time so that key identifiers
// can reference the issuer.
class CertificateBuilder {
 public:
  CertificateBuilder& serial(std::uint64_t value);
  CertificateBuilder& subject(const SubjectDn& dn);
  CertificateBuilder& issuer(const SubjectDn& dn);
  CertificateBuilder& validity(Timestamp not_before, Timestamp not_after);
  CertificateBuilder& public_key(const PublicKey& key);
  // e.g. extension(NID_basic_constraints, "critical,CA:FALSE")
  CertificateBuilder& extension(int nid, std::string value);
  // Opaque DER content under an arbitrary OID.
  CertificateBuilder& raw_extension(std::string oid, bool critical, std::string der);

  // issuer_cert == nullptr means self-signed.
  Certificate sign(const PrivateKey& signing_key, const Certificate* issuer_cert = nullptr) const;

 private:
  std::uint64_t serial_ = 1;
  SubjectDn subject_;
  SubjectDn issuer_;
  Timestamp not_before_{};
  Timestamp not_after_{};
  PublicKey public_key_;
  std::vector<std::pair<int, std::string>> extensions_;
  struct Raw {
    std::string oid;
    bool critical;
    std::string der;
  };
  std::vector<Raw> raw_extensions_;
};

// Builds a PKCS#10 request signed with SHA-256.
CertificateRequest build_request(const PrivateKey& key, const SubjectDn& subject);

// DER OCTET STRING wrapping; handy for opaque extension payloads.
std::string der_octet_string(std::string_view content);
// Inverse of der_octet_string. Throws CryptoFailure.
std::string der_octet_string_content(std::string_view der);

}  // namespace gridcert::crypto
