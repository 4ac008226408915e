#pragma once

// Simulated SLCS online CA: assertion login yields a DN and a single-use
// authorization token; the token later authorizes signing of one CSR.

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include "gridcert/crypto.hpp"
#include "gridcert/model.hpp"

namespace gridcert::ca {

struct CaConfig {
  std::string country = "CH";
  std::string federation = "SimFed";
  std::string ca_common_name = "SimFed SLCS CA";
  Duration token_validity{300};
  // Applied when checking assertion expiry; the CA never adds skew to what it issues.
  Duration clock_skew{60};
  CertificateConstraints constraints;
  int ca_key_bits = 2048;
  Duration ca_validity{Duration{10LL * 365 * 86'400}};
};

class CertificateAuthority {
 public:
  CertificateAuthority(CaConfig config, Timestamp now);

  void trust_idp(std::string issuer, crypto::PublicKey key);

  // "/C=<country>/O=<federation>/CN=<assertion subject>"
  SubjectDn map_dn(const Assertion& a) const;

  // Throws InvalidAssertion or ExpiredAssertion.
  SlcsLoginResponse login(const Assertion& delegated, Timestamp now);

  // Returns the signed certificate in PEM. Throws InvalidToken, DnMismatch,
  // WeakKey or IssuanceFailed (malformed request). The token is consumed only
  // on success.
  std::string sign_csr(std::string_view csr_pem, std::string_view auth_token, Duration requested_lifetime,
                       Timestamp now);

  const crypto::Certificate& certificate() const noexcept { return ca_cert_; }
  std::string certificate_pem() const { return ca_cert_.to_pem(); }
  const CaConfig& config() const noexcept { return config_; }

  std::size_t outstanding_tokens() const;
  std::uint64_t issued_count() const noexcept { return issued_.load(); }

 private:
  struct TokenGrant {
    SubjectDn dn;
    Timestamp expires{};
  };

  CaConfig config_;
  crypto::PrivateKey ca_key_;
  crypto::Certificate ca_cert_;
  std::atomic<std::uint64_t> issued_{0};

  mutable std::mutex mu_;
  std::uint64_t serial_counter_ = 1;  // serial 1 is the CA certificate itself
  std::map<std::string, crypto::PublicKey, std::less<>> trusted_idps_;
  std::map<std::string, TokenGrant, std::less<>> tokens_;
};

}  // namespace gridcert::ca
