#include "gridcert/ca.hpp"

#include <algorithm>

#include <openssl/objects.h>

#include "gridcert/error.hpp"
#include "gridcert/sso.hpp"
#include "gridcert/x509_builder.hpp"

namespace gridcert::ca {
namespace {

std::string key_usage_ext(KeyUsage usages) {
  std::string out = "critical";
  if (has_usage(usages, KeyUsage::DigitalSignature)) out += ",digitalSignature";
  if (has_usage(usages, KeyUsage::KeyEncipherment)) out += ",keyEncipherment";
  if (has_usage(usages, KeyUsage::DataEncipherment)) out += ",dataEncipherment";
  return out;
}

}  // namespace

CertificateAuthority::CertificateAuthority(CaConfig config, Timestamp now)
    : config_(std::move(config)), ca_key_(crypto::PrivateKey::generate_rsa(config_.ca_key_bits)) {
  config_.constraints.validate();
  SubjectDn ca_dn({{"C", config_.country}, {"O", config_.federation}, {"CN", config_.ca_common_name}});
  ca_cert_ = crypto::CertificateBuilder{}
                 .serial(1)
                 .subject(ca_dn)
                 .validity(now, now + config_.ca_validity)
                 .public_key(ca_key_.public_key())
                 .extension(NID_basic_constraints, "critical,CA:TRUE")
                 .extension(NID_key_usage, "critical,keyCertSign,cRLSign")
                 .extension(NID_subject_key_identifier, "hash")
                 .sign(ca_key_);
}

void CertificateAuthority::trust_idp(std::string issuer, crypto::PublicKey key) {
  std::lock_guard lock(mu_);
  trusted_idps_.insert_or_assign(std::move(issuer), std::move(key));
}

SubjectDn CertificateAuthority::map_dn(const Assertion& a) const {
  return SubjectDn({{"C", config_.country}, {"O", config_.federation}, {"CN", a.subject}});
}

SlcsLoginResponse CertificateAuthority::login(const Assertion& delegated, Timestamp now) {
  crypto::PublicKey idp_key;
  {
    std::lock_guard lock(mu_);
    auto it = trusted_idps_.find(delegated.issuer);
    if (it == trusted_idps_.end()) throw Error(Errc::InvalidAssertion, "untrusted issuer " + delegated.issuer);
    idp_key = it->second;
  }
  if (!sso::verify_assertion(delegated, idp_key)) throw Error(Errc::InvalidAssertion, "bad signature");
  if (delegated.issued_at > now + config_.clock_skew) {
    throw Error(Errc::InvalidAssertion, "assertion issued in the future");
  }
  if (now > delegated.issued_at + delegated.validity + config_.clock_skew) {
    throw Error(Errc::ExpiredAssertion, "assertion " + delegated.id + " expired");
  }

  SlcsLoginResponse r{map_dn(delegated), crypto::random_token(32), config_.constraints};
  std::lock_guard lock(mu_);
  // Expired tokens are swept lazily here.
  std::erase_if(tokens_, [now](const auto& kv) { return now > kv.second.expires; });
  tokens_.emplace(r.auth_token, TokenGrant{r.dn, now + config_.token_validity});
  return r;
}

std::string CertificateAuthority::sign_csr(std::string_view csr_pem, std::string_view auth_token,
                                           Duration requested_lifetime, Timestamp now) {
  crypto::CertificateRequest csr;
  try {
    csr = crypto::CertificateRequest::from_pem(csr_pem);
  } catch (const Error&) {
    throw Error(Errc::IssuanceFailed, "unparseable CSR");
  }
  if (!csr.self_signature_valid()) throw Error(Errc::IssuanceFailed, "CSR self-signature invalid");
  if (requested_lifetime <= Duration::zero()) throw Error(Errc::IssuanceFailed, "non-positive lifetime");

  const SubjectDn csr_subject = csr.subject();
  const crypto::PublicKey key = csr.public_key();

  SubjectDn dn;
  std::uint64_t serial = 0;
  {
    // Check-and-remove is one critical section: exactly one caller wins a token.
    std::lock_guard lock(mu_);
    auto it = tokens_.find(auth_token);
    if (it == tokens_.end()) throw Error(Errc::InvalidToken, "unknown or already used token");
    if (now > it->second.expires) {
      tokens_.erase(it);
      throw Error(Errc::InvalidToken, "token expired");
    }
    if (!(csr_subject == it->second.dn)) {
      throw Error(Errc::DnMismatch, csr_subject.str() + " != " + it->second.dn.str());
    }
    if (key.bits() < config_.constraints.key_size_min) {
      throw Error(Errc::WeakKey, std::to_string(key.bits()) + " bits < " +
                                     std::to_string(config_.constraints.key_size_min));
    }
    dn = it->second.dn;
    tokens_.erase(it);
    serial = ++serial_counter_;
  }

  const Duration lifetime = std::min(requested_lifetime, config_.constraints.max_lifetime);
  crypto::CertificateBuilder b;
  b.serial(serial)
      .subject(dn)
      .validity(now, now + lifetime)
      .public_key(key)
      .extension(NID_basic_constraints, "critical,CA:FALSE")
      .extension(NID_key_usage, key_usage_ext(config_.constraints.allowed_key_usages))
      .extension(NID_subject_key_identifier, "hash")
      .extension(NID_authority_key_identifier, "keyid:always");
  if (has_usage(config_.constraints.allowed_key_usages, KeyUsage::ClientAuth)) {
    b.extension(NID_ext_key_usage, "clientAuth");
  }
  auto cert = b.sign(ca_key_, &ca_cert_);
  ++issued_;
  return cert.to_pem();
}

std::size_t CertificateAuthority::outstanding_tokens() const {
  std::lock_guard lock(mu_);
  return tokens_.size();
}

}  // namespace gridcert::ca
